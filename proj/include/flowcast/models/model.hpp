#pragma once

// Type-erased trained model and its versioned binary container.
//
// Layout (little-endian):
//   magic        8 bytes  "FLWCAST\x01"
//   version      u32      kModelFormatVersion
//   kind         u32      1=cart 2=forest 3=gbt 4=mlp
//   width        u64      input row width
//   config       kind-specific echo of the training configuration
//   parameters   kind-specific
// A tree is u64 node count followed by nodes {i32 feature, f64 threshold, u32 left, u32 right,
// f64 value}. Doubles are stored as their IEEE-754 bit patterns, so loading is bit-exact.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "flowcast/models/cart.hpp"
#include "flowcast/models/forest.hpp"
#include "flowcast/models/gbt.hpp"
#include "flowcast/models/mlp.hpp"

namespace flowcast {

using Model = std::variant<CartModel, ForestModel, GbtModel, MlpModel>;

enum class ModelKind : std::uint32_t { cart = 1, forest = 2, gbt = 3, mlp = 4 };

inline ModelKind kind_of(const Model& m) { return static_cast<ModelKind>(m.index() + 1); }

inline std::string_view model_kind_name(ModelKind k) {
    switch (k) {
        case ModelKind::cart: return "DT";
        case ModelKind::forest: return "RF";
        case ModelKind::gbt: return "GBT";
        case ModelKind::mlp: return "MLP";
    }
    return "?";
}

inline ModelKind parse_model_kind(std::string_view s) {
    if (s == "DT" || s == "dt" || s == "cart" || s == "CART") return ModelKind::cart;
    if (s == "RF" || s == "rf" || s == "forest") return ModelKind::forest;
    if (s == "GBT" || s == "gbt" || s == "XGB" || s == "xgb" || s == "xgboost") return ModelKind::gbt;
    if (s == "MLP" || s == "mlp" || s == "DNN" || s == "dnn") return ModelKind::mlp;
    throw Error("unknown model kind '" + std::string(s) + "' (expected DT, RF, GBT or MLP)");
}

inline std::size_t model_width(const Model& m) {
    return std::visit([](const auto& x) { return x.width(); }, m);
}

/// One prediction per row of the row-major matrix `x`. Throws on a width mismatch.
inline std::vector<double> predict(const Model& model, std::span<const double> x, std::size_t cols) {
    if (cols != model_width(model)) {
        throw Error("input width " + std::to_string(cols) + " does not match model width " +
                    std::to_string(model_width(model)));
    }
    const std::size_t rows = cols == 0 ? 0 : x.size() / cols;
    if (const auto* mlp = std::get_if<MlpModel>(&model)) return mlp->predict_rows(x, cols);
    std::vector<double> out(rows);
    std::visit([&](const auto& m) {
        for (std::size_t r = 0; r < rows; ++r) out[r] = m.predict(x.subspan(r * cols, cols));
    }, model);
    return out;
}

inline std::vector<double> predict(const Model& model, const EncodedDataset& ds) {
    return predict(model, ds.features, ds.width);
}

// ---------------------------------------------------------------------------------------------

inline constexpr std::array<char, 8> kModelMagic = {'F', 'L', 'W', 'C', 'A', 'S', 'T', '\x01'};
inline constexpr std::uint32_t kModelFormatVersion = 1;

namespace detail {

class BinaryWriter {
public:
    explicit BinaryWriter(std::ostream& out) : out_(out) {}

    template <class T>
    void put(T v) {
        static_assert(std::is_integral_v<T>);
        using U = std::make_unsigned_t<T>;
        auto u = static_cast<U>(v);
        for (std::size_t i = 0; i < sizeof(T); ++i) out_.put(static_cast<char>((u >> (8 * i)) & 0xff));
    }
    void real(double v) { put(std::bit_cast<std::uint64_t>(v)); }
    void size(std::size_t v) { put(static_cast<std::uint64_t>(v)); }
    void bytes(std::span<const char> b) { out_.write(b.data(), static_cast<std::streamsize>(b.size())); }

private:
    std::ostream& out_;
};

class BinaryReader {
public:
    explicit BinaryReader(std::istream& in) : in_(in) {}

    template <class T>
    T get() {
        static_assert(std::is_integral_v<T>);
        using U = std::make_unsigned_t<T>;
        U u = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            const int c = in_.get();
            if (c == std::char_traits<char>::eof()) throw FormatError("model file is truncated");
            u |= static_cast<U>(static_cast<U>(static_cast<unsigned char>(c)) << (8 * i));
        }
        return static_cast<T>(u);
    }
    double real() { return std::bit_cast<double>(get<std::uint64_t>()); }
    std::size_t size(std::size_t limit = std::size_t{1} << 32) {
        const auto v = get<std::uint64_t>();
        if (v > limit) throw FormatError("model file declares an implausible count (" + std::to_string(v) + ")");
        return static_cast<std::size_t>(v);
    }
    void bytes(std::span<char> b) {
        if (!in_.read(b.data(), static_cast<std::streamsize>(b.size()))) throw FormatError("model file is truncated");
    }
    bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

private:
    std::istream& in_;
};

inline void write_tree(BinaryWriter& w, const RegressionTree& t) {
    w.size(t.nodes().size());
    for (const auto& n : t.nodes()) {
        w.put(n.feature);
        w.real(n.threshold);
        w.put(n.left);
        w.put(n.right);
        w.real(n.value);
    }
}

inline RegressionTree read_tree(BinaryReader& r, std::size_t width) {
    const auto count = r.size();
    if (count == 0) throw FormatError("tree with no nodes");
    std::vector<TreeNode> nodes(count);
    for (auto& n : nodes) {
        n.feature = r.get<std::int32_t>();
        n.threshold = r.real();
        n.left = r.get<std::uint32_t>();
        n.right = r.get<std::uint32_t>();
        n.value = r.real();
    }
    for (std::size_t i = 0; i < count; ++i) {
        const auto& n = nodes[i];
        if (n.is_leaf()) continue;
        if (static_cast<std::size_t>(n.feature) >= width || n.left <= i || n.right <= i || n.left >= count || n.right >= count) {
            throw FormatError("tree node " + std::to_string(i) + " has invalid links");
        }
    }
    return RegressionTree(std::move(nodes), width);
}

inline void write_matrix(BinaryWriter& w, const Eigen::MatrixXd& m) {
    w.size(static_cast<std::size_t>(m.rows()));
    w.size(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) w.real(m(i, j));
    }
}

inline Eigen::MatrixXd read_matrix(BinaryReader& r) {
    const auto rows = r.size(1 << 24);
    const auto cols = r.size(1 << 24);
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = r.real();
    }
    return m;
}

inline void write_reals(BinaryWriter& w, std::span<const double> v) {
    w.size(v.size());
    for (double x : v) w.real(x);
}

inline std::vector<double> read_reals(BinaryReader& r) {
    std::vector<double> v(r.size(1 << 28));
    for (auto& x : v) x = r.real();
    return v;
}

}  // namespace detail

inline void write_model(std::ostream& out, const Model& model) {
    detail::BinaryWriter w(out);
    w.bytes(kModelMagic);
    w.put(kModelFormatVersion);
    w.put(static_cast<std::uint32_t>(kind_of(model)));
    w.size(model_width(model));

    std::visit([&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, CartModel>) {
            w.size(m.config.max_depth);
            w.size(m.config.min_samples_leaf);
            w.real(m.config.min_variance_reduction);
            detail::write_tree(w, m.tree);
        } else if constexpr (std::is_same_v<T, ForestModel>) {
            w.size(m.config.n_trees);
            w.size(m.config.max_depth);
            w.size(m.config.min_samples_leaf);
            w.put<std::uint8_t>(m.config.bootstrap ? 1 : 0);
            w.real(m.config.features_per_split);
            w.put(m.config.seed);
            w.size(m.trees.size());
            for (const auto& t : m.trees) detail::write_tree(w, t);
        } else if constexpr (std::is_same_v<T, GbtModel>) {
            w.size(m.config.n_rounds);
            w.size(m.config.max_depth);
            w.real(m.config.learning_rate);
            w.real(m.config.alpha);
            w.real(m.config.lambda);
            w.real(m.config.colsample_bytree);
            w.size(m.config.min_samples_leaf);
            w.put(m.config.seed);
            w.real(m.base_score);
            w.size(m.trees.size());
            for (const auto& t : m.trees) detail::write_tree(w, t);
        } else {
            w.size(m.config.hidden.size());
            for (auto h : m.config.hidden) w.size(h);
            w.real(m.config.lr_min);
            w.real(m.config.lr_max);
            w.real(m.config.step_size);
            w.size(m.config.batch_size);
            w.size(m.config.epochs);
            w.put(m.config.seed);
            detail::write_reals(w, m.inputs.mean);
            detail::write_reals(w, m.inputs.scale);
            detail::write_reals(w, m.label.mean);
            detail::write_reals(w, m.label.scale);
            w.size(m.network.layers().size());
            for (const auto& layer : m.network.layers()) {
                detail::write_matrix(w, layer.weight);
                detail::write_matrix(w, layer.bias);
            }
        }
    }, model);
}

inline Model read_model(std::istream& in) {
    detail::BinaryReader r(in);
    std::array<char, 8> magic{};
    try {
        r.bytes(magic);
    } catch (const FormatError&) {
        throw FormatError("not a flowcast model file (too short for magic bytes)");
    }
    if (magic != kModelMagic) throw FormatError("not a flowcast model file (bad magic bytes)");
    const auto version = r.get<std::uint32_t>();
    if (version != kModelFormatVersion) {
        throw FormatError("unsupported model format version " + std::to_string(version) + " (expected " +
                          std::to_string(kModelFormatVersion) + ")");
    }
    const auto kind = r.get<std::uint32_t>();
    const auto width = r.size();

    Model model;
    switch (static_cast<ModelKind>(kind)) {
        case ModelKind::cart: {
            CartModel m;
            m.config.max_depth = r.size();
            m.config.min_samples_leaf = r.size();
            m.config.min_variance_reduction = r.real();
            m.tree = detail::read_tree(r, width);
            model = std::move(m);
            break;
        }
        case ModelKind::forest: {
            ForestModel m;
            m.config.n_trees = r.size();
            m.config.max_depth = r.size();
            m.config.min_samples_leaf = r.size();
            m.config.bootstrap = r.get<std::uint8_t>() != 0;
            m.config.features_per_split = r.real();
            m.config.seed = r.get<std::uint64_t>();
            const auto n = r.size();
            if (n == 0) throw FormatError("forest model contains no trees");
            for (std::size_t i = 0; i < n; ++i) m.trees.push_back(detail::read_tree(r, width));
            model = std::move(m);
            break;
        }
        case ModelKind::gbt: {
            GbtModel m;
            m.input_width = width;
            m.config.n_rounds = r.size();
            m.config.max_depth = r.size();
            m.config.learning_rate = r.real();
            m.config.alpha = r.real();
            m.config.lambda = r.real();
            m.config.colsample_bytree = r.real();
            m.config.min_samples_leaf = r.size();
            m.config.seed = r.get<std::uint64_t>();
            m.base_score = r.real();
            m.config.base_score = m.base_score;
            const auto n = r.size();
            for (std::size_t i = 0; i < n; ++i) m.trees.push_back(detail::read_tree(r, width));
            model = std::move(m);
            break;
        }
        case ModelKind::mlp: {
            MlpModel m;
            m.config.hidden.resize(r.size(64));
            for (auto& h : m.config.hidden) h = r.size();
            m.config.lr_min = r.real();
            m.config.lr_max = r.real();
            m.config.step_size = r.real();
            m.config.batch_size = r.size();
            m.config.epochs = r.size();
            m.config.seed = r.get<std::uint64_t>();
            m.inputs.mean = detail::read_reals(r);
            m.inputs.scale = detail::read_reals(r);
            m.label.mean = detail::read_reals(r);
            m.label.scale = detail::read_reals(r);
            std::vector<DenseLayer> layers(r.size(64));
            for (auto& layer : layers) {
                layer.weight = detail::read_matrix(r);
                const Eigen::MatrixXd bias = detail::read_matrix(r);
                if (bias.cols() != 1 || bias.rows() != layer.weight.rows()) throw FormatError("MLP bias shape mismatch");
                layer.bias = bias.col(0);
            }
            if (layers.empty() || m.inputs.mean.size() != width || m.inputs.scale.size() != width ||
                m.label.mean.size() != 1 || m.label.scale.size() != 1 ||
                static_cast<std::size_t>(layers.front().weight.cols()) != width) {
                throw FormatError("MLP parameters are inconsistent with the declared width");
            }
            m.network = Network(std::move(layers));
            model = std::move(m);
            break;
        }
        default:
            throw FormatError("unknown model kind tag " + std::to_string(kind));
    }
    if (!r.at_end()) throw FormatError("trailing bytes after model parameters");
    return model;
}

inline void save_model(const std::string& path, const Model& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write model '" + path + "'");
    write_model(out, model);
    if (!out) throw Error("write failed for '" + path + "'");
}

inline Model load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open model '" + path + "'");
    return read_model(in);
}

}  // namespace flowcast
