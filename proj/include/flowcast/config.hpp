#pragma once

// Flat key-value configuration files: `key = value` per line, '#' starts a comment.

#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <string>

#include "flowcast/error.hpp"
#include "flowcast/text.hpp"

namespace flowcast {

class KeyValueConfig {
public:
    /// Keys are normalized so that `mean_rate` and `mean-rate` are the same key.
    static std::string normalize(std::string_view key) {
        std::string k(text::trim(key));
        for (auto& c : k) {
            if (c == '_') c = '-';
        }
        while (!k.empty() && k.front() == '-') k.erase(k.begin());
        return k;
    }

    static KeyValueConfig parse(std::istream& in) {
        KeyValueConfig cfg;
        std::string line;
        std::size_t n = 0;
        while (std::getline(in, line)) {
            ++n;
            if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            const auto body = text::trim(line);
            if (body.empty() || body.front() == '[') continue;
            const auto eq = body.find('=');
            if (eq == std::string_view::npos) throw Error("config line " + std::to_string(n) + ": expected key = value");
            cfg.values_[normalize(body.substr(0, eq))] = std::string(text::trim(body.substr(eq + 1)));
        }
        return cfg;
    }

    static KeyValueConfig load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw Error("cannot open config '" + path + "'");
        return parse(in);
    }

    std::optional<std::string> get(std::string_view key) const {
        const auto it = values_.find(normalize(key));
        if (it == values_.end()) return std::nullopt;
        return it->second;
    }

    template <class T>
    std::optional<T> number(std::string_view key) const {
        const auto v = get(key);
        if (!v) return std::nullopt;
        const auto parsed = text::parse_number<T>(*v);
        if (!parsed) throw Error("config key '" + std::string(key) + "': not a number: '" + *v + "'");
        return parsed;
    }

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

}  // namespace flowcast
