#pragma once

#include "flowcast/capture.hpp"
#include "flowcast/config.hpp"
#include "flowcast/dataset.hpp"
#include "flowcast/error.hpp"
#include "flowcast/experiment.hpp"
#include "flowcast/flow.hpp"
#include "flowcast/flow_table.hpp"
#include "flowcast/metrics.hpp"
#include "flowcast/models/model.hpp"
#include "flowcast/packet.hpp"
#include "flowcast/report.hpp"
#include "flowcast/rng.hpp"
#include "flowcast/synth.hpp"
