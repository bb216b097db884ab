#pragma once

#include "sskf/benchmarks.hpp"
#include "sskf/csv.hpp"
#include "sskf/errors.hpp"
#include "sskf/experiment.hpp"
#include "sskf/filter.hpp"
#include "sskf/glm.hpp"
#include "sskf/knockoffs.hpp"
#include "sskf/metrics.hpp"
#include "sskf/partition.hpp"
#include "sskf/rng.hpp"
#include "sskf/simgen.hpp"
#include "sskf/stats.hpp"
#include "sskf/subgroup.hpp"
#include "sskf/tabular.hpp"

namespace sskf {
inline constexpr const char* version = "0.1.0";
}
