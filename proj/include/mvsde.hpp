#pragma once

#include "mvsde/common.hpp"
#include "mvsde/stats.hpp"
#include "mvsde/rng.hpp"
#include "mvsde/partition.hpp"
#include "mvsde/measure.hpp"
#include "mvsde/catalog.hpp"
#include "mvsde/test_function.hpp"
#include "mvsde/grid_function.hpp"
#include "mvsde/coefficient.hpp"
#include "mvsde/driver.hpp"
#include "mvsde/solver.hpp"
#include "mvsde/ibp.hpp"
#include "mvsde/verification.hpp"
#include "mvsde/presets.hpp"
#include "mvsde/io.hpp"
#include "mvsde/config.hpp"
#include "mvsde/runner.hpp"
