#pragma once

#include "core.hpp"
#include "diagnostics.hpp"
#include "dist.hpp"
#include "linalg.hpp"
#include "sim.hpp"
#include "solver.hpp"
#include "tuning.hpp"
