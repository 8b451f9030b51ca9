#pragma once

#include "params.hpp"
#include "rng.hpp"
#include "projection.hpp"
#include "economy.hpp"
#include "solver.hpp"
#include "findex.hpp"
#include "dynamics.hpp"
#include "analytics.hpp"
#include "config.hpp"
#include "harness.hpp"
