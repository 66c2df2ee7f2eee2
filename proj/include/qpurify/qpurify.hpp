#ifndef QPURIFY_QPURIFY_HPP
#define QPURIFY_QPURIFY_HPP

#include "bellman.hpp"
#include "cli.hpp"
#include "config.hpp"
#include "dp_solver.hpp"
#include "errors.hpp"
#include "montecarlo.hpp"
#include "noise.hpp"
#include "sde.hpp"
#include "state.hpp"
#include "strategies.hpp"
#include "value_grid.hpp"

#endif
