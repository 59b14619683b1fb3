#pragma once

// Umbrella header: streaming change point detection for multivariate
// inhomogeneous Poisson point process time series.

#include "ppcd/baselines.hpp"
#include "ppcd/calibration.hpp"
#include "ppcd/detector.hpp"
#include "ppcd/embedding.hpp"
#include "ppcd/experiment.hpp"
#include "ppcd/io.hpp"
#include "ppcd/legendre.hpp"
#include "ppcd/lowrank.hpp"
#include "ppcd/ppp_sim.hpp"
#include "ppcd/quadrature.hpp"
#include "ppcd/rng.hpp"
