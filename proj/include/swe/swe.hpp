#pragma once

// Umbrella header: self-weighted ensembles of from-scratch convolutional
// classifiers, plus the majority-vote baseline and the Monte Carlo
// comparison harness.

#include "swe/checkpoint.hpp"
#include "swe/dataset.hpp"
#include "swe/ensemble.hpp"
#include "swe/errors.hpp"
#include "swe/experiment.hpp"
#include "swe/idx.hpp"
#include "swe/layers.hpp"
#include "swe/metrics.hpp"
#include "swe/network.hpp"
#include "swe/rng.hpp"
#include "swe/synthdata.hpp"
#include "swe/tensor.hpp"
