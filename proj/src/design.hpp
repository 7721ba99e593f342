#pragma once

// Space-filling design helpers.

#include "common.hpp"

namespace kohdesign::design {

// Latin hypercube on [0,1]^d: one point per stratum per column, with
// independent column permutations and uniform placement within each stratum.
MatrixXd lhs(int n, int d, Rng& rng);

}  // namespace kohdesign::design
