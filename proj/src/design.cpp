#include "design.hpp"

#include <numeric>

namespace kohdesign::design {

MatrixXd lhs(int n, int d, Rng& rng) {
  if (n <= 0 || d <= 0) throw InvalidArgument("lhs: n and d must be positive");
  MatrixXd X(n, d);
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int j = 0; j < d; ++j) {
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm.begin(), perm.end());
    for (int i = 0; i < n; ++i) {
      X(i, j) = (perm[static_cast<std::size_t>(i)] + rng.uniform()) / n;
    }
  }
  return X;
}

}  // namespace kohdesign::design
