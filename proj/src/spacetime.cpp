#include "downscale/spacetime.hpp"

#include <stdexcept>
#include <vector>

namespace downscale {

SparseSymmetricMatrix ar1Precision(const Ar1Params& params) {
  if (!(std::abs(params.rho) < 1.0))
    throw std::invalid_argument("ar1_precision: |rho| must be < 1");
  if (params.n_time < 1)
    throw std::invalid_argument("ar1_precision: n_time must be >= 1");
  const int n = params.n_time;
  const double rho = params.rho;
  std::vector<Eigen::Triplet<double>> trips;
  if (n == 1) {
    trips.emplace_back(0, 0, 1.0);
    return SparseSymmetricMatrix::fromTriplets(1, trips);
  }
  const double c = 1.0 / (1.0 - rho * rho);
  for (int i = 0; i < n; ++i) {
    const double d = (i == 0 || i == n - 1) ? 1.0 : 1.0 + rho * rho;
    trips.emplace_back(i, i, d * c);
    if (i + 1 < n) trips.emplace_back(i + 1, i, -rho * c);
  }
  return SparseSymmetricMatrix::fromTriplets(n, trips);
}

SpaceTimeField spacetimePrecision(const MaternParams& matern,
                                  const Ar1Params& ar1,
                                  const FemMatrices& fem) {
  SpaceTimeField f;
  f.matern = matern;
  f.ar1 = ar1;
  const SparseSymmetricMatrix Q_space = precisionAlpha2(fem, matern);
  if (ar1.n_time == 1) {
    if (!(std::abs(ar1.rho) < 1.0))
      throw std::invalid_argument("spacetime_precision: |rho| must be < 1");
    f.Q_joint = Q_space;
  } else {
    f.Q_joint = kronecker(ar1Precision(ar1), Q_space);
  }
  return f;
}

}  // namespace downscale
