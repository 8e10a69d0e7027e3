#pragma once

#include "downscale/sparse.hpp"
#include "downscale/spde.hpp"

namespace downscale {

struct Ar1Params {
  double rho;
  int n_time;
};

// Separable space-time field: Q_joint = Q_ar1 (x) Q_space, time-major so
// coordinate (t, k) maps to t * n_vertices + k.
struct SpaceTimeField {
  MaternParams matern;
  Ar1Params ar1;
  SparseSymmetricMatrix Q_joint;
};

// Stationary AR(1) precision (unit marginal variance); [1] for n_time = 1.
SparseSymmetricMatrix ar1Precision(const Ar1Params& params);

SpaceTimeField spacetimePrecision(const MaternParams& matern,
                                  const Ar1Params& ar1,
                                  const FemMatrices& fem);

inline int spacetimeIndex(int t, int vertex, int n_vertices) {
  return t * n_vertices + vertex;
}

}  // namespace downscale
