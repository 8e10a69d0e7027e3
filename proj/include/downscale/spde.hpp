#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "downscale/geometry.hpp"
#include "downscale/sparse.hpp"

namespace downscale {

// P1 finite-element matrices on a mesh. C is mass-lumped (diagonal), G is
// the stiffness matrix.
struct FemMatrices {
  Eigen::VectorXd C_lumped;
  SparseSymmetricMatrix G;
};

// Matern (nu = 1, d = 2) parameters. The range convention is the distance at
// which correlation drops to ~0.1, i.e. range = sqrt(8)/kappa; sigma^2 =
// 1/(4 pi kappa^2 tau^2).
struct MaternParams {
  double range;
  double sigma;
  double kappa;
  double tau;

  static MaternParams fromRangeSigma(double range, double sigma);
  static MaternParams fromKappaTau(double kappa, double tau);
};

FemMatrices assembleFem(const Mesh& mesh);

// Q = tau^2 (kappa^4 C + 2 kappa^2 G + G C^-1 G), the alpha = 2 GMRF
// precision. SPD for any positive (kappa, tau) on a valid mesh.
SparseSymmetricMatrix precisionAlpha2(const FemMatrices& fem,
                                      const MaternParams& params);

// kappa*d * K_1(kappa*d) for d > 0, 1 at d = 0; saturates to 0 past
// kappa*d = 700.
double maternCorrelation(double distance, const MaternParams& params);

// Draws with precision Q via sparse Cholesky back-substitution; one column
// per sample. Deterministic per seed.
Eigen::MatrixXd sampleGmrf(const SparseSymmetricMatrix& Q, int n_samples,
                           std::uint64_t seed);

}  // namespace downscale
