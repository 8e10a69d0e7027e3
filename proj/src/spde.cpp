#include "downscale/spde.hpp"

#include <Eigen/SparseCholesky>
#include <cmath>
#include <stdexcept>
#include <string>

#include "downscale/rng.hpp"

namespace downscale {

MaternParams MaternParams::fromRangeSigma(double range, double sigma) {
  if (!(range > 0.0) || !(sigma > 0.0))
    throw std::invalid_argument("MaternParams: range and sigma must be > 0");
  MaternParams p;
  p.range = range;
  p.sigma = sigma;
  p.kappa = std::sqrt(8.0) / range;  // nu = 1
  p.tau = 1.0 / (p.kappa * sigma * std::sqrt(4.0 * M_PI));
  return p;
}

MaternParams MaternParams::fromKappaTau(double kappa, double tau) {
  if (!(kappa > 0.0) || !(tau > 0.0))
    throw std::invalid_argument("MaternParams: kappa and tau must be > 0");
  MaternParams p;
  p.kappa = kappa;
  p.tau = tau;
  p.range = std::sqrt(8.0) / kappa;
  p.sigma = 1.0 / (kappa * tau * std::sqrt(4.0 * M_PI));
  return p;
}

FemMatrices assembleFem(const Mesh& mesh) {
  const int n = mesh.numVertices();
  FemMatrices fem;
  fem.C_lumped = Eigen::VectorXd::Zero(n);
  std::vector<Eigen::Triplet<double>> gt;
  for (int t = 0; t < mesh.numTriangles(); ++t) {
    const auto& tr = mesh.triangles[t];
    const double area = mesh.triangleArea(t);
    if (area < 1e-14)
      throw std::runtime_error("assemble_fem: degenerate triangle " +
                               std::to_string(t));
    for (int i = 0; i < 3; ++i) fem.C_lumped[tr[i]] += area / 3.0;
    // local stiffness: grad phi_i = rot(edge opposite i) / (2 area)
    Point2 e[3];
    for (int i = 0; i < 3; ++i) {
      const Point2& a = mesh.vertices[tr[(i + 1) % 3]];
      const Point2& b = mesh.vertices[tr[(i + 2) % 3]];
      e[i] = {b.x - a.x, b.y - a.y};
    }
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        gt.emplace_back(tr[i], tr[j],
                        (e[i].x * e[j].x + e[i].y * e[j].y) / (4.0 * area));
  }
  Eigen::SparseMatrix<double> G(n, n);
  G.setFromTriplets(gt.begin(), gt.end());
  fem.G = SparseSymmetricMatrix(G);
  return fem;
}

SparseSymmetricMatrix precisionAlpha2(const FemMatrices& fem,
                                      const MaternParams& p) {
  if (!(p.kappa > 0.0) || !(p.tau > 0.0))
    throw std::invalid_argument("precision_alpha2: parameters must be > 0");
  const int n = static_cast<int>(fem.C_lumped.size());
  const Eigen::SparseMatrix<double> G = fem.G.full();
  Eigen::SparseMatrix<double> C(n, n), Cinv(n, n);
  C.reserve(Eigen::VectorXi::Constant(n, 1));
  Cinv.reserve(Eigen::VectorXi::Constant(n, 1));
  for (int i = 0; i < n; ++i) {
    C.insert(i, i) = fem.C_lumped[i];
    Cinv.insert(i, i) = 1.0 / fem.C_lumped[i];
  }
  const double k2 = p.kappa * p.kappa;
  Eigen::SparseMatrix<double> Q =
      (k2 * k2) * C + (2.0 * k2) * G +
      Eigen::SparseMatrix<double>(G * Cinv * G);
  Q *= p.tau * p.tau;
  Q.prune([](int, int, double v) { return std::abs(v) > 0.0; });
  return SparseSymmetricMatrix(Q);
}

double maternCorrelation(double distance, const MaternParams& p) {
  if (distance < 0.0)
    throw std::invalid_argument("matern_correlation: negative distance");
  const double x = p.kappa * distance;
  if (x == 0.0) return 1.0;
  if (x > 700.0) return 0.0;
  return x * std::cyl_bessel_k(1.0, x);
}

Eigen::MatrixXd sampleGmrf(const SparseSymmetricMatrix& Q, int n_samples,
                           std::uint64_t seed) {
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(Q.full());
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("sample_gmrf: precision matrix is not SPD");
  const Eigen::Index n = Q.dim();
  NormalStream rng(seed);
  Eigen::MatrixXd Z(n, n_samples);
  for (int s = 0; s < n_samples; ++s)
    for (Eigen::Index i = 0; i < n; ++i) Z(i, s) = rng.normal();
  // Q = P' L L' P  =>  x = P^-1 L^-T z has precision Q
  Eigen::MatrixXd X = llt.matrixU().solve(Z);
  return llt.permutationPinv() * X;
}

}  // namespace downscale
