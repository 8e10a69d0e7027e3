#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "downscale/model.hpp"
#include "downscale/spacetime.hpp"
#include "downscale/spde.hpp"

namespace downscale {

// Tail-probability statements that calibrate the penalised-complexity priors.
struct PriorConfig {
  double sigma_eps_u = 1.0;      // P(sigma_eps > u) = alpha
  double sigma_eps_alpha = 0.1;
  double sigma_omega_u = 1.0;
  double sigma_omega_alpha = 0.1;
  double range_r0 = 0.1;         // P(range < r0) = alpha, model length units
  double range_alpha = 0.1;
  double rho_p_positive = 0.9;   // P(rho > 0), base model rho = 1
  // alternative reading of the range statement: exponential prior on kappa
  // with P(kappa < kappa0) = alpha
  bool kappa_interpretation = false;
  double kappa0 = 0.1;
  double kappa_alpha = 0.1;
};

struct FieldHyper {
  double sigma_omega = 1.0;
  double range = 1.0;
  double rho = 0.0;      // ignored when n_time == 1
  int n_time = 1;        // decides whether rho is a free coordinate
};

// Natural-scale hyperparameters plus the unconstrained z mapping used by the
// optimizer: z = (log sigma_eps, per field: log sigma_omega, log range,
// log((1+rho)/(1-rho)) when the field is temporal).
struct HyperParameters {
  double sigma_eps = 1.0;
  std::vector<FieldHyper> fields;

  int zDim() const;
  Eigen::VectorXd toZ() const;
  static HyperParameters fromZ(const HyperParameters& like,
                               const Eigen::VectorXd& z);
  std::vector<std::string> zNames() const;
};

// lambda for the truncated AR(1) distance prior solving P(rho > 0) = target
double calibrateRhoLambda(double p_positive);

// log prior density in z coordinates (natural densities plus Jacobians)
double pcPriorLogDensity(const HyperParameters& hp, const PriorConfig& prior);

// Exact Gaussian conditional theta | psi, Y for the Gaussian likelihood.
struct GaussianConditional {
  Eigen::VectorXd mu;
  Eigen::SparseMatrix<double> Q_c;
  std::shared_ptr<Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>> chol;
  double logdet_Qc = 0.0;
  double logdet_Qprior = 0.0;
  double quad = 0.0;  // y'y/sigma_eps^2 - b'mu
};

// Precomputed pieces shared by every hyperparameter evaluation.
struct InferenceWorkspace {
  Eigen::SparseMatrix<double> A;  // [F | V_1 | V_2 | ...]
  Eigen::VectorXd y;
  double yty = 0.0;
  int n_fixed = 0;
  FemMatrices fem;
  std::vector<FieldSpec> field_specs;
  int n_vertices = 0;
  double fixed_prior_precision = 1e-3;  // N(0, 1000) on fixed effects
};

InferenceWorkspace makeWorkspace(const AssembledModel& model, const Mesh& mesh);

GaussianConditional conditionalPosterior(const InferenceWorkspace& ws,
                                         const HyperParameters& hp);

// log p(Y | psi) via the Gaussian identity; exact for this model class.
double logMarginalLikelihood(const InferenceWorkspace& ws,
                             const HyperParameters& hp);
double logMarginalPosterior(const InferenceWorkspace& ws,
                            const HyperParameters& hp,
                            const PriorConfig& prior);

struct FitOptions {
  std::string strategy = "grid";  // "grid" | "eb"
  double grid_step = 1.0;
  double prune_logdrop = 5.0;
  double grad_tol = 1e-4;
  double step_tol = 1e-6;
  int max_iter = 200;
  PriorConfig prior;
  std::optional<HyperParameters> init;  // scale-aware default when absent
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& msg, Eigen::VectorXd best,
                   double gnorm)
      : std::runtime_error(msg), best_z(std::move(best)), grad_norm(gnorm) {}
  Eigen::VectorXd best_z;
  double grad_norm;
};

struct ModeResult {
  HyperParameters hp;
  Eigen::VectorXd z;
  Eigen::MatrixXd curvature;  // negative FD Hessian, symmetrized, floored
  double log_posterior = 0.0;
  int n_iterations = 0;
};

HyperParameters defaultInit(const AssembledModel& model, const Mesh& mesh);

ModeResult findMode(const InferenceWorkspace& ws, const HyperParameters& init,
                    const FitOptions& opts);

struct IntegrationPoint {
  HyperParameters hp;
  Eigen::VectorXd z;
  double log_posterior = 0.0;
  double weight = 0.0;
  GaussianConditional cond;  // filled by fit()
};

struct MarginalSummary {
  std::string name;
  double mean = 0.0, sd = 0.0, q025 = 0.0, q50 = 0.0, q975 = 0.0;
};

struct PosteriorBundle {
  std::vector<IntegrationPoint> points;
  ModeResult mode;
  FitOptions options;
  int n_fixed = 0;
  std::vector<MarginalSummary> hyper_marginals;   // natural scale
  std::vector<MarginalSummary> fixed_marginals;
  double log_evidence_at_mode = 0.0;
};

// Integration points without conditionals (weights normalized to sum 1).
std::vector<IntegrationPoint> buildIntegrationPoints(
    const InferenceWorkspace& ws, const ModeResult& mode,
    const FitOptions& opts);

PosteriorBundle fit(const AssembledModel& model, const Mesh& mesh,
                    const FitOptions& opts = {});

// Plain-text and key=value fit reports.
void writeFitReport(const PosteriorBundle& bundle, std::ostream& os);
void writeFitKeyValues(const PosteriorBundle& bundle, std::ostream& os);

// Bundle persistence: stores z points, weights, mode and curvature; the
// conditionals are recomputed on load from the model, so prediction does not
// repeat the optimization.
void writeBundle(const PosteriorBundle& bundle, std::ostream& os);
PosteriorBundle readBundle(std::istream& is, const AssembledModel& model,
                           const Mesh& mesh);

}  // namespace downscale
