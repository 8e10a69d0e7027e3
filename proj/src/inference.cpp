#include "downscale/inference.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace downscale {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

int HyperParameters::zDim() const {
  int d = 1;
  for (const FieldHyper& f : fields) d += f.n_time > 1 ? 3 : 2;
  return d;
}

Eigen::VectorXd HyperParameters::toZ() const {
  Eigen::VectorXd z(zDim());
  int i = 0;
  z[i++] = std::log(sigma_eps);
  for (const FieldHyper& f : fields) {
    z[i++] = std::log(f.sigma_omega);
    z[i++] = std::log(f.range);
    if (f.n_time > 1) z[i++] = std::log((1.0 + f.rho) / (1.0 - f.rho));
  }
  return z;
}

HyperParameters HyperParameters::fromZ(const HyperParameters& like,
                                       const Eigen::VectorXd& z) {
  HyperParameters hp = like;
  int i = 0;
  hp.sigma_eps = std::exp(z[i++]);
  for (FieldHyper& f : hp.fields) {
    f.sigma_omega = std::exp(z[i++]);
    f.range = std::exp(z[i++]);
    if (f.n_time > 1) f.rho = std::tanh(0.5 * z[i++]);
  }
  return hp;
}

std::vector<std::string> HyperParameters::zNames() const {
  std::vector<std::string> names{"sigma_eps"};
  for (size_t k = 0; k < fields.size(); ++k) {
    const std::string tag = "[" + std::to_string(k) + "]";
    names.push_back("sigma_omega" + tag);
    names.push_back("range" + tag);
    if (fields[k].n_time > 1) names.push_back("rho" + tag);
  }
  return names;
}

double calibrateRhoLambda(double p_positive) {
  // P(rho > 0) = (1 - e^{-lambda}) / (1 - e^{-lambda sqrt 2}) on the
  // truncated exponential for u = sqrt(1 - rho)
  auto p_of = [](double lam) {
    return (1.0 - std::exp(-lam)) / (1.0 - std::exp(-lam * std::sqrt(2.0)));
  };
  double lo = 1e-8, hi = 200.0;
  if (p_positive <= p_of(lo) || p_positive >= 1.0)
    throw std::invalid_argument("calibrate_rho_lambda: target out of range");
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (p_of(mid) < p_positive ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double pcPriorLogDensity(const HyperParameters& hp, const PriorConfig& prior) {
  // each term is the natural-scale log density plus the Jacobian of the z map
  auto sd_term = [](double sigma, double u, double alpha) {
    const double lam = -std::log(alpha) / u;
    return std::log(lam) - lam * sigma + std::log(sigma);
  };
  double lp = sd_term(hp.sigma_eps, prior.sigma_eps_u, prior.sigma_eps_alpha);
  for (const FieldHyper& f : hp.fields) {
    lp += sd_term(f.sigma_omega, prior.sigma_omega_u, prior.sigma_omega_alpha);
    if (prior.kappa_interpretation) {
      // exponential on kappa = sqrt(8)/range with P(kappa < kappa0) = alpha
      const double lam = -std::log(1.0 - prior.kappa_alpha) / prior.kappa0;
      const double kappa = std::sqrt(8.0) / f.range;
      lp += std::log(lam) - lam * kappa + std::log(kappa);
    } else {
      // density lam r^-2 e^{-lam/r}, P(range < r0) = alpha
      const double lam = -std::log(prior.range_alpha) * prior.range_r0;
      lp += std::log(lam) - std::log(f.range) - lam / f.range;
    }
    if (f.n_time > 1) {
      if (!(f.rho > -1.0 && f.rho < 1.0))
        return -std::numeric_limits<double>::infinity();
      const double lam = calibrateRhoLambda(prior.rho_p_positive);
      const double u = std::sqrt(1.0 - f.rho);
      const double norm = 1.0 - std::exp(-lam * std::sqrt(2.0));
      lp += std::log(lam / 2.0) - lam * u - std::log(u) - std::log(norm);
      lp += std::log(0.5 * (1.0 - f.rho * f.rho));  // d rho / d theta_rho
    }
  }
  return lp;
}

InferenceWorkspace makeWorkspace(const AssembledModel& model,
                                 const Mesh& mesh) {
  InferenceWorkspace ws;
  ws.y = model.y;
  ws.yty = model.y.squaredNorm();
  ws.n_fixed = model.numFixed();
  ws.fem = assembleFem(mesh);
  ws.field_specs = model.field_specs;
  ws.n_vertices = model.n_vertices;

  const int n = model.numObs();
  std::vector<Eigen::Triplet<double>> trips;
  for (int j = 0; j < ws.n_fixed; ++j)
    for (int i = 0; i < n; ++i) trips.emplace_back(i, j, model.F(i, j));
  int off = ws.n_fixed;
  for (const Eigen::SparseMatrix<double>& V : model.V_blocks) {
    for (int k = 0; k < V.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(V, k); it; ++it)
        trips.emplace_back(it.row(), off + it.col(), it.value());
    off += static_cast<int>(V.cols());
  }
  ws.A.resize(n, off);
  ws.A.setFromTriplets(trips.begin(), trips.end());
  ws.A.makeCompressed();
  return ws;
}

namespace {

// prior precision of the latent vector plus its log determinant
std::pair<Eigen::SparseMatrix<double>, double> priorPrecision(
    const InferenceWorkspace& ws, const HyperParameters& hp) {
  if (hp.fields.size() != ws.field_specs.size())
    throw std::invalid_argument("hyperparameters do not match model fields");
  const int nv = ws.n_vertices;
  int dim = ws.n_fixed;
  for (const FieldHyper& f : hp.fields) dim += f.n_time * nv;

  std::vector<Eigen::Triplet<double>> trips;
  double logdet = ws.n_fixed * std::log(ws.fixed_prior_precision);
  for (int j = 0; j < ws.n_fixed; ++j)
    trips.emplace_back(j, j, ws.fixed_prior_precision);

  int off = ws.n_fixed;
  for (size_t fi = 0; fi < hp.fields.size(); ++fi) {
    const FieldHyper& f = hp.fields[fi];
    MaternParams mp = MaternParams::fromRangeSigma(f.range, f.sigma_omega);
    SparseSymmetricMatrix Qs = precisionAlpha2(ws.fem, mp);
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(Qs.full());
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("prior precision: spatial block " +
                               std::to_string(fi) + " not SPD");
    Eigen::SparseMatrix<double> Ls = llt.matrixL();
    const double ld_s = 2.0 * Ls.diagonal().array().log().sum();

    Eigen::SparseMatrix<double> Qj;
    double ld;
    if (f.n_time > 1) {
      SpaceTimeField st =
          spacetimePrecision(mp, {f.rho, f.n_time}, ws.fem);
      Qj = st.Q_joint.full();
      // det(Qt (x) Qs) with the stationary AR1 closed form
      ld = f.n_time * ld_s -
           nv * (f.n_time - 1) * std::log(1.0 - f.rho * f.rho);
    } else {
      Qj = Qs.full();
      ld = ld_s;
    }
    logdet += ld;
    for (int k = 0; k < Qj.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(Qj, k); it; ++it)
        trips.emplace_back(off + it.row(), off + it.col(), it.value());
    off += f.n_time * nv;
  }
  Eigen::SparseMatrix<double> Q(dim, dim);
  Q.setFromTriplets(trips.begin(), trips.end());
  Q.makeCompressed();
  return {Q, logdet};
}

}  // namespace

GaussianConditional conditionalPosterior(const InferenceWorkspace& ws,
                                         const HyperParameters& hp) {
  auto [Q_prior, ld_prior] = priorPrecision(ws, hp);
  const double s2 = hp.sigma_eps * hp.sigma_eps;

  GaussianConditional g;
  g.logdet_Qprior = ld_prior;
  Eigen::SparseMatrix<double> AtA =
      (Eigen::SparseMatrix<double>(ws.A.transpose()) * ws.A).pruned();
  g.Q_c = Q_prior + AtA / s2;
  g.Q_c.makeCompressed();

  g.chol = std::make_shared<
      Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>>();
  g.chol->compute(g.Q_c);
  if (g.chol->info() != Eigen::Success)
    throw std::runtime_error(
        "conditional_posterior: Cholesky factorization failed (precision not "
        "SPD at sigma_eps=" +
        std::to_string(hp.sigma_eps) + ")");
  Eigen::SparseMatrix<double> L = g.chol->matrixL();
  g.logdet_Qc = 2.0 * L.diagonal().array().log().sum();

  Eigen::VectorXd b = ws.A.transpose() * ws.y / s2;
  g.mu = g.chol->solve(b);
  g.quad = ws.yty / s2 - b.dot(g.mu);
  return g;
}

double logMarginalLikelihood(const InferenceWorkspace& ws,
                             const HyperParameters& hp) {
  GaussianConditional g = conditionalPosterior(ws, hp);
  const double n = static_cast<double>(ws.y.size());
  const double s2 = hp.sigma_eps * hp.sigma_eps;
  return 0.5 * g.logdet_Qprior - 0.5 * g.logdet_Qc -
         0.5 * n * (kLog2Pi + std::log(s2)) - 0.5 * g.quad;
}

double logMarginalPosterior(const InferenceWorkspace& ws,
                            const HyperParameters& hp,
                            const PriorConfig& prior) {
  return logMarginalLikelihood(ws, hp) + pcPriorLogDensity(hp, prior);
}

HyperParameters defaultInit(const AssembledModel& model, const Mesh& mesh) {
  const double sd_y = std::sqrt(
      (model.y.array() - model.y.mean()).square().sum() /
      std::max<int>(1, model.numObs() - 1));
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  bool any_interior = false;
  for (size_t i = 0; i < mesh.vertices.size(); ++i) {
    if (i < mesh.interior_flag.size() && !mesh.interior_flag[i]) continue;
    any_interior = true;
    xmin = std::min(xmin, mesh.vertices[i].x);
    xmax = std::max(xmax, mesh.vertices[i].x);
    ymin = std::min(ymin, mesh.vertices[i].y);
    ymax = std::max(ymax, mesh.vertices[i].y);
  }
  if (!any_interior)
    for (const Point2& p : mesh.vertices) {
      xmin = std::min(xmin, p.x);
      xmax = std::max(xmax, p.x);
      ymin = std::min(ymin, p.y);
      ymax = std::max(ymax, p.y);
    }
  const double diag = std::hypot(xmax - xmin, ymax - ymin);

  HyperParameters hp;
  hp.sigma_eps = std::max(sd_y / 2.0, 1e-3);
  for (const FieldSpec& fs : model.field_specs) {
    FieldHyper f;
    f.sigma_omega = std::max(sd_y / 2.0, 1e-3);
    f.range = std::max(diag / 5.0, 1e-6);
    f.rho = 0.5;
    f.n_time = fs.n_time;
    hp.fields.push_back(f);
  }
  return hp;
}

namespace {

Eigen::VectorXd fdGradient(const std::function<double(const Eigen::VectorXd&)>& f,
                           const Eigen::VectorXd& z, double rel_step) {
  Eigen::VectorXd g(z.size());
  for (int i = 0; i < z.size(); ++i) {
    const double h = rel_step * std::max(1.0, std::abs(z[i]));
    Eigen::VectorXd zp = z, zm = z;
    zp[i] += h;
    zm[i] -= h;
    g[i] = (f(zp) - f(zm)) / (2.0 * h);
  }
  return g;
}

Eigen::MatrixXd fdHessian(const std::function<double(const Eigen::VectorXd&)>& f,
                          const Eigen::VectorXd& z, double rel_step) {
  const int d = static_cast<int>(z.size());
  Eigen::MatrixXd H(d, d);
  const double f0 = f(z);
  Eigen::VectorXd h(d);
  for (int i = 0; i < d; ++i) h[i] = rel_step * std::max(1.0, std::abs(z[i]));
  for (int i = 0; i < d; ++i) {
    Eigen::VectorXd zp = z, zm = z;
    zp[i] += h[i];
    zm[i] -= h[i];
    H(i, i) = (f(zp) - 2.0 * f0 + f(zm)) / (h[i] * h[i]);
    for (int j = i + 1; j < d; ++j) {
      Eigen::VectorXd zpp = z, zpm = z, zmp = z, zmm = z;
      zpp[i] += h[i]; zpp[j] += h[j];
      zpm[i] += h[i]; zpm[j] -= h[j];
      zmp[i] -= h[i]; zmp[j] += h[j];
      zmm[i] -= h[i]; zmm[j] -= h[j];
      H(i, j) = H(j, i) =
          (f(zpp) - f(zpm) - f(zmp) + f(zmm)) / (4.0 * h[i] * h[j]);
    }
  }
  return H;
}

Eigen::MatrixXd floorEigenvalues(const Eigen::MatrixXd& M, double rel_floor) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
      0.5 * (M + M.transpose()));
  Eigen::VectorXd ev = es.eigenvalues();
  const double floor_val = rel_floor * std::max(ev.maxCoeff(), 1e-12);
  for (int i = 0; i < ev.size(); ++i) ev[i] = std::max(ev[i], floor_val);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

ModeResult findMode(const InferenceWorkspace& ws, const HyperParameters& init,
                    const FitOptions& opts) {
  const Eigen::VectorXd z0 = init.toZ();
  auto neg = [&](const Eigen::VectorXd& z) {
    try {
      return -logMarginalPosterior(ws, HyperParameters::fromZ(init, z),
                                   opts.prior);
    } catch (const std::exception&) {
      // ill-conditioned corner of the domain: repel the line search
      return std::numeric_limits<double>::infinity();
    }
  };

  const int d = static_cast<int>(z0.size());
  Eigen::VectorXd z = z0;
  double fz = neg(z);
  Eigen::VectorXd g = fdGradient(neg, z, 1e-4);
  Eigen::MatrixXd Hinv = Eigen::MatrixXd::Identity(d, d);
  int iter = 0;
  bool converged = g.lpNorm<Eigen::Infinity>() < opts.grad_tol;

  while (!converged) {
    if (iter >= opts.max_iter) {
      std::ostringstream msg;
      msg << "find_mode: iteration cap " << opts.max_iter
          << " exceeded; best gradient inf-norm "
          << g.lpNorm<Eigen::Infinity>();
      throw ConvergenceError(msg.str(), z, g.lpNorm<Eigen::Infinity>());
    }
    ++iter;
    Eigen::VectorXd p = -(Hinv * g);
    if (p.dot(g) >= 0.0) p = -g;  // reset on a non-descent direction

    // backtracking Armijo line search
    double alpha = 1.0;
    const double slope = g.dot(p);
    Eigen::VectorXd z_new;
    double f_new = fz;
    bool ok = false;
    for (int ls = 0; ls < 50; ++ls) {
      z_new = z + alpha * p;
      f_new = neg(z_new);
      if (std::isfinite(f_new) && f_new <= fz + 1e-4 * alpha * slope) {
        ok = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!ok) break;  // no further progress representable

    Eigen::VectorXd g_new = fdGradient(neg, z_new, 1e-4);
    const Eigen::VectorXd s = z_new - z;
    const Eigen::VectorXd yv = g_new - g;
    const double sy = s.dot(yv);
    if (sy > 1e-12) {
      const Eigen::VectorXd Hy = Hinv * yv;
      const double yHy = yv.dot(Hy);
      Hinv += ((sy + yHy) / (sy * sy)) * (s * s.transpose()) -
              (Hy * s.transpose() + s * Hy.transpose()) / sy;
    }
    const double step_norm = s.norm();
    z = z_new;
    fz = f_new;
    g = g_new;
    if (g.lpNorm<Eigen::Infinity>() < opts.grad_tol ||
        step_norm < opts.step_tol)
      converged = true;
  }

  ModeResult res;
  res.z = z;
  res.hp = HyperParameters::fromZ(init, z);
  res.log_posterior = -fz;
  res.n_iterations = iter;
  res.curvature = floorEigenvalues(fdHessian(neg, z, 1e-3), 1e-8);
  return res;
}

std::vector<IntegrationPoint> buildIntegrationPoints(
    const InferenceWorkspace& ws, const ModeResult& mode,
    const FitOptions& opts) {
  std::vector<IntegrationPoint> pts;
  if (opts.strategy == "eb") {
    IntegrationPoint p;
    p.z = mode.z;
    p.hp = mode.hp;
    p.log_posterior = mode.log_posterior;
    p.weight = 1.0;
    pts.push_back(std::move(p));
    return pts;
  }
  if (opts.strategy != "grid")
    throw std::invalid_argument("unknown integration strategy: " +
                                opts.strategy);

  const int d = static_cast<int>(mode.z.size());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(mode.curvature);
  // columns scale unit lattice steps to posterior-sd-sized steps
  Eigen::MatrixXd S = es.eigenvectors() *
                      es.eigenvalues().cwiseInverse().cwiseSqrt().asDiagonal();

  std::map<std::vector<int>, double> accepted;  // lattice point -> logpost
  std::deque<std::vector<int>> queue;
  std::set<std::vector<int>> seen;
  const std::vector<int> origin(d, 0);
  queue.push_back(origin);
  seen.insert(origin);
  const int point_cap = 1024, coord_cap = 6;

  while (!queue.empty() && static_cast<int>(accepted.size()) < point_cap) {
    std::vector<int> m = queue.front();
    queue.pop_front();
    Eigen::VectorXd mv(d);
    for (int i = 0; i < d; ++i) mv[i] = m[i];
    const Eigen::VectorXd z = mode.z + opts.grid_step * (S * mv);
    double lp;
    try {
      lp = logMarginalPosterior(ws, HyperParameters::fromZ(mode.hp, z),
                                opts.prior);
    } catch (const std::exception&) {
      continue;  // off-lattice numerical failure: treat as pruned
    }
    if (!std::isfinite(lp) || mode.log_posterior - lp > opts.prune_logdrop)
      continue;
    accepted[m] = lp;
    for (int i = 0; i < d; ++i)
      for (int dir : {-1, 1}) {
        std::vector<int> nb = m;
        nb[i] += dir;
        if (std::abs(nb[i]) > coord_cap) continue;
        if (seen.insert(nb).second) queue.push_back(nb);
      }
  }

  double wsum = 0.0;
  for (const auto& [m, lp] : accepted)
    wsum += std::exp(lp - mode.log_posterior);
  for (const auto& [m, lp] : accepted) {
    IntegrationPoint p;
    Eigen::VectorXd mv(d);
    for (int i = 0; i < d; ++i) mv[i] = m[i];
    p.z = mode.z + opts.grid_step * (S * mv);
    p.hp = HyperParameters::fromZ(mode.hp, p.z);
    p.log_posterior = lp;
    p.weight = std::exp(lp - mode.log_posterior) / wsum;
    pts.push_back(std::move(p));
  }
  return pts;
}

namespace {

// summary of a transformed mixture-of-normals marginal by dense quadrature
MarginalSummary mixtureSummary(
    const std::string& name, const std::vector<double>& w,
    const std::vector<double>& mean, const std::vector<double>& sd,
    const std::function<double(double)>& transform) {
  MarginalSummary s;
  s.name = name;
  double lo = 1e300, hi = -1e300, smax = 0.0;
  for (size_t k = 0; k < w.size(); ++k) {
    lo = std::min(lo, mean[k]);
    hi = std::max(hi, mean[k]);
    smax = std::max(smax, sd[k]);
  }
  lo -= 8.0 * smax;
  hi += 8.0 * smax;
  const int n = 2001;
  const double h = (hi - lo) / (n - 1);
  double m1 = 0.0, m2 = 0.0, mass = 0.0;
  std::vector<double> cdf(n, 0.0), dens(n, 0.0);
  for (int i = 0; i < n; ++i) {
    const double z = lo + i * h;
    double p = 0.0;
    for (size_t k = 0; k < w.size(); ++k) {
      const double t = (z - mean[k]) / sd[k];
      p += w[k] * std::exp(-0.5 * t * t) / (sd[k] * std::sqrt(2.0 * M_PI));
    }
    dens[i] = p;
    const double x = transform(z);
    const double wq = (i == 0 || i == n - 1) ? 0.5 : 1.0;  // trapezoid
    mass += wq * p;
    m1 += wq * p * x;
    m2 += wq * p * x * x;
    cdf[i] = (i ? cdf[i - 1] : 0.0) + wq * p;
  }
  m1 /= mass;
  m2 /= mass;
  s.mean = m1;
  s.sd = std::sqrt(std::max(0.0, m2 - m1 * m1));
  auto quantile = [&](double q) {
    const double target = q * mass;
    for (int i = 1; i < n; ++i)
      if (cdf[i] >= target) {
        const double frac =
            dens[i] > 0 ? (target - cdf[i - 1]) / (cdf[i] - cdf[i - 1]) : 0.0;
        return transform(lo + (i - 1 + frac) * h);
      }
    return transform(hi);
  };
  s.q025 = quantile(0.025);
  s.q50 = quantile(0.5);
  s.q975 = quantile(0.975);
  return s;
}

std::vector<std::string> hyperNames(const AssembledModel& model,
                                    const HyperParameters& hp) {
  std::vector<std::string> names{"sigma_eps"};
  for (size_t k = 0; k < hp.fields.size(); ++k) {
    const std::string tag = "[" + model.field_specs[k].name + "]";
    names.push_back("sigma_omega" + tag);
    names.push_back("range" + tag);
    if (hp.fields[k].n_time > 1) names.push_back("rho" + tag);
  }
  return names;
}

std::vector<std::function<double(double)>> hyperTransforms(
    const HyperParameters& hp) {
  std::vector<std::function<double(double)>> ts;
  auto expt = [](double z) { return std::exp(z); };
  auto rhot = [](double z) { return std::tanh(0.5 * z); };
  ts.push_back(expt);
  for (const FieldHyper& f : hp.fields) {
    ts.push_back(expt);
    ts.push_back(expt);
    if (f.n_time > 1) ts.push_back(rhot);
  }
  return ts;
}

void computeMarginals(PosteriorBundle& bundle, const AssembledModel& model) {
  const int d = static_cast<int>(bundle.mode.z.size());
  Eigen::MatrixXd cov = bundle.mode.curvature.inverse();
  std::vector<std::string> names = hyperNames(model, bundle.mode.hp);
  std::vector<std::function<double(double)>> ts =
      hyperTransforms(bundle.mode.hp);

  bundle.hyper_marginals.clear();
  for (int j = 0; j < d; ++j) {
    std::vector<double> w, m, s;
    const double sj = std::sqrt(std::max(cov(j, j), 1e-12));
    for (const IntegrationPoint& p : bundle.points) {
      w.push_back(p.weight);
      m.push_back(p.z[j]);
      s.push_back(sj);
    }
    bundle.hyper_marginals.push_back(mixtureSummary(names[j], w, m, s, ts[j]));
  }

  bundle.fixed_marginals.clear();
  const int nf = bundle.n_fixed;
  auto ident = [](double x) { return x; };
  for (int j = 0; j < nf; ++j) {
    std::vector<double> w, m, s;
    for (const IntegrationPoint& p : bundle.points) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(p.cond.mu.size());
      e[j] = 1.0;
      const double var = e.dot(p.cond.chol->solve(e));
      w.push_back(p.weight);
      m.push_back(p.cond.mu[j]);
      s.push_back(std::sqrt(std::max(var, 1e-300)));
    }
    bundle.fixed_marginals.push_back(
        mixtureSummary(model.fixed_names[j], w, m, s, ident));
  }
}

}  // namespace

PosteriorBundle fit(const AssembledModel& model, const Mesh& mesh,
                    const FitOptions& opts) {
  InferenceWorkspace ws = makeWorkspace(model, mesh);
  const HyperParameters init =
      opts.init ? *opts.init : defaultInit(model, mesh);

  PosteriorBundle bundle;
  bundle.options = opts;
  bundle.n_fixed = model.numFixed();
  bundle.mode = findMode(ws, init, opts);
  bundle.log_evidence_at_mode = logMarginalLikelihood(ws, bundle.mode.hp);
  bundle.points = buildIntegrationPoints(ws, bundle.mode, opts);
  for (IntegrationPoint& p : bundle.points)
    p.cond = conditionalPosterior(ws, p.hp);
  computeMarginals(bundle, model);
  return bundle;
}

void writeFitReport(const PosteriorBundle& bundle, std::ostream& os) {
  os << "fit report\n";
  os << "  strategy: " << bundle.options.strategy
     << "  K: " << bundle.points.size()
     << "  iterations: " << bundle.mode.n_iterations
     << "  log-evidence(mode): " << std::setprecision(10)
     << bundle.log_evidence_at_mode << "\n";
  os << "  hyperparameters (mean, sd, 2.5%, 50%, 97.5%):\n";
  auto row = [&](const MarginalSummary& m) {
    os << "    " << std::left << std::setw(24) << m.name << std::right
       << std::setprecision(6) << std::setw(12) << m.mean << std::setw(12)
       << m.sd << std::setw(12) << m.q025 << std::setw(12) << m.q50
       << std::setw(12) << m.q975 << "\n";
  };
  for (const MarginalSummary& m : bundle.hyper_marginals) row(m);
  os << "  fixed effects (mean, sd, 2.5%, 50%, 97.5%):\n";
  for (const MarginalSummary& m : bundle.fixed_marginals) row(m);
}

void writeFitKeyValues(const PosteriorBundle& bundle, std::ostream& os) {
  os << std::setprecision(17);
  os << "strategy=" << bundle.options.strategy << "\n";
  os << "K=" << bundle.points.size() << "\n";
  os << "iterations=" << bundle.mode.n_iterations << "\n";
  os << "log_evidence_mode=" << bundle.log_evidence_at_mode << "\n";
  auto rows = [&](const std::vector<MarginalSummary>& ms,
                  const std::string& prefix) {
    for (const MarginalSummary& m : ms)
      os << prefix << m.name << ".mean=" << m.mean << "\n"
         << prefix << m.name << ".sd=" << m.sd << "\n"
         << prefix << m.name << ".q025=" << m.q025 << "\n"
         << prefix << m.name << ".q50=" << m.q50 << "\n"
         << prefix << m.name << ".q975=" << m.q975 << "\n";
  };
  rows(bundle.hyper_marginals, "hyper.");
  rows(bundle.fixed_marginals, "fixed.");
}

void writeBundle(const PosteriorBundle& bundle, std::ostream& os) {
  nlohmann::json j;
  j["strategy"] = bundle.options.strategy;
  j["grid_step"] = bundle.options.grid_step;
  j["prune_logdrop"] = bundle.options.prune_logdrop;
  j["n_fixed"] = bundle.n_fixed;
  j["log_evidence_at_mode"] = bundle.log_evidence_at_mode;
  j["mode_z"] = std::vector<double>(bundle.mode.z.begin(),
                                    bundle.mode.z.end());
  j["mode_log_posterior"] = bundle.mode.log_posterior;
  j["mode_iterations"] = bundle.mode.n_iterations;
  std::vector<int> ntimes;
  for (const FieldHyper& f : bundle.mode.hp.fields) ntimes.push_back(f.n_time);
  j["field_n_time"] = ntimes;
  const int d = static_cast<int>(bundle.mode.z.size());
  std::vector<std::vector<double>> curv(d, std::vector<double>(d));
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) curv[a][b] = bundle.mode.curvature(a, b);
  j["curvature"] = curv;
  nlohmann::json pts = nlohmann::json::array();
  for (const IntegrationPoint& p : bundle.points) {
    nlohmann::json pj;
    pj["z"] = std::vector<double>(p.z.begin(), p.z.end());
    pj["log_posterior"] = p.log_posterior;
    pj["weight"] = p.weight;
    pts.push_back(pj);
  }
  j["points"] = pts;
  os << j.dump(1) << "\n";
}

PosteriorBundle readBundle(std::istream& is, const AssembledModel& model,
                           const Mesh& mesh) {
  nlohmann::json j;
  is >> j;
  PosteriorBundle bundle;
  bundle.options.strategy = j.at("strategy").get<std::string>();
  bundle.options.grid_step = j.at("grid_step").get<double>();
  bundle.options.prune_logdrop = j.at("prune_logdrop").get<double>();
  bundle.n_fixed = j.at("n_fixed").get<int>();
  bundle.log_evidence_at_mode = j.at("log_evidence_at_mode").get<double>();

  HyperParameters like;
  for (int nt : j.at("field_n_time").get<std::vector<int>>()) {
    FieldHyper f;
    f.n_time = nt;
    like.fields.push_back(f);
  }
  auto mz = j.at("mode_z").get<std::vector<double>>();
  bundle.mode.z = Eigen::Map<Eigen::VectorXd>(mz.data(), mz.size());
  bundle.mode.hp = HyperParameters::fromZ(like, bundle.mode.z);
  bundle.mode.log_posterior = j.at("mode_log_posterior").get<double>();
  bundle.mode.n_iterations = j.at("mode_iterations").get<int>();
  auto curv = j.at("curvature").get<std::vector<std::vector<double>>>();
  const int d = static_cast<int>(curv.size());
  bundle.mode.curvature.resize(d, d);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) bundle.mode.curvature(a, b) = curv[a][b];

  InferenceWorkspace ws = makeWorkspace(model, mesh);
  for (const nlohmann::json& pj : j.at("points")) {
    IntegrationPoint p;
    auto z = pj.at("z").get<std::vector<double>>();
    p.z = Eigen::Map<Eigen::VectorXd>(z.data(), z.size());
    p.hp = HyperParameters::fromZ(like, p.z);
    p.log_posterior = pj.at("log_posterior").get<double>();
    p.weight = pj.at("weight").get<double>();
    p.cond = conditionalPosterior(ws, p.hp);
    bundle.points.push_back(std::move(p));
  }
  computeMarginals(bundle, model);
  return bundle;
}

}  // namespace downscale
