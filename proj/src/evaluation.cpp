#include "downscale/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "downscale/rng.hpp"
#include "downscale/spacetime.hpp"

namespace downscale {

namespace {

// structured triangulation of the buffered simulation domain; fields are
// sampled here, independently of any model-fitting mesh
Mesh simulationMesh(int n, double lo = -0.25, double hi = 1.25) {
  Mesh m;
  const double h = (hi - lo) / (n - 1);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) m.vertices.push_back({lo + i * h, lo + j * h});
  for (int j = 0; j + 1 < n; ++j)
    for (int i = 0; i + 1 < n; ++i) {
      int a = j * n + i, b = j * n + i + 1, c = (j + 1) * n + i + 1,
          d = (j + 1) * n + i;
      m.triangles.push_back({a, b, c});
      m.triangles.push_back({a, c, d});
    }
  m.interior_flag.assign(m.vertices.size(), 1);
  return m;
}

double medianOf(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::vector<Point2> sampleSites(const SimulationConfig& config) {
  NormalStream rng(NormalStream::substream(config.seed, 0x517e5));
  const double dx = config.domain / config.grid_cols,
               dy = config.domain / config.grid_rows;
  std::vector<std::pair<int, int>> used_cells;
  std::vector<Point2> sites;
  for (int i = 0; i < config.n_sites; ++i) {
    int cc, cr;
    if (!used_cells.empty() && rng.uniform() < 0.18) {
      // revisit an occupied cell: reproduces the several-monitors-per-cell
      // tail of real networks
      const auto& cell = used_cells[static_cast<size_t>(
          rng.uniform() * used_cells.size())];
      cc = cell.first;
      cr = cell.second;
    } else {
      cc = std::min(config.grid_cols - 1,
                    static_cast<int>(rng.uniform() * config.grid_cols));
      cr = std::min(config.grid_rows - 1,
                    static_cast<int>(rng.uniform() * config.grid_rows));
      used_cells.push_back({cc, cr});
    }
    sites.push_back({(cc + 0.05 + 0.9 * rng.uniform()) * dx,
                     (cr + 0.05 + 0.9 * rng.uniform()) * dy});
  }
  return sites;
}

GridCovariate syntheticCovariate(const SimulationConfig& config) {
  GridCovariate g;
  g.name = "ctm";
  g.x0 = g.y0 = 0.0;
  g.dx = config.domain / config.grid_cols;
  g.dy = config.domain / config.grid_rows;
  g.n_cols = config.grid_cols;
  g.n_rows = config.grid_rows;
  g.role = CovariateRole::VaryingQ;
  for (int t = 0; t < config.n_time; ++t) {
    Eigen::MatrixXd layer(g.n_rows, g.n_cols);
    for (int r = 0; r < g.n_rows; ++r)
      for (int c = 0; c < g.n_cols; ++c) {
        const double x = (c + 0.5) * g.dx, y = (r + 0.5) * g.dy;
        // smooth large-scale structure plus short-wavelength detail; the
        // sub-range detail keeps the slope identifiable against the
        // spatially varying intercept
        layer(r, c) = 4.0 +
                      1.2 * std::sin(2.0 * M_PI * x) *
                          std::cos(2.0 * M_PI * y) +
                      0.8 * std::sin(5.0 * x + 3.0 * y) +
                      1.4 * std::sin(40.0 * x) * std::sin(34.0 * y) +
                      1.0 * std::cos(55.0 * x + 29.0 * y) + 0.3 * t;
      }
    g.values.push_back(layer);
  }
  return g;
}

SimulatedDataset generateDataset(const SimulationConfig& config,
                                 int dataset_index) {
  SimulatedDataset out;
  out.sites = config.sites ? *config.sites : sampleSites(config);
  out.covariate = config.covariate ? *config.covariate
                                   : syntheticCovariate(config);

  Mesh sim_mesh = simulationMesh(config.sim_mesh_n, -0.3,
                                 config.domain + 0.3);
  FemMatrices fem = assembleFem(sim_mesh);
  const int nv = static_cast<int>(sim_mesh.vertices.size());

  auto sample_field = [&](double kappa, double sigma2, double rho,
                          int substream_tag) -> Eigen::VectorXd {
    if (sigma2 <= 0.0)
      return Eigen::VectorXd::Zero(config.n_time * nv);
    MaternParams mp = MaternParams::fromRangeSigma(std::sqrt(8.0) / kappa,
                                                   std::sqrt(sigma2));
    const std::uint64_t s = NormalStream::substream(
        config.seed, 7919u * static_cast<std::uint64_t>(dataset_index + 1) +
                         substream_tag);
    if (config.n_time == 1)
      return sampleGmrf(precisionAlpha2(fem, mp), 1, s).col(0);
    SpaceTimeField f = spacetimePrecision(mp, {rho, config.n_time}, fem);
    return sampleGmrf(f.Q_joint, 1, s).col(0);
  };

  const Eigen::VectorXd f0 =
      sample_field(config.kappa0, config.sigma2_0, config.rho0, 1);
  const Eigen::VectorXd f1 =
      sample_field(config.kappa1, config.sigma2_1, config.rho1, 2);

  NormalStream noise(NormalStream::substream(
      config.seed, 7919u * static_cast<std::uint64_t>(dataset_index + 1) + 3));
  const double sd_eps = std::sqrt(config.sigma2_eps);

  for (size_t i = 0; i < out.sites.size(); ++i) {
    const BasisEvaluation basis = locateAndWeights(sim_mesh, out.sites[i]);
    for (int t = 0; t < config.n_time; ++t) {
      double b0 = config.beta0, b1 = config.beta1;
      for (int k = 0; k < 3; ++k) {
        const int idx = t * nv + basis.vertex_indices[k];
        b0 += basis.weights[k] * f0[idx];
        b1 += basis.weights[k] * f1[idx];
      }
      const double x = covariateAt(out.covariate, out.sites[i], t);
      Observation o;
      o.site_id = "s" + std::to_string(i);
      o.location = out.sites[i];
      o.time_index = t;
      o.value = b0 + b1 * x + sd_eps * noise.normal();
      out.obs.rows.push_back(std::move(o));
    }
  }
  return out;
}

std::string modelSpecName(ModelSpec spec) {
  switch (spec) {
    case ModelSpec::FixedOnly: return "fixed_only";
    case ModelSpec::SpatialIntercept: return "spatial_intercept";
    case ModelSpec::SpatialSlope: return "spatial_slope";
    default: return "spatio_temporal";
  }
}

AssembledModel assembleForSpec(const SimulatedDataset& data, ModelSpec spec,
                               const Mesh& mesh, int n_time) {
  GridCovariate cov = data.covariate;
  AssemblyOptions opts;
  // keep covariates on their native scale so estimates compare directly to
  // the generating coefficients
  opts.standardize_fixed = false;
  switch (spec) {
    case ModelSpec::FixedOnly:
      cov.role = CovariateRole::FixedP;
      opts.varying_intercept = false;
      break;
    case ModelSpec::SpatialIntercept:
      cov.role = CovariateRole::FixedP;
      opts.varying_intercept = true;
      opts.static_fields = n_time > 1;
      break;
    case ModelSpec::SpatialSlope:
      cov.role = CovariateRole::VaryingQ;
      opts.varying_intercept = true;
      opts.static_fields = n_time > 1;
      break;
    case ModelSpec::SpatioTemporal:
      cov.role = CovariateRole::VaryingQ;
      opts.varying_intercept = true;
      break;
  }
  return assemble(data.obs, {cov}, mesh, n_time, opts);
}

const BiasRow* BiasTable::find(const std::string& model,
                               const std::string& parameter) const {
  for (const BiasRow& r : rows)
    if (r.model == model && r.parameter == parameter) return &r;
  return nullptr;
}

BiasTable runModelComparison(const SimulationConfig& config,
                             const std::vector<SimulatedDataset>& datasets,
                             const std::vector<ModelSpec>& specs,
                             const FitOptions& base_options) {
  if (datasets.empty())
    throw std::invalid_argument("model comparison: no datasets");
  MeshOptions mopts;
  mopts.max_edge_inner = 0.12;
  mopts.max_edge_outer = 0.35;
  mopts.buffer_width = 0.3;
  mopts.cutoff = 0.004;
  Mesh mesh = buildMesh(datasets[0].sites, mopts);

  BiasTable table;
  for (ModelSpec spec : specs) {
    const std::string mname = modelSpecName(spec);
    // parameter -> (true value, per-dataset estimates)
    std::map<std::string, std::pair<double, std::vector<double>>> acc;
    auto push = [&](const std::string& p, double truth, double est) {
      acc[p].first = truth;
      acc[p].second.push_back(est);
    };
    for (size_t di = 0; di < datasets.size(); ++di) {
      try {
        AssembledModel m =
            assembleForSpec(datasets[di], spec, mesh, config.n_time);
        PosteriorBundle b = fit(m, mesh, base_options);

        push("beta0", config.beta0, b.fixed_marginals[0].q50);
        push("beta1", config.beta1, b.fixed_marginals[1].q50);
        double s_eps = 0.0;
        std::map<std::string, double> range_est, sigma_est, rho_est;
        for (const MarginalSummary& h : b.hyper_marginals) {
          if (h.name == "sigma_eps") s_eps = h.q50;
          const auto lb = h.name.find('[');
          if (lb == std::string::npos) continue;
          const std::string field =
              h.name.substr(lb + 1, h.name.size() - lb - 2);
          const std::string kind = h.name.substr(0, lb);
          if (kind == "sigma_omega") sigma_est[field] = h.q50;
          if (kind == "range") range_est[field] = h.q50;
          if (kind == "rho") rho_est[field] = h.q50;
        }
        push("sigma2_eps", config.sigma2_eps, s_eps * s_eps);
        for (const auto& [field, sig] : sigma_est) {
          const bool slope = field != "intercept";
          const std::string suffix = slope ? "1" : "0";
          push("sigma2_" + suffix, slope ? config.sigma2_1 : config.sigma2_0,
               sig * sig);
          push("kappa" + suffix, slope ? config.kappa1 : config.kappa0,
               std::sqrt(8.0) / range_est[field]);
          if (rho_est.count(field))
            push("rho" + suffix, slope ? config.rho1 : config.rho0,
                 rho_est[field]);
        }
      } catch (const std::exception& e) {
        table.failures.push_back(mname + " dataset " + std::to_string(di) +
                                 ": " + e.what());
      }
    }
    for (const auto& [param, tv] : acc) {
      BiasRow row;
      row.model = mname;
      row.parameter = param;
      row.true_value = tv.first;
      row.median_estimate = medianOf(tv.second);
      row.median_bias = row.median_estimate - tv.first;
      row.n_fits = static_cast<int>(tv.second.size());
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

void writeBiasTable(const BiasTable& table, std::ostream& os, bool csv) {
  if (csv) {
    os << "model,parameter,true_value,median_estimate,median_bias,n_fits\n"
       << std::setprecision(10);
    for (const BiasRow& r : table.rows)
      os << r.model << "," << r.parameter << "," << r.true_value << ","
         << r.median_estimate << "," << r.median_bias << "," << r.n_fits
         << "\n";
  } else {
    os << std::left << std::setw(20) << "model" << std::setw(12) << "parameter"
       << std::right << std::setw(12) << "true" << std::setw(14) << "estimate"
       << std::setw(14) << "bias" << std::setw(8) << "n" << "\n";
    os << std::setprecision(4) << std::fixed;
    for (const BiasRow& r : table.rows)
      os << std::left << std::setw(20) << r.model << std::setw(12)
         << r.parameter << std::right << std::setw(12) << r.true_value
         << std::setw(14) << r.median_estimate << std::setw(14)
         << r.median_bias << std::setw(8) << r.n_fits << "\n";
    os.unsetf(std::ios::fixed);
  }
  for (const std::string& f : table.failures) os << "# failed: " << f << "\n";
}

std::vector<std::pair<std::vector<int>, std::vector<int>>> stratifiedSplits(
    const std::vector<std::string>& strata, int n_splits,
    double train_fraction, std::uint64_t seed,
    std::vector<std::string>* warnings) {
  if (strata.empty())
    throw std::invalid_argument("stratified_splits: no rows");
  if (train_fraction <= 0.0 || train_fraction >= 1.0)
    throw std::invalid_argument("stratified_splits: bad train fraction");

  std::map<std::string, std::vector<int>> groups;
  for (size_t i = 0; i < strata.size(); ++i)
    groups[strata[i]].push_back(static_cast<int>(i));

  // largest-remainder allocation of training counts across strata
  const int n = static_cast<int>(strata.size());
  const int target = static_cast<int>(std::lround(train_fraction * n));
  std::vector<std::pair<std::string, int>> base;  // stratum -> train count
  std::vector<std::pair<double, std::string>> remainders;
  int assigned = 0;
  for (const auto& [label, idx] : groups) {
    if (idx.size() == 1) {
      if (warnings)
        warnings->push_back("stratum '" + label +
                            "' has one row: always assigned to training");
      base.push_back({label, 1});
      assigned += 1;
      continue;
    }
    const double ideal = train_fraction * idx.size();
    const int fl = static_cast<int>(std::floor(ideal));
    base.push_back({label, fl});
    assigned += fl;
    remainders.push_back({ideal - fl, label});
  }
  std::sort(remainders.rbegin(), remainders.rend());
  for (const auto& [rem, label] : remainders) {
    if (assigned >= target) break;
    for (auto& [l, c] : base)
      if (l == label &&
          c < static_cast<int>(groups[label].size()) - 1) {
        ++c;
        ++assigned;
        break;
      }
  }

  std::vector<std::pair<std::vector<int>, std::vector<int>>> splits;
  for (int s = 0; s < n_splits; ++s) {
    std::vector<int> train, valid;
    for (const auto& [label, count] : base) {
      std::vector<int> idx = groups[label];
      // Fisher-Yates with the split-specific substream
      NormalStream rng(NormalStream::substream(
          seed, 1000003u * static_cast<std::uint64_t>(s) +
                    std::hash<std::string>{}(label) % 999983u));
      for (size_t i = idx.size(); i > 1; --i)
        std::swap(idx[i - 1],
                  idx[static_cast<size_t>(rng.uniform() * i)]);
      for (size_t i = 0; i < idx.size(); ++i)
        (static_cast<int>(i) < count ? train : valid).push_back(idx[i]);
    }
    std::sort(train.begin(), train.end());
    std::sort(valid.begin(), valid.end());
    splits.push_back({std::move(train), std::move(valid)});
  }
  return splits;
}

MetricRow computeMetrics(const std::vector<double>& predicted,
                         const std::vector<double>& observed,
                         const std::vector<double>* population) {
  const size_t n = predicted.size();
  if (n < 2 || observed.size() != n)
    throw std::invalid_argument("compute_metrics: need >= 2 matched rows");
  if (population && population->size() != n)
    throw std::invalid_argument("compute_metrics: weight length mismatch");

  MetricRow row;
  double se = 0.0, wse = 0.0, wsum = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double d = predicted[i] - observed[i];
    se += d * d;
    const double w = population ? (*population)[i] : 1.0;
    wse += w * d * d;
    wsum += w;
  }
  row.rmse = std::sqrt(se / n);
  if (wsum <= 0.0)
    throw std::invalid_argument("compute_metrics: nonpositive weight total");
  const bool uniform =
      !population || std::all_of(population->begin(), population->end(),
                                 [&](double w) {
                                   return w == (*population)[0];
                                 });
  // uniform weights cancel exactly; route through the same expression so
  // the identity holds bitwise
  row.pwrmse = uniform ? row.rmse : std::sqrt(wse / wsum);

  const double mp = std::accumulate(predicted.begin(), predicted.end(), 0.0) /
                    n;
  const double mo = std::accumulate(observed.begin(), observed.end(), 0.0) / n;
  double spo = 0.0, spp = 0.0, soo = 0.0;
  for (size_t i = 0; i < n; ++i) {
    spo += (predicted[i] - mp) * (observed[i] - mo);
    spp += (predicted[i] - mp) * (predicted[i] - mp);
    soo += (observed[i] - mo) * (observed[i] - mo);
  }
  if (soo > 0.0 && spp > 0.0) row.r2 = (spo * spo) / (spp * soo);
  return row;
}

}  // namespace downscale
