// Command-line front end: mesh building, model fitting, joint-sample
// prediction, stratified cross-validation and the synthetic bias study, all
// driven by a key-value config file. Exit codes: 0 ok, 2 config/IO,
// 3 non-convergence, 4 data misalignment.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "downscale/config.hpp"
#include "downscale/evaluation.hpp"
#include "downscale/inference.hpp"
#include "downscale/predict.hpp"

namespace fs = std::filesystem;
using namespace downscale;

namespace {

struct AlignmentError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonArgs {
  std::string config_path;
  std::string out_override;
  std::optional<long long> seed_override;
};

RunConfig loadConfig(const CommonArgs& args) {
  RunConfig cfg = RunConfig::parseFile(args.config_path);
  if (!args.out_override.empty()) cfg.set("output_dir", args.out_override);
  if (args.seed_override) cfg.set("seed", std::to_string(*args.seed_override));
  if (!cfg.has("seed"))
    throw std::runtime_error(
        "config must set 'seed' (or pass --seed); runs are never silently "
        "nondeterministic");
  return cfg;
}

fs::path outputDir(const RunConfig& cfg) {
  fs::path dir = cfg.get("output_dir", "out");
  fs::create_directories(dir);
  return dir;
}

void writeResolvedConfig(const RunConfig& cfg, const fs::path& dir) {
  std::ofstream f(dir / "config.resolved");
  cfg.write(f);
}

ObservationTable loadObservations(const RunConfig& cfg) {
  const std::string path = cfg.get("observations");
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open observations file: " + path);
  return readObservationsCsv(f, transformFromTag(cfg.get("transform", "none")));
}

std::vector<GridCovariate> loadCovariates(const RunConfig& cfg) {
  std::vector<GridCovariate> covs;
  for (const std::string& entry : cfg.getAll("covariate")) {
    std::istringstream ss(entry);
    std::string path, role;
    ss >> path >> role;
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open covariate raster: " + path);
    GridCovariate g = readRaster(f);
    if (role == "varying")
      g.role = CovariateRole::VaryingQ;
    else if (role == "fixed" || role.empty())
      g.role = CovariateRole::FixedP;
    else
      throw std::runtime_error("covariate role must be fixed|varying, got '" +
                               role + "' in: " + entry);
    covs.push_back(std::move(g));
  }
  return covs;
}

std::vector<Point2> uniqueSiteLocations(const ObservationTable& obs) {
  std::vector<Point2> sites;
  std::set<std::string> seen;
  for (const Observation& o : obs.rows)
    if (seen.insert(o.site_id).second) sites.push_back(o.location);
  return sites;
}

int nTimeOf(const ObservationTable& obs) {
  int t = 0;
  for (const Observation& o : obs.rows) t = std::max(t, o.time_index);
  return t + 1;
}

MeshOptions meshOptionsFrom(const RunConfig& cfg,
                            const std::vector<Point2>& sites) {
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const Point2& p : sites) {
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  const double diag = std::hypot(xmax - xmin, ymax - ymin);
  MeshOptions mo;
  mo.max_edge_inner = cfg.getDouble("mesh.max_edge_inner", diag / 12.0);
  mo.max_edge_outer = cfg.getDouble("mesh.max_edge_outer", diag / 4.0);
  mo.buffer_width = cfg.getDouble("mesh.buffer_width", diag / 5.0);
  mo.cutoff = cfg.getDouble("mesh.cutoff", 0.0);
  mo.min_angle_deg = cfg.getDouble("mesh.min_angle_deg", 21.0);
  return mo;
}

Mesh obtainMesh(const RunConfig& cfg, const ObservationTable& obs,
                bool build_if_missing = true) {
  const std::string path = cfg.get("mesh_file", "");
  if (!path.empty() && fs::exists(path)) {
    std::ifstream f(path);
    return readMesh(f);
  }
  if (!build_if_missing)
    throw std::runtime_error("mesh file not found: " + path);
  const std::vector<Point2> sites = uniqueSiteLocations(obs);
  return buildMesh(sites, meshOptionsFrom(cfg, sites));
}

PriorConfig priorFrom(const RunConfig& cfg) {
  PriorConfig p;
  p.sigma_eps_u = cfg.getDouble("prior.sigma_eps_u", p.sigma_eps_u);
  p.sigma_eps_alpha = cfg.getDouble("prior.sigma_eps_alpha", p.sigma_eps_alpha);
  p.sigma_omega_u = cfg.getDouble("prior.sigma_omega_u", p.sigma_omega_u);
  p.sigma_omega_alpha =
      cfg.getDouble("prior.sigma_omega_alpha", p.sigma_omega_alpha);
  p.range_r0 = cfg.getDouble("prior.range_r0", p.range_r0);
  p.range_alpha = cfg.getDouble("prior.range_alpha", p.range_alpha);
  p.rho_p_positive = cfg.getDouble("prior.rho_p_positive", p.rho_p_positive);
  p.kappa_interpretation =
      cfg.getBool("prior.kappa_interpretation", p.kappa_interpretation);
  p.kappa0 = cfg.getDouble("prior.kappa0", p.kappa0);
  p.kappa_alpha = cfg.getDouble("prior.kappa_alpha", p.kappa_alpha);
  return p;
}

FitOptions fitOptionsFrom(const RunConfig& cfg,
                          const std::string& default_strategy = "grid") {
  FitOptions fo;
  fo.strategy = cfg.get("inference.strategy", default_strategy);
  fo.grid_step = cfg.getDouble("inference.grid_step", fo.grid_step);
  fo.prune_logdrop = cfg.getDouble("inference.prune_logdrop", fo.prune_logdrop);
  fo.grad_tol = cfg.getDouble("inference.grad_tol", fo.grad_tol);
  fo.step_tol = cfg.getDouble("inference.step_tol", fo.step_tol);
  fo.max_iter = cfg.getInt("inference.max_iter", fo.max_iter);
  fo.prior = priorFrom(cfg);
  return fo;
}

AssembledModel assembleFromConfig(const RunConfig& cfg,
                                  const ObservationTable& obs,
                                  const std::vector<GridCovariate>& covs,
                                  const Mesh& mesh) {
  AssemblyOptions ao;
  ao.varying_intercept = cfg.getBool("varying_intercept", true);
  return assemble(obs, covs, mesh, nTimeOf(obs), ao);
}

std::vector<double> parseDoubleList(const std::string& s) {
  std::vector<double> out;
  std::istringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) out.push_back(std::stod(tok));
  return out;
}

std::vector<int> parseIntList(const std::string& s) {
  std::vector<int> out;
  std::istringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) out.push_back(std::stoi(tok));
  return out;
}

std::vector<double> defaultThresholds(const RunConfig& cfg) {
  if (cfg.has("predict.thresholds"))
    return parseDoubleList(cfg.get("predict.thresholds"));
  const std::string pollutant = cfg.get("pollutant", "");
  if (pollutant == "no2") return {40.0};   // WHO guideline, annual mean
  if (pollutant == "pm25") return {10.0};  // WHO guideline, annual mean
  return {};
}

int cmdMesh(const CommonArgs& args) {
  RunConfig cfg = loadConfig(args);
  const fs::path dir = outputDir(cfg);
  ObservationTable obs = loadObservations(cfg);
  const std::vector<Point2> sites = uniqueSiteLocations(obs);
  Mesh mesh = buildMesh(sites, meshOptionsFrom(cfg, sites));

  std::string mesh_path = cfg.get("mesh_file", "");
  if (mesh_path.empty()) mesh_path = (dir / "mesh.txt").string();
  {
    std::ofstream f(mesh_path);
    writeMesh(mesh, f);
  }
  writeResolvedConfig(cfg, dir);

  std::vector<double> edges;
  for (const auto& tri : mesh.triangles)
    for (int k = 0; k < 3; ++k)
      edges.push_back(
          dist(mesh.vertices[tri[k]], mesh.vertices[tri[(k + 1) % 3]]));
  std::sort(edges.begin(), edges.end());
  auto q = [&](double p) {
    return edges[static_cast<size_t>(p * (edges.size() - 1))];
  };
  std::cout << "mesh: " << mesh.numVertices() << " vertices, "
            << mesh.numTriangles() << " triangles -> " << mesh_path << "\n"
            << "edge length quantiles (0/25/50/75/100%): " << q(0.0) << " "
            << q(0.25) << " " << q(0.5) << " " << q(0.75) << " " << q(1.0)
            << "\n";
  return 0;
}

int cmdFit(const CommonArgs& args) {
  RunConfig cfg = loadConfig(args);
  const fs::path dir = outputDir(cfg);
  ObservationTable obs = loadObservations(cfg);
  std::vector<GridCovariate> covs = loadCovariates(cfg);
  Mesh mesh = obtainMesh(cfg, obs);
  AssembledModel model = assembleFromConfig(cfg, obs, covs, mesh);
  FitOptions fo = fitOptionsFrom(cfg);
  writeResolvedConfig(cfg, dir);
  {
    std::ofstream f(dir / "mesh.txt");
    writeMesh(mesh, f);
  }

  try {
    PosteriorBundle bundle = fit(model, mesh, fo);
    {
      std::ofstream f(dir / "fit_report.txt");
      writeFitReport(bundle, f);
    }
    {
      std::ofstream f(dir / "fit_report.kv");
      writeFitKeyValues(bundle, f);
    }
    {
      std::ofstream f(dir / "bundle.json");
      writeBundle(bundle, f);
    }
    std::cout << "fit: K=" << bundle.points.size() << ", "
              << bundle.mode.n_iterations << " iterations, log-evidence "
              << bundle.log_evidence_at_mode << " -> " << dir.string() << "\n";
    return 0;
  } catch (const ConvergenceError& e) {
    std::ofstream f(dir / "fit_report.txt");
    f << "fit did not converge: " << e.what() << "\n";
    f << "best z:";
    for (int i = 0; i < e.best_z.size(); ++i) f << " " << e.best_z[i];
    f << "\ngradient inf-norm: " << e.grad_norm << "\n";
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

// prediction locations: a CSV of x,y rows, or every covariate grid-cell
// centroid that falls inside the mesh hull
std::pair<std::vector<Point2>, std::vector<int>> predictionLocations(
    const RunConfig& cfg, const GridCovariate& grid, const Mesh& mesh) {
  std::vector<Point2> locs;
  std::vector<int> cells;  // covariate cell per location, -1 for file mode
  if (cfg.has("predict.locations_file")) {
    std::ifstream f(cfg.get("predict.locations_file"));
    if (!f)
      throw std::runtime_error("cannot open prediction locations file: " +
                               cfg.get("predict.locations_file"));
    std::string line;
    while (std::getline(f, line)) {
      if (line.empty() || line[0] == '#' || line[0] == 'x') continue;
      std::istringstream ss(line);
      std::string a, b;
      std::getline(ss, a, ',');
      std::getline(ss, b, ',');
      locs.push_back({std::stod(a), std::stod(b)});
      cells.push_back(-1);
    }
    return {locs, cells};
  }
  for (int r = 0; r < grid.n_rows; ++r)
    for (int c = 0; c < grid.n_cols; ++c) {
      const Point2 p{grid.x0 + (c + 0.5) * grid.dx,
                     grid.y0 + (r + 0.5) * grid.dy};
      try {
        locateAndWeights(mesh, p);
      } catch (const std::exception&) {
        continue;  // centroid outside the mesh hull: not predictable
      }
      locs.push_back(p);
      cells.push_back(r * grid.n_cols + c);
    }
  if (locs.empty())
    throw std::runtime_error("no prediction locations inside the mesh hull");
  return {locs, cells};
}

void writeStatRaster(const GridCovariate& like, const std::string& name,
                     const std::vector<int>& cells,
                     const std::vector<double>& values, const fs::path& path) {
  GridCovariate out = like;
  out.name = name;
  out.values = {Eigen::MatrixXd::Constant(
      like.n_rows, like.n_cols, std::numeric_limits<double>::quiet_NaN())};
  for (size_t i = 0; i < cells.size(); ++i)
    if (cells[i] >= 0)
      out.values[0](cells[i] / like.n_cols, cells[i] % like.n_cols) =
          values[i];
  std::ofstream f(path);
  writeRaster(out, f);
}

int cmdPredict(const CommonArgs& args) {
  RunConfig cfg = loadConfig(args);
  const fs::path dir = outputDir(cfg);
  ObservationTable obs = loadObservations(cfg);
  std::vector<GridCovariate> covs = loadCovariates(cfg);
  if (covs.empty())
    throw std::runtime_error("predict needs at least one covariate raster");
  Mesh mesh = obtainMesh(cfg, obs);
  AssembledModel model = assembleFromConfig(cfg, obs, covs, mesh);

  const std::string bundle_path =
      (fs::path(cfg.get("output_dir", "out")) / "bundle.json").string();
  std::ifstream bf(bundle_path);
  if (!bf)
    throw std::runtime_error("cannot open fitted bundle: " + bundle_path +
                             " (run fit first)");
  PosteriorBundle bundle = readBundle(bf, model, mesh);

  auto [locs, cells] = predictionLocations(cfg, covs[0], mesh);
  std::vector<int> times =
      cfg.has("predict.times") ? parseIntList(cfg.get("predict.times"))
                               : std::vector<int>{};
  if (times.empty())
    for (int t = 0; t < model.n_time; ++t) times.push_back(t);

  PredictionRequest req;
  req.locations = locs;
  req.times = times;
  req.covariates = covs;
  req.thresholds = defaultThresholds(cfg);

  const int n_samples = cfg.getInt("predict.n_samples", 1000);
  const std::uint64_t seed =
      static_cast<std::uint64_t>(cfg.getInt("predict.seed",
                                            cfg.getInt("seed", 1)));
  const bool include_noise = cfg.getBool("predict.include_noise", false);
  SampleCube cube =
      predict(bundle, model, mesh, req, n_samples, seed, include_noise);
  SummaryRaster summary = summarize(cube, req.thresholds);

  for (size_t ti = 0; ti < times.size(); ++ti) {
    const std::string suffix = "_t" + std::to_string(times[ti]);
    auto stat = [&](const std::string& name,
                    const std::function<double(const CellSummary&)>& pick) {
      std::vector<double> vals(locs.size());
      for (size_t i = 0; i < locs.size(); ++i)
        vals[i] = pick(summary.cell(static_cast<int>(i),
                                    static_cast<int>(ti)));
      writeStatRaster(covs[0], name, cells, vals,
                      dir / (name + suffix + ".raster"));
    };
    stat("median", [](const CellSummary& c) { return c.median; });
    stat("mean", [](const CellSummary& c) { return c.mean; });
    stat("sd", [](const CellSummary& c) { return c.sd; });
    stat("q025", [](const CellSummary& c) { return c.q025; });
    stat("q975", [](const CellSummary& c) { return c.q975; });
    for (size_t k = 0; k < req.thresholds.size(); ++k) {
      std::ostringstream name;
      name << "exceed_" << req.thresholds[k];
      stat(name.str(),
           [k](const CellSummary& c) { return c.exceedance[k]; });
    }
  }

  if (cfg.has("population")) {
    std::ifstream pf(cfg.get("population"));
    if (!pf)
      throw std::runtime_error("cannot open population raster: " +
                               cfg.get("population"));
    GridCovariate pop = readRaster(pf);
    if (pop.n_cols != covs[0].n_cols || pop.n_rows != covs[0].n_rows)
      throw AlignmentError(
          "population raster is " + std::to_string(pop.n_cols) + "x" +
          std::to_string(pop.n_rows) + " but the covariate grid is " +
          std::to_string(covs[0].n_cols) + "x" +
          std::to_string(covs[0].n_rows));
    std::vector<double> weights(locs.size());
    for (size_t i = 0; i < locs.size(); ++i)
      weights[i] = covariateAt(pop, locs[i], 0);
    WeightedSeries series = populationWeighted(cube, weights);
    std::ofstream f(dir / "population_weighted.csv");
    f << "time,median,q025,q975\n" << std::setprecision(10);
    for (size_t ti = 0; ti < times.size(); ++ti)
      f << times[ti] << "," << series.median[ti] << "," << series.q025[ti]
        << "," << series.q975[ti] << "\n";
  }

  if (cfg.has("predict.diff_times")) {
    std::vector<int> dt = parseIntList(cfg.get("predict.diff_times"));
    if (dt.size() != 2)
      throw std::runtime_error("predict.diff_times needs two indices a,b");
    auto ia = std::find(times.begin(), times.end(), dt[0]);
    auto ib = std::find(times.begin(), times.end(), dt[1]);
    if (ia == times.end() || ib == times.end())
      throw std::runtime_error(
          "predict.diff_times indices must be among predict.times");
    SampleCube d = difference(cube, static_cast<int>(ia - times.begin()),
                              static_cast<int>(ib - times.begin()));
    SummaryRaster ds = summarize(d, {});
    std::vector<double> med(locs.size());
    for (size_t i = 0; i < locs.size(); ++i)
      med[i] = ds.cell(static_cast<int>(i), 0).median;
    writeStatRaster(covs[0], "difference_median", cells, med,
                    dir / "difference_median.raster");
  }

  if (cfg.getBool("predict.write_cube", false)) {
    std::ofstream f(dir / "cube.bin", std::ios::binary);
    writeSampleCube(cube, f);
  }
  writeResolvedConfig(cfg, dir);
  std::cout << "predict: " << locs.size() << " locations x " << times.size()
            << " times, " << n_samples << " samples -> " << dir.string()
            << "\n";
  return 0;
}

int cmdCv(const CommonArgs& args) {
  RunConfig cfg = loadConfig(args);
  const fs::path dir = outputDir(cfg);
  ObservationTable obs = loadObservations(cfg);
  std::vector<GridCovariate> covs = loadCovariates(cfg);
  Mesh mesh = obtainMesh(cfg, obs);
  const int n_time = nTimeOf(obs);

  const std::string strata_kind = cfg.get("cv.strata", "time");
  std::vector<std::string> labels;
  for (const Observation& o : obs.rows)
    labels.push_back(strata_kind == "site"
                         ? o.site_id
                         : "t" + std::to_string(o.time_index));
  const int n_splits = cfg.getInt("cv.n_splits", 25);
  const double train_fraction = cfg.getDouble("cv.train_fraction", 0.8);
  std::vector<std::string> warnings;
  auto splits =
      stratifiedSplits(labels, n_splits, train_fraction,
                       static_cast<std::uint64_t>(cfg.getInt("seed", 1)),
                       &warnings);

  std::optional<GridCovariate> pop;
  if (cfg.has("population")) {
    std::ifstream pf(cfg.get("population"));
    if (!pf)
      throw std::runtime_error("cannot open population raster: " +
                               cfg.get("population"));
    pop = readRaster(pf);
  }

  FitOptions fo = fitOptionsFrom(cfg, "eb");
  AssemblyOptions ao;
  ao.varying_intercept = cfg.getBool("varying_intercept", true);

  std::ofstream csv(dir / "cv_metrics.csv");
  csv << "split,scope,n,rmse,pwrmse,r2\n" << std::setprecision(10);
  for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";

  for (size_t s = 0; s < splits.size(); ++s) {
    const auto& [train_idx, valid_idx] = splits[s];
    ObservationTable train;
    train.transform = obs.transform;
    for (int i : train_idx) train.rows.push_back(obs.rows[i]);
    AssembledModel model = assemble(train, covs, mesh, n_time, ao);
    PosteriorBundle bundle = fit(model, mesh, fo);

    // point prediction: weighted posterior mean of the linear predictor,
    // inverse-transformed; metrics live on the original scale
    auto predictRows = [&](const std::vector<int>& rows,
                           std::vector<double>& pred,
                           std::vector<double>& seen,
                           std::vector<double>& weights) {
      std::map<int, std::vector<int>> by_time;
      for (int i : rows) by_time[obs.rows[i].time_index].push_back(i);
      for (const auto& [t, idx] : by_time) {
        std::vector<Point2> locs;
        for (int i : idx) locs.push_back(obs.rows[i].location);
        PredictionDesign d = predictionDesign(model, covs, mesh, locs, {t});
        Eigen::VectorXd eta = Eigen::VectorXd::Zero(d.F.rows());
        for (const IntegrationPoint& p : bundle.points) {
          Eigen::VectorXd e = d.F * p.cond.mu.head(d.F.cols());
          Eigen::Index off = d.F.cols();
          for (const auto& V : d.V_blocks) {
            e += V * p.cond.mu.segment(off, V.cols());
            off += V.cols();
          }
          eta += p.weight * e;
        }
        for (size_t r = 0; r < idx.size(); ++r) {
          pred.push_back(inverseTransformScalar(eta[static_cast<int>(r)],
                                                obs.transform));
          seen.push_back(obs.rows[idx[r]].value);
          weights.push_back(
              pop ? covariateAt(*pop, obs.rows[idx[r]].location, 0) : 1.0);
        }
      }
    };
    auto emit = [&](const std::string& scope, const std::vector<int>& rows) {
      std::vector<double> pred, seen, weights;
      predictRows(rows, pred, seen, weights);
      MetricRow m = computeMetrics(pred, seen, pop ? &weights : nullptr);
      csv << s << "," << scope << "," << rows.size() << "," << m.rmse << ","
          << m.pwrmse << ",";
      if (m.r2)
        csv << *m.r2;
      else
        csv << "NA";
      csv << "\n";
    };
    emit("in", train_idx);
    emit("out", valid_idx);
  }
  writeResolvedConfig(cfg, dir);
  std::cout << "cv: " << splits.size() << " splits -> "
            << (dir / "cv_metrics.csv").string() << "\n";
  return 0;
}

int cmdSimstudy(const CommonArgs& args) {
  RunConfig cfg = loadConfig(args);
  const fs::path dir = outputDir(cfg);

  SimulationConfig sc;
  sc.domain = cfg.getDouble("sim.domain", sc.domain);
  sc.grid_cols = cfg.getInt("sim.grid_cols", sc.grid_cols);
  sc.grid_rows = cfg.getInt("sim.grid_rows", sc.grid_rows);
  sc.n_sites = cfg.getInt("sim.n_sites", sc.n_sites);
  sc.n_time = cfg.getInt("sim.n_time", sc.n_time);
  sc.n_datasets = cfg.getInt("sim.n_datasets", sc.n_datasets);
  sc.beta0 = cfg.getDouble("sim.beta0", sc.beta0);
  sc.beta1 = cfg.getDouble("sim.beta1", sc.beta1);
  sc.kappa0 = cfg.getDouble("sim.kappa0", sc.kappa0);
  sc.sigma2_0 = cfg.getDouble("sim.sigma2_0", sc.sigma2_0);
  sc.kappa1 = cfg.getDouble("sim.kappa1", sc.kappa1);
  sc.sigma2_1 = cfg.getDouble("sim.sigma2_1", sc.sigma2_1);
  sc.rho0 = cfg.getDouble("sim.rho0", sc.rho0);
  sc.rho1 = cfg.getDouble("sim.rho1", sc.rho1);
  sc.sigma2_eps = cfg.getDouble("sim.sigma2_eps", sc.sigma2_eps);
  sc.sim_mesh_n = cfg.getInt("sim.mesh_n", sc.sim_mesh_n);
  sc.seed = static_cast<std::uint64_t>(cfg.getInt("seed", 1));

  std::vector<SimulatedDataset> datasets;
  for (int i = 0; i < sc.n_datasets; ++i)
    datasets.push_back(generateDataset(sc, i));

  std::vector<ModelSpec> specs{ModelSpec::FixedOnly,
                               ModelSpec::SpatialIntercept,
                               ModelSpec::SpatialSlope};
  if (sc.n_time > 1) specs.push_back(ModelSpec::SpatioTemporal);

  BiasTable table =
      runModelComparison(sc, datasets, specs, fitOptionsFrom(cfg, "eb"));
  {
    std::ofstream f(dir / "bias_table.txt");
    writeBiasTable(table, f, false);
  }
  {
    std::ofstream f(dir / "bias_table.csv");
    writeBiasTable(table, f, true);
  }
  writeResolvedConfig(cfg, dir);
  writeBiasTable(table, std::cout, false);
  if (!table.failures.empty()) return 3;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"latent Gaussian downscaling of gridded covariates against "
               "point measurements"};
  app.require_subcommand(1);

  CommonArgs args;
  long long seed = 0;
  std::map<std::string, std::function<int(const CommonArgs&)>> handlers{
      {"mesh", cmdMesh},       {"fit", cmdFit},
      {"predict", cmdPredict}, {"cv", cmdCv},
      {"simstudy", cmdSimstudy}};
  for (auto& [name, fn] : handlers) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", args.config_path, "run configuration file")
        ->required();
    sub->add_option("--out", args.out_override,
                    "output directory (overrides config output_dir)");
    auto* opt = sub->add_option("--seed", seed, "seed override");
    sub->callback([&args, opt, &seed] {
      if (opt->count()) args.seed_override = seed;
    });
  }

  CLI11_PARSE(app, argc, argv);
  const std::string chosen = app.get_subcommands()[0]->get_name();
  try {
    return handlers[chosen](args);
  } catch (const AlignmentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const ConvergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
