#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "downscale/inference.hpp"
#include "downscale/model.hpp"

namespace downscale {

// Synthetic-data study: Y_st = (b0 + b0_field) + (b1 + b1_field) X + eps,
// fields drawn from Matern GMRFs on a buffered simulation mesh.
struct SimulationConfig {
  // covariate grid over [0, domain]^2; the domain is several correlation
  // ranges across so realized field means stay decoupled from the fixed
  // effects
  double domain = 3.0;
  int grid_cols = 100, grid_rows = 100;
  int n_sites = 500;
  int n_time = 1;
  double beta0 = 1.0, beta1 = 0.75;
  double kappa0 = 10.0, sigma2_0 = 0.2;
  double kappa1 = 15.0, sigma2_1 = 0.01;
  double rho0 = 0.8, rho1 = 0.8;  // used when n_time > 1
  double sigma2_eps = 0.1;
  int n_datasets = 10;
  std::uint64_t seed = 1;
  int sim_mesh_n = 73;  // structured field-sampling mesh resolution
  std::optional<GridCovariate> covariate;    // synthetic smooth when absent
  std::optional<std::vector<Point2>> sites;  // sampled layout when absent
};

struct SimulatedDataset {
  ObservationTable obs;
  GridCovariate covariate;
  std::vector<Point2> sites;
};

// Site layout with Table-1-like cell multiplicity (most cells hold one
// monitor, a tail holds several); fixed across dataset indices.
std::vector<Point2> sampleSites(const SimulationConfig& config);

GridCovariate syntheticCovariate(const SimulationConfig& config);

// Deterministic per (config.seed, dataset_index).
SimulatedDataset generateDataset(const SimulationConfig& config,
                                 int dataset_index);

enum class ModelSpec {
  FixedOnly,           // (i)   constant intercept and slope
  SpatialIntercept,    // (ii)  varying intercept, constant slope
  SpatialSlope,        // (iii) varying intercept and slope
  SpatioTemporal       // (iv)  varying intercept and slope with AR(1) time
};

std::string modelSpecName(ModelSpec spec);

// Assembly matching a comparison model; the covariate role and field layout
// encode the spec.
AssembledModel assembleForSpec(const SimulatedDataset& data, ModelSpec spec,
                               const Mesh& mesh, int n_time);

struct BiasRow {
  std::string model;
  std::string parameter;
  double true_value = 0.0;
  double median_estimate = 0.0;
  double median_bias = 0.0;
  int n_fits = 0;  // datasets that converged and entered the medians
};

struct BiasTable {
  std::vector<BiasRow> rows;
  std::vector<std::string> failures;  // per-dataset fit failures, flagged

  const BiasRow* find(const std::string& model,
                      const std::string& parameter) const;
};

BiasTable runModelComparison(const SimulationConfig& config,
                             const std::vector<SimulatedDataset>& datasets,
                             const std::vector<ModelSpec>& specs,
                             const FitOptions& base_options = {});

void writeBiasTable(const BiasTable& table, std::ostream& os, bool csv);

// Stratified train/validation splits, deterministic per seed. Within every
// stratum the train count follows largest-remainder rounding of the train
// fraction; singleton strata go to training with a warning.
std::vector<std::pair<std::vector<int>, std::vector<int>>> stratifiedSplits(
    const std::vector<std::string>& strata, int n_splits,
    double train_fraction, std::uint64_t seed,
    std::vector<std::string>* warnings = nullptr);

struct MetricRow {
  double rmse = 0.0;
  double pwrmse = 0.0;
  std::optional<double> r2;  // missing when observed variance is zero
};

MetricRow computeMetrics(const std::vector<double>& predicted,
                         const std::vector<double>& observed,
                         const std::vector<double>* population = nullptr);

}  // namespace downscale
