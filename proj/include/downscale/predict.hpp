#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "downscale/inference.hpp"
#include "downscale/model.hpp"

namespace downscale {

struct PredictionRequest {
  std::vector<Point2> locations;
  std::vector<int> times;
  std::vector<GridCovariate> covariates;
  bool apply_inverse_transform = true;
  std::vector<double> thresholds;  // original concentration scale
};

// Joint posterior draws: one integration point chosen per sample by its
// weight, then theta from the exact Gaussian conditional at that point.
struct JointSamples {
  Eigen::MatrixXd theta;            // latent dim x n_samples
  std::vector<int> point_index;     // chosen integration point per sample
  std::vector<double> sigma_eps;    // observation sd per sample
};

JointSamples sampleJoint(const PosteriorBundle& bundle, int n_samples,
                         std::uint64_t seed);

// Samples on the original concentration scale, sample-major storage:
// value(s, location, time).
struct SampleCube {
  int n_samples = 0;
  int n_locations = 0;
  int n_times = 0;
  std::vector<double> values;
  std::uint64_t seed = 0;
  std::string bundle_fingerprint;

  double& at(int s, int loc, int t) {
    return values[(static_cast<size_t>(s) * n_locations + loc) * n_times + t];
  }
  double at(int s, int loc, int t) const {
    return values[(static_cast<size_t>(s) * n_locations + loc) * n_times + t];
  }
};

SampleCube predict(const PosteriorBundle& bundle, const AssembledModel& model,
                   const Mesh& mesh, const PredictionRequest& request,
                   int n_samples, std::uint64_t seed, bool include_noise);

// Per-(location, time) summaries of a sample cube. Percentiles use linear
// interpolation of order statistics (type 7).
struct CellSummary {
  double median = 0.0, mean = 0.0, sd = 0.0, q025 = 0.0, q975 = 0.0;
  std::vector<double> exceedance;  // one entry per threshold
};

struct SummaryRaster {
  int n_locations = 0;
  int n_times = 0;
  std::vector<double> thresholds;
  std::vector<CellSummary> cells;  // index: loc * n_times + t

  const CellSummary& cell(int loc, int t) const {
    return cells[static_cast<size_t>(loc) * n_times + t];
  }
};

double quantileType7(std::vector<double> sorted_ascending, double q);

SummaryRaster summarize(const SampleCube& cube,
                        const std::vector<double>& thresholds);

// Per sample and time: sum(w_i x_i) / sum(w_i); full sample distribution
// plus median and the 95% interval.
struct WeightedSeries {
  Eigen::MatrixXd samples;  // n_samples x n_times
  std::vector<double> median, q025, q975;
};

WeightedSeries populationWeighted(const SampleCube& cube,
                                  const std::vector<double>& population);

// Paired within-sample differences value_{t_b} - value_{t_a}, returned as a
// single-time cube so summaries reuse summarize().
SampleCube difference(const SampleCube& cube, int t_a, int t_b);

// Binary cube export: ascii header line "downscale-cube n_samples
// n_locations n_times seed" then little-endian float64 values.
void writeSampleCube(const SampleCube& cube, std::ostream& os);
SampleCube readSampleCube(std::istream& is);

}  // namespace downscale
