#include "downscale/predict.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "downscale/rng.hpp"

namespace downscale {

JointSamples sampleJoint(const PosteriorBundle& bundle, int n_samples,
                         std::uint64_t seed) {
  if (bundle.points.empty())
    throw std::invalid_argument("sample_joint: empty bundle");
  if (n_samples < 1)
    throw std::invalid_argument("sample_joint: n_samples must be positive");
  const int dim = static_cast<int>(bundle.points[0].cond.mu.size());

  JointSamples js;
  js.theta.resize(dim, n_samples);
  js.point_index.resize(n_samples);
  js.sigma_eps.resize(n_samples);

  NormalStream pick(NormalStream::substream(seed, 0));
  std::vector<double> cumw;
  double acc = 0.0;
  for (const IntegrationPoint& p : bundle.points) {
    acc += p.weight;
    cumw.push_back(acc);
  }
  for (int s = 0; s < n_samples; ++s) {
    const double u = pick.uniform() * acc;
    const int k = static_cast<int>(
        std::lower_bound(cumw.begin(), cumw.end(), u) - cumw.begin());
    const IntegrationPoint& p =
        bundle.points[std::min<size_t>(k, bundle.points.size() - 1)];
    js.point_index[s] = static_cast<int>(
        std::min<size_t>(k, bundle.points.size() - 1));
    js.sigma_eps[s] = p.hp.sigma_eps;

    NormalStream rng(NormalStream::substream(seed, 1 + s));
    Eigen::VectorXd z(dim);
    for (int i = 0; i < dim; ++i) z[i] = rng.normal();
    // Q = P' L L' P  =>  draw = mu + P^{-1} L^{-T} z
    js.theta.col(s) =
        p.cond.mu + p.cond.chol->permutationPinv() *
                        Eigen::VectorXd(p.cond.chol->matrixU().solve(z));
  }
  return js;
}

SampleCube predict(const PosteriorBundle& bundle, const AssembledModel& model,
                   const Mesh& mesh, const PredictionRequest& request,
                   int n_samples, std::uint64_t seed, bool include_noise) {
  PredictionDesign design = predictionDesign(model, request.covariates, mesh,
                                             request.locations, request.times);
  const int nl = static_cast<int>(request.locations.size());
  const int nt = static_cast<int>(request.times.size());
  const int n_rows = nl * nt;

  // joint prediction operator [F* | V*...] matching the latent layout
  Eigen::Index cols = design.F.cols();
  for (const auto& V : design.V_blocks) cols += V.cols();
  Eigen::SparseMatrix<double> A(n_rows, cols);
  {
    std::vector<Eigen::Triplet<double>> trips;
    for (int j = 0; j < design.F.cols(); ++j)
      for (int i = 0; i < n_rows; ++i)
        if (design.F(i, j) != 0.0) trips.emplace_back(i, j, design.F(i, j));
    Eigen::Index off = design.F.cols();
    for (const auto& V : design.V_blocks) {
      for (int k = 0; k < V.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(V, k); it; ++it)
          trips.emplace_back(it.row(), off + it.col(), it.value());
      off += V.cols();
    }
    A.setFromTriplets(trips.begin(), trips.end());
  }

  JointSamples js = sampleJoint(bundle, n_samples, seed);
  if (js.theta.rows() != cols)
    throw std::invalid_argument(
        "predict: bundle latent dimension does not match the model");

  SampleCube cube;
  cube.n_samples = n_samples;
  cube.n_locations = nl;
  cube.n_times = nt;
  cube.seed = seed;
  cube.values.resize(static_cast<size_t>(n_samples) * nl * nt);

  NormalStream noise(NormalStream::substream(seed, 0x9e0feed5u));
  for (int s = 0; s < n_samples; ++s) {
    Eigen::VectorXd eta = A * js.theta.col(s);
    if (include_noise)
      for (int i = 0; i < n_rows; ++i)
        eta[i] += js.sigma_eps[s] * noise.normal();
    for (int ti = 0; ti < nt; ++ti)
      for (int i = 0; i < nl; ++i) {
        const double v = eta[ti * nl + i];
        cube.at(s, i, ti) = request.apply_inverse_transform
                                ? inverseTransformScalar(v, model.transform)
                                : v;
      }
  }
  return cube;
}

double quantileType7(std::vector<double> x, double q) {
  if (x.empty()) throw std::invalid_argument("quantile: empty sample");
  std::sort(x.begin(), x.end());
  const double h = (static_cast<double>(x.size()) - 1.0) * q;
  const size_t lo = static_cast<size_t>(std::floor(h));
  if (lo + 1 >= x.size()) return x.back();
  return x[lo] + (h - lo) * (x[lo + 1] - x[lo]);
}

SummaryRaster summarize(const SampleCube& cube,
                        const std::vector<double>& thresholds) {
  if (cube.n_samples < 1)
    throw std::invalid_argument("summarize: empty cube");
  SummaryRaster out;
  out.n_locations = cube.n_locations;
  out.n_times = cube.n_times;
  out.thresholds = thresholds;
  out.cells.resize(static_cast<size_t>(cube.n_locations) * cube.n_times);

  std::vector<double> buf(cube.n_samples);
  for (int loc = 0; loc < cube.n_locations; ++loc)
    for (int t = 0; t < cube.n_times; ++t) {
      for (int s = 0; s < cube.n_samples; ++s) buf[s] = cube.at(s, loc, t);
      CellSummary& c = out.cells[static_cast<size_t>(loc) * cube.n_times + t];
      const double mean =
          std::accumulate(buf.begin(), buf.end(), 0.0) / buf.size();
      double ss = 0.0;
      for (double v : buf) ss += (v - mean) * (v - mean);
      c.mean = mean;
      c.sd = buf.size() > 1 ? std::sqrt(ss / (buf.size() - 1)) : 0.0;
      std::vector<double> sorted = buf;
      std::sort(sorted.begin(), sorted.end());
      auto q = [&](double p) {
        const double h = (sorted.size() - 1.0) * p;
        const size_t lo = static_cast<size_t>(std::floor(h));
        if (lo + 1 >= sorted.size()) return sorted.back();
        return sorted[lo] + (h - lo) * (sorted[lo + 1] - sorted[lo]);
      };
      c.median = q(0.5);
      c.q025 = q(0.025);
      c.q975 = q(0.975);
      for (double thr : thresholds) {
        int count = 0;
        for (double v : buf)
          if (v > thr) ++count;
        c.exceedance.push_back(static_cast<double>(count) / buf.size());
      }
    }
  return out;
}

WeightedSeries populationWeighted(const SampleCube& cube,
                                  const std::vector<double>& population) {
  if (static_cast<int>(population.size()) != cube.n_locations)
    throw std::invalid_argument(
        "population_weighted: weight count does not match locations");
  double wsum = 0.0;
  for (double w : population) {
    if (w < 0.0)
      throw std::invalid_argument("population_weighted: negative weight");
    wsum += w;
  }
  if (wsum == 0.0)
    throw std::invalid_argument("population_weighted: all weights zero");

  WeightedSeries out;
  out.samples.resize(cube.n_samples, cube.n_times);
  for (int t = 0; t < cube.n_times; ++t)
    for (int s = 0; s < cube.n_samples; ++s) {
      double acc = 0.0;
      for (int i = 0; i < cube.n_locations; ++i)
        acc += population[i] * cube.at(s, i, t);
      out.samples(s, t) = acc / wsum;
    }
  for (int t = 0; t < cube.n_times; ++t) {
    std::vector<double> col(out.samples.col(t).begin(),
                            out.samples.col(t).end());
    out.median.push_back(quantileType7(col, 0.5));
    out.q025.push_back(quantileType7(col, 0.025));
    out.q975.push_back(quantileType7(col, 0.975));
  }
  return out;
}

SampleCube difference(const SampleCube& cube, int t_a, int t_b) {
  if (t_a < 0 || t_a >= cube.n_times || t_b < 0 || t_b >= cube.n_times)
    throw std::invalid_argument("difference: time index out of range");
  SampleCube out;
  out.n_samples = cube.n_samples;
  out.n_locations = cube.n_locations;
  out.n_times = 1;
  out.seed = cube.seed;
  out.bundle_fingerprint = cube.bundle_fingerprint;
  out.values.resize(static_cast<size_t>(cube.n_samples) * cube.n_locations);
  for (int s = 0; s < cube.n_samples; ++s)
    for (int i = 0; i < cube.n_locations; ++i)
      out.at(s, i, 0) = cube.at(s, i, t_b) - cube.at(s, i, t_a);
  return out;
}

void writeSampleCube(const SampleCube& cube, std::ostream& os) {
  os << "downscale-cube " << cube.n_samples << " " << cube.n_locations << " "
     << cube.n_times << " " << cube.seed << "\n";
  static_assert(sizeof(double) == 8);
  // storage is little-endian float64 (contract of the export format)
  os.write(reinterpret_cast<const char*>(cube.values.data()),
           static_cast<std::streamsize>(cube.values.size() * sizeof(double)));
}

SampleCube readSampleCube(std::istream& is) {
  std::string magic;
  SampleCube cube;
  is >> magic >> cube.n_samples >> cube.n_locations >> cube.n_times >>
      cube.seed;
  if (magic != "downscale-cube" || !is)
    throw std::runtime_error("sample cube: bad header");
  is.ignore(1);  // newline
  cube.values.resize(static_cast<size_t>(cube.n_samples) * cube.n_locations *
                     cube.n_times);
  is.read(reinterpret_cast<char*>(cube.values.data()),
          static_cast<std::streamsize>(cube.values.size() * sizeof(double)));
  if (!is) throw std::runtime_error("sample cube: truncated data");
  return cube;
}

}  // namespace downscale
