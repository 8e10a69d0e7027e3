#include "downscale/model.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace downscale {

Transform transformFromTag(const std::string& tag) {
  if (tag == "sqrt") return Transform::Sqrt;
  if (tag == "log") return Transform::Log;
  if (tag == "none") return Transform::None;
  throw std::invalid_argument("unknown transform tag: " + tag);
}

std::string transformTag(Transform t) {
  switch (t) {
    case Transform::Sqrt: return "sqrt";
    case Transform::Log: return "log";
    default: return "none";
  }
}

Eigen::VectorXd transformResponse(const Eigen::VectorXd& v, Transform t) {
  Eigen::VectorXd out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    switch (t) {
      case Transform::None:
        out[i] = v[i];
        break;
      case Transform::Sqrt:
        if (v[i] < 0.0)
          throw std::domain_error("transform_response: sqrt of negative at row " +
                                  std::to_string(i));
        out[i] = std::sqrt(v[i]);
        break;
      case Transform::Log:
        if (v[i] <= 0.0)
          throw std::domain_error("transform_response: log of nonpositive at row " +
                                  std::to_string(i));
        out[i] = std::log(v[i]);
        break;
    }
  }
  return out;
}

double inverseTransformScalar(double v, Transform t) {
  switch (t) {
    case Transform::Sqrt: return v * v;
    case Transform::Log: return std::exp(v);
    default: return v;
  }
}

Eigen::VectorXd inverseTransform(const Eigen::VectorXd& v, Transform t) {
  Eigen::VectorXd out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i)
    out[i] = inverseTransformScalar(v[i], t);
  return out;
}

Eigen::VectorXd altitudeTransform(const Eigen::VectorXd& altitude_m) {
  if (altitude_m.size() == 0)
    throw std::invalid_argument("altitude_transform: empty input");
  const double lo = altitude_m.minCoeff();
  Eigen::VectorXd a = altitude_m.array() - lo;
  const double hi = a.maxCoeff();
  if (hi == 0.0) return Eigen::VectorXd::Zero(a.size());
  return (a / hi).cwiseSqrt();
}

CellIndex pointToCell(const GridCovariate& g, const Point2& p) {
  const double xmax = g.x0 + g.n_cols * g.dx;
  const double ymax = g.y0 + g.n_rows * g.dy;
  const double ex = 4.0 * std::abs(xmax) *
                    std::numeric_limits<double>::epsilon();
  const double ey = 4.0 * std::abs(ymax) *
                    std::numeric_limits<double>::epsilon();
  if (p.x < g.x0 - ex || p.x > xmax + ex || p.y < g.y0 - ey || p.y > ymax + ey)
    throw std::out_of_range("point_to_cell: point outside grid extent");
  int col = static_cast<int>(std::floor((p.x - g.x0) / g.dx));
  int row = static_cast<int>(std::floor((p.y - g.y0) / g.dy));
  col = std::clamp(col, 0, g.n_cols - 1);
  row = std::clamp(row, 0, g.n_rows - 1);
  return {col, row};
}

double covariateAt(const GridCovariate& g, const Point2& p, int time) {
  const CellIndex c = pointToCell(g, p);
  const int t = g.numTimes() == 1 ? 0 : time;
  return g.at(t, c.col, c.row);
}

int AssembledModel::latentDim() const {
  int d = numFixed();
  for (const FieldSpec& f : field_specs) d += f.n_time * n_vertices;
  return d;
}

namespace {

void checkGridTimes(const std::vector<GridCovariate>& covariates, int n_time) {
  for (const GridCovariate& g : covariates)
    if (g.numTimes() != 1 && g.numTimes() != n_time)
      throw std::invalid_argument(
          "assemble: covariate '" + g.name + "' has " +
          std::to_string(g.numTimes()) + " time layers, expected 1 or " +
          std::to_string(n_time));
}

}  // namespace

AssembledModel assemble(const ObservationTable& obs,
                        const std::vector<GridCovariate>& covariates,
                        const Mesh& mesh, int n_time,
                        const AssemblyOptions& opts) {
  const int n = static_cast<int>(obs.rows.size());
  if (n == 0) throw std::invalid_argument("assemble: no observations");
  checkGridTimes(covariates, n_time);

  std::set<std::pair<std::string, int>> seen;
  for (const Observation& o : obs.rows) {
    if (o.time_index < 0 || o.time_index >= n_time)
      throw std::invalid_argument("assemble: time_index out of range for site " +
                                  o.site_id);
    if (!seen.insert({o.site_id, o.time_index}).second)
      throw std::invalid_argument("assemble: duplicate (site_id, time): " +
                                  o.site_id + ", t=" +
                                  std::to_string(o.time_index));
  }

  AssembledModel m;
  m.transform = obs.transform;
  m.n_time = n_time;
  m.n_vertices = mesh.numVertices();

  Eigen::VectorXd raw(n);
  for (int i = 0; i < n; ++i) raw[i] = obs.rows[i].value;
  m.y = transformResponse(raw, obs.transform);

  // basis evaluations, with the spec'd error listing
  std::vector<BasisEvaluation> basis(n);
  {
    std::string bad;
    for (int i = 0; i < n; ++i) {
      try {
        basis[i] = locateAndWeights(mesh, obs.rows[i].location);
        for (const GridCovariate& g : covariates)
          (void)pointToCell(g, obs.rows[i].location);
      } catch (const std::exception&) {
        bad += (bad.empty() ? "" : "; ") + obs.rows[i].site_id + " t=" +
               std::to_string(obs.rows[i].time_index);
      }
    }
    if (!bad.empty())
      throw std::invalid_argument("assemble: unlocatable observations: " + bad);
  }

  // fixed design: intercept, then one column per covariate (the fixed part
  // beta_q of a varying coefficient also lives here)
  const int ncov = static_cast<int>(covariates.size());
  m.F.resize(n, 1 + ncov);
  m.F.col(0).setOnes();
  m.fixed_names = {"intercept"};
  for (int c = 0; c < ncov; ++c) {
    m.fixed_names.push_back(covariates[c].name);
    for (int i = 0; i < n; ++i)
      m.F(i, 1 + c) = covariateAt(covariates[c], obs.rows[i].location,
                                  obs.rows[i].time_index);
  }
  m.col_center = Eigen::VectorXd::Zero(1 + ncov);
  m.col_scale = Eigen::VectorXd::Ones(1 + ncov);
  if (opts.standardize_fixed) {
    // only plain fixed covariates; the varying-coefficient covariate keeps
    // its scale so beta keeps the calibration-slope interpretation
    for (int c = 0; c < ncov; ++c) {
      if (covariates[c].role != CovariateRole::FixedP) continue;
      const double mu = m.F.col(1 + c).mean();
      const double sd = std::sqrt(
          (m.F.col(1 + c).array() - mu).square().sum() / std::max(1, n - 1));
      if (sd > 0.0) {
        m.col_center[1 + c] = mu;
        m.col_scale[1 + c] = sd;
        m.F.col(1 + c) = (m.F.col(1 + c).array() - mu) / sd;
      }
    }
  }
  for (int c = 0; c <= ncov; ++c)
    if (!m.F.col(c).allFinite())
      throw std::invalid_argument("assemble: non-finite design column " +
                                  m.fixed_names[c]);

  // varying fields: intercept field first, then each varying covariate
  const int field_time = opts.static_fields ? 1 : n_time;
  if (opts.varying_intercept)
    m.field_specs.push_back({"intercept", true, field_time});
  for (int c = 0; c < ncov; ++c)
    if (covariates[c].role == CovariateRole::VaryingQ)
      m.field_specs.push_back({covariates[c].name, false, field_time});

  for (const FieldSpec& fs : m.field_specs) {
    std::vector<Eigen::Triplet<double>> trips;
    for (int i = 0; i < n; ++i) {
      double scalev = 1.0;
      if (!fs.is_intercept) {
        const GridCovariate* g = nullptr;
        for (const GridCovariate& gc : covariates)
          if (gc.name == fs.name) g = &gc;
        scalev = covariateAt(*g, obs.rows[i].location, obs.rows[i].time_index);
      }
      const int block =
          fs.n_time == 1 ? 0 : obs.rows[i].time_index * m.n_vertices;
      for (int k = 0; k < 3; ++k)
        if (basis[i].weights[k] != 0.0)
          trips.emplace_back(i, block + basis[i].vertex_indices[k],
                             scalev * basis[i].weights[k]);
    }
    Eigen::SparseMatrix<double> V(n, fs.n_time * m.n_vertices);
    V.setFromTriplets(trips.begin(), trips.end());
    V.makeCompressed();
    m.V_blocks.push_back(std::move(V));
  }
  return m;
}

PredictionDesign predictionDesign(const AssembledModel& model,
                                  const std::vector<GridCovariate>& covariates,
                                  const Mesh& mesh,
                                  const std::vector<Point2>& locations,
                                  const std::vector<int>& times) {
  checkGridTimes(covariates, model.n_time);
  const int nl = static_cast<int>(locations.size());
  const int nt = static_cast<int>(times.size());
  const int n = nl * nt;
  const int ncov = static_cast<int>(covariates.size());
  if (1 + ncov != model.numFixed())
    throw std::invalid_argument(
        "prediction_design: covariate count differs from the fitted model");

  std::vector<BasisEvaluation> basis(nl);
  std::string bad;
  for (int i = 0; i < nl; ++i) {
    try {
      basis[i] = locateAndWeights(mesh, locations[i]);
      for (const GridCovariate& g : covariates) (void)pointToCell(g, locations[i]);
    } catch (const std::exception&) {
      bad += (bad.empty() ? "" : ", ") + std::to_string(i);
    }
  }
  if (!bad.empty())
    throw std::invalid_argument(
        "prediction_design: unlocatable prediction points: " + bad);

  PredictionDesign d;
  d.F.resize(n, 1 + ncov);
  d.F.col(0).setOnes();
  for (int ti = 0; ti < nt; ++ti)
    for (int i = 0; i < nl; ++i)
      for (int c = 0; c < ncov; ++c) {
        const double v = covariateAt(covariates[c], locations[i], times[ti]);
        d.F(ti * nl + i, 1 + c) =
            (v - model.col_center[1 + c]) / model.col_scale[1 + c];
      }

  for (const FieldSpec& fs : model.field_specs) {
    std::vector<Eigen::Triplet<double>> trips;
    for (int ti = 0; ti < nt; ++ti)
      for (int i = 0; i < nl; ++i) {
        double scalev = 1.0;
        if (!fs.is_intercept) {
          const GridCovariate* g = nullptr;
          for (const GridCovariate& gc : covariates)
            if (gc.name == fs.name) g = &gc;
          if (!g)
            throw std::invalid_argument(
                "prediction_design: missing covariate " + fs.name);
          scalev = covariateAt(*g, locations[i], times[ti]);
        }
        const int block =
            fs.n_time == 1 ? 0 : times[ti] * model.n_vertices;
        for (int k = 0; k < 3; ++k)
          if (basis[i].weights[k] != 0.0)
            trips.emplace_back(ti * nl + i,
                               block + basis[i].vertex_indices[k],
                               scalev * basis[i].weights[k]);
      }
    Eigen::SparseMatrix<double> V(n, fs.n_time * model.n_vertices);
    V.setFromTriplets(trips.begin(), trips.end());
    V.makeCompressed();
    d.V_blocks.push_back(std::move(V));
  }
  return d;
}

ObservationTable readObservationsCsv(std::istream& is, Transform transform) {
  ObservationTable obs;
  obs.transform = transform;
  std::string line;
  if (!std::getline(is, line))
    throw std::runtime_error("observations: empty file");
  if (line.rfind("site_id", 0) != 0)
    throw std::runtime_error("observations: expected header site_id,x,y,t,value");
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    Observation o;
    std::string tok;
    if (!std::getline(ss, o.site_id, ',')) continue;
    try {
      std::getline(ss, tok, ',');
      o.location.x = std::stod(tok);
      std::getline(ss, tok, ',');
      o.location.y = std::stod(tok);
      std::getline(ss, tok, ',');
      o.time_index = std::stoi(tok);
      std::getline(ss, tok, ',');
      o.value = std::stod(tok);
    } catch (const std::exception&) {
      throw std::runtime_error("observations: parse error at line " +
                               std::to_string(lineno));
    }
    obs.rows.push_back(std::move(o));
  }
  return obs;
}

void writeObservationsCsv(const ObservationTable& obs, std::ostream& os) {
  os << "site_id,x,y,t,value\n" << std::setprecision(17);
  for (const Observation& o : obs.rows)
    os << o.site_id << "," << o.location.x << "," << o.location.y << ","
       << o.time_index << "," << o.value << "\n";
}

GridCovariate readRaster(std::istream& is) {
  std::string header;
  if (!std::getline(is, header)) throw std::runtime_error("raster: empty file");
  std::istringstream hs(header);
  GridCovariate g;
  std::string tok;
  int ntime = 0;
  try {
    std::getline(hs, g.name, ',');
    std::getline(hs, tok, ','); g.x0 = std::stod(tok);
    std::getline(hs, tok, ','); g.y0 = std::stod(tok);
    std::getline(hs, tok, ','); g.dx = std::stod(tok);
    std::getline(hs, tok, ','); g.dy = std::stod(tok);
    std::getline(hs, tok, ','); g.n_cols = std::stoi(tok);
    std::getline(hs, tok, ','); g.n_rows = std::stoi(tok);
    std::getline(hs, tok, ','); ntime = std::stoi(tok);
  } catch (const std::exception&) {
    throw std::runtime_error("raster: bad header: " + header);
  }
  if (g.dx <= 0 || g.dy <= 0 || g.n_cols <= 0 || g.n_rows <= 0 || ntime <= 0)
    throw std::runtime_error("raster: invalid dimensions in header");
  for (int t = 0; t < ntime; ++t) {
    Eigen::MatrixXd layer(g.n_rows, g.n_cols);
    for (int r = 0; r < g.n_rows; ++r)
      for (int c = 0; c < g.n_cols; ++c)
        if (!(is >> layer(r, c)))
          throw std::runtime_error("raster: truncated data at t=" +
                                   std::to_string(t));
    g.values.push_back(std::move(layer));
  }
  return g;
}

void writeRaster(const GridCovariate& g, std::ostream& os) {
  os << g.name << "," << std::setprecision(17) << g.x0 << "," << g.y0 << ","
     << g.dx << "," << g.dy << "," << g.n_cols << "," << g.n_rows << ","
     << g.numTimes() << "\n";
  for (const Eigen::MatrixXd& layer : g.values)
    for (int r = 0; r < g.n_rows; ++r) {
      for (int c = 0; c < g.n_cols; ++c)
        os << (c ? " " : "") << std::setprecision(17) << layer(r, c);
      os << "\n";
    }
}

}  // namespace downscale
