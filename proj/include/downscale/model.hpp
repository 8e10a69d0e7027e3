#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "downscale/geometry.hpp"

namespace downscale {

enum class Transform { None, Sqrt, Log };

Transform transformFromTag(const std::string& tag);
std::string transformTag(Transform t);

// elementwise response transform with exact inverse
Eigen::VectorXd transformResponse(const Eigen::VectorXd& values, Transform t);
Eigen::VectorXd inverseTransform(const Eigen::VectorXd& values, Transform t);
double inverseTransformScalar(double v, Transform t);

// sqrt((a - min a) / max(a - min a)); all zeros for constant input
Eigen::VectorXd altitudeTransform(const Eigen::VectorXd& altitude_m);

struct Observation {
  std::string site_id;
  Point2 location;
  int time_index = 0;
  double value = 0.0;
};

struct ObservationTable {
  std::vector<Observation> rows;
  Transform transform = Transform::None;
};

enum class CovariateRole { FixedP, VaryingQ };

// Gridded covariate with one value layer per time index; row 0 = southmost.
struct GridCovariate {
  std::string name;
  double x0 = 0.0, y0 = 0.0;
  double dx = 1.0, dy = 1.0;
  int n_cols = 0, n_rows = 0;
  std::vector<Eigen::MatrixXd> values;  // one (n_rows x n_cols) per time
  CovariateRole role = CovariateRole::FixedP;

  int numTimes() const { return static_cast<int>(values.size()); }
  double at(int time, int col, int row) const {
    return values[time](row, col);
  }
};

// half-open cell convention; outer max edges clamp inward
struct CellIndex { int col; int row; };
CellIndex pointToCell(const GridCovariate& grid, const Point2& p);
double covariateAt(const GridCovariate& grid, const Point2& p, int time);

// per-varying-field metadata inside an AssembledModel
struct FieldSpec {
  std::string name;            // "intercept" or covariate name
  bool is_intercept = false;
  int n_time = 1;
};

// Everything the latent Gaussian model needs: y = transformed response,
// F = fixed-effects design, one sparse projection block per varying field
// (basis weights at the observation's location/time, scaled by the covariate
// value, or by 1 for the varying intercept).
struct AssembledModel {
  Eigen::VectorXd y;
  Eigen::MatrixXd F;
  std::vector<std::string> fixed_names;
  std::vector<Eigen::SparseMatrix<double>> V_blocks;
  std::vector<FieldSpec> field_specs;
  Transform transform = Transform::None;
  int n_time = 1;
  int n_vertices = 0;
  // standardization of fixed covariates, for prediction-time reuse;
  // entry i matches F column i (0 mean / 1 scale where not standardized)
  Eigen::VectorXd col_center;
  Eigen::VectorXd col_scale;

  int numObs() const { return static_cast<int>(y.size()); }
  int numFixed() const { return static_cast<int>(F.cols()); }
  int latentDim() const;
};

struct AssemblyOptions {
  bool varying_intercept = true;
  bool standardize_fixed = true;
  // collapse every varying field to a single time block shared by all
  // observation times (purely spatial coefficients on temporal data)
  bool static_fields = false;
};

AssembledModel assemble(const ObservationTable& obs,
                        const std::vector<GridCovariate>& covariates,
                        const Mesh& mesh, int n_time,
                        const AssemblyOptions& opts = {});

// Design matrices at prediction support, using the model's stored
// standardization. locations/time pairs are row-expanded time-major:
// row = t * n_locations + i.
struct PredictionDesign {
  Eigen::MatrixXd F;
  std::vector<Eigen::SparseMatrix<double>> V_blocks;
};
PredictionDesign predictionDesign(const AssembledModel& model,
                                  const std::vector<GridCovariate>& covariates,
                                  const Mesh& mesh,
                                  const std::vector<Point2>& locations,
                                  const std::vector<int>& times);

// I/O: observation CSV `site_id,x,y,t,value`; raster text format with
// header `name,x0,y0,dx,dy,ncols,nrows,ntime`.
ObservationTable readObservationsCsv(std::istream& is, Transform transform);
void writeObservationsCsv(const ObservationTable& obs, std::ostream& os);
GridCovariate readRaster(std::istream& is);
void writeRaster(const GridCovariate& grid, std::ostream& os);

}  // namespace downscale
