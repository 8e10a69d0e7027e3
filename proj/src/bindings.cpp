// pybind11 surface: mesh construction, model assembly, fitting and joint
// posterior prediction, plus the simulation-study generator.

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "downscale/evaluation.hpp"
#include "downscale/predict.hpp"

namespace py = pybind11;
using namespace downscale;

namespace {

std::vector<Point2> toPoints(const Eigen::MatrixXd& xy) {
  if (xy.cols() != 2)
    throw std::invalid_argument("locations must be an (n, 2) array");
  std::vector<Point2> pts(xy.rows());
  for (Eigen::Index i = 0; i < xy.rows(); ++i) pts[i] = {xy(i, 0), xy(i, 1)};
  return pts;
}

GridCovariate covariateFromDict(const py::dict& d) {
  GridCovariate g;
  g.name = d["name"].cast<std::string>();
  g.x0 = d["x0"].cast<double>();
  g.y0 = d["y0"].cast<double>();
  g.dx = d["dx"].cast<double>();
  g.dy = d["dy"].cast<double>();
  const py::array_t<double> values =
      d["values"].cast<py::array_t<double>>();
  if (values.ndim() != 3)
    throw std::invalid_argument(
        "covariate values must be (n_time, n_rows, n_cols)");
  g.n_rows = static_cast<int>(values.shape(1));
  g.n_cols = static_cast<int>(values.shape(2));
  auto v = values.unchecked<3>();
  for (py::ssize_t t = 0; t < values.shape(0); ++t) {
    Eigen::MatrixXd layer(g.n_rows, g.n_cols);
    for (int r = 0; r < g.n_rows; ++r)
      for (int c = 0; c < g.n_cols; ++c) layer(r, c) = v(t, r, c);
    g.values.push_back(std::move(layer));
  }
  const std::string role =
      d.contains("role") ? d["role"].cast<std::string>() : "fixed";
  if (role == "varying")
    g.role = CovariateRole::VaryingQ;
  else if (role == "fixed")
    g.role = CovariateRole::FixedP;
  else
    throw std::invalid_argument("covariate role must be fixed|varying");
  return g;
}

py::dict covariateToDict(const GridCovariate& g) {
  py::dict d;
  d["name"] = g.name;
  d["x0"] = g.x0;
  d["y0"] = g.y0;
  d["dx"] = g.dx;
  d["dy"] = g.dy;
  py::array_t<double> values({g.numTimes(), g.n_rows, g.n_cols});
  auto v = values.mutable_unchecked<3>();
  for (int t = 0; t < g.numTimes(); ++t)
    for (int r = 0; r < g.n_rows; ++r)
      for (int c = 0; c < g.n_cols; ++c) v(t, r, c) = g.values[t](r, c);
  d["values"] = values;
  d["role"] = g.role == CovariateRole::VaryingQ ? "varying" : "fixed";
  return d;
}

py::list marginalsToList(const std::vector<MarginalSummary>& ms) {
  py::list out;
  for (const MarginalSummary& m : ms) {
    py::dict d;
    d["name"] = m.name;
    d["mean"] = m.mean;
    d["sd"] = m.sd;
    d["q025"] = m.q025;
    d["q50"] = m.q50;
    d["q975"] = m.q975;
    out.append(d);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "latent Gaussian downscaling core";

  py::class_<Mesh>(m, "Mesh")
      .def_property_readonly("n_vertices", &Mesh::numVertices)
      .def_property_readonly("n_triangles", &Mesh::numTriangles)
      .def("vertices",
           [](const Mesh& mesh) {
             Eigen::MatrixXd out(mesh.numVertices(), 2);
             for (int i = 0; i < mesh.numVertices(); ++i)
               out.row(i) << mesh.vertices[i].x, mesh.vertices[i].y;
             return out;
           })
      .def("triangles", [](const Mesh& mesh) {
        Eigen::MatrixXi out(mesh.numTriangles(), 3);
        for (int i = 0; i < mesh.numTriangles(); ++i)
          out.row(i) << mesh.triangles[i][0], mesh.triangles[i][1],
              mesh.triangles[i][2];
        return out;
      });

  m.def(
      "build_mesh",
      [](const Eigen::MatrixXd& xy, double max_edge_inner,
         double max_edge_outer, double buffer_width, double cutoff,
         double min_angle_deg) {
        MeshOptions mo;
        mo.max_edge_inner = max_edge_inner;
        mo.max_edge_outer = max_edge_outer;
        mo.buffer_width = buffer_width;
        mo.cutoff = cutoff;
        mo.min_angle_deg = min_angle_deg;
        return buildMesh(toPoints(xy), mo);
      },
      py::arg("locations"), py::arg("max_edge_inner"),
      py::arg("max_edge_outer"), py::arg("buffer_width"),
      py::arg("cutoff") = 0.0, py::arg("min_angle_deg") = 21.0);

  m.def("matern_correlation", [](double d, double range, double sigma) {
    return maternCorrelation(d, MaternParams::fromRangeSigma(range, sigma));
  });

  py::class_<AssembledModel>(m, "Model")
      .def_property_readonly("n_obs", &AssembledModel::numObs)
      .def_property_readonly("n_fixed", &AssembledModel::numFixed)
      .def_property_readonly("latent_dim", &AssembledModel::latentDim)
      .def_property_readonly(
          "fixed_names",
          [](const AssembledModel& mdl) { return mdl.fixed_names; });

  m.def(
      "assemble",
      [](const std::vector<std::string>& site_ids, const Eigen::MatrixXd& xy,
         const std::vector<int>& times, const Eigen::VectorXd& values,
         const std::vector<py::dict>& covariates, const Mesh& mesh,
         int n_time, const std::string& transform, bool varying_intercept,
         bool standardize_fixed, bool static_fields) {
        if (site_ids.size() != static_cast<size_t>(xy.rows()) ||
            times.size() != static_cast<size_t>(xy.rows()) ||
            values.size() != xy.rows())
          throw std::invalid_argument("observation arrays disagree in length");
        ObservationTable obs;
        obs.transform = transformFromTag(transform);
        const std::vector<Point2> pts = toPoints(xy);
        for (size_t i = 0; i < site_ids.size(); ++i)
          obs.rows.push_back({site_ids[i], pts[i], times[i],
                              values[static_cast<Eigen::Index>(i)]});
        std::vector<GridCovariate> covs;
        for (const py::dict& d : covariates)
          covs.push_back(covariateFromDict(d));
        AssemblyOptions ao;
        ao.varying_intercept = varying_intercept;
        ao.standardize_fixed = standardize_fixed;
        ao.static_fields = static_fields;
        return assemble(obs, covs, mesh, n_time, ao);
      },
      py::arg("site_ids"), py::arg("locations"), py::arg("times"),
      py::arg("values"), py::arg("covariates"), py::arg("mesh"),
      py::arg("n_time") = 1, py::arg("transform") = "none",
      py::arg("varying_intercept") = true,
      py::arg("standardize_fixed") = true, py::arg("static_fields") = false);

  py::class_<PosteriorBundle>(m, "Fit")
      .def_property_readonly("n_points",
                             [](const PosteriorBundle& b) {
                               return b.points.size();
                             })
      .def_property_readonly("log_evidence",
                             [](const PosteriorBundle& b) {
                               return b.log_evidence_at_mode;
                             })
      .def_property_readonly("hyper_marginals",
                             [](const PosteriorBundle& b) {
                               return marginalsToList(b.hyper_marginals);
                             })
      .def_property_readonly("fixed_marginals", [](const PosteriorBundle& b) {
        return marginalsToList(b.fixed_marginals);
      });

  m.def(
      "fit",
      [](const AssembledModel& model, const Mesh& mesh,
         const std::string& strategy, double grid_step, double prune_logdrop,
         int max_iter) {
        FitOptions fo;
        fo.strategy = strategy;
        fo.grid_step = grid_step;
        fo.prune_logdrop = prune_logdrop;
        fo.max_iter = max_iter;
        return fit(model, mesh, fo);
      },
      py::arg("model"), py::arg("mesh"), py::arg("strategy") = "grid",
      py::arg("grid_step") = 1.0, py::arg("prune_logdrop") = 5.0,
      py::arg("max_iter") = 200);

  m.def(
      "predict",
      [](const PosteriorBundle& bundle, const AssembledModel& model,
         const Mesh& mesh, const Eigen::MatrixXd& xy,
         const std::vector<int>& times,
         const std::vector<py::dict>& covariates, int n_samples,
         std::uint64_t seed, bool include_noise) {
        PredictionRequest req;
        req.locations = toPoints(xy);
        req.times = times;
        for (const py::dict& d : covariates)
          req.covariates.push_back(covariateFromDict(d));
        SampleCube cube =
            predict(bundle, model, mesh, req, n_samples, seed, include_noise);
        py::array_t<double> out(
            {cube.n_samples, cube.n_locations, cube.n_times});
        auto v = out.mutable_unchecked<3>();
        for (int s = 0; s < cube.n_samples; ++s)
          for (int loc = 0; loc < cube.n_locations; ++loc)
            for (int t = 0; t < cube.n_times; ++t)
              v(s, loc, t) = cube.at(s, loc, t);
        return out;
      },
      py::arg("fit"), py::arg("model"), py::arg("mesh"),
      py::arg("locations"), py::arg("times"), py::arg("covariates"),
      py::arg("n_samples") = 1000, py::arg("seed") = 1,
      py::arg("include_noise") = false);

  m.def(
      "simulate",
      [](int grid_cols, int grid_rows, int n_sites, int n_time,
         int dataset_index, std::uint64_t seed, double domain) {
        SimulationConfig c;
        c.domain = domain;
        c.grid_cols = grid_cols;
        c.grid_rows = grid_rows;
        c.n_sites = n_sites;
        c.n_time = n_time;
        c.seed = seed;
        SimulatedDataset data = generateDataset(c, dataset_index);
        py::dict out;
        py::list sids, tlist;
        Eigen::MatrixXd xy(data.obs.rows.size(), 2);
        Eigen::VectorXd vals(data.obs.rows.size());
        for (size_t i = 0; i < data.obs.rows.size(); ++i) {
          sids.append(data.obs.rows[i].site_id);
          tlist.append(data.obs.rows[i].time_index);
          xy(static_cast<Eigen::Index>(i), 0) = data.obs.rows[i].location.x;
          xy(static_cast<Eigen::Index>(i), 1) = data.obs.rows[i].location.y;
          vals[static_cast<Eigen::Index>(i)] = data.obs.rows[i].value;
        }
        out["site_ids"] = sids;
        out["locations"] = xy;
        out["times"] = tlist;
        out["values"] = vals;
        out["covariate"] = covariateToDict(data.covariate);
        Eigen::MatrixXd sites(data.sites.size(), 2);
        for (size_t i = 0; i < data.sites.size(); ++i)
          sites.row(static_cast<Eigen::Index>(i)) << data.sites[i].x,
              data.sites[i].y;
        out["sites"] = sites;
        return out;
      },
      py::arg("grid_cols") = 100, py::arg("grid_rows") = 100,
      py::arg("n_sites") = 500, py::arg("n_time") = 1,
      py::arg("dataset_index") = 0, py::arg("seed") = 1,
      py::arg("domain") = 3.0);
}
