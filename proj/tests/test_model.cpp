#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "downscale/model.hpp"

using namespace downscale;

namespace {

Mesh rightTriangle() {
  Mesh m;
  m.vertices = {{0, 0}, {1, 0}, {0, 1}};
  m.triangles = {{0, 1, 2}};
  m.interior_flag = {1, 1, 1};
  m.boundary_edges = {{0, 1}, {1, 2}, {2, 0}};
  return m;
}

Mesh unitSquareTwoTriangles() {
  Mesh m;
  m.vertices = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  m.triangles = {{0, 1, 2}, {0, 2, 3}};
  m.interior_flag = {1, 1, 1, 1};
  return m;
}

GridCovariate unitGrid(const std::string& name, double value,
                       CovariateRole role = CovariateRole::VaryingQ) {
  GridCovariate g;
  g.name = name;
  g.dx = g.dy = 1.0;
  g.n_cols = g.n_rows = 1;
  g.values = {Eigen::MatrixXd::Constant(1, 1, value)};
  g.role = role;
  return g;
}

bool throwsContaining(const std::function<void()>& f, const std::string& sub) {
  try {
    f();
  } catch (const std::exception& e) {
    return std::string(e.what()).find(sub) != std::string::npos;
  }
  return false;
}

}  // namespace

TEST_CASE("point_to_cell floor rule and clamping") {
  GridCovariate g;
  g.x0 = g.y0 = 0.0;
  g.dx = g.dy = 10.0;
  g.n_cols = 5;
  g.n_rows = 4;
  g.values = {Eigen::MatrixXd::Zero(4, 5)};

  CellIndex c = pointToCell(g, {23.5, 7.1});
  CHECK(c.col == 2);
  CHECK(c.row == 0);

  c = pointToCell(g, {10.0, 0.0});  // upper edge belongs to the next cell
  CHECK(c.col == 1);
  CHECK(c.row == 0);

  c = pointToCell(g, {50.0, 40.0});  // exact max corner clamps inward
  CHECK(c.col == 4);
  CHECK(c.row == 3);

  CHECK_THROWS(pointToCell(g, {50.1, 0.0}));
  CHECK_THROWS(pointToCell(g, {-0.1, 0.0}));
  CHECK_THROWS(pointToCell(g, {0.0, 40.5}));
}

TEST_CASE("response transforms") {
  Eigen::VectorXd v(2);
  v << 25.0, 1.0;
  CHECK(transformResponse(v, Transform::Sqrt)[0] == doctest::Approx(5.0));
  CHECK(transformResponse(v, Transform::Log)[1] == doctest::Approx(0.0));
  CHECK(transformResponse(v, Transform::None) == v);

  SUBCASE("round trip on random positives") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(1e-3, 1e3);
    Eigen::VectorXd x(10000);
    for (int i = 0; i < x.size(); ++i) x[i] = u(rng);
    for (Transform t : {Transform::Sqrt, Transform::Log, Transform::None}) {
      Eigen::VectorXd back = inverseTransform(transformResponse(x, t), t);
      CHECK(((back - x).cwiseAbs().array() / x.array()).maxCoeff() < 1e-14);
    }
  }

  SUBCASE("domain errors name the row") {
    Eigen::VectorXd bad(3);
    bad << 1.0, -2.0, 3.0;
    CHECK(throwsContaining(
        [&] { transformResponse(bad, Transform::Log); }, "row 1"));
    CHECK(throwsContaining(
        [&] { transformResponse(bad, Transform::Sqrt); }, "row 1"));
  }
}

TEST_CASE("altitude transform") {
  Eigen::VectorXd a(3);
  a << 100.0, 500.0, 1700.0;
  Eigen::VectorXd out = altitudeTransform(a);
  CHECK(out[0] == doctest::Approx(0.0));
  CHECK(out[1] == doctest::Approx(0.5));  // sqrt(400/1600)
  CHECK(out[2] == doctest::Approx(1.0));

  Eigen::VectorXd c = Eigen::VectorXd::Constant(3, 7.0);
  CHECK(altitudeTransform(c).norm() == 0.0);

  SUBCASE("min and max map to 0 and 1") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-500.0, 3000.0);
    Eigen::VectorXd r(50);
    for (int i = 0; i < r.size(); ++i) r[i] = u(rng);
    Eigen::VectorXd o = altitudeTransform(r);
    CHECK(o.minCoeff() == doctest::Approx(0.0));
    CHECK(o.maxCoeff() == doctest::Approx(1.0));
  }
}

TEST_CASE("assemble basic projection rows") {
  Mesh mesh = rightTriangle();

  SUBCASE("vertex observation, varying intercept only") {
    ObservationTable obs;
    obs.rows = {{"s1", {1.0, 0.0}, 0, 2.0}};
    AssembledModel m = assemble(obs, {}, mesh, 1);
    REQUIRE(m.V_blocks.size() == 1);
    Eigen::MatrixXd V = m.V_blocks[0];
    CHECK(V(0, 1) == doctest::Approx(1.0));
    CHECK(V.row(0).sum() == doctest::Approx(1.0));
    CHECK((V.row(0).array() != 0.0).count() == 1);
    CHECK(m.latentDim() == 1 + 3);
    CHECK(m.F(0, 0) == 1.0);
  }

  SUBCASE("centroid observation scaled by covariate 4.2") {
    ObservationTable obs;
    obs.rows = {{"s1", {1.0 / 3.0, 1.0 / 3.0}, 0, 2.0}};
    GridCovariate ctm = unitGrid("ctm", 4.2);
    AssemblyOptions opts;
    opts.varying_intercept = false;
    AssembledModel m = assemble(obs, {ctm}, mesh, 1, opts);
    REQUIRE(m.V_blocks.size() == 1);
    Eigen::MatrixXd V = m.V_blocks[0];
    for (int k = 0; k < 3; ++k)
      CHECK(V(0, k) == doctest::Approx(1.4).epsilon(1e-12));
    // the covariate is not standardized (varying role), so F carries 4.2
    CHECK(m.F(0, 1) == doctest::Approx(4.2));
  }
}

TEST_CASE("multiple monitors per cell share the covariate value") {
  Mesh mesh = unitSquareTwoTriangles();
  GridCovariate ctm = unitGrid("ctm", 3.5);
  ObservationTable obs;
  obs.rows = {{"a", {0.2, 0.1}, 0, 1.0},
              {"b", {0.7, 0.2}, 0, 2.0},
              {"c", {0.4, 0.8}, 0, 3.0}};
  AssembledModel m = assemble(obs, {ctm}, mesh, 1);
  REQUIRE(m.V_blocks.size() == 2);  // intercept field + ctm field
  Eigen::MatrixXd Vc = m.V_blocks[1];
  for (int i = 0; i < 3; ++i) {
    CHECK(m.F(i, 1) == doctest::Approx(3.5));
    CHECK(Vc.row(i).sum() == doctest::Approx(3.5).epsilon(1e-12));
  }
  // different locations, different basis weights
  CHECK(Vc.row(0) != Vc.row(1));
  CHECK(Vc.row(1) != Vc.row(2));
  // intercept field rows are partition-of-unity basis weights
  Eigen::MatrixXd Vi = m.V_blocks[0];
  for (int i = 0; i < 3; ++i)
    CHECK(Vi.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("assembly linearity and row-permutation invariance") {
  Mesh mesh = unitSquareTwoTriangles();
  GridCovariate ctm;
  ctm.name = "ctm";
  ctm.dx = ctm.dy = 0.5;
  ctm.n_cols = ctm.n_rows = 2;
  Eigen::MatrixXd layer(2, 2);
  layer << 1.0, 2.0, 3.0, 4.0;
  ctm.values = {layer};
  ctm.role = CovariateRole::VaryingQ;

  ObservationTable obs;
  obs.rows = {{"a", {0.2, 0.1}, 0, 1.0},
              {"b", {0.7, 0.2}, 0, 2.0},
              {"c", {0.4, 0.8}, 0, 3.0}};

  AssembledModel m1 = assemble(obs, {ctm}, mesh, 1);

  SUBCASE("doubling grid values doubles F column and V block") {
    GridCovariate ctm2 = ctm;
    ctm2.values[0] *= 2.0;
    AssembledModel m2 = assemble(obs, {ctm2}, mesh, 1);
    CHECK((m2.F.col(1) - 2.0 * m1.F.col(1)).norm() == doctest::Approx(0.0));
    CHECK((Eigen::MatrixXd(m2.V_blocks[1]) -
           2.0 * Eigen::MatrixXd(m1.V_blocks[1]))
              .norm() == doctest::Approx(0.0));
  }

  SUBCASE("permuting observation rows permutes y, F, V rows") {
    ObservationTable perm;
    perm.rows = {obs.rows[2], obs.rows[0], obs.rows[1]};
    AssembledModel m2 = assemble(perm, {ctm}, mesh, 1);
    const int p[3] = {2, 0, 1};
    for (int i = 0; i < 3; ++i) {
      CHECK(m2.y[i] == m1.y[p[i]]);
      CHECK((m2.F.row(i) - m1.F.row(p[i])).norm() == 0.0);
      for (size_t b = 0; b < m1.V_blocks.size(); ++b)
        CHECK((Eigen::MatrixXd(m2.V_blocks[b]).row(i) -
               Eigen::MatrixXd(m1.V_blocks[b]).row(p[i]))
                  .norm() == 0.0);
    }
  }
}

TEST_CASE("assemble space-time blocks and standardization") {
  Mesh mesh = unitSquareTwoTriangles();
  GridCovariate ctm = unitGrid("ctm", 2.0);
  ctm.values.push_back(Eigen::MatrixXd::Constant(1, 1, 6.0));  // t = 1
  GridCovariate alt = unitGrid("alt", 0.0, CovariateRole::FixedP);
  alt.values = {Eigen::MatrixXd::Constant(1, 1, 5.0)};

  ObservationTable obs;
  obs.transform = Transform::Sqrt;
  obs.rows = {{"a", {0.2, 0.1}, 0, 4.0},
              {"b", {0.7, 0.2}, 1, 9.0},
              {"c", {0.4, 0.8}, 1, 16.0}};
  AssembledModel m = assemble(obs, {ctm, alt}, mesh, 2);

  CHECK(m.y[0] == doctest::Approx(2.0));
  CHECK(m.y[2] == doctest::Approx(4.0));
  CHECK(m.latentDim() == 3 + 2 * 2 * 4);  // intercept+ctm+alt fixed, 2 fields
  // time-block placement: obs b lives in block t=1 of each field
  Eigen::MatrixXd Vi = m.V_blocks[0];
  CHECK(Vi.row(1).head(4).norm() == 0.0);
  CHECK(Vi.row(1).tail(4).sum() == doctest::Approx(1.0));
  Eigen::MatrixXd Vc = m.V_blocks[1];
  CHECK(Vc.row(0).head(4).sum() == doctest::Approx(2.0));  // t=0 layer value
  CHECK(Vc.row(1).tail(4).sum() == doctest::Approx(6.0));  // t=1 layer value
  // a constant fixed covariate has zero sd: left unstandardized
  CHECK(m.col_scale[2] == 1.0);
  CHECK(m.F(0, 2) == doctest::Approx(5.0));
  // ctm (varying role) never standardized
  CHECK(m.col_center[1] == 0.0);
  CHECK(m.col_scale[1] == 1.0);
}

TEST_CASE("fixed covariate standardization stored and reused at prediction") {
  Mesh mesh = unitSquareTwoTriangles();
  GridCovariate road;
  road.name = "road";
  road.dx = road.dy = 0.5;
  road.n_cols = road.n_rows = 2;
  Eigen::MatrixXd layer(2, 2);
  layer << 10.0, 20.0, 30.0, 60.0;
  road.values = {layer};
  road.role = CovariateRole::FixedP;

  ObservationTable obs;
  obs.rows = {{"a", {0.2, 0.1}, 0, 1.0},
              {"b", {0.7, 0.2}, 0, 2.0},
              {"c", {0.4, 0.8}, 0, 3.0}};
  AssembledModel m = assemble(obs, {road}, mesh, 1);
  CHECK(m.F.col(1).mean() == doctest::Approx(0.0).epsilon(1e-12));
  const double sd =
      std::sqrt((m.F.col(1).array() - m.F.col(1).mean()).square().sum() / 2.0);
  CHECK(sd == doctest::Approx(1.0).epsilon(1e-12));

  PredictionDesign d =
      predictionDesign(m, {road}, mesh, {{0.2, 0.1}, {0.7, 0.2}}, {0});
  // prediction at the training locations reproduces the training columns
  CHECK(d.F(0, 1) == doctest::Approx(m.F(0, 1)).epsilon(1e-12));
  CHECK(d.F(1, 1) == doctest::Approx(m.F(1, 1)).epsilon(1e-12));
  CHECK(d.F.col(0) == Eigen::VectorXd::Ones(2));
  REQUIRE(d.V_blocks.size() == 1);
  CHECK(Eigen::MatrixXd(d.V_blocks[0]).row(0).sum() == doctest::Approx(1.0));
}

TEST_CASE("prediction design is time-major over locations") {
  Mesh mesh = unitSquareTwoTriangles();
  GridCovariate ctm = unitGrid("ctm", 2.0);
  ctm.values.push_back(Eigen::MatrixXd::Constant(1, 1, 6.0));
  ObservationTable obs;
  obs.rows = {{"a", {0.2, 0.1}, 0, 1.0}, {"b", {0.7, 0.2}, 1, 2.0}};
  AssembledModel m = assemble(obs, {ctm}, mesh, 2);

  PredictionDesign d =
      predictionDesign(m, {ctm}, mesh, {{0.2, 0.1}, {0.7, 0.2}}, {0, 1});
  REQUIRE(d.F.rows() == 4);
  // rows 0,1 = t=0 at both locations; rows 2,3 = t=1
  CHECK(d.F(0, 1) == doctest::Approx(2.0));
  CHECK(d.F(2, 1) == doctest::Approx(6.0));
  Eigen::MatrixXd Vc = d.V_blocks[1];
  CHECK(Vc.row(0).head(4).sum() == doctest::Approx(2.0));
  CHECK(Vc.row(0).tail(4).norm() == 0.0);
  CHECK(Vc.row(2).tail(4).sum() == doctest::Approx(6.0));
  CHECK(Vc.row(2).head(4).norm() == 0.0);
}

TEST_CASE("assemble validation errors") {
  Mesh mesh = rightTriangle();
  ObservationTable obs;
  obs.rows = {{"far", {5.0, 5.0}, 0, 1.0}};
  CHECK(throwsContaining([&] { assemble(obs, {}, mesh, 1); }, "far"));

  ObservationTable dup;
  dup.rows = {{"s", {0.2, 0.2}, 0, 1.0}, {"s", {0.2, 0.2}, 0, 2.0}};
  CHECK_THROWS(assemble(dup, {}, mesh, 1));

  ObservationTable badt;
  badt.rows = {{"s", {0.2, 0.2}, 3, 1.0}};
  CHECK_THROWS(assemble(badt, {}, mesh, 2));

  // covariate with time coverage neither 1 nor n_time
  GridCovariate g = unitGrid("ctm", 1.0);
  g.values.push_back(Eigen::MatrixXd::Constant(1, 1, 2.0));
  ObservationTable ok;
  ok.rows = {{"s", {0.2, 0.2}, 0, 1.0}};
  CHECK_THROWS(assemble(ok, {g}, mesh, 3));
}

TEST_CASE("observation csv round trip") {
  ObservationTable obs;
  obs.rows = {{"mon_1", {1.25, -3.5}, 0, 12.75}, {"mon_2", {0.0, 2.0}, 3, 8.5}};
  std::ostringstream os;
  writeObservationsCsv(obs, os);
  CHECK(os.str().rfind("site_id,x,y,t,value\n", 0) == 0);
  std::istringstream is(os.str());
  ObservationTable back = readObservationsCsv(is, Transform::Sqrt);
  REQUIRE(back.rows.size() == 2);
  CHECK(back.rows[0].site_id == "mon_1");
  CHECK(back.rows[0].location.x == 1.25);
  CHECK(back.rows[1].time_index == 3);
  CHECK(back.rows[1].value == 8.5);
  CHECK(back.transform == Transform::Sqrt);

  std::istringstream bad("x,y\n1,2\n");
  CHECK_THROWS(readObservationsCsv(bad, Transform::None));
}

TEST_CASE("raster round trip, row 0 southmost") {
  GridCovariate g;
  g.name = "ctm";
  g.x0 = -1.0;
  g.y0 = 2.0;
  g.dx = 0.5;
  g.dy = 0.25;
  g.n_cols = 3;
  g.n_rows = 2;
  Eigen::MatrixXd l0(2, 3), l1(2, 3);
  l0 << 1, 2, 3, 4, 5, 6;
  l1 << 7, 8, 9, 10, 11, 12;
  g.values = {l0, l1};

  std::ostringstream os;
  writeRaster(g, os);
  CHECK(os.str().rfind("ctm,-1,2,0.5,0.25,3,2,2\n", 0) == 0);
  std::istringstream is(os.str());
  GridCovariate back = readRaster(is);
  CHECK(back.name == "ctm");
  CHECK(back.n_cols == 3);
  CHECK(back.numTimes() == 2);
  CHECK((back.values[0] - l0).norm() == 0.0);
  CHECK((back.values[1] - l1).norm() == 0.0);
  // row 0 is the southmost: lookup just above y0 hits row 0
  CHECK(covariateAt(back, {-0.9, 2.01}, 0) == 1.0);
  CHECK(covariateAt(back, {-0.9, 2.3}, 1) == 10.0);

  std::istringstream trunc("ctm,0,0,1,1,2,2,1\n1 2\n3\n");
  CHECK_THROWS(readRaster(trunc));
}
