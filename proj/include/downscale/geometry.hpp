#pragma once

#include <Eigen/Sparse>
#include <array>
#include <cstdint>
#include <iosfwd>
#include <vector>

namespace downscale {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

bool isFinite(const Point2& p);
double dist(const Point2& a, const Point2& b);

// Piecewise-linear basis evaluation at a point: containing triangle plus
// barycentric weights w.r.t. that triangle's vertices.
struct BasisEvaluation {
  int triangle_index = -1;
  std::array<int, 3> vertex_indices{};
  std::array<double, 3> weights{};
};

// Conforming Delaunay triangulation of a rectangular domain: the site
// bounding box plus an extension buffer. interior_flag marks vertices inside
// the original (unbuffered) domain.
struct Mesh {
  std::vector<Point2> vertices;
  std::vector<std::array<int, 3>> triangles;  // CCW
  std::vector<std::uint8_t> interior_flag;
  std::vector<std::array<int, 2>> boundary_edges;

  int numVertices() const { return static_cast<int>(vertices.size()); }
  int numTriangles() const { return static_cast<int>(triangles.size()); }
  double triangleArea(int t) const;
  double totalArea() const;
};

struct MeshOptions {
  double max_edge_inner;
  double max_edge_outer;
  double buffer_width;
  double cutoff = 0.0;
  double min_angle_deg = 21.0;
  int max_insertions = 200000;
};

// Builds the mesh: merge sites closer than cutoff (first-seen representative
// wins), triangulate the buffered bounding rectangle with all sites as
// vertices, then refine by circumcenter/midpoint insertion until no inner
// edge exceeds max_edge_inner, no buffer edge exceeds max_edge_outer and all
// angles clear the floor.
Mesh buildMesh(const std::vector<Point2>& sites, const MeshOptions& opts);

// Containing triangle (lowest index wins on shared edges) and barycentric
// weights. Throws if p lies outside the hull.
BasisEvaluation locateAndWeights(const Mesh& mesh, const Point2& p);

// Rows = points, cols = mesh vertices; each row holds the <=3 basis weights.
Eigen::SparseMatrix<double> projectorMatrix(const Mesh& mesh,
                                            const std::vector<Point2>& points);

void writeMesh(const Mesh& mesh, std::ostream& os);
Mesh readMesh(std::istream& is);

}  // namespace downscale
