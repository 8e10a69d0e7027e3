#include "downscale/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace downscale {

bool isFinite(const Point2& p) {
  return std::isfinite(p.x) && std::isfinite(p.y);
}

double dist(const Point2& a, const Point2& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

namespace {

// > 0 iff (a,b,c) is counter-clockwise (twice the signed area).
long double orient2d(const Point2& a, const Point2& b, const Point2& c) {
  const long double acx = (long double)a.x - c.x;
  const long double acy = (long double)a.y - c.y;
  const long double bcx = (long double)b.x - c.x;
  const long double bcy = (long double)b.y - c.y;
  return acx * bcy - acy * bcx;
}

// > 0 iff p lies strictly inside the circumcircle of CCW triangle (a,b,c).
long double incircle(const Point2& a, const Point2& b, const Point2& c,
                     const Point2& p) {
  const long double adx = (long double)a.x - p.x, ady = (long double)a.y - p.y;
  const long double bdx = (long double)b.x - p.x, bdy = (long double)b.y - p.y;
  const long double cdx = (long double)c.x - p.x, cdy = (long double)c.y - p.y;
  const long double ad = adx * adx + ady * ady;
  const long double bd = bdx * bdx + bdy * bdy;
  const long double cd = cdx * cdx + cdy * cdy;
  return adx * (bdy * cd - cdy * bd) - ady * (bdx * cd - cdx * bd) +
         ad * (bdx * cdy - cdx * bdy);
}

Point2 circumcenter(const Point2& a, const Point2& b, const Point2& c) {
  const double d = 2.0 * (a.x * (b.y - c.y) + b.x * (c.y - a.y) +
                          c.x * (a.y - b.y));
  const double a2 = a.x * a.x + a.y * a.y;
  const double b2 = b.x * b.x + b.y * b.y;
  const double c2 = c.x * c.x + c.y * c.y;
  Point2 o;
  o.x = (a2 * (b.y - c.y) + b2 * (c.y - a.y) + c2 * (a.y - b.y)) / d;
  o.y = (a2 * (c.x - b.x) + b2 * (a.x - c.x) + c2 * (b.x - a.x)) / d;
  return o;
}

struct Tri {
  std::array<int, 3> v;    // CCW
  std::array<int, 3> nbr;  // nbr[i] across edge opposite v[i]; -1 = hull
  bool alive = true;
};

struct Builder {
  std::vector<Point2> pts;
  std::vector<Tri> tris;
  std::vector<int> gen;  // per-slot generation, for the refinement queue
  double scale = 1.0;    // domain diagonal

  int addTri(const std::array<int, 3>& v) {
    tris.push_back({v, {-1, -1, -1}, true});
    gen.push_back(0);
    return static_cast<int>(tris.size()) - 1;
  }

  int locate(const Point2& p) const {
    const long double eps = 1e-12L * scale * scale;
    for (int i = 0; i < (int)tris.size(); ++i) {
      if (!tris[i].alive) continue;
      const Tri& tr = tris[i];
      bool inside = true;
      for (int k = 0; k < 3 && inside; ++k)
        inside = orient2d(pts[tr.v[(k + 1) % 3]], pts[tr.v[(k + 2) % 3]], p) >=
                 -eps;
      if (inside) return i;
    }
    return -1;
  }

  // Rebuild neighbor pointers of all alive triangles from scratch.
  void rebuildAdjacency() {
    std::map<std::pair<int, int>, std::pair<int, int>> half;  // edge -> (tri, slot)
    for (int t = 0; t < (int)tris.size(); ++t) {
      if (!tris[t].alive) continue;
      for (int i = 0; i < 3; ++i) {
        tris[t].nbr[i] = -1;
        const int a = tris[t].v[(i + 1) % 3], b = tris[t].v[(i + 2) % 3];
        const auto key = std::minmax(a, b);
        auto it = half.find(key);
        if (it == half.end()) {
          half[key] = {t, i};
        } else {
          tris[t].nbr[i] = it->second.first;
          tris[it->second.first].nbr[it->second.second] = t;
        }
      }
    }
  }

  // Bowyer-Watson insertion with brute-force cavity collection. Returns the
  // index of the (possibly pre-existing) vertex; appends new triangle ids to
  // out_new.
  int insert(const Point2& p, std::vector<int>* out_new) {
    const int t0 = locate(p);
    if (t0 < 0)
      throw std::runtime_error("mesh insert: point outside hull (" +
                               std::to_string(p.x) + ", " +
                               std::to_string(p.y) + ")");
    for (int v = 0; v < (int)pts.size(); ++v)
      if (dist(pts[v], p) <= 1e-12 * scale) return v;

    const long double ieps = 1e-13L * scale * scale * scale * scale;
    const long double aeps = 1e-14L * scale * scale;
    // candidates: closed circumdisk contains p
    std::vector<char> cand(tris.size(), 0);
    for (int t = 0; t < (int)tris.size(); ++t) {
      if (!tris[t].alive) continue;
      const Tri& tr = tris[t];
      cand[t] =
          incircle(pts[tr.v[0]], pts[tr.v[1]], pts[tr.v[2]], p) >= -ieps;
    }
    cand[t0] = 1;
    // keep only the component connected to t0 (shared edges among candidates)
    std::map<std::pair<int, int>, std::vector<int>> edges;
    for (int t = 0; t < (int)tris.size(); ++t)
      if (cand[t])
        for (int i = 0; i < 3; ++i)
          edges[std::minmax(tris[t].v[i], tris[t].v[(i + 1) % 3])].push_back(t);
    std::vector<char> inCav(tris.size(), 0);
    std::deque<int> bfs{t0};
    inCav[t0] = 1;
    std::vector<int> cavity;
    while (!bfs.empty()) {
      const int t = bfs.front();
      bfs.pop_front();
      cavity.push_back(t);
      for (int i = 0; i < 3; ++i) {
        auto& adj = edges[std::minmax(tris[t].v[i], tris[t].v[(i + 1) % 3])];
        for (int n : adj)
          if (!inCav[n]) {
            inCav[n] = 1;
            bfs.push_back(n);
          }
      }
    }

    // boundary = edges used exactly once within the cavity, oriented CCW
    struct BEdge { int a, b; };
    std::map<std::pair<int, int>, std::pair<int, BEdge>> uses;
    for (int t : cavity)
      for (int i = 0; i < 3; ++i) {
        const int a = tris[t].v[(i + 1) % 3], b = tris[t].v[(i + 2) % 3];
        auto& u = uses[std::minmax(a, b)];
        u.first++;
        u.second = {a, b};
      }
    for (int t : cavity) { tris[t].alive = false; ++gen[t]; }

    const int pi = static_cast<int>(pts.size());
    pts.push_back(p);
    for (const auto& [key, u] : uses) {
      if (u.first != 1) continue;
      const BEdge& e = u.second;
      // degenerate fan (p on the edge): only valid on the hull, skip there
      if (orient2d(pts[e.a], pts[e.b], p) <= aeps) continue;
      const int t = addTri({e.a, e.b, pi});
      if (out_new) out_new->push_back(t);
    }
    rebuildAdjacency();
    return pi;
  }
};

}  // namespace

Mesh buildMesh(const std::vector<Point2>& sites, const MeshOptions& opts) {
  if (sites.empty()) throw std::invalid_argument("build_mesh: no sites");
  for (const Point2& s : sites)
    if (!isFinite(s))
      throw std::invalid_argument("build_mesh: non-finite site coordinate");
  if (!(opts.max_edge_inner <= opts.max_edge_outer))
    throw std::invalid_argument("build_mesh: max_edge_inner > max_edge_outer");
  if (!(opts.buffer_width > 0.0))
    throw std::invalid_argument("build_mesh: buffer_width must be positive");
  if (opts.cutoff < 0.0)
    throw std::invalid_argument("build_mesh: negative cutoff");

  // merge sites below cutoff, first-seen representative wins
  double xmin = sites[0].x, xmax = sites[0].x;
  double ymin = sites[0].y, ymax = sites[0].y;
  for (const Point2& s : sites) {
    xmin = std::min(xmin, s.x); xmax = std::max(xmax, s.x);
    ymin = std::min(ymin, s.y); ymax = std::max(ymax, s.y);
  }
  const double raw_scale = std::max(xmax - xmin, ymax - ymin);
  std::vector<Point2> merged;
  for (const Point2& s : sites) {
    bool dup = false;
    for (const Point2& m : merged)
      if (dist(s, m) < opts.cutoff || dist(s, m) <= 1e-12 * raw_scale) {
        dup = true;
        break;
      }
    if (!dup) merged.push_back(s);
  }
  if (merged.size() >= 2) {
    bool collinear = true;
    for (size_t i = 2; i < merged.size() && collinear; ++i)
      collinear = std::abs((double)orient2d(merged[0], merged[1], merged[i])) <=
                  1e-12 * raw_scale * raw_scale;
    if (merged.size() == 2 || collinear)
      throw std::invalid_argument(
          "build_mesh: degenerate input, all sites collinear after merging");
  }

  // domain rectangle = site bounding box + buffer
  const double bx0 = xmin - opts.buffer_width, bx1 = xmax + opts.buffer_width;
  const double by0 = ymin - opts.buffer_width, by1 = ymax + opts.buffer_width;

  Builder bld;
  bld.scale = std::hypot(bx1 - bx0, by1 - by0);
  bld.pts = {{bx0, by0}, {bx1, by0}, {bx1, by1}, {bx0, by1}};
  bld.addTri({0, 1, 2});
  bld.addTri({0, 2, 3});
  bld.rebuildAdjacency();

  for (const Point2& s : merged) bld.insert(s, nullptr);

  const auto innerEdge = [&](const Point2& a, const Point2& b) {
    const double mx = 0.5 * (a.x + b.x), my = 0.5 * (a.y + b.y);
    const double tol = 1e-9 * bld.scale;
    return mx >= xmin - tol && mx <= xmax + tol && my >= ymin - tol &&
           my <= ymax + tol;
  };
  const double min_angle = opts.min_angle_deg * M_PI / 180.0;
  const double cos_floor = std::cos(min_angle);

  // refinement: split triangles violating edge-length or angle constraints
  std::deque<std::pair<int, int>> queue;  // (slot, generation)
  for (int t = 0; t < (int)bld.tris.size(); ++t) queue.push_back({t, bld.gen[t]});
  int inserted = 0;
  while (!queue.empty() && inserted < opts.max_insertions) {
    auto [t, g] = queue.front();
    queue.pop_front();
    if (g != bld.gen[t] || !bld.tris[t].alive) continue;
    const Tri& tr = bld.tris[t];
    const Point2 a = bld.pts[tr.v[0]], b = bld.pts[tr.v[1]],
                 c = bld.pts[tr.v[2]];
    const double lab = dist(a, b), lbc = dist(b, c), lca = dist(c, a);
    bool too_long = false;
    const auto check = [&](const Point2& u, const Point2& v, double l) {
      const double lim = innerEdge(u, v) ? opts.max_edge_inner
                                         : opts.max_edge_outer;
      if (l > lim * (1.0 + 1e-12)) too_long = true;
    };
    check(a, b, lab);
    check(b, c, lbc);
    check(c, a, lca);
    bool bad_angle = false;
    if (!too_long) {
      // smallest angle is opposite the shortest edge; law of cosines
      const auto cosAngle = [](double opp, double s1, double s2) {
        return (s1 * s1 + s2 * s2 - opp * opp) / (2.0 * s1 * s2);
      };
      const double cmax = std::max({cosAngle(lab, lbc, lca),
                                    cosAngle(lbc, lca, lab),
                                    cosAngle(lca, lab, lbc)});
      bad_angle = cmax > cos_floor;
    }
    if (!too_long && !bad_angle) continue;

    // quality splits on very small triangles are not worth a cascade
    const double lmax = std::max({lab, lbc, lca});
    if (bad_angle && !too_long && lmax < 1e-3 * bld.scale) continue;

    Point2 p = circumcenter(a, b, c);
    const double margin = 1e-9 * bld.scale;
    const bool cc_inside = p.x > bx0 + margin && p.x < bx1 - margin &&
                           p.y > by0 + margin && p.y < by1 - margin;
    bool use_hull_split = !cc_inside;
    if (cc_inside) {
      // Ruppert encroachment rule: a circumcenter inside the diametral disk
      // of a hull edge splits that edge instead
      for (const Tri& ht : bld.tris) {
        if (!ht.alive) continue;
        for (int i = 0; i < 3 && !use_hull_split; ++i) {
          if (ht.nbr[i] != -1) continue;
          const Point2& ea = bld.pts[ht.v[(i + 1) % 3]];
          const Point2& eb = bld.pts[ht.v[(i + 2) % 3]];
          const Point2 mid{0.5 * (ea.x + eb.x), 0.5 * (ea.y + eb.y)};
          if (dist(p, mid) < 0.5 * dist(ea, eb) * (1.0 - 1e-12)) {
            p = mid;
            use_hull_split = true;
          }
        }
        if (use_hull_split) break;
      }
    } else {
      // circumcenter left the rectangle: split the nearest hull edge in
      // that direction (hull edges tile the rectangle sides)
      const double cx = std::clamp(p.x, bx0, bx1);
      const double cy = std::clamp(p.y, by0, by1);
      double best = 1e300;
      Point2 bestmid{0.5 * (a.x + b.x), 0.5 * (a.y + b.y)};
      for (const Tri& ht : bld.tris) {
        if (!ht.alive) continue;
        for (int i = 0; i < 3; ++i) {
          if (ht.nbr[i] != -1) continue;
          const Point2& ea = bld.pts[ht.v[(i + 1) % 3]];
          const Point2& eb = bld.pts[ht.v[(i + 2) % 3]];
          const Point2 mid{0.5 * (ea.x + eb.x), 0.5 * (ea.y + eb.y)};
          const double d = std::hypot(mid.x - cx, mid.y - cy);
          if (d < best) { best = d; bestmid = mid; }
        }
      }
      p = bestmid;
    }
    if (too_long && !use_hull_split && !cc_inside) {
      // an over-long edge is also fine to bisect directly
      if (lab >= lbc && lab >= lca)
        p = {0.5 * (a.x + b.x), 0.5 * (a.y + b.y)};
      else if (lbc >= lca)
        p = {0.5 * (b.x + c.x), 0.5 * (b.y + c.y)};
      else
        p = {0.5 * (c.x + a.x), 0.5 * (c.y + a.y)};
    }
    const double dmin = std::min({dist(p, a), dist(p, b), dist(p, c)});
    if (dmin <= 1e-7 * bld.scale) continue;  // unsplittable sliver
    std::vector<int> created;
    const size_t before = bld.pts.size();
    bld.insert(p, &created);
    if (bld.pts.size() == before) continue;  // snapped onto an existing vertex
    ++inserted;
    for (int nt : created) queue.push_back({nt, bld.gen[nt]});
    if (bld.tris[t].alive && bld.gen[t] == g) queue.push_back({t, g});
#ifdef DSCAL_MESH_DEBUG
    {
      long double area = 0.0;
      for (const Tri& tt : bld.tris)
        if (tt.alive)
          area += orient2d(bld.pts[tt.v[0]], bld.pts[tt.v[1]],
                           bld.pts[tt.v[2]]) / 2.0L;
      const long double want = (long double)(bx1 - bx0) * (by1 - by0);
      if (std::abs((double)(area - want)) > 1e-9 * (double)want) {
        fprintf(stderr, "coverage broken after insert #%d (%.17g, %.17g): area %.17g want %.17g\n",
                inserted, p.x, p.y, (double)area, (double)want);
        abort();
      }
    }
#endif
  }

  // compact into the output mesh
  Mesh mesh;
  mesh.vertices = bld.pts;
  const double itol = 1e-9 * bld.scale;
  mesh.interior_flag.resize(mesh.vertices.size());
  for (size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Point2& v = mesh.vertices[i];
    mesh.interior_flag[i] = v.x >= xmin - itol && v.x <= xmax + itol &&
                            v.y >= ymin - itol && v.y <= ymax + itol;
  }
  for (const Tri& t : bld.tris) {
    if (!t.alive) continue;
    mesh.triangles.push_back(t.v);
    for (int i = 0; i < 3; ++i)
      if (t.nbr[i] < 0)
        mesh.boundary_edges.push_back({t.v[(i + 1) % 3], t.v[(i + 2) % 3]});
  }
  return mesh;
}

double Mesh::triangleArea(int t) const {
  const auto& tr = triangles[t];
  return 0.5 * (double)orient2d(vertices[tr[0]], vertices[tr[1]],
                                vertices[tr[2]]);
}

double Mesh::totalArea() const {
  double a = 0.0;
  for (int t = 0; t < numTriangles(); ++t) a += triangleArea(t);
  return a;
}

BasisEvaluation locateAndWeights(const Mesh& mesh, const Point2& p) {
  if (!isFinite(p))
    throw std::invalid_argument("locate_and_weights: non-finite point");
  for (int t = 0; t < mesh.numTriangles(); ++t) {
    const auto& tr = mesh.triangles[t];
    const Point2 &a = mesh.vertices[tr[0]], &b = mesh.vertices[tr[1]],
                 &c = mesh.vertices[tr[2]];
    const long double area2 = orient2d(a, b, c);
    const long double w0 = orient2d(p, b, c) / area2;
    const long double w1 = orient2d(a, p, c) / area2;
    const long double w2 = orient2d(a, b, p) / area2;
    const long double tol = -1e-10L;
    if (w0 < tol || w1 < tol || w2 < tol) continue;
    BasisEvaluation ev;
    ev.triangle_index = t;
    ev.vertex_indices = tr;
    double w[3] = {std::max(0.0, (double)w0), std::max(0.0, (double)w1),
                   std::max(0.0, (double)w2)};
    const double s = w[0] + w[1] + w[2];
    for (int i = 0; i < 3; ++i) ev.weights[i] = w[i] / s;
    return ev;
  }
  throw std::runtime_error("locate_and_weights: point outside domain");
}

Eigen::SparseMatrix<double> projectorMatrix(const Mesh& mesh,
                                            const std::vector<Point2>& points) {
  std::vector<Eigen::Triplet<double>> trips;
  std::string bad;
  for (size_t i = 0; i < points.size(); ++i) {
    try {
      const BasisEvaluation ev = locateAndWeights(mesh, points[i]);
      for (int k = 0; k < 3; ++k)
        if (ev.weights[k] != 0.0)
          trips.emplace_back((int)i, ev.vertex_indices[k], ev.weights[k]);
    } catch (const std::runtime_error&) {
      bad += (bad.empty() ? "" : ", ") + std::to_string(i);
    }
  }
  if (!bad.empty())
    throw std::runtime_error("projector_matrix: points outside domain: " + bad);
  Eigen::SparseMatrix<double> A((int)points.size(), mesh.numVertices());
  A.setFromTriplets(trips.begin(), trips.end());
  A.makeCompressed();
  return A;
}

void writeMesh(const Mesh& mesh, std::ostream& os) {
  os << "vertices " << mesh.numVertices() << " triangles "
     << mesh.numTriangles() << "\n";
  os << std::setprecision(17);
  for (int i = 0; i < mesh.numVertices(); ++i)
    os << mesh.vertices[i].x << " " << mesh.vertices[i].y << " "
       << (int)mesh.interior_flag[i] << "\n";
  for (const auto& t : mesh.triangles)
    os << t[0] << " " << t[1] << " " << t[2] << "\n";
}

Mesh readMesh(std::istream& is) {
  std::string kw1, kw2;
  int nv = 0, nt = 0;
  is >> kw1 >> nv >> kw2 >> nt;
  if (kw1 != "vertices" || kw2 != "triangles" || !is)
    throw std::runtime_error("read_mesh: bad header");
  Mesh mesh;
  mesh.vertices.resize(nv);
  mesh.interior_flag.resize(nv);
  for (int i = 0; i < nv; ++i) {
    int flag;
    is >> mesh.vertices[i].x >> mesh.vertices[i].y >> flag;
    mesh.interior_flag[i] = (std::uint8_t)flag;
  }
  mesh.triangles.resize(nt);
  for (int i = 0; i < nt; ++i)
    is >> mesh.triangles[i][0] >> mesh.triangles[i][1] >> mesh.triangles[i][2];
  if (!is) throw std::runtime_error("read_mesh: truncated file");
  // rebuild boundary edges from the edge-use count
  std::map<std::pair<int, int>, int> uses;
  for (const auto& t : mesh.triangles)
    for (int i = 0; i < 3; ++i) {
      int a = t[i], b = t[(i + 1) % 3];
      uses[{std::min(a, b), std::max(a, b)}]++;
    }
  for (const auto& [e, n] : uses)
    if (n == 1) mesh.boundary_edges.push_back({e.first, e.second});
  return mesh;
}

}  // namespace downscale
