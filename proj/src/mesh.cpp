#include "ocpafem/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace ocpafem {

namespace {

double dot(const Point& a, const Point& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

Point sub(const Point& a, const Point& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}

Point cross(const Point& a, const Point& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2],
          a[0] * b[1] - a[1] * b[0]};
}

double norm(const Point& a) { return std::sqrt(dot(a, a)); }

double dist2(const Point& a, const Point& b) {
  const Point d = sub(a, b);
  return dot(d, d);
}

// Signed volume: area in 2D (z ignored), volume in 3D.
double signed_volume(int dim, const Point& p0, const Point& p1, const Point& p2,
                     const Point& p3) {
  if (dim == 2) {
    return 0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) -
                  (p2[0] - p0[0]) * (p1[1] - p0[1]));
  }
  const Point a = sub(p1, p0), b = sub(p2, p0), c = sub(p3, p0);
  return dot(cross(a, b), c) / 6.0;
}

std::array<int, 3> face_key(int dim, const std::array<int, 4>& elem, int skip) {
  std::array<int, 3> key{-1, -1, -1};
  int k = 0;
  for (int i = 0; i < dim + 1; ++i)
    if (i != skip) key[k++] = elem[i];
  std::sort(key.begin(), key.begin() + dim);
  return key;
}

struct KeyHash {
  std::size_t operator()(const std::array<int, 3>& k) const {
    std::size_t h = 1469598103934665603ull;
    for (int v : k) {
      h ^= static_cast<std::size_t>(v) + 0x9e3779b97f4a7c15ull;
      h *= 1099511628211ull;
    }
    return h;
  }
};

}  // namespace

Mesh::Mesh(int dim, std::vector<Point> vertices,
           std::vector<std::array<int, 4>> elements, std::vector<int> generation)
    : dim_(dim),
      vertices_(std::move(vertices)),
      elements_(std::move(elements)),
      generation_(std::move(generation)) {
  if (dim_ != 2 && dim_ != 3) throw std::runtime_error("Mesh: dim must be 2 or 3");
  if (elements_.empty()) throw std::runtime_error("Mesh: empty element list");
  if (generation_.empty()) generation_.assign(elements_.size(), 0);
  build_geometry();
  build_faces();
}

void Mesh::build_geometry() {
  const int n = num_elements();
  volume_.resize(n);
  diameter_.resize(n);
  bary_grad_.resize(n);
  total_volume_ = 0.0;
  for (int e = 0; e < n; ++e) {
    auto& el = elements_[e];
    const Point& p0 = vertices_[el[0]];
    const Point& p1 = vertices_[el[1]];
    const Point& p2 = vertices_[el[2]];
    const Point& p3 = dim_ == 3 ? vertices_[el[3]] : Point{0, 0, 0};
    double vol = signed_volume(dim_, p0, p1, p2, p3);
    if (vol < 0.0) {  // repair orientation
      std::swap(el[dim_ - 1], el[dim_]);
      vol = -vol;
    }
    if (!(vol > 0.0))
      throw std::runtime_error("Mesh: degenerate element " + std::to_string(e));
    volume_[e] = vol;
    total_volume_ += vol;

    double d2 = 0.0;
    for (int i = 0; i < dim_ + 1; ++i)
      for (int j = i + 1; j < dim_ + 1; ++j)
        d2 = std::max(d2, dist2(vertices_[el[i]], vertices_[el[j]]));
    diameter_[e] = std::sqrt(d2);

    // grad(lambda_i) = (opposite-face normal) scaled so lambda_i is 1 at
    // vertex i and 0 on the opposite face.
    auto& g = bary_grad_[e];
    if (dim_ == 2) {
      const Point* p[3] = {&vertices_[el[0]], &vertices_[el[1]], &vertices_[el[2]]};
      for (int i = 0; i < 3; ++i) {
        const Point& a = *p[(i + 1) % 3];
        const Point& b = *p[(i + 2) % 3];
        // In-plane normal to edge (a,b), scaled by 1/(2|T|) and oriented
        // toward vertex i.
        Point t = sub(b, a);
        Point nrm{-t[1], t[0], 0.0};
        const double s = 1.0 / (2.0 * vol);
        if (dot(nrm, sub(*p[i], a)) < 0) {
          nrm[0] = -nrm[0];
          nrm[1] = -nrm[1];
        }
        g[i] = {nrm[0] * s, nrm[1] * s, 0.0};
      }
      g[3] = {0, 0, 0};
    } else {
      const Point* p[4] = {&vertices_[el[0]], &vertices_[el[1]], &vertices_[el[2]],
                           &vertices_[el[3]]};
      for (int i = 0; i < 4; ++i) {
        const Point& a = *p[(i + 1) % 4];
        const Point& b = *p[(i + 2) % 4];
        const Point& c = *p[(i + 3) % 4];
        Point nrm = cross(sub(b, a), sub(c, a));
        const double s = 1.0 / (6.0 * vol);
        if (dot(nrm, sub(*p[i], a)) < 0) nrm = {-nrm[0], -nrm[1], -nrm[2]};
        g[i] = {nrm[0] * s, nrm[1] * s, nrm[2] * s};
      }
    }
  }
}

void Mesh::build_faces() {
  interior_faces_.clear();
  boundary_faces_.clear();
  std::unordered_map<std::array<int, 3>, std::pair<int, int>, KeyHash> seen;
  seen.reserve(elements_.size() * (dim_ + 1));
  for (int e = 0; e < num_elements(); ++e) {
    for (int s = 0; s < dim_ + 1; ++s) {
      const auto key = face_key(dim_, elements_[e], s);
      auto [it, inserted] = seen.emplace(key, std::make_pair(e, -1));
      if (!inserted) {
        if (it->second.second >= 0)
          throw std::runtime_error("Mesh: face shared by more than two elements");
        it->second.second = e;
      }
    }
  }

  // Deterministic face ordering: sort by vertex key.
  std::map<std::array<int, 3>, std::pair<int, int>> ordered(seen.begin(), seen.end());
  for (const auto& [key, adj] : ordered) {
    FaceRecord f;
    f.verts = key;
    f.plus = std::min(adj.first, adj.second >= 0 ? adj.second : adj.first);
    f.minus = adj.second >= 0 ? std::max(adj.first, adj.second) : -1;
    const Point& a = vertices_[key[0]];
    const Point& b = vertices_[key[1]];
    if (dim_ == 2) {
      const Point t = sub(b, a);
      f.measure = norm(t);
      f.normal = {-t[1] / f.measure, t[0] / f.measure, 0.0};
    } else {
      const Point& c = vertices_[key[2]];
      const Point n = cross(sub(b, a), sub(c, a));
      const double l = norm(n);
      f.measure = 0.5 * l;
      f.normal = {n[0] / l, n[1] / l, n[2] / l};
    }
    // Orient from plus toward minus (outward for boundary faces): the
    // normal must point away from the plus element's remaining vertex.
    const auto& el = elements_[f.plus];
    Point other{0, 0, 0};
    for (int i = 0; i < dim_ + 1; ++i) {
      const int v = el[i];
      if (v != key[0] && v != key[1] && (dim_ == 2 || v != key[2])) other = vertices_[v];
    }
    if (dot(f.normal, sub(other, a)) > 0)
      f.normal = {-f.normal[0], -f.normal[1], -f.normal[2]};
    if (f.minus >= 0)
      interior_faces_.push_back(f);
    else
      boundary_faces_.push_back(f);
  }

  boundary_vertex_.assign(vertices_.size(), 0);
  for (const auto& f : boundary_faces_)
    for (int i = 0; i < dim_; ++i) boundary_vertex_[f.verts[i]] = 1;
}

int Mesh::num_boundary_vertices() const {
  int n = 0;
  for (char c : boundary_vertex_) n += c;
  return n;
}

Point Mesh::centroid(int e) const {
  const auto& el = elements_[e];
  Point c{0, 0, 0};
  for (int i = 0; i < dim_ + 1; ++i)
    for (int k = 0; k < 3; ++k) c[k] += vertices_[el[i]][k];
  for (int k = 0; k < 3; ++k) c[k] /= (dim_ + 1);
  return c;
}

double Mesh::min_angle() const {
  double best = 1e300;
  if (dim_ == 2) {
    for (const auto& el : elements_) {
      for (int i = 0; i < 3; ++i) {
        const Point& p = vertices_[el[i]];
        Point u = sub(vertices_[el[(i + 1) % 3]], p);
        Point v = sub(vertices_[el[(i + 2) % 3]], p);
        const double c = dot(u, v) / (norm(u) * norm(v));
        best = std::min(best, std::acos(std::clamp(c, -1.0, 1.0)));
      }
    }
  } else {
    // Dihedral angle along each of the 6 edges: angle between the two
    // faces adjacent to the edge.
    static const int pairs[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
    for (const auto& el : elements_) {
      for (const auto& pr : pairs) {
        int oth[2], k = 0;
        for (int i = 0; i < 4; ++i)
          if (i != pr[0] && i != pr[1]) oth[k++] = i;
        const Point& a = vertices_[el[pr[0]]];
        const Point& b = vertices_[el[pr[1]]];
        const Point& c = vertices_[el[oth[0]]];
        const Point& d = vertices_[el[oth[1]]];
        // e x (c-a) and e x (d-a) are the in-half-plane directions of the
        // two faces rotated by the same quarter turn about the edge, so the
        // angle between them is the dihedral angle itself.
        const Point n1 = cross(sub(b, a), sub(c, a));
        const Point n2 = cross(sub(b, a), sub(d, a));
        const double cosang = dot(n1, n2) / (norm(n1) * norm(n2));
        best = std::min(best, std::acos(std::clamp(cosang, -1.0, 1.0)));
      }
    }
  }
  return best * 180.0 / 3.14159265358979323846;
}

void Mesh::conformity_check() const {
  // Face multiplicity was enforced in build_faces(); volumes in
  // build_geometry(). Remaining hazard: hanging nodes. For bisection
  // meshes these always sit at an edge midpoint, so probe every element
  // edge midpoint against the vertex set.
  std::map<std::array<long long, 3>, int> vert_lookup;
  const double scale = 1.0 / 1e-9;
  auto quantize = [&](const Point& p) {
    return std::array<long long, 3>{static_cast<long long>(std::llround(p[0] * scale)),
                                    static_cast<long long>(std::llround(p[1] * scale)),
                                    static_cast<long long>(std::llround(p[2] * scale))};
  };
  for (int v = 0; v < num_vertices(); ++v) vert_lookup[quantize(vertices_[v])] = v;
  for (int e = 0; e < num_elements(); ++e) {
    const auto& el = elements_[e];
    for (int i = 0; i < dim_ + 1; ++i) {
      for (int j = i + 1; j < dim_ + 1; ++j) {
        const Point& a = vertices_[el[i]];
        const Point& b = vertices_[el[j]];
        const Point mid{0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])};
        const auto it = vert_lookup.find(quantize(mid));
        if (it != vert_lookup.end())
          throw std::runtime_error("Mesh: hanging node at midpoint of an edge of element " +
                                   std::to_string(e));
      }
    }
  }
}

Mesh Mesh::lshape(int levels) {
  if (levels < 0) throw std::runtime_error("lshape: levels must be >= 0");
  const std::vector<Point> verts = {
      {-1, -1, 0}, {0, -1, 0}, {-1, 0, 0}, {0, 0, 0},
      {1, 0, 0},   {-1, 1, 0}, {0, 1, 0},  {1, 1, 0}};
  // Two right triangles per retained quadrant, diagonals through the
  // reentrant corner's quadrant diagonals.
  const std::vector<std::array<int, 4>> elems = {
      {0, 1, 3, -1}, {0, 3, 2, -1},   // third quadrant
      {2, 3, 5, -1}, {3, 6, 5, -1},   // second quadrant
      {3, 4, 7, -1}, {3, 7, 6, -1}};  // first quadrant
  Mesh m(2, verts, elems);
  for (int l = 0; l < levels; ++l) m = uniform_refine(m).mesh;
  return m;
}

Mesh Mesh::cube(int levels) {
  if (levels < 0) throw std::runtime_error("cube: levels must be >= 0");
  std::vector<Point> verts(8);
  for (int i = 0; i < 8; ++i)
    verts[i] = {double(i & 1), double((i >> 1) & 1), double((i >> 2) & 1)};
  // Kuhn decomposition: one tet per monotone vertex path 0 -> 7.
  const std::vector<std::array<int, 4>> elems = {
      {0, 1, 3, 7}, {0, 1, 5, 7}, {0, 2, 3, 7},
      {0, 2, 6, 7}, {0, 4, 5, 7}, {0, 4, 6, 7}};
  Mesh m(3, verts, elems);
  for (int l = 0; l < levels; ++l) m = uniform_refine(m).mesh;
  return m;
}

Mesh Mesh::square(int levels) {
  if (levels < 0) throw std::runtime_error("square: levels must be >= 0");
  const std::vector<Point> verts = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}};
  const std::vector<std::array<int, 4>> elems = {{0, 1, 3, -1}, {0, 3, 2, -1}};
  Mesh m(2, verts, elems);
  for (int l = 0; l < levels; ++l) m = uniform_refine(m).mesh;
  return m;
}

namespace {

// Working state of one refine() call.
struct Bisector {
  int dim;
  std::vector<Point> verts;
  std::vector<std::array<int, 4>> elems;
  std::vector<int> origin;      // per element: input-mesh ancestor
  std::vector<int> generation;  // per element: bisection depth
  std::vector<std::array<int, 3>> vertex_parents;
  std::map<std::pair<int, int>, int> midpoint;  // sorted edge -> vertex
  std::vector<std::vector<int>> vert_elems;     // incidence
  std::vector<char> alive;
  std::vector<int> worklist;
  long long budget;

  explicit Bisector(const Mesh& m)
      : dim(m.dim()), budget(100LL * m.num_elements()) {
    verts.reserve(m.num_vertices() * 2);
    for (int v = 0; v < m.num_vertices(); ++v) verts.push_back(m.vertex(v));
    elems.reserve(m.num_elements() * 2);
    origin.reserve(m.num_elements() * 2);
    vert_elems.resize(m.num_vertices());
    for (int e = 0; e < m.num_elements(); ++e) {
      elems.push_back(m.element(e));
      origin.push_back(e);
      generation.push_back(m.generation(e));
      alive.push_back(1);
      for (int i = 0; i < dim + 1; ++i) vert_elems[m.element(e)[i]].push_back(e);
    }
  }

  std::pair<int, int> longest_edge(int e) const {
    const auto& el = elems[e];
    double best = -1.0;
    std::pair<int, int> edge{-1, -1};
    for (int i = 0; i < dim + 1; ++i) {
      for (int j = i + 1; j < dim + 1; ++j) {
        const int a = std::min(el[i], el[j]);
        const int b = std::max(el[i], el[j]);
        const double l2 = dist2(verts[a], verts[b]);
        if (l2 > best || (l2 == best && std::make_pair(a, b) < edge)) {
          best = l2;
          edge = {a, b};
        }
      }
    }
    return edge;
  }

  bool has_split_edge(int e) const {
    const auto& el = elems[e];
    for (int i = 0; i < dim + 1; ++i)
      for (int j = i + 1; j < dim + 1; ++j)
        if (midpoint.count({std::min(el[i], el[j]), std::max(el[i], el[j])}))
          return true;
    return false;
  }

  void attach(int v, int e) { vert_elems[v].push_back(e); }

  void bisect(int e) {
    if (--budget < 0)
      throw std::runtime_error(
          "refine: conformity closure exceeded 100 * num_elements bisections");
    const auto edge = longest_edge(e);
    const auto [a, b] = edge;
    int m;
    const auto it = midpoint.find(edge);
    if (it != midpoint.end()) {
      m = it->second;
    } else {
      m = static_cast<int>(verts.size());
      const Point& pa = verts[a];
      const Point& pb = verts[b];
      verts.push_back({0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1]), 0.5 * (pa[2] + pb[2])});
      vert_elems.emplace_back();
      midpoint.emplace(edge, m);
      vertex_parents.push_back({m, a, b});
      // Elements (other than e) containing the split edge are now
      // nonconforming; queue them.
      for (int other : vert_elems[a]) {
        if (other == e || !alive[other]) continue;
        const auto& oe = elems[other];
        bool has_a = false, has_b = false;
        for (int i = 0; i < dim + 1; ++i) {
          has_a |= oe[i] == a;
          has_b |= oe[i] == b;
        }
        if (has_a && has_b) worklist.push_back(other);
      }
    }

    // Children: replace vertex b (resp. a) of e by the midpoint.
    std::array<int, 4> c1 = elems[e];
    std::array<int, 4> c2 = elems[e];
    for (int i = 0; i < dim + 1; ++i) {
      if (c1[i] == b) c1[i] = m;
      if (c2[i] == a) c2[i] = m;
    }
    const int e2 = static_cast<int>(elems.size());
    alive[e] = 0;
    elems.push_back(c1);
    origin.push_back(origin[e]);
    generation.push_back(generation[e] + 1);
    alive.push_back(1);
    elems.push_back(c2);
    origin.push_back(origin[e]);
    generation.push_back(generation[e] + 1);
    alive.push_back(1);
    for (int i = 0; i < dim + 1; ++i) {
      attach(c1[i], e2);
      attach(c2[i], e2 + 1);
    }
    if (has_split_edge(e2)) worklist.push_back(e2);
    if (has_split_edge(e2 + 1)) worklist.push_back(e2 + 1);
  }
};

}  // namespace

RefineResult refine(const Mesh& mesh, const std::vector<int>& marked) {
  for (int e : marked)
    if (e < 0 || e >= mesh.num_elements())
      throw std::runtime_error("refine: marked element out of range");
  if (marked.empty()) {
    std::vector<int> origin(mesh.num_elements());
    for (int e = 0; e < mesh.num_elements(); ++e) origin[e] = e;
    return {mesh, {}, std::move(origin)};
  }

  Bisector bi(mesh);
  std::vector<int> seed(marked);
  std::sort(seed.begin(), seed.end());
  seed.erase(std::unique(seed.begin(), seed.end()), seed.end());
  for (int e : seed) bi.bisect(e);
  while (!bi.worklist.empty()) {
    const int e = bi.worklist.back();
    bi.worklist.pop_back();
    if (!bi.alive[e] || !bi.has_split_edge(e)) continue;
    bi.bisect(e);
  }

  std::vector<std::array<int, 4>> elems;
  std::vector<int> origin, generation;
  for (std::size_t e = 0; e < bi.elems.size(); ++e) {
    if (!bi.alive[e]) continue;
    elems.push_back(bi.elems[e]);
    origin.push_back(bi.origin[e]);
    generation.push_back(bi.generation[e]);
  }
  Mesh out(mesh.dim(), std::move(bi.verts), std::move(elems), std::move(generation));
  return {std::move(out), std::move(bi.vertex_parents), std::move(origin)};
}

RefineResult uniform_refine(const Mesh& mesh) {
  RefineResult acc{mesh, {}, {}};
  acc.origin.resize(mesh.num_elements());
  for (int e = 0; e < mesh.num_elements(); ++e) acc.origin[e] = e;
  for (int sweep = 0; sweep < mesh.dim(); ++sweep) {
    std::vector<int> all(acc.mesh.num_elements());
    for (int e = 0; e < acc.mesh.num_elements(); ++e) all[e] = e;
    RefineResult step = refine(acc.mesh, all);
    // Compose provenance: vertex indices persist across sweeps.
    std::vector<int> origin(step.mesh.num_elements());
    for (int e = 0; e < step.mesh.num_elements(); ++e)
      origin[e] = acc.origin[step.origin[e]];
    acc.mesh = std::move(step.mesh);
    acc.origin = std::move(origin);
    acc.vertex_parents.insert(acc.vertex_parents.end(), step.vertex_parents.begin(),
                              step.vertex_parents.end());
  }
  return acc;
}

void Mesh::write_ascii(std::ostream& os) const {
  os << dim_ << ' ' << num_vertices() << ' ' << num_elements() << '\n';
  char buf[96];
  for (const auto& v : vertices_) {
    if (dim_ == 2)
      std::snprintf(buf, sizeof buf, "%.17g %.17g\n", v[0], v[1]);
    else
      std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", v[0], v[1], v[2]);
    os << buf;
  }
  for (const auto& el : elements_) {
    for (int i = 0; i < dim_ + 1; ++i) os << el[i] << (i == dim_ ? '\n' : ' ');
  }
}

Mesh Mesh::read_ascii(std::istream& is) {
  int dim = 0, nv = 0, ne = 0;
  if (!(is >> dim >> nv >> ne)) throw std::runtime_error("mesh read: bad header");
  std::vector<Point> verts(nv, Point{0, 0, 0});
  for (int v = 0; v < nv; ++v)
    for (int k = 0; k < dim; ++k)
      if (!(is >> verts[v][k])) throw std::runtime_error("mesh read: bad vertex line");
  std::vector<std::array<int, 4>> elems(ne, {-1, -1, -1, -1});
  for (int e = 0; e < ne; ++e)
    for (int i = 0; i < dim + 1; ++i)
      if (!(is >> elems[e][i])) throw std::runtime_error("mesh read: bad element line");
  return Mesh(dim, std::move(verts), std::move(elems));
}

void Mesh::write_vtk(
    std::ostream& os,
    const std::vector<std::pair<std::string, const std::vector<double>*>>& cell_fields,
    const std::vector<std::pair<std::string, const std::vector<double>*>>& point_fields) const {
  os << "# vtk DataFile Version 3.0\nocpafem mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << num_vertices() << " double\n";
  char buf[96];
  for (const auto& v : vertices_) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", v[0], v[1], v[2]);
    os << buf;
  }
  const int npe = dim_ + 1;
  os << "CELLS " << num_elements() << ' ' << num_elements() * (npe + 1) << '\n';
  for (const auto& el : elements_) {
    os << npe;
    for (int i = 0; i < npe; ++i) os << ' ' << el[i];
    os << '\n';
  }
  os << "CELL_TYPES " << num_elements() << '\n';
  for (int e = 0; e < num_elements(); ++e) os << (dim_ == 2 ? 5 : 10) << '\n';
  if (!cell_fields.empty()) {
    os << "CELL_DATA " << num_elements() << '\n';
    for (const auto& [name, data] : cell_fields) {
      os << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
      for (double x : *data) {
        std::snprintf(buf, sizeof buf, "%.17g\n", x);
        os << buf;
      }
    }
  }
  if (!point_fields.empty()) {
    os << "POINT_DATA " << num_vertices() << '\n';
    for (const auto& [name, data] : point_fields) {
      os << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
      for (double x : *data) {
        std::snprintf(buf, sizeof buf, "%.17g\n", x);
        os << buf;
      }
    }
  }
}

}  // namespace ocpafem
