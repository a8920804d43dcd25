#ifndef OCPAFEM_MESH_HPP
#define OCPAFEM_MESH_HPP

#include <array>
#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace ocpafem {

using Point = std::array<double, 3>;  // z component unused in 2D

/// A (d-1)-subsimplex shared by one or two elements.
///
/// `plus` is the adjacent element with the smaller index; `normal` is the
/// unit normal pointing from `plus` toward `minus` (outward for boundary
/// faces, where minus == -1). `measure` is the edge length (2D) or the
/// triangle area (3D).
struct FaceRecord {
  std::array<int, 3> verts{-1, -1, -1};
  int plus = -1;
  int minus = -1;
  Point normal{0.0, 0.0, 0.0};
  double measure = 0.0;

  bool boundary() const { return minus < 0; }
};

/// Conforming simplicial mesh in dimension 2 or 3.
///
/// Immutable after construction: refinement returns a new mesh (see
/// refine() / uniform_refine()). Geometry caches (volumes, diameters,
/// barycentric gradients, face lists) are built once in the constructor,
/// so read-only queries are safe to share across threads.
class Mesh {
 public:
  Mesh(int dim, std::vector<Point> vertices,
       std::vector<std::array<int, 4>> elements,
       std::vector<int> generation = {});

  static Mesh lshape(int levels);  // (-1,1)^2 minus closed fourth quadrant
  static Mesh cube(int levels);    // (0,1)^3, Kuhn split into 6 tets
  static Mesh square(int levels);  // (0,1)^2, two triangles at level 0

  int dim() const { return dim_; }
  int num_vertices() const { return static_cast<int>(vertices_.size()); }
  int num_elements() const { return static_cast<int>(elements_.size()); }
  int verts_per_element() const { return dim_ + 1; }

  const Point& vertex(int v) const { return vertices_[v]; }
  const std::array<int, 4>& element(int e) const { return elements_[e]; }
  int generation(int e) const { return generation_[e]; }

  const std::vector<FaceRecord>& interior_faces() const { return interior_faces_; }
  const std::vector<FaceRecord>& boundary_faces() const { return boundary_faces_; }
  bool vertex_on_boundary(int v) const { return boundary_vertex_[v] != 0; }
  int num_boundary_vertices() const;

  double element_volume(int e) const { return volume_[e]; }
  double element_diameter(int e) const { return diameter_[e]; }
  /// Gradients of the d+1 barycentric (P1 hat) functions, constant on the
  /// element. Row i corresponds to local vertex i.
  const std::array<Point, 4>& barycentric_gradients(int e) const { return bary_grad_[e]; }
  Point centroid(int e) const;

  double total_volume() const { return total_volume_; }
  /// Minimum interior angle (2D) or minimum dihedral angle (3D), in degrees.
  double min_angle() const;

  /// Throws std::runtime_error on any conformity violation: a face shared
  /// by more than two elements, a nonpositive element volume, or a hanging
  /// node (an element edge whose midpoint coincides with a mesh vertex).
  void conformity_check() const;

  // ASCII format: "dim nv ne" header, nv coordinate lines, ne element
  // lines with 0-based vertex indices.
  void write_ascii(std::ostream& os) const;
  static Mesh read_ascii(std::istream& is);

  /// Legacy VTK unstructured grid. Optional per-element and per-vertex
  /// scalar fields are appended as CELL_DATA / POINT_DATA.
  void write_vtk(std::ostream& os,
                 const std::vector<std::pair<std::string, const std::vector<double>*>>& cell_fields = {},
                 const std::vector<std::pair<std::string, const std::vector<double>*>>& point_fields = {}) const;

 private:
  void build_faces();
  void build_geometry();

  int dim_;
  std::vector<Point> vertices_;
  std::vector<std::array<int, 4>> elements_;
  std::vector<int> generation_;
  std::vector<FaceRecord> interior_faces_;
  std::vector<FaceRecord> boundary_faces_;
  std::vector<char> boundary_vertex_;
  std::vector<double> volume_;
  std::vector<double> diameter_;
  std::vector<std::array<Point, 4>> bary_grad_;
  double total_volume_ = 0.0;
};

/// Provenance of one refinement call, used for exact field transfer.
struct RefineResult {
  Mesh mesh;
  /// New vertices in creation order: {vertex index, endpoint a, endpoint b};
  /// the vertex is the midpoint of (a, b). Endpoints may themselves be
  /// earlier entries of this list.
  std::vector<std::array<int, 3>> vertex_parents;
  /// For each element of `mesh`, the index of the element of the input
  /// mesh it descends from.
  std::vector<int> origin;
};

/// Longest-edge bisection of the marked elements plus recursive conformity
/// closure. Ties between equal-length edges go to the lexicographically
/// smallest sorted vertex-index pair. Throws if the closure exceeds
/// 100 * num_elements bisections (pathological 3D configurations).
RefineResult refine(const Mesh& mesh, const std::vector<int>& marked);

/// d sweeps of bisecting every element: halves h and multiplies the element
/// count by 2^d on the meshes this toolkit builds.
RefineResult uniform_refine(const Mesh& mesh);

}  // namespace ocpafem

#endif
