#pragma once

// Linear plane-stress finite elements on constant-strain triangles (CST).

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace toolife::fea {

using Vec2 = Eigen::Vector2d;
using Triangle = std::array<int, 3>;

inline constexpr double kMinElementArea = 1e-12;

struct Mesh {
    std::vector<Vec2> nodes;
    std::vector<Triangle> elements;
    std::vector<int> fixed_nodes;

    std::size_t node_count() const { return nodes.size(); }
    std::size_t element_count() const { return elements.size(); }
    std::size_t dof_count() const { return 2 * nodes.size(); }

    /// Signed area of element e (positive for counter-clockwise ordering).
    double signed_area(std::size_t e) const;
    Vec2 centroid(std::size_t e) const;
    Vec2 fixed_centroid() const;

    /// Throws MeshError for bad indices or degenerate triangles and
    /// ConfigError when some connected part is not held by at least two
    /// fixed nodes (which would leave rigid-body modes).
    void validate() const;
};

struct Material {
    double youngs_modulus;  // Pa
    double poisson_ratio;
    double thickness;  // m

    void validate() const;
};

struct PointLoad {
    int node;
    double fx;  // N
    double fy;  // N
};

struct LoadCase {
    std::vector<PointLoad> point_loads;
};

using StressField = std::vector<double>;

struct PlaneStress {
    double sxx;
    double syy;
    double sxy;
};

/// Plane-stress von Mises equivalent stress.
double von_mises_equivalent(const PlaneStress& s);

/// 3x3 plane-stress constitutive matrix.
Eigen::Matrix3d elasticity_matrix(const Material& material);

/// CST strain-displacement matrix (3x6) for nodes given counter-clockwise.
Eigen::Matrix<double, 3, 6> strain_displacement(const Vec2& p1, const Vec2& p2, const Vec2& p3);

Eigen::Matrix<double, 6, 6> element_stiffness(const Vec2& p1, const Vec2& p2, const Vec2& p3,
                                              const Material& material);

/// Global stiffness with the constrained DOFs eliminated. DOF 2n is the
/// x displacement of node n and 2n+1 its y displacement.
struct StiffnessSystem {
    Eigen::SparseMatrix<double> matrix;  // free x free, symmetric
    std::vector<int> free_index;         // per global DOF, -1 when constrained
    std::vector<int> global_dof;         // per free DOF

    std::size_t free_count() const { return global_dof.size(); }
};

StiffnessSystem assemble_stiffness(const Mesh& mesh, const Material& material);

/// Assembles the load vector over the free DOFs. Loads on constrained
/// nodes are rejected.
Eigen::VectorXd load_vector(const StiffnessSystem& system, const Mesh& mesh, const LoadCase& loads);

/// Factorizes a mesh's stiffness once and answers many load cases.
/// All query methods are const and safe to call concurrently.
class StaticSolver {
public:
    StaticSolver(Mesh mesh, Material material);

    const Mesh& mesh() const { return mesh_; }
    const Material& material() const { return material_; }
    const StiffnessSystem& system() const { return system_; }

    /// Ratio of largest to smallest LDL^T pivot.
    double pivot_ratio() const { return pivot_ratio_; }

    /// Full nodal displacement vector (2 * node_count, metres).
    Eigen::VectorXd solve(const LoadCase& loads) const;

    StressField stress_sample(const LoadCase& loads) const;

private:
    Mesh mesh_;
    Material material_;
    StiffnessSystem system_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> factor_;
    double pivot_ratio_ = 1.0;
};

inline constexpr double kResidualTolerance = 1e-8;

Eigen::VectorXd solve_static(const Mesh& mesh, const Material& material, const LoadCase& loads);

std::vector<PlaneStress> element_stresses(const Mesh& mesh, const Material& material,
                                          const Eigen::VectorXd& displacements);

StressField von_mises(const Mesh& mesh, const Material& material,
                      const Eigen::VectorXd& displacements);

StressField stress_sample(const Mesh& mesh, const Material& material, const LoadCase& loads);

// ---------------------------------------------------------------------------
// Mesh utilities

/// Edges that belong to exactly one triangle, as node pairs.
std::vector<std::array<int, 2>> boundary_edges(const Mesh& mesh);

/// Sorted node ids lying on the boundary.
std::vector<int> boundary_nodes(const Mesh& mesh);

/// Boundary node closest to p; ties go to the lowest node id.
int nearest_boundary_node(const Mesh& mesh, std::span<const int> boundary, const Vec2& p);

struct Rect {
    double x0, y0, x1, y1;
};

/// Structured triangulation of a rectangle with nx by ny cells, each cell
/// split along alternating diagonals. No nodes are fixed.
Mesh rectangle_mesh(const Rect& r, int nx, int ny);

/// Triangulates the union of axis-aligned rectangles on a square grid of
/// spacing `cell`. Rectangle corners must lie on the grid.
Mesh rect_union_mesh(std::span<const Rect> rects, double cell);

/// Fixes every node with x <= x_max + tol.
void fix_nodes_left_of(Mesh& mesh, double x_max, double tol = 1e-9);

/// Rigid rotation about the origin (used for objectivity checks).
Mesh rotated(const Mesh& mesh, double angle);

// ---------------------------------------------------------------------------
// toolmesh v1 text format

Mesh read_mesh(std::istream& in);
Mesh read_mesh_file(const std::string& path);
void write_mesh(std::ostream& out, const Mesh& mesh);
void write_mesh_file(const std::string& path, const Mesh& mesh);

}  // namespace toolife::fea
