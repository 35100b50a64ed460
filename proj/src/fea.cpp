#include "toolife/fea.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>

#include "toolife/error.hpp"

namespace toolife::fea {

namespace {

double twice_signed_area(const Vec2& p1, const Vec2& p2, const Vec2& p3) {
    return (p2.x() - p1.x()) * (p3.y() - p1.y()) - (p3.x() - p1.x()) * (p2.y() - p1.y());
}

int find_root(std::vector<int>& parent, int i) {
    while (parent[i] != i) {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    return i;
}

}  // namespace

double Mesh::signed_area(std::size_t e) const {
    const Triangle& t = elements.at(e);
    return 0.5 * twice_signed_area(nodes[t[0]], nodes[t[1]], nodes[t[2]]);
}

Vec2 Mesh::centroid(std::size_t e) const {
    const Triangle& t = elements.at(e);
    return (nodes[t[0]] + nodes[t[1]] + nodes[t[2]]) / 3.0;
}

Vec2 Mesh::fixed_centroid() const {
    Vec2 c = Vec2::Zero();
    if (fixed_nodes.empty()) {
        return c;
    }
    for (int n : fixed_nodes) {
        c += nodes.at(n);
    }
    return c / static_cast<double>(fixed_nodes.size());
}

void Mesh::validate() const {
    const int n = static_cast<int>(nodes.size());
    if (elements.empty()) {
        throw MeshError("mesh has no elements");
    }
    for (const Vec2& p : nodes) {
        if (!p.allFinite()) {
            throw MeshError("mesh node has a non-finite coordinate");
        }
    }
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    std::vector<bool> used(n, false);
    for (std::size_t e = 0; e < elements.size(); ++e) {
        for (int id : elements[e]) {
            if (id < 0 || id >= n) {
                throw MeshError("element " + std::to_string(e) + " references node " +
                                std::to_string(id) + " out of range");
            }
            used[id] = true;
        }
        if (std::abs(signed_area(e)) <= kMinElementArea) {
            throw MeshError("element " + std::to_string(e) + " is degenerate");
        }
        const Triangle& t = elements[e];
        parent[find_root(parent, t[1])] = find_root(parent, t[0]);
        parent[find_root(parent, t[2])] = find_root(parent, t[0]);
    }

    std::vector<bool> fixed(n, false);
    for (int id : fixed_nodes) {
        if (id < 0 || id >= n) {
            throw MeshError("fixed node id " + std::to_string(id) + " out of range");
        }
        fixed[id] = true;
    }
    std::map<int, int> fixed_per_part;
    for (int i = 0; i < n; ++i) {
        if (!used[i]) {
            if (!fixed[i]) {
                throw MeshError("node " + std::to_string(i) + " belongs to no element");
            }
            continue;
        }
        int& count = fixed_per_part[find_root(parent, i)];
        if (fixed[i]) {
            ++count;
        }
    }
    for (const auto& [root, count] : fixed_per_part) {
        if (count < 2) {
            throw ConfigError("mesh part containing node " + std::to_string(root) +
                              " has fewer than 3 constrained DOFs (rigid-body mode)");
        }
    }
}

void Material::validate() const {
    if (!(youngs_modulus > 0.0) || !std::isfinite(youngs_modulus)) {
        throw ConfigError("Young's modulus must be positive");
    }
    if (!(poisson_ratio > 0.0 && poisson_ratio < 0.5)) {
        throw ConfigError("Poisson ratio must lie in (0, 0.5)");
    }
    if (!(thickness > 0.0) || !std::isfinite(thickness)) {
        throw ConfigError("thickness must be positive");
    }
}

double von_mises_equivalent(const PlaneStress& s) {
    const double v = s.sxx * s.sxx + s.syy * s.syy - s.sxx * s.syy + 3.0 * s.sxy * s.sxy;
    return std::sqrt(std::max(v, 0.0));
}

Eigen::Matrix3d elasticity_matrix(const Material& m) {
    const double nu = m.poisson_ratio;
    const double k = m.youngs_modulus / (1.0 - nu * nu);
    Eigen::Matrix3d d;
    d << k, k * nu, 0.0,
         k * nu, k, 0.0,
         0.0, 0.0, k * (1.0 - nu) / 2.0;
    return d;
}

Eigen::Matrix<double, 3, 6> strain_displacement(const Vec2& p1, const Vec2& p2, const Vec2& p3) {
    const double two_a = twice_signed_area(p1, p2, p3);
    const double b1 = p2.y() - p3.y();
    const double b2 = p3.y() - p1.y();
    const double b3 = p1.y() - p2.y();
    const double c1 = p3.x() - p2.x();
    const double c2 = p1.x() - p3.x();
    const double c3 = p2.x() - p1.x();
    Eigen::Matrix<double, 3, 6> b;
    b << b1, 0.0, b2, 0.0, b3, 0.0,
         0.0, c1, 0.0, c2, 0.0, c3,
         c1, b1, c2, b2, c3, b3;
    return b / two_a;
}

Eigen::Matrix<double, 6, 6> element_stiffness(const Vec2& p1, const Vec2& p2, const Vec2& p3,
                                              const Material& material) {
    const double area = 0.5 * std::abs(twice_signed_area(p1, p2, p3));
    const Eigen::Matrix<double, 3, 6> b = strain_displacement(p1, p2, p3);
    return material.thickness * area * (b.transpose() * elasticity_matrix(material) * b);
}

StiffnessSystem assemble_stiffness(const Mesh& mesh, const Material& material) {
    mesh.validate();
    material.validate();

    StiffnessSystem sys;
    sys.free_index.assign(mesh.dof_count(), 0);
    for (int n : mesh.fixed_nodes) {
        sys.free_index[2 * n] = -1;
        sys.free_index[2 * n + 1] = -1;
    }
    int next = 0;
    for (std::size_t dof = 0; dof < sys.free_index.size(); ++dof) {
        if (sys.free_index[dof] >= 0) {
            sys.free_index[dof] = next++;
            sys.global_dof.push_back(static_cast<int>(dof));
        }
    }

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(mesh.element_count() * 36);
    for (const Triangle& t : mesh.elements) {
        const auto ke = element_stiffness(mesh.nodes[t[0]], mesh.nodes[t[1]], mesh.nodes[t[2]],
                                          material);
        std::array<int, 6> map{};
        for (int a = 0; a < 3; ++a) {
            map[2 * a] = sys.free_index[2 * t[a]];
            map[2 * a + 1] = sys.free_index[2 * t[a] + 1];
        }
        for (int i = 0; i < 6; ++i) {
            if (map[i] < 0) continue;
            for (int j = 0; j < 6; ++j) {
                if (map[j] < 0) continue;
                triplets.emplace_back(map[i], map[j], ke(i, j));
            }
        }
    }
    sys.matrix.resize(next, next);
    sys.matrix.setFromTriplets(triplets.begin(), triplets.end());
    return sys;
}

Eigen::VectorXd load_vector(const StiffnessSystem& system, const Mesh& mesh, const LoadCase& loads) {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(system.free_count()));
    for (const PointLoad& pl : loads.point_loads) {
        if (pl.node < 0 || static_cast<std::size_t>(pl.node) >= mesh.node_count()) {
            throw ContractError("point load on unknown node " + std::to_string(pl.node));
        }
        if (!std::isfinite(pl.fx) || !std::isfinite(pl.fy)) {
            throw DataError("point load is not finite");
        }
        const int ix = system.free_index[2 * pl.node];
        const int iy = system.free_index[2 * pl.node + 1];
        if (ix < 0 || iy < 0) {
            throw ContractError("point load applied to constrained node " + std::to_string(pl.node));
        }
        f[ix] += pl.fx;
        f[iy] += pl.fy;
    }
    return f;
}

StaticSolver::StaticSolver(Mesh mesh, Material material)
    : mesh_(std::move(mesh)), material_(material), system_(assemble_stiffness(mesh_, material_)) {
    factor_.compute(system_.matrix);
    if (factor_.info() != Eigen::Success) {
        throw SolverError("stiffness factorization failed", std::numeric_limits<double>::infinity());
    }
    const Eigen::VectorXd d = factor_.vectorD();
    const double dmax = d.cwiseAbs().maxCoeff();
    const double dmin = d.minCoeff();
    pivot_ratio_ = dmin > 0.0 ? dmax / dmin : std::numeric_limits<double>::infinity();
    if (!(dmin > 0.0) || pivot_ratio_ > 1e14) {
        throw SolverError("stiffness matrix is singular or ill-conditioned (pivot ratio " +
                              std::to_string(pivot_ratio_) + ")",
                          pivot_ratio_);
    }
}

Eigen::VectorXd StaticSolver::solve(const LoadCase& loads) const {
    const Eigen::VectorXd f = load_vector(system_, mesh_, loads);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh_.dof_count()));
    const double fnorm = f.norm();
    if (fnorm == 0.0) {
        return u;
    }
    const Eigen::VectorXd uf = factor_.solve(f);
    const double residual = (system_.matrix * uf - f).norm() / fnorm;
    if (!(residual <= kResidualTolerance)) {
        throw SolverError("static solve residual " + std::to_string(residual) +
                              " exceeds tolerance (pivot ratio " + std::to_string(pivot_ratio_) + ")",
                          pivot_ratio_);
    }
    for (std::size_t i = 0; i < system_.global_dof.size(); ++i) {
        u[system_.global_dof[i]] = uf[static_cast<Eigen::Index>(i)];
    }
    return u;
}

StressField StaticSolver::stress_sample(const LoadCase& loads) const {
    return von_mises(mesh_, material_, solve(loads));
}

Eigen::VectorXd solve_static(const Mesh& mesh, const Material& material, const LoadCase& loads) {
    return StaticSolver(mesh, material).solve(loads);
}

std::vector<PlaneStress> element_stresses(const Mesh& mesh, const Material& material,
                                          const Eigen::VectorXd& u) {
    if (static_cast<std::size_t>(u.size()) != mesh.dof_count()) {
        throw ContractError("displacement vector length must be twice the node count");
    }
    const Eigen::Matrix3d d = elasticity_matrix(material);
    std::vector<PlaneStress> out;
    out.reserve(mesh.element_count());
    for (const Triangle& t : mesh.elements) {
        const auto b = strain_displacement(mesh.nodes[t[0]], mesh.nodes[t[1]], mesh.nodes[t[2]]);
        Eigen::Matrix<double, 6, 1> ue;
        for (int a = 0; a < 3; ++a) {
            ue[2 * a] = u[2 * t[a]];
            ue[2 * a + 1] = u[2 * t[a] + 1];
        }
        const Eigen::Vector3d s = d * (b * ue);
        out.push_back({s[0], s[1], s[2]});
    }
    return out;
}

StressField von_mises(const Mesh& mesh, const Material& material, const Eigen::VectorXd& u) {
    StressField field;
    const auto stresses = element_stresses(mesh, material, u);
    field.reserve(stresses.size());
    for (const PlaneStress& s : stresses) {
        field.push_back(von_mises_equivalent(s));
    }
    return field;
}

StressField stress_sample(const Mesh& mesh, const Material& material, const LoadCase& loads) {
    return von_mises(mesh, material, solve_static(mesh, material, loads));
}

std::vector<std::array<int, 2>> boundary_edges(const Mesh& mesh) {
    std::map<std::pair<int, int>, int> uses;
    for (const Triangle& t : mesh.elements) {
        for (int k = 0; k < 3; ++k) {
            const int a = t[k];
            const int b = t[(k + 1) % 3];
            ++uses[{std::min(a, b), std::max(a, b)}];
        }
    }
    std::vector<std::array<int, 2>> edges;
    for (const auto& [key, count] : uses) {
        if (count == 1) {
            edges.push_back({key.first, key.second});
        }
    }
    return edges;
}

std::vector<int> boundary_nodes(const Mesh& mesh) {
    std::vector<int> ids;
    for (const auto& e : boundary_edges(mesh)) {
        ids.push_back(e[0]);
        ids.push_back(e[1]);
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
}

int nearest_boundary_node(const Mesh& mesh, std::span<const int> boundary, const Vec2& p) {
    if (boundary.empty()) {
        throw ContractError("no boundary nodes to choose from");
    }
    int best = -1;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (int id : boundary) {
        const double d2 = (mesh.nodes.at(id) - p).squaredNorm();
        if (d2 < best_d2 || (d2 == best_d2 && id < best)) {
            best_d2 = d2;
            best = id;
        }
    }
    return best;
}

namespace {

template <class Include>
Mesh grid_mesh(double x0, double y0, double dx, double dy, int nx, int ny, Include include) {
    std::vector<char> cell(static_cast<std::size_t>(nx) * ny, 0);
    std::vector<int> node_id(static_cast<std::size_t>(nx + 1) * (ny + 1), -1);
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            if (include(i, j)) {
                cell[j * nx + i] = 1;
                node_id[j * (nx + 1) + i] = 0;
                node_id[j * (nx + 1) + i + 1] = 0;
                node_id[(j + 1) * (nx + 1) + i] = 0;
                node_id[(j + 1) * (nx + 1) + i + 1] = 0;
            }
        }
    }
    Mesh mesh;
    for (int j = 0; j <= ny; ++j) {
        for (int i = 0; i <= nx; ++i) {
            int& id = node_id[j * (nx + 1) + i];
            if (id == 0) {
                id = static_cast<int>(mesh.nodes.size());
                mesh.nodes.emplace_back(x0 + i * dx, y0 + j * dy);
            }
        }
    }
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            if (!cell[j * nx + i]) continue;
            const int n00 = node_id[j * (nx + 1) + i];
            const int n10 = node_id[j * (nx + 1) + i + 1];
            const int n01 = node_id[(j + 1) * (nx + 1) + i];
            const int n11 = node_id[(j + 1) * (nx + 1) + i + 1];
            if ((i + j) % 2 == 0) {
                mesh.elements.push_back({n00, n10, n11});
                mesh.elements.push_back({n00, n11, n01});
            } else {
                mesh.elements.push_back({n00, n10, n01});
                mesh.elements.push_back({n10, n11, n01});
            }
        }
    }
    return mesh;
}

}  // namespace

Mesh rectangle_mesh(const Rect& r, int nx, int ny) {
    if (nx < 1 || ny < 1 || !(r.x1 > r.x0) || !(r.y1 > r.y0)) {
        throw MeshError("rectangle mesh needs positive extents and cell counts");
    }
    return grid_mesh(r.x0, r.y0, (r.x1 - r.x0) / nx, (r.y1 - r.y0) / ny, nx, ny,
                     [](int, int) { return true; });
}

Mesh rect_union_mesh(std::span<const Rect> rects, double cell) {
    if (rects.empty() || !(cell > 0.0)) {
        throw MeshError("rect_union_mesh needs rectangles and a positive cell size");
    }
    double x0 = rects[0].x0, y0 = rects[0].y0, x1 = rects[0].x1, y1 = rects[0].y1;
    for (const Rect& r : rects) {
        x0 = std::min(x0, r.x0);
        y0 = std::min(y0, r.y0);
        x1 = std::max(x1, r.x1);
        y1 = std::max(y1, r.y1);
    }
    const int nx = static_cast<int>(std::lround((x1 - x0) / cell));
    const int ny = static_cast<int>(std::lround((y1 - y0) / cell));
    auto inside = [&](int i, int j) {
        const double cx = x0 + (i + 0.5) * cell;
        const double cy = y0 + (j + 0.5) * cell;
        return std::any_of(rects.begin(), rects.end(), [&](const Rect& r) {
            return cx > r.x0 && cx < r.x1 && cy > r.y0 && cy < r.y1;
        });
    };
    return grid_mesh(x0, y0, cell, cell, nx, ny, inside);
}

void fix_nodes_left_of(Mesh& mesh, double x_max, double tol) {
    for (std::size_t i = 0; i < mesh.nodes.size(); ++i) {
        if (mesh.nodes[i].x() <= x_max + tol) {
            mesh.fixed_nodes.push_back(static_cast<int>(i));
        }
    }
}

Mesh rotated(const Mesh& mesh, double angle) {
    Mesh out = mesh;
    const Eigen::Rotation2Dd rot(angle);
    for (Vec2& p : out.nodes) {
        p = rot * p;
    }
    return out;
}

}  // namespace toolife::fea
