#include "robinhom/cellmesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>

#include <nlohmann/json.hpp>

#include "robinhom/error.hpp"

namespace robinhom {

const char* to_string(OuterMode mode)
{
    return mode == OuterMode::periodic ? "periodic" : "dirichlet_outer";
}

double unit_sphere_area(int n)
{
    if (n < 1)
        throw PreconditionError("unit_sphere_area: n must be positive");
    return 2.0 * std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n);
}

double critical_exponent(int n)
{
    if (n < 3)
        throw PreconditionError("critical_exponent: n must be >= 3");
    return static_cast<double>(n) / (n - 2);
}

double cell_hole_radius(double eps, double a, int n)
{
    if (n < 3)
        throw PreconditionError("cell_hole_radius: n must be >= 3");
    if (!(eps > 0.0 && eps <= 1.0))
        throw PreconditionError("cell_hole_radius: eps must lie in (0,1]");
    const double r = std::pow(eps, a - 1.0);
    if (r >= 0.5)
        throw HoleTooLarge("cell_hole_radius: eps^(a-1) = " + std::to_string(r) +
                           " reaches the cell boundary");
    if (!(a > 1.0))
        throw PreconditionError("cell_hole_radius: scaling exponent must exceed 1");
    return r;
}

double mu_coeff(double eps, int n, double r_cell)
{
    if (!(eps > 0.0) || !(r_cell > 0.0))
        throw PreconditionError("mu_coeff: eps and r_cell must be positive");
    return unit_sphere_area(n) * std::pow(r_cell, n - 1) / eps;
}

std::vector<std::array<NodeId, 2>> CellMesh::periodic_pairs() const
{
    std::vector<std::array<NodeId, 2>> pairs;
    for (int axis = 0; axis < 3; ++axis) {
        const auto& map = periodic_map[axis];
        for (std::size_t i = 0; i < map.size(); ++i)
            if (map[i] != static_cast<NodeId>(i) && nodes[i][axis] > 0.0)
                pairs.push_back({static_cast<NodeId>(i), map[i]});
    }
    return pairs;
}

std::vector<NodeId> CellMesh::periodic_classes() const
{
    const auto n = nodes.size();
    std::vector<NodeId> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    if (outer_mode == OuterMode::dirichlet_outer)
        return parent;

    auto root = [&](NodeId i) {
        while (parent[i] != i) {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        return i;
    };
    for (int axis = 0; axis < 3; ++axis)
        for (std::size_t i = 0; i < n; ++i) {
            const NodeId a = root(static_cast<NodeId>(i));
            const NodeId b = root(periodic_map[axis][i]);
            if (a != b)
                parent[std::max(a, b)] = std::min(a, b);
        }

    std::vector<NodeId> cls(n, -1), number(n, -1);
    NodeId next = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const NodeId r = root(static_cast<NodeId>(i));
        if (number[r] < 0)
            number[r] = next++;
        cls[i] = number[r];
    }
    return cls;
}

double hex_jacobian(const std::array<Vec3, 8>& x, const Vec3& xi)
{
    static constexpr int sgn[8][3] = {{-1, -1, -1}, {1, -1, -1}, {1, 1, -1}, {-1, 1, -1},
                                      {-1, -1, 1},  {1, -1, 1},  {1, 1, 1},  {-1, 1, 1}};
    double J[3][3] = {};
    for (int a = 0; a < 8; ++a) {
        const double f0 = 1.0 + sgn[a][0] * xi[0];
        const double f1 = 1.0 + sgn[a][1] * xi[1];
        const double f2 = 1.0 + sgn[a][2] * xi[2];
        const double d[3] = {0.125 * sgn[a][0] * f1 * f2, 0.125 * f0 * sgn[a][1] * f2,
                             0.125 * f0 * f1 * sgn[a][2]};
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                J[i][j] += x[a][i] * d[j];
    }
    return J[0][0] * (J[1][1] * J[2][2] - J[1][2] * J[2][1]) -
           J[0][1] * (J[1][0] * J[2][2] - J[1][2] * J[2][0]) +
           J[0][2] * (J[1][0] * J[2][1] - J[1][1] * J[2][0]);
}

double min_gauss_jacobian(const std::array<Vec3, 8>& x)
{
    const double g = 1.0 / std::sqrt(3.0);
    double jmin = std::numeric_limits<double>::infinity();
    for (int c = 0; c < 8; ++c) {
        const Vec3 xi{(c & 1) ? g : -g, (c & 2) ? g : -g, (c & 4) ? g : -g};
        jmin = std::min(jmin, hex_jacobian(x, xi));
    }
    return jmin;
}

std::array<Vec3, 8> hex_coordinates(const std::vector<Vec3>& nodes, const HexCell& h)
{
    std::array<Vec3, 8> x;
    for (int a = 0; a < 8; ++a)
        x[a] = nodes[h[a]];
    return x;
}

namespace {

using Key = std::array<int, 3>;

struct FaceFrame {
    int axis;
    int sign;
    int t1;  // tangent axes, with e_t1 x e_t2 = sign * e_axis
    int t2;
};

// Tangent pairs chosen so (t1, t2, outward normal) is right-handed.
constexpr FaceFrame kFaces[6] = {{0, +1, 1, 2}, {0, -1, 2, 1}, {1, +1, 2, 0},
                                 {1, -1, 0, 2}, {2, +1, 0, 1}, {2, -1, 1, 0}};

// Geometric ratio q with (q-1)/(q^L-1) = fraction (first layer share).
double grading_ratio(int layers, double fraction)
{
    auto first_share = [layers](double q) {
        if (std::abs(q - 1.0) < 1e-12)
            return 1.0 / layers;
        return (q - 1.0) / (std::pow(q, layers) - 1.0);
    };
    if (std::abs(fraction - 1.0 / layers) < 1e-12)
        return 1.0;
    double lo = -10.0, hi = 10.0;  // log q; first_share decreases in q
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (first_share(std::exp(mid)) > fraction)
            lo = mid;
        else
            hi = mid;
    }
    return std::exp(0.5 * (lo + hi));
}

} // namespace

CellMesh build_cell_mesh(double r_cell, int level, OuterMode outer_mode)
{
    if (!(r_cell > 0.0 && r_cell < 0.5))
        throw PreconditionError("build_cell_mesh: hole radius must lie in (0, 1/2)");
    if (level < 1 || level > 8)
        throw PreconditionError("build_cell_mesh: level must lie in [1, 8]");

    CellMesh mesh;
    mesh.hole_radius = r_cell;
    mesh.level = level;
    mesh.outer_mode = outer_mode;

    const int m = 1 << level;
    const int layers = level + 2;

    // Surface lattice of the cube: integer keys in [-m,m]^3, C = key/(2m).
    std::map<Key, NodeId> shell_index;
    std::vector<Key> shell_keys;
    std::vector<std::vector<NodeId>> face_grid(6, std::vector<NodeId>((m + 1) * (m + 1)));
    for (int f = 0; f < 6; ++f) {
        const auto& fr = kFaces[f];
        for (int j = 0; j <= m; ++j)
            for (int i = 0; i <= m; ++i) {
                Key k{};
                k[fr.axis] = fr.sign * m;
                k[fr.t1] = 2 * i - m;
                k[fr.t2] = 2 * j - m;
                auto [it, inserted] = shell_index.try_emplace(k, static_cast<NodeId>(shell_keys.size()));
                if (inserted)
                    shell_keys.push_back(k);
                face_grid[f][j * (m + 1) + i] = it->second;
            }
    }
    const auto n_shell = static_cast<NodeId>(shell_keys.size());

    const double fraction = (r_cell / m) / (0.5 - r_cell);
    const double q = grading_ratio(layers, std::min(fraction, 0.999999));
    std::vector<double> t(layers + 1);
    for (int k = 0; k <= layers; ++k)
        t[k] = q == 1.0 ? static_cast<double>(k) / layers
                        : (std::pow(q, k) - 1.0) / (std::pow(q, layers) - 1.0);
    t[0] = 0.0;
    t[layers] = 1.0;

    mesh.nodes.resize(static_cast<std::size_t>(n_shell) * (layers + 1));
    mesh.on_hole.assign(mesh.nodes.size(), 0);
    mesh.on_outer.assign(mesh.nodes.size(), 0);
    for (int k = 0; k <= layers; ++k)
        for (NodeId s = 0; s < n_shell; ++s) {
            const Key& key = shell_keys[s];
            const Vec3 c{key[0] / (2.0 * m), key[1] / (2.0 * m), key[2] / (2.0 * m)};
            const double len = std::sqrt(c[0] * c[0] + c[1] * c[1] + c[2] * c[2]);
            const auto id = static_cast<std::size_t>(k) * n_shell + s;
            Vec3& p = mesh.nodes[id];
            if (k == layers) {
                p = c;
                mesh.on_outer[id] = 1;
            } else {
                for (int d = 0; d < 3; ++d)
                    p[d] = (1.0 - t[k]) * r_cell * (c[d] / len) + t[k] * c[d];
                if (k == 0)
                    mesh.on_hole[id] = 1;
            }
        }

    auto node_at = [n_shell](int k, NodeId s) { return static_cast<NodeId>(k * n_shell + s); };
    for (int f = 0; f < 6; ++f)
        for (int j = 0; j < m; ++j)
            for (int i = 0; i < m; ++i) {
                const NodeId q0 = face_grid[f][j * (m + 1) + i];
                const NodeId q1 = face_grid[f][j * (m + 1) + i + 1];
                const NodeId q2 = face_grid[f][(j + 1) * (m + 1) + i + 1];
                const NodeId q3 = face_grid[f][(j + 1) * (m + 1) + i];
                mesh.hole_faces.push_back({node_at(0, q0), node_at(0, q1), node_at(0, q2), node_at(0, q3)});
                mesh.outer_faces.push_back({node_at(layers, q0), node_at(layers, q1),
                                            node_at(layers, q2), node_at(layers, q3)});
                for (int k = 0; k < layers; ++k)
                    mesh.hexes.push_back({node_at(k, q0), node_at(k, q1), node_at(k, q2), node_at(k, q3),
                                          node_at(k + 1, q0), node_at(k + 1, q1), node_at(k + 1, q2),
                                          node_at(k + 1, q3)});
            }

    for (std::size_t e = 0; e < mesh.hexes.size(); ++e) {
        const double jmin = min_gauss_jacobian(hex_coordinates(mesh.nodes, mesh.hexes[e]));
        if (!(jmin > 0.0))
            throw MeshQualityError("build_cell_mesh: hexahedron " + std::to_string(e) +
                                   " has non-positive Jacobian " + std::to_string(jmin));
    }

    for (int axis = 0; axis < 3; ++axis) {
        auto& map = mesh.periodic_map[axis];
        map.resize(mesh.nodes.size());
        std::iota(map.begin(), map.end(), 0);
        for (NodeId s = 0; s < n_shell; ++s) {
            Key key = shell_keys[s];
            if (std::abs(key[axis]) != m)
                continue;
            key[axis] = -key[axis];
            map[node_at(layers, s)] = node_at(layers, shell_index.at(key));
        }
    }
    return mesh;
}

PerforatedMesh build_perforated_mesh(int cells_per_side, double r_cell, int level)
{
    return build_perforated_mesh(
        cells_per_side,
        std::make_shared<const CellMesh>(build_cell_mesh(r_cell, level, OuterMode::dirichlet_outer)));
}

PerforatedMesh build_perforated_mesh(int cells_per_side, std::shared_ptr<const CellMesh> cell)
{
    if (cells_per_side < 1)
        throw PreconditionError("build_perforated_mesh: need at least one cell per side");
    if (!cell)
        throw PreconditionError("build_perforated_mesh: missing cell template");

    const int N = cells_per_side;
    const int m = cell->face_divisions();
    const double eps = 1.0 / N;

    PerforatedMesh pm;
    pm.cells_per_side = N;
    pm.eps = eps;
    pm.cell = cell;

    const auto n_local = cell->nodes.size();
    std::map<Key, NodeId> lattice;
    std::vector<NodeId> local_to_global(n_local);
    std::int32_t cell_index = 0;
    for (int zk = 0; zk < N; ++zk)
        for (int zj = 0; zj < N; ++zj)
            for (int zi = 0; zi < N; ++zi, ++cell_index) {
                const int z[3] = {zi, zj, zk};
                for (std::size_t a = 0; a < n_local; ++a) {
                    const Vec3& y = cell->nodes[a];
                    Vec3 x;
                    for (int d = 0; d < 3; ++d)
                        x[d] = eps * (z[d] + 0.5 + y[d]);
                    if (cell->on_outer[a]) {
                        Key key;
                        for (int d = 0; d < 3; ++d)
                            key[d] = 2 * m * z[d] + static_cast<int>(std::lround(2.0 * m * y[d])) + m;
                        auto [it, inserted] =
                            lattice.try_emplace(key, static_cast<NodeId>(pm.nodes.size()));
                        if (inserted) {
                            pm.nodes.push_back(x);
                            pm.node_origin.push_back(static_cast<NodeId>(a));
                        } else {
                            const Vec3& old = pm.nodes[it->second];
                            const double gap = std::max(
                                {std::abs(old[0] - x[0]), std::abs(old[1] - x[1]), std::abs(old[2] - x[2])});
                            if (gap > 1e-10)
                                throw MeshGlueError("build_perforated_mesh: shared node mismatch " +
                                                    std::to_string(gap));
                        }
                        local_to_global[a] = it->second;
                    } else {
                        local_to_global[a] = static_cast<NodeId>(pm.nodes.size());
                        pm.nodes.push_back(x);
                        pm.node_origin.push_back(static_cast<NodeId>(a));
                    }
                }
                for (const auto& h : cell->hexes) {
                    HexCell g;
                    for (int k = 0; k < 8; ++k)
                        g[k] = local_to_global[h[k]];
                    pm.hexes.push_back(g);
                    pm.hex_cell.push_back(cell_index);
                }
                for (const auto& f : cell->hole_faces) {
                    QuadFace g;
                    for (int k = 0; k < 4; ++k)
                        g[k] = local_to_global[f[k]];
                    pm.gamma_faces.push_back(g);
                }
            }

    pm.is_dirichlet.assign(pm.nodes.size(), 0);
    const int top = 2 * m * N;
    for (const auto& [key, id] : lattice)
        for (int d = 0; d < 3; ++d)
            if (key[d] == 0 || key[d] == top) {
                pm.is_dirichlet[id] = 1;
                break;
            }
    for (std::size_t i = 0; i < pm.nodes.size(); ++i)
        if (pm.is_dirichlet[i])
            pm.outer_dirichlet_nodes.push_back(static_cast<NodeId>(i));
    return pm;
}

namespace {

template <class Faces>
nlohmann::json faces_json(const Faces& faces)
{
    auto arr = nlohmann::json::array();
    for (const auto& f : faces)
        arr.push_back(f);
    return arr;
}

nlohmann::json nodes_json(const std::vector<Vec3>& nodes)
{
    auto arr = nlohmann::json::array();
    for (const auto& p : nodes)
        arr.push_back(p);
    return arr;
}

} // namespace

std::string mesh_to_json(const CellMesh& mesh)
{
    nlohmann::json j;
    j["format"] = "robinhom-mesh";
    j["version"] = 1;
    j["kind"] = "cell";
    j["hole_radius"] = mesh.hole_radius;
    j["level"] = mesh.level;
    j["outer_mode"] = to_string(mesh.outer_mode);
    j["nodes"] = nodes_json(mesh.nodes);
    j["hexes"] = faces_json(mesh.hexes);
    j["hole_faces"] = faces_json(mesh.hole_faces);
    j["outer_faces"] = faces_json(mesh.outer_faces);
    j["periodic_pairs"] = faces_json(mesh.periodic_pairs());
    return j.dump();
}

std::string mesh_to_json(const PerforatedMesh& mesh)
{
    nlohmann::json j;
    j["format"] = "robinhom-mesh";
    j["version"] = 1;
    j["kind"] = "perforated";
    j["cells_per_side"] = mesh.cells_per_side;
    j["eps"] = mesh.eps;
    j["nodes"] = nodes_json(mesh.nodes);
    j["hexes"] = faces_json(mesh.hexes);
    j["hole_faces"] = faces_json(mesh.gamma_faces);
    j["outer_faces"] = nlohmann::json::array();
    j["dirichlet_nodes"] = mesh.outer_dirichlet_nodes;
    j["periodic_pairs"] = nlohmann::json::array();
    return j.dump();
}

} // namespace robinhom
