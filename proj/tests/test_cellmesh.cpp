#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numbers>
#include <set>

#include "robinhom/assembly.hpp"
#include "robinhom/cellmesh.hpp"
#include "robinhom/error.hpp"
#include "test_support.hpp"

using namespace robinhom;

namespace {

constexpr double kPi = std::numbers::pi;

double hole_area(const CellMesh& m)
{
    double a = 0.0;
    for (const auto& f : m.hole_faces)
        a += quad_area({m.nodes[f[0]], m.nodes[f[1]], m.nodes[f[2]], m.nodes[f[3]]});
    return a;
}

double mesh_volume(const std::vector<Vec3>& nodes, const std::vector<HexCell>& hexes)
{
    double v = 0.0;
    for (const auto& h : hexes)
        for (const auto& qp : hex_quadrature(hex_coordinates(nodes, h)))
            v += qp.weight;
    return v;
}

double norm(const Vec3& x)
{
    return std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
}

} // namespace

TEST_CASE("cell_hole_radius")
{
    CHECK(cell_hole_radius(0.5, 3.0, 3) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(cell_hole_radius(0.25, 3.0, 3) == doctest::Approx(0.0625).epsilon(1e-15));
    CHECK_THROWS_AS(cell_hole_radius(0.5, 1.0, 3), HoleTooLarge);
    CHECK_THROWS_AS(cell_hole_radius(0.5, 2.0, 3), HoleTooLarge);
    CHECK_THROWS_AS(cell_hole_radius(0.0, 3.0, 3), PreconditionError);
    CHECK_THROWS_AS(cell_hole_radius(1.5, 3.0, 3), PreconditionError);
    CHECK_THROWS_AS(cell_hole_radius(0.5, 0.5, 3), HoleTooLarge);
    CHECK(critical_exponent(3) == 3.0);
    CHECK(critical_exponent(4) == 2.0);
}

TEST_CASE("mu_coeff and unit sphere areas")
{
    CHECK(mu_coeff(0.5, 3, 0.25) == doctest::Approx(kPi / 2).epsilon(1e-14));
    CHECK(mu_coeff(1.0, 3, 1.0) == doctest::Approx(4 * kPi).epsilon(1e-14));
    CHECK(mu_coeff(0.25, 3, 0.0625) == doctest::Approx(kPi / 16).epsilon(1e-14));
    CHECK(unit_sphere_area(3) == doctest::Approx(4 * kPi).epsilon(1e-15));
    CHECK(unit_sphere_area(4) == doctest::Approx(2 * kPi * kPi).epsilon(1e-15));
    CHECK(unit_sphere_area(5) == doctest::Approx(8 * kPi * kPi / 3).epsilon(1e-15));
}

TEST_CASE("cell mesh geometry at r = 0.25, level 2")
{
    const CellMesh m = build_cell_mesh(0.25, 2, OuterMode::periodic);
    CHECK(m.nodes.size() == 490);
    CHECK(m.hole_faces.size() == 6u * 16u);
    CHECK(m.outer_faces.size() == 6u * 16u);
    CHECK(m.hexes.size() == 6u * 16u * 4u);

    for (const auto& f : m.hole_faces)
        for (NodeId n : f)
            CHECK(std::abs(norm(m.nodes[n]) - 0.25) <= 1e-12);
    for (const auto& f : m.outer_faces)
        for (NodeId n : f) {
            const auto& x = m.nodes[n];
            const double mx = std::max({std::abs(x[0]), std::abs(x[1]), std::abs(x[2])});
            CHECK(mx == doctest::Approx(0.5).epsilon(1e-15));
        }

    CHECK(rel_err(hole_area(m), 4 * kPi * 0.0625) <= 0.05);
    CHECK(rel_err(mesh_volume(m.nodes, m.hexes), 1.0 - 4.0 / 3.0 * kPi * std::pow(0.25, 3)) <= 0.02);
    for (const auto& h : m.hexes)
        CHECK(min_gauss_jacobian(hex_coordinates(m.nodes, h)) > 0.0);
}

TEST_CASE("node counts per level")
{
    const std::size_t expected[] = {104, 490, 2316};
    for (int level = 1; level <= 3; ++level) {
        const CellMesh m = build_cell_mesh(0.25, level, OuterMode::dirichlet_outer);
        CHECK(m.nodes.size() == expected[level - 1]);
        const int k = m.face_divisions();
        // 6 k^2 + 2 per sphere shell, level+3 shells.
        CHECK(m.nodes.size() == static_cast<std::size_t>((6 * k * k + 2) * (m.radial_layers() + 1)));
    }
}

TEST_CASE("hole surface area converges at close to second order")
{
    const double r = 0.25;
    const double exact = 4 * kPi * r * r;
    double err[4];
    for (int level = 1; level <= 4; ++level)
        err[level - 1] = std::abs(hole_area(build_cell_mesh(r, level, OuterMode::periodic)) - exact);
    for (int i = 0; i + 1 < 4; ++i)
        CHECK(std::log2(err[i] / err[i + 1]) >= 1.7);
}

TEST_CASE("periodic map is an involution across opposite faces")
{
    const CellMesh m = build_cell_mesh(0.2, 2, OuterMode::periodic);
    for (int axis = 0; axis < 3; ++axis) {
        const auto& map = m.periodic_map[axis];
        REQUIRE(map.size() == m.nodes.size());
        for (std::size_t i = 0; i < map.size(); ++i) {
            CHECK(map[map[i]] == static_cast<NodeId>(i));
            if (map[i] == static_cast<NodeId>(i))
                continue;
            const auto& a = m.nodes[i];
            const auto& b = m.nodes[map[i]];
            CHECK(std::abs(std::abs(a[axis] - b[axis]) - 1.0) <= 1e-15);
            for (int d = 0; d < 3; ++d)
                if (d != axis)
                    CHECK(a[d] == b[d]);
            CHECK(m.on_outer[i]);
        }
    }
    std::set<NodeId> paired;
    for (const auto& p : m.periodic_pairs()) {
        paired.insert(p[0]);
        paired.insert(p[1]);
    }
    for (std::size_t i = 0; i < m.nodes.size(); ++i)
        CHECK((paired.count(static_cast<NodeId>(i)) > 0) == (m.on_outer[i] != 0));

    const auto classes = m.periodic_classes();
    const auto ncls = *std::max_element(classes.begin(), classes.end()) + 1;
    // Interior plus hole nodes are unique; the 8 corners form one class.
    CHECK(ncls < static_cast<NodeId>(m.nodes.size()));
    std::set<NodeId> corner;
    for (std::size_t i = 0; i < m.nodes.size(); ++i) {
        const auto& x = m.nodes[i];
        if (std::abs(x[0]) == 0.5 && std::abs(x[1]) == 0.5 && std::abs(x[2]) == 0.5)
            corner.insert(classes[i]);
    }
    CHECK(corner.size() == 1);
}

TEST_CASE("admissibility boundary of the hole radius")
{
    const CellMesh m = build_cell_mesh(0.49, 1, OuterMode::periodic);
    for (const auto& h : m.hexes)
        CHECK(min_gauss_jacobian(hex_coordinates(m.nodes, h)) > 0.0);
    CHECK_THROWS_AS(build_cell_mesh(0.5, 1, OuterMode::periodic), PreconditionError);
    CHECK_THROWS_AS(build_cell_mesh(0.0, 1, OuterMode::periodic), PreconditionError);
    CHECK_THROWS_AS(build_cell_mesh(0.25, 0, OuterMode::periodic), PreconditionError);
}

TEST_CASE("perforated mesh with one cell")
{
    const CellMesh c = build_cell_mesh(0.25, 2, OuterMode::dirichlet_outer);
    const PerforatedMesh p = build_perforated_mesh(1, 0.25, 2);
    REQUIRE(p.nodes.size() == c.nodes.size());
    auto key = [](const Vec3& x) {
        return std::array<long long, 3>{std::llround(x[0] * 1e9), std::llround(x[1] * 1e9),
                                        std::llround(x[2] * 1e9)};
    };
    std::set<std::array<long long, 3>> a, b;
    for (const auto& x : c.nodes)
        a.insert(key({x[0] + 0.5, x[1] + 0.5, x[2] + 0.5}));
    for (const auto& x : p.nodes)
        b.insert(key(x));
    CHECK(a == b);
    CHECK(p.eps == 1.0);
    CHECK(p.gamma_faces.size() == c.hole_faces.size());
}

TEST_CASE("perforated mesh with N = 2")
{
    const double r = 0.25;
    const PerforatedMesh p = build_perforated_mesh(2, r, 2);
    const CellMesh c = build_cell_mesh(r, 2, OuterMode::periodic);
    CHECK(p.eps == 0.5);
    CHECK(p.gamma_faces.size() == 8 * c.hole_faces.size());
    CHECK(p.hexes.size() == 8 * c.hexes.size());
    const double vol = 1.0 - 8.0 * 4.0 / 3.0 * kPi * std::pow(0.5 * r, 3);
    CHECK(rel_err(mesh_volume(p.nodes, p.hexes), vol) <= 0.02);

    // No duplicate coordinates.
    std::vector<Vec3> sorted = p.nodes;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        const double d = std::max({std::abs(sorted[i][0] - sorted[i - 1][0]),
                                   std::abs(sorted[i][1] - sorted[i - 1][1]),
                                   std::abs(sorted[i][2] - sorted[i - 1][2])});
        CHECK(d > 1e-10);
    }
    // Dirichlet nodes are exactly those on the cube boundary.
    std::size_t boundary = 0;
    for (std::size_t i = 0; i < p.nodes.size(); ++i) {
        const auto& x = p.nodes[i];
        bool on = false;
        for (int d = 0; d < 3; ++d)
            on = on || std::abs(x[d]) <= 1e-14 || std::abs(x[d] - 1.0) <= 1e-14;
        CHECK(on == (p.is_dirichlet[i] != 0));
        boundary += on;
    }
    CHECK(boundary == p.outer_dirichlet_nodes.size());
    CHECK(std::is_sorted(p.outer_dirichlet_nodes.begin(), p.outer_dirichlet_nodes.end()));
    for (const auto& f : p.gamma_faces) {
        // Hole faces lie on a sphere of radius eps r around a cell centre.
        const auto& x = p.nodes[f[0]];
        Vec3 centre;
        for (int d = 0; d < 3; ++d)
            centre[d] = (std::floor(x[d] / 0.5) + 0.5) * 0.5;
        CHECK(norm({x[0] - centre[0], x[1] - centre[1], x[2] - centre[2]}) == doctest::Approx(0.125));
    }
    for (std::size_t i = 0; i < p.nodes.size(); ++i)
        CHECK(p.node_origin[i] < static_cast<NodeId>(c.nodes.size()));
}

TEST_CASE("perforated mesh rejects bad input")
{
    CHECK_THROWS_AS(build_perforated_mesh(0, 0.25, 1), PreconditionError);
    CHECK_THROWS_AS(build_perforated_mesh(2, nullptr), PreconditionError);
}

TEST_CASE("mesh JSON export")
{
    const CellMesh m = build_cell_mesh(0.3, 1, OuterMode::periodic);
    const auto j = nlohmann::json::parse(mesh_to_json(m));
    CHECK(j.contains("version"));
    CHECK(j["nodes"].size() == m.nodes.size());
    CHECK(j["hexes"].size() == m.hexes.size());
    CHECK(j["hexes"][0].size() == 8);
    CHECK(j["hole_faces"].size() == m.hole_faces.size());
    CHECK(j["outer_faces"].size() == m.outer_faces.size());
    CHECK(j["periodic_pairs"].size() == m.periodic_pairs().size());
    CHECK(j["nodes"][5][1].get<double>() == m.nodes[5][1]);

    const auto jp = nlohmann::json::parse(mesh_to_json(build_perforated_mesh(2, 0.3, 1)));
    CHECK(jp["hole_faces"].size() == 8 * m.hole_faces.size());
}
