#pragma once

// Boundary-fitted hexahedral meshes of the periodicity cell Y = (-1/2,1/2)^3
// minus a centred ball, and their tilings of the unit cube.

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace robinhom {

using Vec3 = std::array<double, 3>;
using NodeId = std::int32_t;
using HexCell = std::array<NodeId, 8>;
using QuadFace = std::array<NodeId, 4>;

enum class OuterMode { periodic, dirichlet_outer };

const char* to_string(OuterMode mode);

/// Surface area of the unit sphere in R^n, 2 pi^{n/2} / Gamma(n/2).
double unit_sphere_area(int n);

/// Hole radius in cell coordinates for holes of physical radius eps^a:
/// returns eps^{a-1}. Throws HoleTooLarge when the hole would reach dY.
double cell_hole_radius(double eps, double a, int n);

/// Critical exponent n/(n-2).
double critical_exponent(int n);

/// Robin normalisation sigma(dH_eps)/eps for a ball hole of cell radius
/// r_cell, using the analytic sphere area.
double mu_coeff(double eps, int n, double r_cell);

/// Mesh of Y minus the ball |y| <= hole_radius.
///
/// Six blocks, one per cube face. Block nodes sit on rays from the origin:
/// P(u,v,t) = (1-t) r S(u,v) + t C(u,v), C the point of dY with face
/// coordinates (u,v) in [-1,1]^2 and S = C/|C|. The radial coordinate t uses
/// level+2 geometrically graded layers whose innermost thickness on the
/// shortest ray is r/2^level.
struct CellMesh {
    int dimension = 3;
    double hole_radius = 0.0;
    int level = 0;
    OuterMode outer_mode = OuterMode::periodic;

    std::vector<Vec3> nodes;
    std::vector<HexCell> hexes;          ///< VTK ordering, positive Jacobian
    std::vector<QuadFace> hole_faces;    ///< on |y| = hole_radius
    std::vector<QuadFace> outer_faces;   ///< on dY
    std::vector<std::uint8_t> on_hole;   ///< per node
    std::vector<std::uint8_t> on_outer;  ///< per node

    /// periodic_map[axis][i] is the node across the face pair normal to `axis`
    /// when i lies on that face pair, and i otherwise. Each map is an involution.
    std::array<std::vector<NodeId>, 3> periodic_map;

    int radial_layers() const { return level + 2; }
    int face_divisions() const { return 1 << level; }

    /// (plus-side node, minus-side node) for every identified pair.
    std::vector<std::array<NodeId, 2>> periodic_pairs() const;

    /// Equivalence classes under all periodic identifications, numbered by
    /// first occurrence. Identity numbering when outer_mode is dirichlet_outer.
    std::vector<NodeId> periodic_classes() const;
};

/// Throws PreconditionError unless 0 < r_cell < 1/2 and level >= 1, and
/// MeshQualityError if any hexahedron has a non-positive Jacobian at a
/// 2x2x2 Gauss point.
CellMesh build_cell_mesh(double r_cell, int level, OuterMode outer_mode);

/// N^3 copies of a cell template tiling (0,1)^3 with eps = 1/N.
struct PerforatedMesh {
    int cells_per_side = 0;
    double eps = 0.0;
    std::shared_ptr<const CellMesh> cell;

    std::vector<Vec3> nodes;
    std::vector<HexCell> hexes;
    std::vector<QuadFace> gamma_faces;
    std::vector<NodeId> outer_dirichlet_nodes;  ///< sorted
    std::vector<std::uint8_t> is_dirichlet;     ///< per node
    std::vector<NodeId> node_origin;            ///< template node per global node
    std::vector<std::int32_t> hex_cell;         ///< cell index per hex
};

/// Glues translated copies by matching lattice keys on cell faces and checks
/// coordinates agree to 1e-10 (MeshGlueError otherwise).
PerforatedMesh build_perforated_mesh(int cells_per_side, double r_cell, int level);
PerforatedMesh build_perforated_mesh(int cells_per_side, std::shared_ptr<const CellMesh> cell);

/// Jacobian determinant of the trilinear map at reference point xi in [-1,1]^3.
double hex_jacobian(const std::array<Vec3, 8>& x, const Vec3& xi);
double min_gauss_jacobian(const std::array<Vec3, 8>& x);

std::array<Vec3, 8> hex_coordinates(const std::vector<Vec3>& nodes, const HexCell& h);

/// Versioned JSON layout {version, nodes, hexes, hole_faces, outer_faces,
/// periodic_pairs}.
std::string mesh_to_json(const CellMesh& mesh);
std::string mesh_to_json(const PerforatedMesh& mesh);

} // namespace robinhom
