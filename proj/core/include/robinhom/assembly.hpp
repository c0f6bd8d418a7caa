#pragma once

// Q1 finite-element forms on cell and perforated meshes.

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "robinhom/cellmesh.hpp"
#include "robinhom/numkernel.hpp"

namespace robinhom {

/// Stiffness, volume mass and hole-surface mass of a cell mesh, expressed on
/// degrees of freedom (periodic classes when the mesh is periodic).
struct FormSet {
    SparseSym A;  ///< int grad u . grad v
    SparseSym M;  ///< int u v
    SparseSym B;  ///< int_{dH} u v
    double s_h = 0.0;    ///< 1^T B 1, discrete hole surface area
    double vol_h = 0.0;  ///< 1^T M 1, discrete |Y \ H|

    std::vector<Index> dof_of_node;
    std::vector<std::uint8_t> hole_dof;   ///< per dof
    std::vector<std::uint8_t> outer_dof;  ///< per dof; empty pattern when periodic

    Index num_dofs() const { return A.dim(); }
    /// Dofs not flagged by `mask`, ascending.
    std::vector<Index> dofs_without(std::span<const std::uint8_t> mask) const;
    /// Nodal values from dof values.
    Vector to_nodes(std::span<const double> dof_values) const;
};

/// Element matrices of a trilinear hexahedron with 2x2x2 Gauss quadrature.
/// Throws AssemblyError on a non-positive Jacobian.
struct HexElement {
    std::array<double, 64> stiffness{};
    std::array<double, 64> mass{};
};
HexElement hex_element(const std::array<Vec3, 8>& x);

/// Physical 2x2x2 Gauss point of a hexahedron: position, weight (|J| w),
/// shape values and physical shape gradients.
struct QuadraturePoint {
    Vec3 x{};
    double weight = 0.0;
    std::array<double, 8> N{};
    std::array<Vec3, 8> grad{};
};
std::array<QuadraturePoint, 8> hex_quadrature(const std::array<Vec3, 8>& x);

/// Surface mass of a bilinear quad patch, 2x2 Gauss.
std::array<double, 16> quad_surface_mass(const std::array<Vec3, 4>& x);
double quad_area(const std::array<Vec3, 4>& x);

/// Generic assembly over `dof_of_node` numbering. Faces contribute to B.
/// Element contributions are accumulated in element order.
FormSet assemble_forms(const std::vector<Vec3>& nodes, const std::vector<HexCell>& hexes,
                       const std::vector<QuadFace>& faces, std::vector<Index> dof_of_node);

/// Forms on a cell mesh; periodic identification applied in periodic mode.
FormSet assemble_cell_forms(const CellMesh& mesh);

/// Discrete constraint form B/s_h - kappa M.
SparseSym constraint_form(const FormSet& forms, double kappa);

using ScalarField = std::function<double(const Vec3&)>;

/// Operator and load of the perforated Robin problem, restricted to the free
/// (non-Dirichlet) nodes. Dirichlet values are zero.
struct LinearSystem {
    SparseSym K;
    Vector rhs;
    std::vector<Index> free_nodes;  ///< node id of each free dof
    Index num_nodes = 0;

    /// Nodal vector with zeros on constrained nodes.
    Vector expand(std::span<const double> free_values) const;
};

/// Mass and surface mass of a perforated mesh on all nodes, used for norms.
struct DomainForms {
    SparseSym A;
    SparseSym M;
    SparseSym B_gamma;
};
DomainForms assemble_domain_forms(const PerforatedMesh& pmesh);

/// K = A + alpha M + (beta/mu) B_gamma, rhs = int f v, Dirichlet zero on dOmega.
/// Throws LoadError if f throws or returns a non-finite value.
LinearSystem assemble_domain_system(const PerforatedMesh& pmesh, double alpha, double beta,
                                    double mu, const ScalarField& f);
LinearSystem assemble_domain_system(const PerforatedMesh& pmesh, const DomainForms& forms,
                                    double alpha, double beta, double mu, const ScalarField& f);

/// Load vector int f phi_i over all nodes of a hexahedral mesh.
Vector assemble_load(const std::vector<Vec3>& nodes, const std::vector<HexCell>& hexes,
                     const ScalarField& f);

/// Coordinate text format: "row col value" per line, 0-based, full matrix.
std::string matrix_to_coordinate_text(const SparseSym& m);

} // namespace robinhom
