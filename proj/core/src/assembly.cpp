#include "robinhom/assembly.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "robinhom/error.hpp"

namespace robinhom {

namespace {

constexpr int kSign[8][3] = {{-1, -1, -1}, {1, -1, -1}, {1, 1, -1}, {-1, 1, -1},
                             {-1, -1, 1},  {1, -1, 1},  {1, 1, 1},  {-1, 1, 1}};
const double kGauss = 1.0 / std::sqrt(3.0);

struct ShapeAt {
    double N[8];
    double dN[8][3];  // reference derivatives
};

ShapeAt shape_at(const Vec3& xi)
{
    ShapeAt s{};
    for (int a = 0; a < 8; ++a) {
        const double f0 = 1.0 + kSign[a][0] * xi[0];
        const double f1 = 1.0 + kSign[a][1] * xi[1];
        const double f2 = 1.0 + kSign[a][2] * xi[2];
        s.N[a] = 0.125 * f0 * f1 * f2;
        s.dN[a][0] = 0.125 * kSign[a][0] * f1 * f2;
        s.dN[a][1] = 0.125 * f0 * kSign[a][1] * f2;
        s.dN[a][2] = 0.125 * f0 * f1 * kSign[a][2];
    }
    return s;
}

const std::array<ShapeAt, 8>& gauss_shapes()
{
    static const std::array<ShapeAt, 8> table = [] {
        std::array<ShapeAt, 8> t;
        for (int c = 0; c < 8; ++c)
            t[c] = shape_at({(c & 1) ? kGauss : -kGauss, (c & 2) ? kGauss : -kGauss,
                             (c & 4) ? kGauss : -kGauss});
        return t;
    }();
    return table;
}

} // namespace

std::vector<Index> FormSet::dofs_without(std::span<const std::uint8_t> mask) const
{
    std::vector<Index> keep;
    for (Index d = 0; d < num_dofs(); ++d)
        if (mask.empty() || !mask[d])
            keep.push_back(d);
    return keep;
}

Vector FormSet::to_nodes(std::span<const double> dof_values) const
{
    Vector out(dof_of_node.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = dof_values[dof_of_node[i]];
    return out;
}

std::array<QuadraturePoint, 8> hex_quadrature(const std::array<Vec3, 8>& x)
{
    std::array<QuadraturePoint, 8> out;
    const auto& shapes = gauss_shapes();
    for (int q = 0; q < 8; ++q) {
        const ShapeAt& s = shapes[q];
        QuadraturePoint& qp = out[q];
        double J[3][3] = {};
        for (int a = 0; a < 8; ++a)
            for (int i = 0; i < 3; ++i) {
                qp.x[i] += s.N[a] * x[a][i];
                for (int j = 0; j < 3; ++j)
                    J[i][j] += x[a][i] * s.dN[a][j];
            }
        const double det = J[0][0] * (J[1][1] * J[2][2] - J[1][2] * J[2][1]) -
                           J[0][1] * (J[1][0] * J[2][2] - J[1][2] * J[2][0]) +
                           J[0][2] * (J[1][0] * J[2][1] - J[1][1] * J[2][0]);
        if (!(det > 0.0))
            throw AssemblyError("hex_element: non-positive Jacobian " + std::to_string(det));
        // inverse of J; physical gradient = J^{-T} reference gradient
        double Ji[3][3];
        Ji[0][0] = (J[1][1] * J[2][2] - J[1][2] * J[2][1]) / det;
        Ji[0][1] = (J[0][2] * J[2][1] - J[0][1] * J[2][2]) / det;
        Ji[0][2] = (J[0][1] * J[1][2] - J[0][2] * J[1][1]) / det;
        Ji[1][0] = (J[1][2] * J[2][0] - J[1][0] * J[2][2]) / det;
        Ji[1][1] = (J[0][0] * J[2][2] - J[0][2] * J[2][0]) / det;
        Ji[1][2] = (J[0][2] * J[1][0] - J[0][0] * J[1][2]) / det;
        Ji[2][0] = (J[1][0] * J[2][1] - J[1][1] * J[2][0]) / det;
        Ji[2][1] = (J[0][1] * J[2][0] - J[0][0] * J[2][1]) / det;
        Ji[2][2] = (J[0][0] * J[1][1] - J[0][1] * J[1][0]) / det;
        qp.weight = det;
        for (int a = 0; a < 8; ++a) {
            qp.N[a] = s.N[a];
            for (int i = 0; i < 3; ++i)
                qp.grad[a][i] = s.dN[a][0] * Ji[0][i] + s.dN[a][1] * Ji[1][i] + s.dN[a][2] * Ji[2][i];
        }
    }
    return out;
}

HexElement hex_element(const std::array<Vec3, 8>& x)
{
    HexElement e;
    for (const QuadraturePoint& qp : hex_quadrature(x)) {
        const auto& g = qp.grad;
        for (int a = 0; a < 8; ++a)
            for (int b = 0; b < 8; ++b) {
                e.stiffness[a * 8 + b] +=
                    qp.weight * (g[a][0] * g[b][0] + g[a][1] * g[b][1] + g[a][2] * g[b][2]);
                e.mass[a * 8 + b] += qp.weight * qp.N[a] * qp.N[b];
            }
    }
    return e;
}

namespace {

// Area element |dx/du x dx/dv| of the bilinear patch at (u,v) in [-1,1]^2,
// node order (-,-), (+,-), (+,+), (-,+).
double quad_metric(const std::array<Vec3, 4>& x, double u, double v, double N[4])
{
    static constexpr int su[4] = {-1, 1, 1, -1};
    static constexpr int sv[4] = {-1, -1, 1, 1};
    Vec3 du{}, dv{};
    for (int a = 0; a < 4; ++a) {
        N[a] = 0.25 * (1 + su[a] * u) * (1 + sv[a] * v);
        const double nu = 0.25 * su[a] * (1 + sv[a] * v);
        const double nv = 0.25 * (1 + su[a] * u) * sv[a];
        for (int i = 0; i < 3; ++i) {
            du[i] += nu * x[a][i];
            dv[i] += nv * x[a][i];
        }
    }
    const Vec3 c{du[1] * dv[2] - du[2] * dv[1], du[2] * dv[0] - du[0] * dv[2],
                 du[0] * dv[1] - du[1] * dv[0]};
    return std::sqrt(c[0] * c[0] + c[1] * c[1] + c[2] * c[2]);
}

} // namespace

std::array<double, 16> quad_surface_mass(const std::array<Vec3, 4>& x)
{
    std::array<double, 16> m{};
    double N[4];
    for (int c = 0; c < 4; ++c) {
        const double w = quad_metric(x, (c & 1) ? kGauss : -kGauss, (c & 2) ? kGauss : -kGauss, N);
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b)
                m[a * 4 + b] += w * N[a] * N[b];
    }
    return m;
}

double quad_area(const std::array<Vec3, 4>& x)
{
    double area = 0.0, N[4];
    for (int c = 0; c < 4; ++c)
        area += quad_metric(x, (c & 1) ? kGauss : -kGauss, (c & 2) ? kGauss : -kGauss, N);
    return area;
}

FormSet assemble_forms(const std::vector<Vec3>& nodes, const std::vector<HexCell>& hexes,
                       const std::vector<QuadFace>& faces, std::vector<Index> dof_of_node)
{
    if (dof_of_node.size() != nodes.size())
        throw AssemblyError("assemble_forms: dof map size mismatch");
    Index ndofs = 0;
    for (const Index d : dof_of_node)
        ndofs = std::max(ndofs, d + 1);

    SparsityBuilder pattern(ndofs);
    std::array<Index, 8> ed;
    for (const auto& h : hexes) {
        for (int a = 0; a < 8; ++a)
            ed[a] = dof_of_node[h[a]];
        pattern.add_clique(ed);
    }
    FormSet fs;
    fs.A = pattern.build();
    fs.M = SparseSym::zeros_like(fs.A);
    fs.B = SparseSym::zeros_like(fs.A);

    for (std::size_t e = 0; e < hexes.size(); ++e) {
        const auto& h = hexes[e];
        HexElement el;
        try {
            el = hex_element(hex_coordinates(nodes, h));
        } catch (const AssemblyError& err) {
            throw AssemblyError("element " + std::to_string(e) + ": " + err.what());
        }
        for (int a = 0; a < 8; ++a)
            for (int b = 0; b < 8; ++b) {
                const Index i = dof_of_node[h[a]], j = dof_of_node[h[b]];
                fs.A.add(i, j, el.stiffness[a * 8 + b]);
                fs.M.add(i, j, el.mass[a * 8 + b]);
            }
    }
    for (const auto& f : faces) {
        std::array<Vec3, 4> x;
        for (int a = 0; a < 4; ++a)
            x[a] = nodes[f[a]];
        const auto m = quad_surface_mass(x);
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b)
                fs.B.add(dof_of_node[f[a]], dof_of_node[f[b]], m[a * 4 + b]);
    }

    const Vector ones(static_cast<std::size_t>(ndofs), 1.0);
    fs.s_h = fs.B.quad_form(ones);
    fs.vol_h = fs.M.quad_form(ones);
    fs.hole_dof.assign(static_cast<std::size_t>(ndofs), 0);
    for (const auto& f : faces)
        for (const NodeId n : f)
            fs.hole_dof[dof_of_node[n]] = 1;
    fs.dof_of_node = std::move(dof_of_node);
    return fs;
}

FormSet assemble_cell_forms(const CellMesh& mesh)
{
    FormSet fs = assemble_forms(mesh.nodes, mesh.hexes, mesh.hole_faces, mesh.periodic_classes());
    fs.outer_dof.assign(static_cast<std::size_t>(fs.num_dofs()), 0);
    if (mesh.outer_mode == OuterMode::dirichlet_outer)
        for (std::size_t i = 0; i < mesh.nodes.size(); ++i)
            if (mesh.on_outer[i])
                fs.outer_dof[fs.dof_of_node[i]] = 1;
    return fs;
}

SparseSym constraint_form(const FormSet& forms, double kappa)
{
    if (!(forms.s_h > 0.0))
        throw PreconditionError("constraint_form: zero hole surface");
    if (!(kappa >= 0.0) || !std::isfinite(kappa))
        throw PreconditionError("constraint_form: kappa must be finite and nonnegative");
    return linear_combination(1.0 / forms.s_h, forms.B, -kappa, forms.M);
}

Vector LinearSystem::expand(std::span<const double> free_values) const
{
    Vector out(static_cast<std::size_t>(num_nodes), 0.0);
    for (std::size_t k = 0; k < free_nodes.size(); ++k)
        out[free_nodes[k]] = free_values[k];
    return out;
}

DomainForms assemble_domain_forms(const PerforatedMesh& pmesh)
{
    std::vector<Index> ident(pmesh.nodes.size());
    for (std::size_t i = 0; i < ident.size(); ++i)
        ident[i] = static_cast<Index>(i);
    FormSet fs = assemble_forms(pmesh.nodes, pmesh.hexes, pmesh.gamma_faces, std::move(ident));
    return {std::move(fs.A), std::move(fs.M), std::move(fs.B)};
}

Vector assemble_load(const std::vector<Vec3>& nodes, const std::vector<HexCell>& hexes,
                     const ScalarField& f)
{
    Vector rhs(nodes.size(), 0.0);
    for (const auto& h : hexes) {
        const auto x = hex_coordinates(nodes, h);
        for (const ShapeAt& s : gauss_shapes()) {
            double J[3][3] = {};
            Vec3 p{};
            for (int a = 0; a < 8; ++a)
                for (int i = 0; i < 3; ++i) {
                    p[i] += s.N[a] * x[a][i];
                    for (int j = 0; j < 3; ++j)
                        J[i][j] += x[a][i] * s.dN[a][j];
                }
            const double det = J[0][0] * (J[1][1] * J[2][2] - J[1][2] * J[2][1]) -
                               J[0][1] * (J[1][0] * J[2][2] - J[1][2] * J[2][0]) +
                               J[0][2] * (J[1][0] * J[2][1] - J[1][1] * J[2][0]);
            double fv;
            try {
                fv = f(p);
            } catch (const std::exception& err) {
                throw LoadError(std::string("source evaluation failed: ") + err.what());
            }
            if (!std::isfinite(fv))
                throw LoadError("source evaluation returned a non-finite value");
            for (int a = 0; a < 8; ++a)
                rhs[h[a]] += det * fv * s.N[a];
        }
    }
    return rhs;
}

LinearSystem assemble_domain_system(const PerforatedMesh& pmesh, double alpha, double beta,
                                    double mu, const ScalarField& f)
{
    return assemble_domain_system(pmesh, assemble_domain_forms(pmesh), alpha, beta, mu, f);
}

LinearSystem assemble_domain_system(const PerforatedMesh& pmesh, const DomainForms& forms,
                                    double alpha, double beta, double mu, const ScalarField& f)
{
    if (alpha < 0.0 || beta < 0.0 || !(mu > 0.0))
        throw PreconditionError("assemble_domain_system: need alpha >= 0, beta >= 0, mu > 0");
    const SparseSym robin = linear_combination(alpha, forms.M, beta / mu, forms.B_gamma);
    const SparseSym full = linear_combination(1.0, forms.A, 1.0, robin);
    const Vector load = assemble_load(pmesh.nodes, pmesh.hexes, f);

    LinearSystem sys;
    sys.num_nodes = static_cast<Index>(pmesh.nodes.size());
    for (std::size_t i = 0; i < pmesh.nodes.size(); ++i)
        if (!pmesh.is_dirichlet[i])
            sys.free_nodes.push_back(static_cast<Index>(i));
    sys.K = full.restrict_to(sys.free_nodes);
    sys.rhs.resize(sys.free_nodes.size());
    for (std::size_t k = 0; k < sys.free_nodes.size(); ++k)
        sys.rhs[k] = load[sys.free_nodes[k]];
    return sys;
}

std::string matrix_to_coordinate_text(const SparseSym& m)
{
    std::ostringstream out;
    char buf[64];
    const auto rp = m.row_ptr();
    const auto c = m.cols();
    const auto v = m.values();
    for (Index i = 0; i < m.dim(); ++i)
        for (Index k = rp[i]; k < rp[i + 1]; ++k) {
            std::snprintf(buf, sizeof buf, "%.17g", v[k]);
            out << i << ' ' << c[k] << ' ' << buf << '\n';
        }
    return out.str();
}

} // namespace robinhom
