#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <array>
#include <functional>
#include <string>
#include <vector>

#include "pfdam/material.hpp"

namespace pfdam {

using FieldScalar = Eigen::VectorXd;  ///< one value per node
using FieldVector = Eigen::VectorXd;  ///< dim values per node, interleaved
using SparseMat = Eigen::SparseMatrix<Real>;

/// Tensor-product grid of first-order elements on [0, Lx] (x [0, Ly]):
/// linear segments in 1D, bilinear quads in 2D, row-major node numbering.
/// Shape data at the fixed order-2 Gauss points is precomputed once; the
/// geometry is affine so it is shared by all cells.
class Grid {
public:
  static Grid interval(Real length, int cells);
  static Grid rectangle(Real lx, Real ly, int nx, int ny);

  int dim() const { return dim_; }
  Real extent(int axis) const { return extent_[axis]; }
  int cells(int axis) const { return cells_[axis]; }
  Real spacing(int axis) const { return extent_[axis] / cells_[axis]; }

  int node_count() const;
  int cell_count() const;
  int nodes_per_cell() const { return dim_ == 1 ? 2 : 4; }
  int quad_per_cell() const { return dim_ == 1 ? 2 : 4; }

  Eigen::Vector2d node_coord(int node) const;
  std::array<int, 4> cell_nodes(int cell) const;
  Eigen::Vector2d quad_coord(int cell, int q) const;

  /// Shape value of local node a at quadrature point q.
  Real shape(int q, int a) const { return shape_[q][a]; }
  /// Physical gradient component of local node a at quadrature point q.
  Real shape_grad(int q, int a, int axis) const { return grad_[q][a][axis]; }
  /// Quadrature weight times Jacobian determinant.
  Real quad_weight(int q) const { return wdet_[q]; }

  struct Facet {
    std::array<int, 2> nodes;  // one node in 1D, an edge in 2D
    int node_count;
    Eigen::Vector2d normal;
    Real measure;
  };
  const std::vector<Facet>& boundary_facets() const { return facets_; }
  const std::vector<int>& boundary_nodes() const { return bnodes_; }
  bool is_boundary_node(int node) const;

private:
  Grid(int dim, std::array<Real, 2> extent, std::array<int, 2> cells);
  int dim_;
  std::array<Real, 2> extent_;
  std::array<int, 2> cells_;
  std::vector<std::array<Real, 4>> shape_;
  std::vector<std::array<std::array<Real, 2>, 4>> grad_;
  std::vector<Real> wdet_;
  std::vector<Facet> facets_;
  std::vector<int> bnodes_;
};

/// Tensor-product grid by dimension: extents/cells arrays sized dim.
Grid build_grid(int dim, const std::vector<Real>& extents, const std::vector<int>& cells);

/// components = 1 assembles the scalar form, components = dim the vector
/// form acting identically on each component.
SparseMat assemble_mass(const Grid& grid, int components);
SparseMat assemble_laplace(const Grid& grid, int components);
inline SparseMat assemble_scalar_laplace(const Grid& grid) { return assemble_laplace(grid, 1); }

/// Elasticity form  (u, z) -> integral  w * C eps(u) : eps(z)  with nodal
/// weight w interpolated by the element shapes.
SparseMat assemble_weighted_elasticity(const Grid& grid, const StiffnessTensor& C,
                                       const FieldScalar& nodal_weight);
/// Same form with the weight given directly at quadrature points, laid out
/// cell-major: weight_qp[cell * quad_per_cell + q].
SparseMat assemble_weighted_elasticity_qp(const Grid& grid, const StiffnessTensor& C,
                                          const std::vector<Real>& weight_qp);

/// Scalar mass form with a quadrature-point weight, cell-major samples:
/// (x, z) -> integral  w x z.  Weights may be negative (generalized Hessian
/// blocks), so the result is symmetric but not necessarily definite.
SparseMat assemble_weighted_mass(const Grid& grid, const std::vector<Real>& weight_qp);

/// Scalar load  z -> integral  s z  for cell-major quadrature samples s.
FieldScalar assemble_scalar_load(const Grid& grid, const std::vector<Real>& samples_qp);

/// Mass matrix of the boundary trace: integral over the boundary of
/// phi_i phi_j (per component).  In 1D the boundary carries the counting
/// measure, matching point tractions.
SparseMat assemble_boundary_mass(const Grid& grid, int components);

/// Boundary traction: nodal values plus the facets it acts on.  Restricting
/// the facet set keeps data supported on one edge from leaking past the
/// corners onto adjacent edges, so edge loads integrate to exactly the edge
/// resultant.
struct BoundaryField {
  FieldVector nodal;        // full-length nodal vector, zero off the support
  std::vector<int> facets;  // indices into grid.boundary_facets()
};

/// Field acting on every boundary facet.
BoundaryField boundary_everywhere(const Grid& grid, const FieldVector& nodal);
/// Facet indices of one box side: normal = side * e_axis (side = +1 or -1).
std::vector<int> edge_facets(const Grid& grid, int axis, int side);

/// Boundary load  z -> integral over the active facets of b . z.  Rejects
/// nodal data with support on interior nodes.
FieldVector assemble_boundary_load(const Grid& grid, const BoundaryField& b);
inline FieldVector assemble_boundary_load(const Grid& grid, const FieldVector& b) {
  return assemble_boundary_load(grid, boundary_everywhere(grid, b));
}

/// Body load  z -> integral of ell . z  for nodal ell.
FieldVector assemble_body_load(const Grid& grid, const FieldVector& ell);

void require_boundary_support(const Grid& grid, const FieldVector& b);

/// Gauss-order-2 integral of a coordinate function over the domain; exact
/// for the polynomial degrees first-order elements produce.
Real quadrature_integral(const Grid& grid,
                         const std::function<Real(const Eigen::Vector2d&)>& f);
/// Integral of cell-major quadrature samples.
Real quadrature_integral(const Grid& grid, const std::vector<Real>& samples);

/// Values of a nodal field at the quadrature points, cell-major.
std::vector<Real> field_at_quadrature(const Grid& grid, const FieldScalar& field);
/// Gradients of a nodal scalar field at the quadrature points, cell-major.
std::vector<Eigen::Vector2d> gradient_at_quadrature(const Grid& grid, const FieldScalar& field);
/// Flux load  z -> integral  q . grad z  for cell-major quadrature samples q.
FieldScalar assemble_flux_load(const Grid& grid, const std::vector<Eigen::Vector2d>& flux_qp);
/// Strains of a displacement field at the quadrature points, cell-major,
/// in Voigt components with engineering shear.
std::vector<Eigen::VectorXd> strain_at_quadrature(const Grid& grid, const FieldVector& u);

/// Discrete outward normal derivative of a scalar field at a boundary node,
/// one-sided difference into the domain; used to validate initial damage
/// profiles.
Real max_normal_derivative(const Grid& grid, const FieldScalar& field);

struct Snapshot {
  int dim = 0;
  std::array<Real, 2> extents{};
  std::array<int, 2> cells{};
  int components = 1;
  std::string field_name;
  Real time = 0.0;
  Eigen::VectorXd values;
};

/// Text snapshot: provenance comment lines, a fixed header, then row-major
/// nodal values one node per line.  Values round-trip bit exactly.
void save_snapshot(const std::string& path, const Grid& grid, const std::string& name,
                   Real time, int components, const Eigen::VectorXd& values,
                   const std::string& provenance);
Snapshot load_snapshot(const std::string& path);

}  // namespace pfdam
