#include "pfdam/grid.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "pfdam/util.hpp"

namespace pfdam {

namespace {
constexpr Real kGaussOffset = 0.28867513459481288;  // 1/(2 sqrt 3)
const Real kG[2] = {0.5 - kGaussOffset, 0.5 + kGaussOffset};
}  // namespace

Grid::Grid(int dim, std::array<Real, 2> extent, std::array<int, 2> cells)
    : dim_(dim), extent_(extent), cells_(cells) {
  for (int a = 0; a < dim_; ++a) {
    if (!(extent_[a] > 0.0)) throw std::invalid_argument("Grid: extent must be positive");
    if (cells_[a] < 1) throw std::invalid_argument("Grid: need at least one cell per axis");
  }
  const int nq = quad_per_cell();
  const int npc = nodes_per_cell();
  shape_.assign(nq, {});
  grad_.assign(nq, {});
  wdet_.assign(nq, 0.0);
  if (dim_ == 1) {
    const Real h = spacing(0);
    for (int q = 0; q < 2; ++q) {
      const Real g = kG[q];
      shape_[q][0] = 1.0 - g;
      shape_[q][1] = g;
      grad_[q][0][0] = -1.0 / h;
      grad_[q][1][0] = 1.0 / h;
      wdet_[q] = 0.5 * h;
    }
  } else {
    const Real hx = spacing(0), hy = spacing(1);
    for (int qy = 0; qy < 2; ++qy) {
      for (int qx = 0; qx < 2; ++qx) {
        const int q = qy * 2 + qx;
        const Real gx = kG[qx], gy = kG[qy];
        const Real nx[2] = {1.0 - gx, gx};
        const Real ny[2] = {1.0 - gy, gy};
        const Real dx[2] = {-1.0 / hx, 1.0 / hx};
        const Real dy[2] = {-1.0 / hy, 1.0 / hy};
        for (int a = 0; a < npc; ++a) {
          const int ax = a & 1, ay = a >> 1;
          shape_[q][a] = nx[ax] * ny[ay];
          grad_[q][a][0] = dx[ax] * ny[ay];
          grad_[q][a][1] = nx[ax] * dy[ay];
        }
        wdet_[q] = 0.25 * hx * hy;
      }
    }
  }

  // Boundary facets with outward normals.
  if (dim_ == 1) {
    facets_.push_back({{0, -1}, 1, Eigen::Vector2d(-1.0, 0.0), 1.0});
    facets_.push_back({{cells_[0], -1}, 1, Eigen::Vector2d(1.0, 0.0), 1.0});
  } else {
    const int nx = cells_[0], ny = cells_[1];
    const Real hx = spacing(0), hy = spacing(1);
    auto node = [nx](int i, int j) { return j * (nx + 1) + i; };
    for (int i = 0; i < nx; ++i)
      facets_.push_back({{node(i, 0), node(i + 1, 0)}, 2, Eigen::Vector2d(0.0, -1.0), hx});
    for (int i = 0; i < nx; ++i)
      facets_.push_back({{node(i, ny), node(i + 1, ny)}, 2, Eigen::Vector2d(0.0, 1.0), hx});
    for (int j = 0; j < ny; ++j)
      facets_.push_back({{node(0, j), node(0, j + 1)}, 2, Eigen::Vector2d(-1.0, 0.0), hy});
    for (int j = 0; j < ny; ++j)
      facets_.push_back({{node(nx, j), node(nx, j + 1)}, 2, Eigen::Vector2d(1.0, 0.0), hy});
  }
  std::vector<char> onb(node_count(), 0);
  for (const auto& f : facets_)
    for (int a = 0; a < f.node_count; ++a) onb[f.nodes[a]] = 1;
  for (int i = 0; i < node_count(); ++i)
    if (onb[i]) bnodes_.push_back(i);
}

Grid Grid::interval(Real length, int cells) {
  return Grid(1, {length, 0.0}, {cells, 0});
}

Grid Grid::rectangle(Real lx, Real ly, int nx, int ny) {
  return Grid(2, {lx, ly}, {nx, ny});
}

Grid build_grid(int dim, const std::vector<Real>& extents, const std::vector<int>& cells) {
  if (dim != 1 && dim != 2) throw std::invalid_argument("build_grid: dim must be 1 or 2");
  if (static_cast<int>(extents.size()) != dim || static_cast<int>(cells.size()) != dim)
    throw std::invalid_argument("build_grid: extents/cells must have dim entries");
  if (dim == 1) return Grid::interval(extents[0], cells[0]);
  return Grid::rectangle(extents[0], extents[1], cells[0], cells[1]);
}

int Grid::node_count() const {
  return dim_ == 1 ? cells_[0] + 1 : (cells_[0] + 1) * (cells_[1] + 1);
}

int Grid::cell_count() const {
  return dim_ == 1 ? cells_[0] : cells_[0] * cells_[1];
}

Eigen::Vector2d Grid::node_coord(int node) const {
  if (dim_ == 1) return {node * spacing(0), 0.0};
  const int nx = cells_[0];
  const int i = node % (nx + 1);
  const int j = node / (nx + 1);
  return {i * spacing(0), j * spacing(1)};
}

std::array<int, 4> Grid::cell_nodes(int cell) const {
  if (dim_ == 1) return {cell, cell + 1, -1, -1};
  const int nx = cells_[0];
  const int cx = cell % nx;
  const int cy = cell / nx;
  const int n00 = cy * (nx + 1) + cx;
  return {n00, n00 + 1, n00 + nx + 1, n00 + nx + 2};
}

Eigen::Vector2d Grid::quad_coord(int cell, int q) const {
  if (dim_ == 1) return {(cell + kG[q]) * spacing(0), 0.0};
  const int nx = cells_[0];
  const int cx = cell % nx;
  const int cy = cell / nx;
  return {(cx + kG[q & 1]) * spacing(0), (cy + kG[q >> 1]) * spacing(1)};
}

bool Grid::is_boundary_node(int node) const {
  if (dim_ == 1) return node == 0 || node == cells_[0];
  const int nx = cells_[0], ny = cells_[1];
  const int i = node % (nx + 1);
  const int j = node / (nx + 1);
  return i == 0 || i == nx || j == 0 || j == ny;
}

namespace {

using Triplet = Eigen::Triplet<Real>;

// Deterministic cell-parallel scatter: every cell owns a fixed slot range in
// the triplet array, so the summation order in setFromTriplets does not
// depend on the worker count.
template <typename CellKernel>
SparseMat assemble_cellwise(const Grid& grid, int block, const CellKernel& kernel) {
  const int npc = grid.nodes_per_cell();
  const int ndof = npc * block;
  const std::int64_t per_cell = static_cast<std::int64_t>(ndof) * ndof;
  std::vector<Triplet> trips(per_cell * grid.cell_count());
  parallel_for(grid.cell_count(), [&](std::int64_t b, std::int64_t e) {
    Eigen::MatrixXd elem(ndof, ndof);
    for (std::int64_t cell = b; cell < e; ++cell) {
      elem.setZero();
      kernel(static_cast<int>(cell), elem);
      const auto nodes = grid.cell_nodes(static_cast<int>(cell));
      std::int64_t slot = per_cell * cell;
      for (int i = 0; i < ndof; ++i) {
        const int gi = nodes[i / block] * block + i % block;
        for (int j = 0; j < ndof; ++j) {
          const int gj = nodes[j / block] * block + j % block;
          trips[slot++] = Triplet(gi, gj, elem(i, j));
        }
      }
    }
  });
  SparseMat out(grid.node_count() * block, grid.node_count() * block);
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

}  // namespace

SparseMat assemble_mass(const Grid& grid, int components) {
  const int npc = grid.nodes_per_cell();
  return assemble_cellwise(grid, components, [&](int, Eigen::MatrixXd& elem) {
    for (int q = 0; q < grid.quad_per_cell(); ++q) {
      const Real w = grid.quad_weight(q);
      for (int a = 0; a < npc; ++a)
        for (int b = 0; b < npc; ++b) {
          const Real v = w * grid.shape(q, a) * grid.shape(q, b);
          for (int c = 0; c < components; ++c)
            elem(a * components + c, b * components + c) += v;
        }
    }
  });
}

SparseMat assemble_laplace(const Grid& grid, int components) {
  const int npc = grid.nodes_per_cell();
  return assemble_cellwise(grid, components, [&](int, Eigen::MatrixXd& elem) {
    for (int q = 0; q < grid.quad_per_cell(); ++q) {
      const Real w = grid.quad_weight(q);
      for (int a = 0; a < npc; ++a)
        for (int b = 0; b < npc; ++b) {
          Real dot = 0.0;
          for (int ax = 0; ax < grid.dim(); ++ax)
            dot += grid.shape_grad(q, a, ax) * grid.shape_grad(q, b, ax);
          for (int c = 0; c < components; ++c)
            elem(a * components + c, b * components + c) += w * dot;
        }
    }
  });
}

namespace {

// Strain-displacement rows in Voigt order at one quadrature point.
void fill_bmatrix(const Grid& grid, int q, Eigen::MatrixXd& B) {
  const int npc = grid.nodes_per_cell();
  B.setZero();
  if (grid.dim() == 1) {
    for (int a = 0; a < npc; ++a) B(0, a) = grid.shape_grad(q, a, 0);
    return;
  }
  for (int a = 0; a < npc; ++a) {
    const Real dx = grid.shape_grad(q, a, 0);
    const Real dy = grid.shape_grad(q, a, 1);
    B(0, 2 * a) = dx;
    B(1, 2 * a + 1) = dy;
    B(2, 2 * a) = dy;
    B(2, 2 * a + 1) = dx;
  }
}

}  // namespace

SparseMat assemble_weighted_elasticity_qp(const Grid& grid, const StiffnessTensor& C,
                                 const std::vector<Real>& weight_qp) {
  if (static_cast<int>(weight_qp.size()) != grid.cell_count() * grid.quad_per_cell())
    throw std::invalid_argument("assemble_weighted_elasticity_qp: weight sample count mismatch");
  const int dim = grid.dim();
  const int npc = grid.nodes_per_cell();
  const int vs = C.voigt_size();
  return assemble_cellwise(grid, dim, [&, vs, npc](int cell, Eigen::MatrixXd& elem) {
    Eigen::MatrixXd B(vs, npc * dim);
    for (int q = 0; q < grid.quad_per_cell(); ++q) {
      fill_bmatrix(grid, q, B);
      const Real w = grid.quad_weight(q) * weight_qp[cell * grid.quad_per_cell() + q];
      elem.noalias() += w * B.transpose() * C.voigt() * B;
    }
  });
}

SparseMat assemble_weighted_elasticity(const Grid& grid, const StiffnessTensor& C,
                              const FieldScalar& nodal_weight) {
  if (nodal_weight.size() != grid.node_count())
    throw std::invalid_argument("assemble_weighted_elasticity: weight size mismatch");
  return assemble_weighted_elasticity_qp(grid, C, field_at_quadrature(grid, nodal_weight));
}

SparseMat assemble_weighted_mass(const Grid& grid, const std::vector<Real>& weight_qp) {
  if (static_cast<int>(weight_qp.size()) != grid.cell_count() * grid.quad_per_cell())
    throw std::invalid_argument("assemble_weighted_mass: weight sample count mismatch");
  const int npc = grid.nodes_per_cell();
  return assemble_cellwise(grid, 1, [&](int cell, Eigen::MatrixXd& elem) {
    for (int q = 0; q < grid.quad_per_cell(); ++q) {
      const Real w = grid.quad_weight(q) * weight_qp[cell * grid.quad_per_cell() + q];
      for (int a = 0; a < npc; ++a)
        for (int b = 0; b < npc; ++b) elem(a, b) += w * grid.shape(q, a) * grid.shape(q, b);
    }
  });
}

FieldScalar assemble_scalar_load(const Grid& grid, const std::vector<Real>& samples_qp) {
  if (static_cast<int>(samples_qp.size()) != grid.cell_count() * grid.quad_per_cell())
    throw std::invalid_argument("assemble_scalar_load: sample count mismatch");
  const int npc = grid.nodes_per_cell();
  const int nq = grid.quad_per_cell();
  // Per-cell partials merged serially in cell order: worker-count independent.
  std::vector<std::array<Real, 4>> partials(grid.cell_count());
  parallel_for(grid.cell_count(), [&](std::int64_t b, std::int64_t e) {
    for (std::int64_t cell = b; cell < e; ++cell) {
      auto& p = partials[cell];
      p.fill(0.0);
      for (int q = 0; q < nq; ++q) {
        const Real w = grid.quad_weight(q) * samples_qp[cell * nq + q];
        for (int a = 0; a < npc; ++a) p[a] += w * grid.shape(q, a);
      }
    }
  });
  FieldScalar load = FieldScalar::Zero(grid.node_count());
  for (int cell = 0; cell < grid.cell_count(); ++cell) {
    const auto nodes = grid.cell_nodes(cell);
    for (int a = 0; a < npc; ++a) load[nodes[a]] += partials[cell][a];
  }
  return load;
}

SparseMat assemble_boundary_mass(const Grid& grid, int components) {
  const int n = grid.node_count() * components;
  std::vector<Triplet> trips;
  for (const auto& f : grid.boundary_facets()) {
    if (f.node_count == 1) {
      for (int c = 0; c < components; ++c)
        trips.emplace_back(f.nodes[0] * components + c, f.nodes[0] * components + c, 1.0);
      continue;
    }
    // Consistent edge mass:  |e| [[1/3, 1/6], [1/6, 1/3]].
    const Real m[2][2] = {{f.measure / 3.0, f.measure / 6.0},
                          {f.measure / 6.0, f.measure / 3.0}};
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        for (int c = 0; c < components; ++c)
          trips.emplace_back(f.nodes[a] * components + c, f.nodes[b] * components + c,
                             m[a][b]);
  }
  SparseMat out(n, n);
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

void require_boundary_support(const Grid& grid, const FieldVector& b) {
  const int dim = grid.dim();
  if (b.size() != static_cast<Eigen::Index>(grid.node_count()) * dim)
    throw std::invalid_argument("traction field has wrong size");
  for (int node = 0; node < grid.node_count(); ++node) {
    if (grid.is_boundary_node(node)) continue;
    for (int c = 0; c < dim; ++c)
      if (b[node * dim + c] != 0.0)
        throw std::invalid_argument("traction defined on a non-boundary node");
  }
}

BoundaryField boundary_everywhere(const Grid& grid, const FieldVector& nodal) {
  BoundaryField field{nodal, {}};
  field.facets.resize(grid.boundary_facets().size());
  for (size_t i = 0; i < field.facets.size(); ++i) field.facets[i] = static_cast<int>(i);
  return field;
}

std::vector<int> edge_facets(const Grid& grid, int axis, int side) {
  if (axis < 0 || axis >= grid.dim() || (side != 1 && side != -1))
    throw std::invalid_argument("edge_facets: bad axis or side");
  std::vector<int> out;
  const auto& facets = grid.boundary_facets();
  for (size_t i = 0; i < facets.size(); ++i)
    if (facets[i].normal[axis] == static_cast<Real>(side)) out.push_back(static_cast<int>(i));
  return out;
}

FieldVector assemble_boundary_load(const Grid& grid, const BoundaryField& b) {
  require_boundary_support(grid, b.nodal);
  const int dim = grid.dim();
  const auto& facets = grid.boundary_facets();
  FieldVector load = FieldVector::Zero(grid.node_count() * dim);
  for (int fi : b.facets) {
    if (fi < 0 || fi >= static_cast<int>(facets.size()))
      throw std::invalid_argument("assemble_boundary_load: facet index out of range");
    const auto& f = facets[fi];
    if (f.node_count == 1) {
      for (int c = 0; c < dim; ++c)
        load[f.nodes[0] * dim + c] += b.nodal[f.nodes[0] * dim + c];
      continue;
    }
    const Real m[2][2] = {{f.measure / 3.0, f.measure / 6.0},
                          {f.measure / 6.0, f.measure / 3.0}};
    for (int a = 0; a < 2; ++a)
      for (int bn = 0; bn < 2; ++bn)
        for (int c = 0; c < dim; ++c)
          load[f.nodes[a] * dim + c] += m[a][bn] * b.nodal[f.nodes[bn] * dim + c];
  }
  return load;
}

FieldVector assemble_body_load(const Grid& grid, const FieldVector& ell) {
  const int dim = grid.dim();
  if (ell.size() != static_cast<Eigen::Index>(grid.node_count()) * dim)
    throw std::invalid_argument("body load field has wrong size");
  return assemble_mass(grid, dim) * ell;
}

Real quadrature_integral(const Grid& grid,
                         const std::function<Real(const Eigen::Vector2d&)>& f) {
  std::vector<Real> partial(grid.cell_count(), 0.0);
  parallel_for(grid.cell_count(), [&](std::int64_t b, std::int64_t e) {
    for (std::int64_t cell = b; cell < e; ++cell) {
      Real s = 0.0;
      for (int q = 0; q < grid.quad_per_cell(); ++q)
        s += grid.quad_weight(q) * f(grid.quad_coord(static_cast<int>(cell), q));
      partial[cell] = s;
    }
  });
  Real total = 0.0;
  for (Real s : partial) total += s;
  return total;
}

Real quadrature_integral(const Grid& grid, const std::vector<Real>& samples) {
  if (static_cast<int>(samples.size()) != grid.cell_count() * grid.quad_per_cell())
    throw std::invalid_argument("quadrature_integral: sample count mismatch");
  Real total = 0.0;
  for (int cell = 0; cell < grid.cell_count(); ++cell)
    for (int q = 0; q < grid.quad_per_cell(); ++q)
      total += grid.quad_weight(q) * samples[cell * grid.quad_per_cell() + q];
  return total;
}

std::vector<Real> field_at_quadrature(const Grid& grid, const FieldScalar& field) {
  if (field.size() != grid.node_count())
    throw std::invalid_argument("field_at_quadrature: size mismatch");
  const int nq = grid.quad_per_cell();
  std::vector<Real> out(static_cast<std::size_t>(grid.cell_count()) * nq);
  parallel_for(grid.cell_count(), [&](std::int64_t b, std::int64_t e) {
    for (std::int64_t cell = b; cell < e; ++cell) {
      const auto nodes = grid.cell_nodes(static_cast<int>(cell));
      for (int q = 0; q < nq; ++q) {
        Real v = 0.0;
        for (int a = 0; a < grid.nodes_per_cell(); ++a)
          v += grid.shape(q, a) * field[nodes[a]];
        out[cell * nq + q] = v;
      }
    }
  });
  return out;
}

std::vector<Eigen::Vector2d> gradient_at_quadrature(const Grid& grid, const FieldScalar& field) {
  if (field.size() != grid.node_count())
    throw std::invalid_argument("gradient_at_quadrature: size mismatch");
  const int nq = grid.quad_per_cell();
  std::vector<Eigen::Vector2d> out(static_cast<std::size_t>(grid.cell_count()) * nq);
  parallel_for(grid.cell_count(), [&](std::int64_t b, std::int64_t e) {
    for (std::int64_t cell = b; cell < e; ++cell) {
      const auto nodes = grid.cell_nodes(static_cast<int>(cell));
      for (int q = 0; q < nq; ++q) {
        Eigen::Vector2d v = Eigen::Vector2d::Zero();
        for (int a = 0; a < grid.nodes_per_cell(); ++a)
          for (int ax = 0; ax < grid.dim(); ++ax)
            v[ax] += grid.shape_grad(q, a, ax) * field[nodes[a]];
        out[cell * nq + q] = v;
      }
    }
  });
  return out;
}

FieldScalar assemble_flux_load(const Grid& grid, const std::vector<Eigen::Vector2d>& flux_qp) {
  if (static_cast<int>(flux_qp.size()) != grid.cell_count() * grid.quad_per_cell())
    throw std::invalid_argument("assemble_flux_load: sample count mismatch");
  const int npc = grid.nodes_per_cell();
  const int nq = grid.quad_per_cell();
  std::vector<std::array<Real, 4>> partials(grid.cell_count());
  parallel_for(grid.cell_count(), [&](std::int64_t b, std::int64_t e) {
    for (std::int64_t cell = b; cell < e; ++cell) {
      auto& p = partials[cell];
      p.fill(0.0);
      for (int q = 0; q < nq; ++q) {
        const Real w = grid.quad_weight(q);
        const Eigen::Vector2d& f = flux_qp[cell * nq + q];
        for (int a = 0; a < npc; ++a)
          for (int ax = 0; ax < grid.dim(); ++ax)
            p[a] += w * f[ax] * grid.shape_grad(q, a, ax);
      }
    }
  });
  FieldScalar load = FieldScalar::Zero(grid.node_count());
  for (int cell = 0; cell < grid.cell_count(); ++cell) {
    const auto nodes = grid.cell_nodes(cell);
    for (int a = 0; a < npc; ++a) load[nodes[a]] += partials[cell][a];
  }
  return load;
}

std::vector<Eigen::VectorXd> strain_at_quadrature(const Grid& grid, const FieldVector& u) {
  const int dim = grid.dim();
  if (u.size() != static_cast<Eigen::Index>(grid.node_count()) * dim)
    throw std::invalid_argument("strain_at_quadrature: size mismatch");
  const int nq = grid.quad_per_cell();
  const int npc = grid.nodes_per_cell();
  const int vs = dim == 1 ? 1 : 3;
  std::vector<Eigen::VectorXd> out(static_cast<std::size_t>(grid.cell_count()) * nq);
  parallel_for(grid.cell_count(), [&](std::int64_t b, std::int64_t e) {
    Eigen::MatrixXd B(vs, npc * dim);
    Eigen::VectorXd ucell(npc * dim);
    for (std::int64_t cell = b; cell < e; ++cell) {
      const auto nodes = grid.cell_nodes(static_cast<int>(cell));
      for (int a = 0; a < npc; ++a)
        for (int c = 0; c < dim; ++c) ucell[a * dim + c] = u[nodes[a] * dim + c];
      for (int q = 0; q < nq; ++q) {
        fill_bmatrix(grid, q, B);
        out[cell * nq + q] = B * ucell;
      }
    }
  });
  return out;
}

Real max_normal_derivative(const Grid& grid, const FieldScalar& field) {
  if (field.size() != grid.node_count())
    throw std::invalid_argument("max_normal_derivative: size mismatch");
  Real worst = 0.0;
  if (grid.dim() == 1) {
    const int n = grid.cells(0);
    const Real h = grid.spacing(0);
    worst = std::max(std::abs(field[0] - field[1]) / h,
                     std::abs(field[n] - field[n - 1]) / h);
    return worst;
  }
  const int nx = grid.cells(0), ny = grid.cells(1);
  const Real hx = grid.spacing(0), hy = grid.spacing(1);
  auto node = [nx](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j <= ny; ++j) {
    worst = std::max(worst, std::abs(field[node(0, j)] - field[node(1, j)]) / hx);
    worst = std::max(worst, std::abs(field[node(nx, j)] - field[node(nx - 1, j)]) / hx);
  }
  for (int i = 0; i <= nx; ++i) {
    worst = std::max(worst, std::abs(field[node(i, 0)] - field[node(i, 1)]) / hy);
    worst = std::max(worst, std::abs(field[node(i, ny)] - field[node(i, ny - 1)]) / hy);
  }
  return worst;
}

void save_snapshot(const std::string& path, const Grid& grid, const std::string& name,
                   Real time, int components, const Eigen::VectorXd& values,
                   const std::string& provenance) {
  if (values.size() != static_cast<Eigen::Index>(grid.node_count()) * components)
    throw std::invalid_argument("save_snapshot: value count mismatch");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_snapshot: cannot open " + path);
  if (!provenance.empty()) out << "# " << provenance << "\n";
  out << "dim " << grid.dim() << "\n";
  out << "extents";
  for (int a = 0; a < grid.dim(); ++a) out << ' ' << format_exact(grid.extent(a));
  out << "\ncells";
  for (int a = 0; a < grid.dim(); ++a) out << ' ' << grid.cells(a);
  out << "\ncomponents " << components << "\n";
  out << "field " << name << "\n";
  out << "time " << format_exact(time) << "\n";
  for (int node = 0; node < grid.node_count(); ++node) {
    for (int c = 0; c < components; ++c) {
      if (c) out << ' ';
      out << format_exact(values[node * components + c]);
    }
    out << "\n";
  }
  if (!out) throw std::runtime_error("save_snapshot: write failed for " + path);
}

Snapshot load_snapshot(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_snapshot: cannot open " + path);
  Snapshot snap;
  std::string line;
  int header_seen = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] == '#') continue;
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    if (key == "dim") {
      ss >> snap.dim;
    } else if (key == "extents") {
      for (int a = 0; a < snap.dim; ++a) ss >> snap.extents[a];
    } else if (key == "cells") {
      for (int a = 0; a < snap.dim; ++a) ss >> snap.cells[a];
    } else if (key == "components") {
      ss >> snap.components;
    } else if (key == "field") {
      ss >> snap.field_name;
    } else if (key == "time") {
      ss >> snap.time;
      header_seen = 1;
      break;
    } else {
      throw std::runtime_error("load_snapshot: unexpected header line: " + line);
    }
  }
  if (!header_seen || snap.dim < 1 || snap.dim > 2)
    throw std::runtime_error("load_snapshot: malformed header in " + path);
  const int nodes = snap.dim == 1 ? snap.cells[0] + 1
                                  : (snap.cells[0] + 1) * (snap.cells[1] + 1);
  snap.values.resize(static_cast<Eigen::Index>(nodes) * snap.components);
  for (int node = 0; node < nodes; ++node) {
    if (!std::getline(in, line))
      throw std::runtime_error("load_snapshot: truncated values in " + path);
    std::istringstream ss(line);
    for (int c = 0; c < snap.components; ++c)
      if (!(ss >> snap.values[node * snap.components + c]))
        throw std::runtime_error("load_snapshot: bad value line in " + path);
  }
  return snap;
}

}  // namespace pfdam
