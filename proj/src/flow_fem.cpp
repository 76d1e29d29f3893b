#include "porofs/flow_fem.hpp"

#include <cmath>
#include <string>

namespace porofs {

Vec3 flux_basis_value(const CellGeometry::Point& pt, const Vec3& xi, int lf, double area,
                      int sign) {
  const int axis = lf / 2;
  const double coef = (lf % 2 == 0) ? -(1.0 - xi[axis]) / 2.0 : (1.0 + xi[axis]) / 2.0;
  const double s = sign * area / 4.0 * coef / pt.detJ;
  return Vec3{pt.J[0][axis], pt.J[1][axis], pt.J[2][axis]} * s;
}

FlowSystem assemble_darcy(const HexMesh& mesh, const DofMap& dm,
                          const std::vector<CellGeometry>& geo, const MaterialModel& model,
                          double C, double dt) {
  if (!(C > 0.0)) throw InvalidArgument("assemble_darcy: storage constant must be positive");
  if (!(dt > 0.0)) throw InvalidArgument("assemble_darcy: time step must be positive");

  FlowSystem sys{SparseMatrix(dm.n_flux, dm.n_flux), SparseMatrix(dm.n_pressure, dm.n_flux),
                 {}, {}, {}, C, dt};
  const Mat3 ki = model.kappa_inv();
  const auto& gauss = cell_gauss();

  for (int c = 0; c < mesh.n_cells(); ++c) {
    const Cell& cell = mesh.cells[c];
    int fdof[6];
    double farea[6];
    for (int lf = 0; lf < 6; ++lf) {
      fdof[lf] = dm.flux_dof[cell.face[lf]];
      farea[lf] = mesh.faces[cell.face[lf]].area;
    }

    double local[6][6] = {};
    for (int q = 0; q < kGaussPerCell; ++q) {
      const auto& pt = geo[c].pt[q];
      Vec3 v[6], kiv[6];
      for (int lf = 0; lf < 6; ++lf) {
        v[lf] = flux_basis_value(pt, gauss[q].xi, lf, farea[lf], cell.face_sign[lf]);
        for (int i = 0; i < 3; ++i)
          kiv[lf][i] = ki[i][0] * v[lf].x + ki[i][1] * v[lf].y + ki[i][2] * v[lf].z;
      }
      for (int a = 0; a < 6; ++a)
        for (int b = a; b < 6; ++b) local[a][b] += pt.wdetJ * dot(kiv[a], v[b]);
    }
    for (int a = 0; a < 6; ++a)
      for (int b = a; b < 6; ++b) {
        if (fdof[a] < 0 || fdof[b] < 0) continue;
        sys.A_zz.add(fdof[a], fdof[b], local[a][b]);
        if (b != a) sys.A_zz.add(fdof[b], fdof[a], local[a][b]);
      }

    // Piola exactness: integral of div(basis_lf) over the cell is the signed
    // face area, independent of distortion.
    for (int lf = 0; lf < 6; ++lf)
      if (fdof[lf] >= 0) sys.B_div.add(c, fdof[lf], cell.face_sign[lf] * farea[lf]);
  }
  sys.A_zz.compress();
  sys.B_div.compress();

  sys.A_pp_diag.resize(mesh.n_cells());
  for (int c = 0; c < mesh.n_cells(); ++c) sys.A_pp_diag[c] = C * geo[c].volume;
  return sys;
}

void assemble_flow_rhs(const HexMesh& mesh, const DofMap& dm,
                       const std::vector<CellGeometry>& geo,
                       const std::vector<FaceGeometry>& fgeo, const MaterialModel& model,
                       const SymTensor2& B, FlowSystem& sys, const FlowInputs& in) {
  if (!in.p_n || !in.states_n || !in.states_lagged)
    throw InvalidArgument("assemble_flow_rhs: missing time-level-n state");
  const double C = sys.C, dt = sys.dt;
  sys.rhs_p.assign(dm.n_pressure, 0.0);
  sys.rhs_z.assign(dm.n_flux, 0.0);

  for (int c = 0; c < mesh.n_cells(); ++c) {
    double r = C * (*in.p_n)[c] * geo[c].volume;
    if (in.source) r += dt * in.source(trilinear_map(mesh, c, {0, 0, 0})) * geo[c].volume;
    for (int q = 0; q < kGaussPerCell; ++q) {
      const auto& lag = (*in.states_lagged)[c * kGaussPerCell + q];
      const auto& old = (*in.states_n)[c * kGaussPerCell + q];
      const double w = geo[c].pt[q].wdetJ;
      r -= w * (C / 3.0 * ddot(B, lag.sigma - old.sigma) + (lag.phi_p - old.phi_p));
    }
    sys.rhs_p[c] = r;
  }

  if (in.gravity) {
    const auto& gauss = cell_gauss();
    for (int c = 0; c < mesh.n_cells(); ++c) {
      const Cell& cell = mesh.cells[c];
      for (int lf = 0; lf < 6; ++lf) {
        const int dof = dm.flux_dof[cell.face[lf]];
        if (dof < 0) continue;
        const double area = mesh.faces[cell.face[lf]].area;
        double r = 0.0;
        for (int q = 0; q < kGaussPerCell; ++q) {
          const Vec3 v =
              flux_basis_value(geo[c].pt[q], gauss[q].xi, lf, area, cell.face_sign[lf]);
          r += geo[c].pt[q].wdetJ * model.rho0 * dot(model.gravity, v);
        }
        sys.rhs_z[dof] += r;
      }
    }
  }

  for (int f = 0; f < mesh.n_faces(); ++f) {
    const Face& face = mesh.faces[f];
    if (face.neighbor >= 0 || face.flow != FlowBC::dirichlet) continue;
    if (!in.dirichlet_pressure)
      throw InvalidArgument("assemble_flow_rhs: flow-Dirichlet face " + std::to_string(f) +
                            " has no pressure data");
    const int dof = dm.flux_dof[f];
    double r = 0.0;
    for (const auto& pt : fgeo[f].pt) r -= in.dirichlet_pressure(pt.x) * norm(pt.ndA);
    sys.rhs_z[dof] += r;
  }
}

namespace {

SparseMatrix build_saddle(const FlowSystem& sys) {
  const int nz = sys.A_zz.rows();
  const int np = static_cast<int>(sys.A_pp_diag.size());
  SparseMatrix M(nz + np, nz + np);
  const double dt = sys.dt;

  const auto& rowp = sys.A_zz.row_ptr();
  const auto& col = sys.A_zz.col_ind();
  const auto& val = sys.A_zz.values();
  for (int r = 0; r < nz; ++r)
    for (int k = rowp[r]; k < rowp[r + 1]; ++k) M.add(r, col[k], dt * val[k]);

  const auto& browp = sys.B_div.row_ptr();
  const auto& bcol = sys.B_div.col_ind();
  const auto& bval = sys.B_div.values();
  for (int c = 0; c < np; ++c) {
    for (int k = browp[c]; k < browp[c + 1]; ++k) {
      M.add(nz + c, bcol[k], -dt * bval[k]);
      M.add(bcol[k], nz + c, -dt * bval[k]);
    }
    M.add(nz + c, nz + c, -sys.A_pp_diag[c]);
  }
  M.compress();
  return M;
}

std::vector<double> saddle_rhs(const FlowSystem& sys) {
  const int nz = sys.A_zz.rows();
  const int np = static_cast<int>(sys.A_pp_diag.size());
  std::vector<double> b(nz + np);
  for (int f = 0; f < nz; ++f) b[f] = sys.dt * sys.rhs_z[f];
  for (int c = 0; c < np; ++c) b[nz + c] = -sys.rhs_p[c];
  return b;
}

FlowSolution split_solution(const FlowSystem& sys, std::vector<double> x, double residual) {
  const int nz = sys.A_zz.rows();
  const int np = static_cast<int>(sys.A_pp_diag.size());
  FlowSolution sol;
  sol.z.assign(x.begin(), x.begin() + nz);
  sol.p.assign(x.begin() + nz, x.begin() + nz + np);
  sol.solver_residual = residual;
  return sol;
}

}  // namespace

FlowSolution solve_flow(const FlowSystem& sys) {
  LdltFactorization fact(build_saddle(sys));
  auto x = fact.solve(saddle_rhs(sys));
  return split_solution(sys, std::move(x), fact.last_residual());
}

FlowSolver::FlowSolver(const HexMesh& mesh, const DofMap& dm,
                       const std::vector<CellGeometry>& geo,
                       const std::vector<FaceGeometry>& fgeo, const MaterialModel& model,
                       double C, const SymTensor2& B, double dt)
    : mesh_(mesh),
      dm_(dm),
      geo_(geo),
      fgeo_(fgeo),
      model_(model),
      B_(B),
      sys_(assemble_darcy(mesh, dm, geo, model, C, dt)),
      fact_(build_saddle(sys_)) {
  factorizations_ = 1;
}

FlowSolution FlowSolver::solve(const FlowInputs& in) {
  assemble_flow_rhs(mesh_, dm_, geo_, fgeo_, model_, B_, sys_, in);
  auto x = fact_.solve(saddle_rhs(sys_));
  return split_solution(sys_, std::move(x), fact_.last_residual());
}

std::vector<double> local_mass_residual(const HexMesh& mesh, const DofMap& dm,
                                        const std::vector<CellGeometry>& geo, double C,
                                        const SymTensor2& B, double dt,
                                        const std::vector<double>& p_new,
                                        const GaussField& states_new,
                                        const std::vector<double>& p_old,
                                        const GaussField& states_old,
                                        const std::vector<double>& z, ScalarField source) {
  std::vector<double> res(mesh.n_cells(), 0.0);
  for (int c = 0; c < mesh.n_cells(); ++c) {
    double r = 0.0;
    for (int q = 0; q < kGaussPerCell; ++q) {
      const auto& sn = states_new[c * kGaussPerCell + q];
      const auto& so = states_old[c * kGaussPerCell + q];
      const double dzeta = C * (p_new[c] - p_old[c]) +
                           C / 3.0 * ddot(B, sn.sigma - so.sigma) + (sn.phi_p - so.phi_p);
      r += geo[c].pt[q].wdetJ * dzeta;
    }
    const Cell& cell = mesh.cells[c];
    for (int lf = 0; lf < 6; ++lf) {
      const int dof = dm.flux_dof[cell.face[lf]];
      if (dof < 0) continue;  // no-flow faces carry zero flux
      r += dt * cell.face_sign[lf] * z[dof] * mesh.faces[cell.face[lf]].area;
    }
    if (source) r -= dt * source(trilinear_map(mesh, c, {0, 0, 0})) * geo[c].volume;
    res[c] = r;
  }
  return res;
}

}  // namespace porofs
