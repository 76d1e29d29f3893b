#include "porofs/mech_fem.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "porofs/common.hpp"

namespace porofs {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

// Bilinear shape values on a face, corner order matching Face::v.
void face_shape(double s, double t, double N[4]) {
  N[0] = 0.25 * (1.0 - s) * (1.0 - t);
  N[1] = 0.25 * (1.0 + s) * (1.0 - t);
  N[2] = 0.25 * (1.0 + s) * (1.0 + t);
  N[3] = 0.25 * (1.0 - s) * (1.0 + t);
}

}  // namespace

void strain_basis(const CellGeometry::Point& pt, int a, int i, double out[6]) {
  const double* g = pt.dN[a];
  for (int k = 0; k < 6; ++k) out[k] = 0.0;
  out[i] = g[i];
  switch (i) {
    case 0:
      out[4] = kInvSqrt2 * g[2];
      out[5] = kInvSqrt2 * g[1];
      break;
    case 1:
      out[3] = kInvSqrt2 * g[2];
      out[5] = kInvSqrt2 * g[0];
      break;
    default:
      out[3] = kInvSqrt2 * g[1];
      out[4] = kInvSqrt2 * g[0];
      break;
  }
}

SymTensor2 strain_at_gauss(const HexMesh& mesh, const std::vector<CellGeometry>& geo, int cell,
                           int q, const std::vector<double>& u_full) {
  const CellGeometry::Point& pt = geo[cell].pt[q];
  const Cell& c = mesh.cells[cell];
  double grad[3][3] = {};
  for (int a = 0; a < 8; ++a) {
    const int v = c.v[a];
    for (int i = 0; i < 3; ++i) {
      const double ui = u_full[3 * v + i];
      for (int j = 0; j < 3; ++j) grad[i][j] += ui * pt.dN[a][j];
    }
  }
  SymTensor2 e;
  e[0] = grad[0][0];
  e[1] = grad[1][1];
  e[2] = grad[2][2];
  e[3] = kInvSqrt2 * (grad[1][2] + grad[2][1]);
  e[4] = kInvSqrt2 * (grad[0][2] + grad[2][0]);
  e[5] = kInvSqrt2 * (grad[0][1] + grad[1][0]);
  return e;
}

SymTensor2 strain_at(const HexMesh& mesh, int cell, const Vec3& xi,
                     const std::vector<double>& u_full) {
  const Cell& c = mesh.cells[cell];
  const Mat3 J = trilinear_jacobian(mesh, cell, xi);
  const double det = det3(J);
  if (det <= 0.0) throw Error("strain_at: singular Jacobian");
  const Mat3 Jinv = inv3(J, det);
  double dNr[8][3];
  hex_shape_grad(xi, dNr);
  double grad[3][3] = {};
  for (int a = 0; a < 8; ++a) {
    double dN[3];
    for (int i = 0; i < 3; ++i) {
      dN[i] = dNr[a][0] * Jinv[0][i] + dNr[a][1] * Jinv[1][i] + dNr[a][2] * Jinv[2][i];
    }
    for (int i = 0; i < 3; ++i) {
      const double ui = u_full[3 * c.v[a] + i];
      for (int j = 0; j < 3; ++j) grad[i][j] += ui * dN[j];
    }
  }
  SymTensor2 e;
  e[0] = grad[0][0];
  e[1] = grad[1][1];
  e[2] = grad[2][2];
  e[3] = kInvSqrt2 * (grad[1][2] + grad[2][1]);
  e[4] = kInvSqrt2 * (grad[0][2] + grad[2][0]);
  e[5] = kInvSqrt2 * (grad[0][1] + grad[1][0]);
  return e;
}

std::vector<double> expand_displacement(const HexMesh& mesh, const DofMap& dm,
                                        const std::vector<double>& u_free) {
  if ((int)u_free.size() != dm.n_disp) throw InvalidArgument("expand_displacement: size mismatch");
  std::vector<double> full(3 * mesh.n_vertices(), 0.0);
  for (int v = 0; v < mesh.n_vertices(); ++v) {
    for (int i = 0; i < 3; ++i) {
      const int dof = dm.disp_dof[v][i];
      if (dof >= 0) full[3 * v + i] = u_free[dof];
    }
  }
  return full;
}

std::vector<double> internal_forces(const HexMesh& mesh, const DofMap& dm,
                                    const std::vector<CellGeometry>& geo,
                                    const std::vector<SymTensor2>& sigma, bool full,
                                    std::vector<double>* abs_rows) {
  if ((int)sigma.size() != kGaussPerCell * mesh.n_cells()) {
    throw InvalidArgument("internal_forces: stress field size mismatch");
  }
  const int n = full ? 3 * mesh.n_vertices() : dm.n_disp;
  std::vector<double> r(n, 0.0);
  if (abs_rows) abs_rows->assign(n, 0.0);
  double b[6];
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const Cell& cell = mesh.cells[c];
    for (int q = 0; q < kGaussPerCell; ++q) {
      const CellGeometry::Point& pt = geo[c].pt[q];
      const auto& s = sigma[kGaussPerCell * c + q].mandel();
      for (int a = 0; a < 8; ++a) {
        for (int i = 0; i < 3; ++i) {
          const int dof = full ? 3 * cell.v[a] + i : dm.disp_dof[cell.v[a]][i];
          if (dof < 0) continue;
          strain_basis(pt, a, i, b);
          double acc = 0.0, mag = 0.0;
          for (int m = 0; m < 6; ++m) {
            acc += s[m] * b[m];
            mag += std::abs(s[m] * b[m]);
          }
          r[dof] += pt.wdetJ * acc;
          if (abs_rows) (*abs_rows)[dof] += pt.wdetJ * mag;
        }
      }
    }
  }
  return r;
}

MechSolver::MechSolver(const HexMesh& mesh, const DofMap& dm, const std::vector<CellGeometry>& geo,
                       const std::vector<FaceGeometry>& fgeo, const MaterialModel& model)
    : mesh_(mesh), dm_(dm), geo_(geo), fgeo_(fgeo), model_(model) {
  model_.validate();
  if (model_.plasticity.type == PlasticityType::none) {
    std::vector<Tensor4> elastic(kGaussPerCell * mesh_.n_cells(), model_.D);
    elastic_fact_ = std::make_unique<LdltFactorization>(assemble_tangent(elastic));
    factorizations_ = 1;
  }
}

SparseMatrix MechSolver::assemble_tangent(const std::vector<Tensor4>& tangents) const {
  SparseMatrix K(dm_.n_disp, dm_.n_disp);
  double b[24][6];
  double Db[24][6];
  for (int c = 0; c < mesh_.n_cells(); ++c) {
    const Cell& cell = mesh_.cells[c];
    int dof[24];
    for (int a = 0; a < 8; ++a) {
      for (int i = 0; i < 3; ++i) dof[3 * a + i] = dm_.disp_dof[cell.v[a]][i];
    }
    double Kloc[24][24] = {};
    for (int q = 0; q < kGaussPerCell; ++q) {
      const CellGeometry::Point& pt = geo_[c].pt[q];
      const Tensor4& D = tangents[kGaussPerCell * c + q];
      for (int a = 0; a < 8; ++a) {
        for (int i = 0; i < 3; ++i) strain_basis(pt, a, i, b[3 * a + i]);
      }
      for (int col = 0; col < 24; ++col) {
        for (int m = 0; m < 6; ++m) {
          double acc = 0.0;
          for (int n = 0; n < 6; ++n) acc += D(m, n) * b[col][n];
          Db[col][m] = acc;
        }
      }
      for (int row = 0; row < 24; ++row) {
        for (int col = 0; col < 24; ++col) {
          double acc = 0.0;
          for (int m = 0; m < 6; ++m) acc += b[row][m] * Db[col][m];
          Kloc[row][col] += pt.wdetJ * acc;
        }
      }
    }
    for (int row = 0; row < 24; ++row) {
      if (dof[row] < 0) continue;
      for (int col = 0; col < 24; ++col) {
        if (dof[col] >= 0) K.add(dof[row], dof[col], Kloc[row][col]);
      }
    }
  }
  K.compress();
  return K;
}

std::vector<double> MechSolver::external_load(const TractionField& traction, bool gravity) const {
  std::vector<double> F(3 * mesh_.n_vertices(), 0.0);
  if (traction) {
    for (int f = 0; f < mesh_.n_faces(); ++f) {
      const Face& face = mesh_.faces[f];
      if (face.neighbor >= 0 || face.mech != MechBC::neumann) continue;
      const auto gauss = face_gauss();
      for (int q = 0; q < kGaussPerFace; ++q) {
        const FaceGeometry::Point& pt = fgeo_[f].pt[q];
        const Vec3 t = traction(pt.x, face.side);
        const double dA = norm(pt.ndA);
        double N[4];
        face_shape(gauss[q].xi.x, gauss[q].xi.y, N);
        for (int a = 0; a < 4; ++a) {
          F[3 * face.v[a] + 0] += N[a] * t.x * dA;
          F[3 * face.v[a] + 1] += N[a] * t.y * dA;
          F[3 * face.v[a] + 2] += N[a] * t.z * dA;
        }
      }
    }
  }
  if (gravity) {
    const double rho_bulk = model_.rho0 * model_.phi0 + model_.rho_r * (1.0 - model_.phi0);
    const Vec3 f = model_.gravity * rho_bulk;
    for (int c = 0; c < mesh_.n_cells(); ++c) {
      const Cell& cell = mesh_.cells[c];
      for (int q = 0; q < kGaussPerCell; ++q) {
        const CellGeometry::Point& pt = geo_[c].pt[q];
        for (int a = 0; a < 8; ++a) {
          const double w = pt.wdetJ * pt.N[a];
          F[3 * cell.v[a] + 0] += w * f.x;
          F[3 * cell.v[a] + 1] += w * f.y;
          F[3 * cell.v[a] + 2] += w * f.z;
        }
      }
    }
  }
  return F;
}

MechResult MechSolver::solve(const std::vector<double>& p_frozen, const GaussField& states_n,
                             const TractionField& traction, bool gravity,
                             const std::vector<double>* u0, double tol_newton,
                             int max_newton) const {
  const int n_gp = kGaussPerCell * mesh_.n_cells();
  if ((int)p_frozen.size() != mesh_.n_cells()) {
    throw InvalidArgument("MechSolver::solve: pressure field size mismatch");
  }
  if ((int)states_n.size() != n_gp) {
    throw InvalidArgument("MechSolver::solve: state field size mismatch");
  }

  MechResult res;
  res.u = u0 ? *u0 : std::vector<double>(dm_.n_disp, 0.0);
  if (u0 && (int)u0->size() != dm_.n_disp) {
    throw InvalidArgument("MechSolver::solve: warm start size mismatch");
  }
  res.states.resize(n_gp);
  res.tangents.resize(n_gp);

  const std::vector<double> F_full = external_load(traction, gravity);
  std::vector<double> F_free(dm_.n_disp, 0.0);
  for (int v = 0; v < mesh_.n_vertices(); ++v) {
    for (int i = 0; i < 3; ++i) {
      const int dof = dm_.disp_dof[v][i];
      if (dof >= 0) F_free[dof] = F_full[3 * v + i];
    }
  }
  double f_norm = 0.0;
  for (double v : F_free) f_norm += v * v;
  f_norm = std::sqrt(f_norm);

  std::vector<SymTensor2> sigma_total(n_gp);
  const bool plastic_model = model_.plasticity.type != PlasticityType::none;
  double scale = 0.0;
  double res_norm = 0.0;
  double gross_norm = 0.0;

  for (int iter = 0; iter <= max_newton; ++iter) {
    const std::vector<double> u_full = expand_displacement(mesh_, dm_, res.u);
    for (int c = 0; c < mesh_.n_cells(); ++c) {
      const SymTensor2 pore = model_.alpha * p_frozen[c];
      for (int q = 0; q < kGaussPerCell; ++q) {
        const int g = kGaussPerCell * c + q;
        const SymTensor2 eps = strain_at_gauss(mesh_, geo_, c, q, u_full);
        ReturnMapResult rm = return_map(eps, states_n[g], model_);
        sigma_total[g] = rm.sigma - pore;
        res.states[g] = rm.state;
        res.states[g].sigma = sigma_total[g];
        res.tangents[g] = rm.tangent;
      }
    }
    std::vector<double> abs_rows;
    const std::vector<double> r_int =
        internal_forces(mesh_, dm_, geo_, sigma_total, false, &abs_rows);
    std::vector<double> rhs(dm_.n_disp);
    double rn = 0.0, gross = 0.0;
    for (int k = 0; k < dm_.n_disp; ++k) {
      rhs[k] = F_free[k] - r_int[k];
      rn += rhs[k] * rhs[k];
      gross += abs_rows[k] * abs_rows[k];
    }
    rn = std::sqrt(rn);
    if (iter == 0) scale = std::max(f_norm, rn);
    res_norm = rn;
    gross_norm = std::sqrt(gross);
    // Large self-equilibrated stresses (frozen pore pressure against full
    // rollers) leave a residual that is pure integration roundoff; below the
    // cancellation floor of the gross force magnitude there is nothing left
    // to converge.
    const double floor = 64.0 * std::numeric_limits<double>::epsilon() * std::sqrt(gross);
    if (scale == 0.0 || rn <= std::max(tol_newton * scale, floor)) {
      res.converged = true;
      break;
    }
    if (iter == max_newton) break;

    std::vector<double> du;
    if (plastic_model) {
      LdltFactorization fact(assemble_tangent(res.tangents));
      ++factorizations_;
      du = fact.solve(rhs);
    } else {
      du = elastic_fact_->solve(rhs);
    }
    for (int k = 0; k < dm_.n_disp; ++k) res.u[k] += du[k];
    ++res.newton_iters;
  }

  // A warm start that is already converged makes the net residual its own
  // scale; the gross force magnitude is the honest cancellation reference.
  const double res_ref = std::max(scale, gross_norm);
  res.residual = res_ref > 0.0 ? res_norm / res_ref : 0.0;
  if (!res.converged) {
    char msg[160];
    std::snprintf(msg, sizeof msg,
                  "mechanics Newton stalled: residual %.3e of scale %.3e after %d iterations",
                  res_norm, scale, res.newton_iters);
    throw Error(msg);
  }

  const std::vector<double> r_full = internal_forces(mesh_, dm_, geo_, sigma_total, true);
  res.reactions.assign(3 * mesh_.n_vertices(), 0.0);
  for (int v = 0; v < mesh_.n_vertices(); ++v) {
    for (int i = 0; i < 3; ++i) {
      if (dm_.disp_dof[v][i] < 0) res.reactions[3 * v + i] = r_full[3 * v + i] - F_full[3 * v + i];
    }
  }
  return res;
}

}  // namespace porofs
