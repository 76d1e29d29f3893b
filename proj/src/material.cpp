#include "porofs/material.hpp"

#include <cmath>
#include <string>

namespace porofs {

namespace {

// Positive-definite probe via Cholesky pivots; assumes symmetry was checked.
bool positive_definite6(const Tensor4& A) {
  double L[6][6] = {};
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = A(i, j);
      for (int k = 0; k < j; ++k) s -= L[i][k] * L[j][k];
      if (i == j) {
        if (s <= 0.0) return false;
        L[i][i] = std::sqrt(s);
      } else {
        L[i][j] = s / L[j][j];
      }
    }
  }
  return true;
}

bool positive_definite3(const Mat3& A) {
  const double m1 = A[0][0];
  const double m2 = A[0][0] * A[1][1] - A[0][1] * A[1][0];
  return m1 > 0.0 && m2 > 0.0 && det3(A) > 0.0;
}

bool symmetric3(const Mat3& A) {
  double scale = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) scale = std::max(scale, std::abs(A[i][j]));
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j)
      if (std::abs(A[i][j] - A[j][i]) > 1e-12 * scale) return false;
  return true;
}

// Dense solve with partial pivoting for the small return-map system.
void solve_dense7(double A[7][7], double b[7]) {
  int perm[7];
  for (int i = 0; i < 7; ++i) perm[i] = i;
  for (int col = 0; col < 7; ++col) {
    int piv = col;
    for (int r = col + 1; r < 7; ++r)
      if (std::abs(A[perm[r]][col]) > std::abs(A[perm[piv]][col])) piv = r;
    std::swap(perm[col], perm[piv]);
    const double d = A[perm[col]][col];
    if (d == 0.0) throw SingularMatrix("return_map: singular Newton system");
    for (int r = col + 1; r < 7; ++r) {
      const double f = A[perm[r]][col] / d;
      if (f == 0.0) continue;
      for (int c = col; c < 7; ++c) A[perm[r]][c] -= f * A[perm[col]][c];
      b[perm[r]] -= f * b[perm[col]];
    }
  }
  double x[7];
  for (int row = 6; row >= 0; --row) {
    double s = b[perm[row]];
    for (int c = row + 1; c < 7; ++c) s -= A[perm[row]][c] * x[c];
    x[row] = s / A[perm[row]][row];
  }
  for (int i = 0; i < 7; ++i) b[i] = x[i];
}

}  // namespace

Mat3 MaterialModel::kappa() const {
  Mat3 k{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) k[i][j] = K_perm[i][j] / mu;
  return k;
}

Mat3 MaterialModel::kappa_inv() const {
  const Mat3 k = kappa();
  const double d = det3(k);
  if (d <= 0.0) throw SingularMatrix("MaterialModel: mobility tensor is not invertible");
  return inv3(k, d);
}

void MaterialModel::validate() const {
  double d_scale = 0.0;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) d_scale = std::max(d_scale, std::abs(D(i, j)));
  if (!D.is_major_symmetric(1e-12 * d_scale))
    throw InvalidArgument("MaterialModel: stiffness is not symmetric");
  if (!positive_definite6(D))
    throw InvalidArgument("MaterialModel: stiffness is not positive definite");
  if (!(M > 0.0)) throw InvalidArgument("MaterialModel: Biot modulus must be positive");
  if (!(mu > 0.0)) throw InvalidArgument("MaterialModel: viscosity must be positive");
  if (!(phi0 > 0.0 && phi0 < 1.0))
    throw InvalidArgument("MaterialModel: porosity must lie in (0,1)");
  if (c_fluid < 0.0)
    throw InvalidArgument("MaterialModel: fluid compressibility must be nonnegative");
  if (!symmetric3(K_perm) || !positive_definite3(K_perm))
    throw InvalidArgument("MaterialModel: permeability must be symmetric positive definite");
  const Plasticity& pl = plasticity;
  if (pl.type != PlasticityType::none) {
    if (pl.hardening < 0.0)
      throw InvalidArgument("MaterialModel: hardening modulus must be nonnegative");
    if (pl.beta_p < 0.0) throw InvalidArgument("MaterialModel: beta_p must be nonnegative");
  }
  if (pl.type == PlasticityType::von_mises && !(pl.yield_stress > 0.0))
    throw InvalidArgument("MaterialModel: yield stress must be positive");
  if (pl.type == PlasticityType::drucker_prager) {
    if (!(pl.cohesion > 0.0)) throw InvalidArgument("MaterialModel: cohesion must be positive");
    if (pl.friction < 0.0)
      throw InvalidArgument("MaterialModel: friction coefficient must be nonnegative");
  }
}

Tensor4 isotropic_stiffness(double E, double nu) {
  if (!(E > 0.0) || nu <= -1.0 || nu >= 0.5)
    throw InvalidArgument("isotropic_stiffness: need E > 0 and nu in (-1, 0.5)");
  const double K = E / (3.0 * (1.0 - 2.0 * nu));
  const double G = E / (2.0 * (1.0 + nu));
  return Tensor4::vol_projector() * (3.0 * K) + Tensor4::dev_projector() * (2.0 * G);
}

Tensor4 orthotropic_stiffness(double E1, double E2, double E3, double nu23, double nu13,
                              double nu12, double G23, double G13, double G12) {
  if (!(E1 > 0.0 && E2 > 0.0 && E3 > 0.0 && G23 > 0.0 && G13 > 0.0 && G12 > 0.0))
    throw InvalidArgument("orthotropic_stiffness: moduli must be positive");
  Tensor4 S{};
  S(0, 0) = 1.0 / E1;
  S(1, 1) = 1.0 / E2;
  S(2, 2) = 1.0 / E3;
  S(0, 1) = S(1, 0) = -nu12 / E1;
  S(0, 2) = S(2, 0) = -nu13 / E1;
  S(1, 2) = S(2, 1) = -nu23 / E2;
  // Mandel shear compliance: tensor shear strain = stress/(2G).
  S(3, 3) = 1.0 / (2.0 * G23);
  S(4, 4) = 1.0 / (2.0 * G13);
  S(5, 5) = 1.0 / (2.0 * G12);
  // The compliance is symmetric by construction, so the inverse is too;
  // averaging strips the factorization roundoff.
  Tensor4 D = invert6(S);
  for (int i = 0; i < 6; ++i)
    for (int j = i + 1; j < 6; ++j) D(i, j) = D(j, i) = 0.5 * (D(i, j) + D(j, i));
  if (!positive_definite6(D))
    throw InvalidArgument("orthotropic_stiffness: constants give a non-SPD stiffness");
  return D;
}

double storage_constant(const MaterialModel& model) {
  const Tensor4 D_inv = invert6(model.D);
  return 1.0 / model.M + ddot(model.alpha, apply4(D_inv, model.alpha));
}

SymTensor2 skempton_tensor(const MaterialModel& model, const Tensor4& D_inv, double C) {
  if (!(C > 0.0)) throw InvalidArgument("skempton_tensor: storage constant must be positive");
  return apply4(D_inv, model.alpha) * (3.0 / C);
}

SymTensor2 stress_from_strain(const SymTensor2& eps, const SymTensor2& eps_p, double p,
                              const MaterialModel& model) {
  return apply4(model.D, eps - eps_p) - model.alpha * p;
}

SymTensor2 strain_from_stress(const SymTensor2& sigma, double p, const Tensor4& tangent_inv,
                              double C, const SymTensor2& B) {
  return apply4(tangent_inv, sigma) + B * (C / 3.0 * p);
}

double fluid_content(double p, const SymTensor2& sigma, double phi_p, double C,
                     const SymTensor2& B) {
  return C * p + C / 3.0 * ddot(B, sigma) + phi_p;
}

ReturnMapResult return_map(const SymTensor2& eps_trial, const GaussPointState& state_old,
                           const MaterialModel& model) {
  ReturnMapResult r;
  r.state = state_old;
  const SymTensor2 sig_trial = apply4(model.D, eps_trial - state_old.eps_p);
  const Plasticity& pl = model.plasticity;

  if (pl.type == PlasticityType::none) {
    r.sigma = sig_trial;
    r.tangent = model.D;
    r.state.sigma = sig_trial;
    return r;
  }

  const bool dp = pl.type == PlasticityType::drucker_prager;
  const double k_hard = dp ? 1.0 : std::sqrt(2.0 / 3.0);  // d(hardening var)/d(gamma)
  const double Hbar = k_hard * k_hard * pl.hardening;
  const double stress_ref = dp ? pl.cohesion : pl.yield_stress;
  const double dev_trial_norm = sig_trial.deviator().norm();
  const double f_ref = std::max(stress_ref, dev_trial_norm);

  auto yield = [&](const SymTensor2& sig, double a) {
    const double dev = sig.deviator().norm();
    if (dp) return dev + pl.friction * sig.trace() / 3.0 - (pl.cohesion + pl.hardening * a);
    return dev - std::sqrt(2.0 / 3.0) * (pl.yield_stress + pl.hardening * a);
  };

  const double f_trial = yield(sig_trial, state_old.accumulated_plastic);
  if (f_trial <= 1e-11 * f_ref) {
    r.sigma = sig_trial;
    r.tangent = model.D;
    r.state.sigma = sig_trial;
    return r;
  }

  // Flow direction N = dev/|dev| (+ friction/3 * I for Drucker-Prager).
  auto flow_dir = [&](const SymTensor2& sig, double& dev_norm) {
    const SymTensor2 dev = sig.deviator();
    dev_norm = dev.norm();
    if (dev_norm <= 1e-14 * f_ref)
      throw Error("return_map: deviatoric direction vanished (apex return not supported)");
    SymTensor2 N = dev * (1.0 / dev_norm);
    if (dp) N += SymTensor2::identity() * (pl.friction / 3.0);
    return N;
  };

  // Closest-point projection: unknowns (delta eps_p, dgamma), residuals
  //   R_e = deps_p - dgamma*N(sig),  R_f = f(sig, a_old + k*dgamma),
  // with sig = sig_trial - D*deps_p.
  double dev_norm = 0.0;
  SymTensor2 N = flow_dir(sig_trial, dev_norm);
  const SymTensor2 DN0 = apply4(model.D, N);
  double dgamma = f_trial / (ddot(N, DN0) + Hbar);
  SymTensor2 deps_p = N * dgamma;

  const double eps_ref = std::max(eps_trial.norm(), 1e-30);
  SymTensor2 sig;
  bool converged = false;
  int it = 0;
  for (; it < 60; ++it) {
    sig = sig_trial - apply4(model.D, deps_p);
    N = flow_dir(sig, dev_norm);
    const SymTensor2 R_e = deps_p - N * dgamma;
    const double R_f = yield(sig, state_old.accumulated_plastic + k_hard * dgamma);
    if (R_e.norm() <= 1e-12 * std::max(eps_ref, deps_p.norm()) &&
        std::abs(R_f) <= 1e-12 * f_ref) {
      converged = true;
      break;
    }

    const SymTensor2 nhat = sig.deviator() * (1.0 / dev_norm);
    const Tensor4 dNds = (Tensor4::dev_projector() - dyad(nhat, nhat)) * (1.0 / dev_norm);
    const Tensor4 J_ee = Tensor4::identity() + compose(dNds, model.D) * dgamma;
    const SymTensor2 ND = apply4(model.D, N);  // D symmetric: N:D = D:N

    double A[7][7];
    double rhs[7];
    for (int i = 0; i < 6; ++i) {
      for (int j = 0; j < 6; ++j) A[i][j] = J_ee(i, j);
      A[i][6] = -N.mandel()[i];
      A[6][i] = -ND.mandel()[i];
      rhs[i] = -R_e.mandel()[i];
    }
    A[6][6] = -Hbar;
    rhs[6] = -R_f;
    solve_dense7(A, rhs);
    for (int i = 0; i < 6; ++i) deps_p[i] += rhs[i];
    dgamma += rhs[6];
  }
  if (!converged) throw Error("return_map: Newton did not converge in 60 iterations");
  if (dgamma <= 0.0) throw Error("return_map: nonpositive plastic multiplier at convergence");

  // Deviatoric flow is exactly traceless; strip Newton roundoff from the
  // increment and keep plastic porosity bitwise untouched for von Mises
  // (the deviator projection itself still rounds its trace).
  if (!dp) {
    deps_p = deps_p.deviator();
    sig = sig_trial - apply4(model.D, deps_p);
    N = flow_dir(sig, dev_norm);
  }

  r.state.eps_p = state_old.eps_p + deps_p;
  r.state.accumulated_plastic = state_old.accumulated_plastic + k_hard * dgamma;
  r.state.phi_p = dp ? pl.beta_p * r.state.eps_p.trace() : state_old.phi_p;
  r.state.sigma = sig;
  r.sigma = sig;
  r.plastic = true;
  r.newton_iters = it;

  // Tangent consistent with the projection: the curvature of the flow
  // direction enters through the modified stiffness, which keeps the global
  // Newton iteration quadratic.
  const SymTensor2 nhat_c = sig.deviator() * (1.0 / dev_norm);
  const Tensor4 dNds_c = (Tensor4::dev_projector() - dyad(nhat_c, nhat_c)) * (1.0 / dev_norm);
  Tensor4 Dtil = invert6(invert6(model.D) + dNds_c * dgamma);
  for (int i = 0; i < 6; ++i) {
    for (int j = i + 1; j < 6; ++j) {
      const double s = 0.5 * (Dtil(i, j) + Dtil(j, i));
      Dtil(i, j) = Dtil(j, i) = s;  // inversion roundoff must not break symmetry
    }
  }
  const SymTensor2 DN = apply4(Dtil, N);
  r.tangent = Dtil - dyad(DN, DN) * (1.0 / (ddot(N, DN) + Hbar));
  return r;
}

}  // namespace porofs
