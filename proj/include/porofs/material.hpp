#pragma once

#include <vector>

#include "porofs/common.hpp"
#include "porofs/tensor.hpp"

namespace porofs {

enum class PlasticityType { none, von_mises, drucker_prager };

/// Plasticity settings. von Mises: f = |dev s| - sqrt(2/3)(yield_stress + H*a),
/// deviatoric associated flow. Drucker-Prager: f = |dev s| + friction*tr(s)/3
/// - (cohesion + H*a), associated flow with dilatancy tr(de_p) = dgamma*friction.
/// beta_p scales plastic porosity: phi_p = beta_p * tr(eps_p).
struct Plasticity {
  PlasticityType type = PlasticityType::none;
  double yield_stress = 0.0;  // Pa, von Mises
  double cohesion = 0.0;      // Pa, Drucker-Prager
  double friction = 0.0;      // dimensionless pressure sensitivity, Drucker-Prager
  double hardening = 0.0;     // Pa, linear isotropic
  double beta_p = 1.0;
};

/// Immutable material description. Stress sign convention: tension positive,
/// pore pressure enters total stress as -alpha*p.
struct MaterialModel {
  Tensor4 D;             // drained stiffness, Mandel 6x6, SPD (Pa)
  SymTensor2 alpha;      // Biot effective-stress tensor
  double M = 0.0;        // Biot modulus (Pa, > 0)
  Mat3 K_perm{};         // absolute permeability (m^2), SPD
  double mu = 0.0;       // fluid viscosity (Pa*s, > 0)
  double c_fluid = 0.0;  // fluid compressibility (1/Pa, >= 0)
  double rho0 = 0.0;     // reference fluid density (kg/m^3)
  double rho_r = 0.0;    // solid grain density (kg/m^3)
  double phi0 = 0.0;     // reference porosity, in (0,1)
  Vec3 gravity{0.0, 0.0, 0.0};  // m/s^2
  Plasticity plasticity;

  /// Mobility kappa = K_perm / mu.
  Mat3 kappa() const;
  /// Inverse mobility; throws SingularMatrix if kappa is numerically singular.
  Mat3 kappa_inv() const;
  /// Throws InvalidArgument on any violated invariant (D or K_perm not SPD,
  /// M <= 0, mu <= 0, phi0 outside (0,1), negative plasticity moduli).
  void validate() const;
};

/// Per-quadrature-point history. With plasticity none, eps_p and phi_p stay
/// exactly zero. sigma holds the committed total stress (the return map fills
/// it with effective stress; mechanics assembly overwrites with total).
struct GaussPointState {
  SymTensor2 eps_p;
  double phi_p = 0.0;
  SymTensor2 sigma;
  double accumulated_plastic = 0.0;
};

/// Cell-major quadrature-point field: entry cell*kGaussPerCell + q.
using GaussField = std::vector<GaussPointState>;

/// Stiffness builders. Orthotropic constants are engineering moduli; the
/// resulting compliance is symmetrized and inverted, and must come out SPD.
Tensor4 isotropic_stiffness(double E, double nu);
Tensor4 orthotropic_stiffness(double E1, double E2, double E3, double nu23, double nu13,
                              double nu12, double G23, double G13, double G12);

/// C = 1/M + alpha : D^{-1} alpha, with the elastic stiffness. C > 0.
double storage_constant(const MaterialModel& model);

/// B = (3/C) * D_inv : alpha. Symmetric; zero iff alpha is zero.
SymTensor2 skempton_tensor(const MaterialModel& model, const Tensor4& D_inv, double C);

/// Total stress sigma = D(eps - eps_p) - alpha*p.
SymTensor2 stress_from_strain(const SymTensor2& eps, const SymTensor2& eps_p, double p,
                              const MaterialModel& model);

/// eps = tangent_inv : sigma + (C/3) * B * p. With the elastic compliance this
/// inverts stress_from_strain at eps_p = 0.
SymTensor2 strain_from_stress(const SymTensor2& sigma, double p, const Tensor4& tangent_inv,
                              double C, const SymTensor2& B);

/// Fluid content zeta = C*p + (C/3) B:sigma + phi_p. Equals p/M + alpha:eps_e
/// + phi_p whenever (sigma, p) are constitutively consistent.
double fluid_content(double p, const SymTensor2& sigma, double phi_p, double C,
                     const SymTensor2& B);

struct ReturnMapResult {
  SymTensor2 sigma;   // effective stress D(eps_trial - eps_p_new)
  Tensor4 tangent;    // elastoplastic tangent; equals D exactly on elastic steps
  GaussPointState state;
  bool plastic = false;
  int newton_iters = 0;
};

/// Closest-point return map. Takes the trial total strain and the committed
/// state, returns the effective stress, the tangent
///   D_ep = D - (D N)(N D) / (N : D N + Hbar)
/// with N the flow direction at the returned stress, and the updated state
/// (eps_p, phi_p = beta_p*tr(eps_p), hardening variable). Pure function: no
/// shared mutation, safe to call concurrently. Throws Error if the Newton
/// loop fails to converge or a Drucker-Prager return collapses the deviator.
ReturnMapResult return_map(const SymTensor2& eps_trial, const GaussPointState& state_old,
                           const MaterialModel& model);

}  // namespace porofs
