#pragma once

#include <functional>
#include <vector>

#include "porofs/linsolve.hpp"
#include "porofs/material.hpp"
#include "porofs/mesh.hpp"

namespace porofs {

/// Nullable spatial callback; a default-constructed function means zero.
using ScalarField = std::function<double(const Vec3&)>;

/// Mixed discretization of the flow subproblem: cellwise-constant pressures
/// and one normal-flux unknown per face (average flux density, oriented along
/// the owner-outward face normal). Face basis functions are Piola-mapped
/// reference fields, so each cell sees exactly its own six faces and
/// integral(div basis_f) over a cell is the signed face area, exactly.
struct FlowSystem {
  SparseMatrix A_zz;              // (kappa^{-1} v_f, v_f'), free flux dofs
  SparseMatrix B_div;             // rows cells, cols fluxes; entries +-|F|
  std::vector<double> A_pp_diag;  // C |E_c| accumulation weights
  std::vector<double> rhs_z, rhs_p;
  double C = 0.0;
  double dt = 0.0;
};

/// Time-level-n data plus the lagged mechanics fields entering the rhs.
struct FlowInputs {
  const std::vector<double>* p_n = nullptr;  // pressures at time level n
  const GaussField* states_n = nullptr;      // sigma, phi_p at time level n
  const GaussField* states_lagged = nullptr; // previous coupling iterate (= states_n at m=1)
  ScalarField source;                        // q, evaluated at cell centers
  ScalarField dirichlet_pressure;            // g on flow-Dirichlet faces
  bool gravity = false;
};

/// Assembles the iterate-independent operators. The accumulation diagonal
/// uses the storage constant C of the elastic stiffness.
FlowSystem assemble_darcy(const HexMesh& mesh, const DofMap& dm,
                          const std::vector<CellGeometry>& geo, const MaterialModel& model,
                          double C, double dt);

/// Fills rhs_z / rhs_p for one coupling iteration:
///   pressure row: dt (q,1)_E + C (p^n,1)_E - (C/3)(B:(sigma_lag - sigma^n),1)_E
///                 - (phi_p_lag - phi_p^n, 1)_E
///   flux row:    -(g, v.n) on flow-Dirichlet faces + (rho0 gravity, v)
/// Throws InvalidArgument if a flow-Dirichlet face is present but no pressure
/// callback was supplied.
void assemble_flow_rhs(const HexMesh& mesh, const DofMap& dm,
                       const std::vector<CellGeometry>& geo,
                       const std::vector<FaceGeometry>& fgeo, const MaterialModel& model,
                       const SymTensor2& B, FlowSystem& sys, const FlowInputs& in);

struct FlowSolution {
  std::vector<double> p;  // per cell
  std::vector<double> z;  // per free flux dof
  double solver_residual = 0.0;
};

/// One-shot solve of the assembled saddle system
///   [ dt A_zz   -dt B^T ] [z]   [ dt rhs_z ]
///   [ -dt B     -A_pp   ] [p] = [ -rhs_p   ]
/// which is symmetric with an SPD leading block, so the natural (flux-first)
/// ordering factors without pivoting trouble.
FlowSolution solve_flow(const FlowSystem& sys);

/// Factors the saddle operator once and reuses it for every coupling
/// iteration and time step; only the right-hand side changes. The
/// factorization counter exists so callers can assert operator reuse.
class FlowSolver {
 public:
  FlowSolver(const HexMesh& mesh, const DofMap& dm, const std::vector<CellGeometry>& geo,
             const std::vector<FaceGeometry>& fgeo, const MaterialModel& model, double C,
             const SymTensor2& B, double dt);

  FlowSolution solve(const FlowInputs& in);

  const FlowSystem& system() const { return sys_; }
  int factorization_count() const { return factorizations_; }

 private:
  const HexMesh& mesh_;
  const DofMap& dm_;
  const std::vector<CellGeometry>& geo_;
  const std::vector<FaceGeometry>& fgeo_;
  const MaterialModel& model_;
  SymTensor2 B_;
  FlowSystem sys_;
  LdltFactorization fact_;
  int factorizations_ = 0;
};

/// Cellwise conservation defect of the unsplit mass balance,
///   integral_E (zeta^{n+1} - zeta^n) + dt integral_dE z.n - dt integral_E q,
/// evaluated with the converged (not lagged) stress field.
std::vector<double> local_mass_residual(const HexMesh& mesh, const DofMap& dm,
                                        const std::vector<CellGeometry>& geo, double C,
                                        const SymTensor2& B, double dt,
                                        const std::vector<double>& p_new,
                                        const GaussField& states_new,
                                        const std::vector<double>& p_old,
                                        const GaussField& states_old,
                                        const std::vector<double>& z, ScalarField source);

/// Piola-mapped basis of local face lf evaluated at cell Gauss point q;
/// sign flips the orientation to the global owner-outward convention.
Vec3 flux_basis_value(const CellGeometry::Point& pt, const Vec3& xi, int lf, double area,
                      int sign);

}  // namespace porofs
