#pragma once

#include <functional>
#include <vector>

#include "porofs/linsolve.hpp"
#include "porofs/material.hpp"
#include "porofs/mesh.hpp"

namespace porofs {

/// Traction callback on mech-Neumann boundary faces (Pa), evaluated at face
/// quadrature points. A default-constructed function means traction-free.
using TractionField = std::function<Vec3(const Vec3&, Side)>;

/// Symmetric strain sampling: the Mandel strain at one quadrature point due
/// to a unit displacement of node a in direction i. The skew part of the
/// displacement gradient never enters any assembled form.
void strain_basis(const CellGeometry::Point& pt, int a, int i, double out[6]);

/// eps(u) at a cached quadrature point; u_full has 3 entries per vertex.
SymTensor2 strain_at_gauss(const HexMesh& mesh, const std::vector<CellGeometry>& geo, int cell,
                           int q, const std::vector<double>& u_full);

/// eps(u) at arbitrary reference coordinates of a cell.
SymTensor2 strain_at(const HexMesh& mesh, int cell, const Vec3& xi,
                     const std::vector<double>& u_full);

/// Scatter free-dof displacements into a 3*n_vertices vector (constrained
/// components are identically zero: rollers on axis-aligned sides).
std::vector<double> expand_displacement(const HexMesh& mesh, const DofMap& dm,
                                        const std::vector<double>& u_free);

/// Applies the transpose of the strain-sampling operator to a per-Gauss-point
/// stress field: r[dof] = sum_E sum_q wdetJ sigma_q : eps(basis_dof). With
/// full=false the result has one entry per free dof; with full=true it has
/// 3*n_vertices entries including constrained rows (used for reactions).
/// abs_rows, when given, receives the same accumulation with every
/// contribution taken in absolute value: the gross force magnitude whose
/// machine epsilon is the smallest meaningful residual (cancellation floor).
std::vector<double> internal_forces(const HexMesh& mesh, const DofMap& dm,
                                    const std::vector<CellGeometry>& geo,
                                    const std::vector<SymTensor2>& sigma, bool full = false,
                                    std::vector<double>* abs_rows = nullptr);

struct MechResult {
  std::vector<double> u;          // free dofs
  GaussField states;              // committed candidate: eps_p, phi_p, total sigma
  std::vector<Tensor4> tangents;  // elastoplastic tangent per quadrature point
  int newton_iters = 0;
  double residual = 0.0;          // final relative Newton residual
  bool converged = false;
  std::vector<double> reactions;  // 3*n_vertices, nonzero on constrained components
};

/// Quasi-static momentum balance with the pore pressure frozen: find u with
///   (sigma(eps(u)) : eps(q)) = (t, q) on mech-Neumann + (f, q)
/// where sigma is the return-mapped effective stress minus alpha*p. Newton
/// iteration on the residual; the elastic tangent factorization is built once
/// and reused whenever plasticity is off (the operator never changes then).
class MechSolver {
 public:
  MechSolver(const HexMesh& mesh, const DofMap& dm, const std::vector<CellGeometry>& geo,
             const std::vector<FaceGeometry>& fgeo, const MaterialModel& model);

  /// p_frozen: just-computed cell pressures; states_n: committed states of
  /// time level n (plastic history restarts from these every call);
  /// u0: warm-start free-dof displacements (nullptr = zero).
  MechResult solve(const std::vector<double>& p_frozen, const GaussField& states_n,
                   const TractionField& traction, bool gravity,
                   const std::vector<double>* u0 = nullptr, double tol_newton = 1e-10,
                   int max_newton = 25) const;

  int factorization_count() const { return factorizations_; }
  int n_free() const { return dm_.n_disp; }

 private:
  SparseMatrix assemble_tangent(const std::vector<Tensor4>& tangents) const;
  std::vector<double> external_load(const TractionField& traction, bool gravity) const;

  const HexMesh& mesh_;
  const DofMap& dm_;
  const std::vector<CellGeometry>& geo_;
  const std::vector<FaceGeometry>& fgeo_;
  const MaterialModel& model_;
  std::unique_ptr<LdltFactorization> elastic_fact_;
  mutable int factorizations_ = 0;
};

}  // namespace porofs
