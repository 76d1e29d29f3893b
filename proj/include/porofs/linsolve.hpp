#pragma once

#include <memory>
#include <vector>

#include "porofs/common.hpp"

namespace porofs {

/// Compressed-row sparse matrix with a triplet accumulation phase.
/// add() during assembly, then compress() exactly once; duplicate entries
/// are summed, column indices come out sorted and unique per row.
class SparseMatrix {
 public:
  SparseMatrix(int rows, int cols);

  void add(int row, int col, double value);
  void compress();
  bool compressed() const { return compressed_; }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int nnz() const { return static_cast<int>(val_.size()); }

  void matvec(const double* x, double* y) const;
  std::vector<double> matvec(const std::vector<double>& x) const;

  double max_abs() const;
  /// max |A(i,j) - A(j,i)| over stored entries; square matrices only.
  double symmetry_gap() const;

  const std::vector<int>& row_ptr() const { return rowp_; }
  const std::vector<int>& col_ind() const { return col_; }
  const std::vector<double>& values() const { return val_; }

 private:
  int rows_, cols_;
  bool compressed_ = false;
  std::vector<int> trip_r_, trip_c_;
  std::vector<double> trip_v_;
  std::vector<int> rowp_, col_;
  std::vector<double> val_;
};

enum class Precond { jacobi, none };

struct CgResult {
  std::vector<double> x;
  int iterations = 0;
  double residual = 0.0;  // final ||Ax-b|| / ||b||
};

/// Preconditioned conjugate gradients for SPD systems. Throws Error on
/// negative curvature (matrix not positive definite) and on hitting max_iter
/// without reaching tol; throws InvalidArgument on shape mismatch or a
/// nonpositive diagonal under the Jacobi preconditioner.
CgResult cg_solve(const SparseMatrix& A, const std::vector<double>& b, double tol, int max_iter,
                  Precond precond = Precond::jacobi);

/// Direct factorization of a symmetric (possibly indefinite) matrix, reusable
/// across right-hand sides. Every solve is residual-checked: if the factored
/// solve cannot reach 1e-10 relative residual the factorization falls back to
/// a pivoted LU pass, and SingularMatrix is thrown if that fails too.
class LdltFactorization {
 public:
  explicit LdltFactorization(const SparseMatrix& A);
  ~LdltFactorization();
  LdltFactorization(LdltFactorization&&) noexcept;
  LdltFactorization& operator=(LdltFactorization&&) noexcept;

  std::vector<double> solve(const std::vector<double>& b) const;
  /// Relative residual of the most recent solve.
  double last_residual() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// One-shot convenience wrapper around LdltFactorization.
std::vector<double> ldlt_solve(const SparseMatrix& A, const std::vector<double>& b);

}  // namespace porofs
