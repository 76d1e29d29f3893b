#include "porofs/linsolve.hpp"

#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace porofs {

namespace {

double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double dot_vec(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

SparseMatrix::SparseMatrix(int rows, int cols) : rows_(rows), cols_(cols) {
  if (rows < 0 || cols < 0) throw InvalidArgument("SparseMatrix: negative dimension");
}

void SparseMatrix::add(int row, int col, double value) {
  if (compressed_) throw Error("SparseMatrix: add() after compress()");
  if (row < 0 || row >= rows_ || col < 0 || col >= cols_)
    throw InvalidArgument("SparseMatrix: entry out of range");
  trip_r_.push_back(row);
  trip_c_.push_back(col);
  trip_v_.push_back(value);
}

void SparseMatrix::compress() {
  if (compressed_) throw Error("SparseMatrix: compress() called twice");
  const size_t nt = trip_v_.size();
  std::vector<int> order(nt);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return trip_r_[a] != trip_r_[b] ? trip_r_[a] < trip_r_[b] : trip_c_[a] < trip_c_[b];
  });

  rowp_.assign(rows_ + 1, 0);
  col_.reserve(nt);
  val_.reserve(nt);
  int prev_r = -1, prev_c = -1;
  for (size_t n = 0; n < nt; ++n) {
    const int r = trip_r_[order[n]], c = trip_c_[order[n]];
    const double v = trip_v_[order[n]];
    if (r == prev_r && c == prev_c) {
      val_.back() += v;  // duplicates are adjacent after the sort
    } else {
      col_.push_back(c);
      val_.push_back(v);
      ++rowp_[r + 1];
      prev_r = r;
      prev_c = c;
    }
  }
  for (int r = 0; r < rows_; ++r) rowp_[r + 1] += rowp_[r];
  trip_r_.clear();
  trip_r_.shrink_to_fit();
  trip_c_.clear();
  trip_c_.shrink_to_fit();
  trip_v_.clear();
  trip_v_.shrink_to_fit();
  compressed_ = true;
}

void SparseMatrix::matvec(const double* x, double* y) const {
  if (!compressed_) throw Error("SparseMatrix: matvec before compress()");
  for (int r = 0; r < rows_; ++r) {
    double s = 0.0;
    for (int k = rowp_[r]; k < rowp_[r + 1]; ++k) s += val_[k] * x[col_[k]];
    y[r] = s;
  }
}

std::vector<double> SparseMatrix::matvec(const std::vector<double>& x) const {
  if (static_cast<int>(x.size()) != cols_)
    throw InvalidArgument("SparseMatrix: matvec size mismatch");
  std::vector<double> y(rows_);
  matvec(x.data(), y.data());
  return y;
}

double SparseMatrix::max_abs() const {
  double m = 0.0;
  for (double v : compressed_ ? val_ : trip_v_) m = std::max(m, std::abs(v));
  return m;
}

double SparseMatrix::symmetry_gap() const {
  if (!compressed_) throw Error("SparseMatrix: symmetry_gap before compress()");
  if (rows_ != cols_) throw InvalidArgument("SparseMatrix: symmetry_gap needs a square matrix");
  auto at = [&](int r, int c) {
    const auto lo = col_.begin() + rowp_[r];
    const auto hi = col_.begin() + rowp_[r + 1];
    const auto it = std::lower_bound(lo, hi, c);
    if (it == hi || *it != c) return 0.0;
    return val_[it - col_.begin()];
  };
  double gap = 0.0;
  for (int r = 0; r < rows_; ++r)
    for (int k = rowp_[r]; k < rowp_[r + 1]; ++k)
      gap = std::max(gap, std::abs(val_[k] - at(col_[k], r)));
  return gap;
}

CgResult cg_solve(const SparseMatrix& A, const std::vector<double>& b, double tol, int max_iter,
                  Precond precond) {
  if (A.rows() != A.cols() || A.rows() != static_cast<int>(b.size()))
    throw InvalidArgument("cg_solve: shape mismatch");
  const int n = A.rows();

  std::vector<double> inv_diag(n, 1.0);
  if (precond == Precond::jacobi) {
    const auto& rowp = A.row_ptr();
    const auto& col = A.col_ind();
    const auto& val = A.values();
    for (int r = 0; r < n; ++r) {
      double d = 0.0;
      for (int k = rowp[r]; k < rowp[r + 1]; ++k)
        if (col[k] == r) d = val[k];
      if (d <= 0.0)
        throw InvalidArgument("cg_solve: nonpositive diagonal entry; matrix is not SPD");
      inv_diag[r] = 1.0 / d;
    }
  }

  CgResult res;
  res.x.assign(n, 0.0);
  const double bnorm = norm2(b);
  if (bnorm == 0.0) return res;

  std::vector<double> r = b, z(n), p(n), Ap(n);
  for (int i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
  p = z;
  double rz = dot_vec(r, z);

  for (int it = 0; it < max_iter; ++it) {
    res.residual = norm2(r) / bnorm;
    if (res.residual <= tol) return res;

    A.matvec(p.data(), Ap.data());
    const double pAp = dot_vec(p, Ap);
    if (pAp <= 0.0)
      throw Error("cg_solve: negative curvature encountered; matrix is not positive definite");
    const double alpha = rz / pAp;
    for (int i = 0; i < n; ++i) {
      res.x[i] += alpha * p[i];
      r[i] -= alpha * Ap[i];
    }
    ++res.iterations;

    for (int i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    const double rz_new = dot_vec(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  res.residual = norm2(r) / bnorm;
  if (res.residual <= tol) return res;
  throw Error("cg_solve: no convergence after " + std::to_string(max_iter) +
              " iterations (relative residual " + std::to_string(res.residual) + ")");
}

struct LdltFactorization::Impl {
  using SpMat = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

  SpMat A;        // symmetrically equilibrated copy
  Eigen::VectorXd scale;  // x = scale .* y where A_eq y = scale .* b
  // Natural ordering keeps the caller's unknown ordering, which the flow
  // saddle system relies on for pivot existence (SPD block first).
  Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::NaturalOrdering<int>> ldlt;
  Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
  bool ldlt_ok = false;
  bool lu_ok = false;
  mutable double last_residual = 0.0;

  explicit Impl(const SparseMatrix& M) {
    if (M.rows() != M.cols()) throw InvalidArgument("ldlt_solve: matrix must be square");
    if (!M.compressed()) throw Error("ldlt_solve: matrix must be compressed");
    const double gap = M.symmetry_gap();
    if (gap > 1e-12 * std::max(M.max_abs(), 1e-300))
      throw InvalidArgument("ldlt_solve: matrix is not symmetric");

    using RowMat = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;
    A = Eigen::Map<const RowMat>(M.rows(), M.cols(), M.nnz(), M.row_ptr().data(),
                                 M.col_ind().data(), M.values().data());

    // Symmetric Jacobi equilibration. Saddle systems mixing flux and pressure
    // unknowns can span twenty orders of magnitude between blocks; scaling by
    // the square root of each row's max keeps the factorization and the
    // residual test in a well-conditioned regime. Solutions are mapped back,
    // so callers see physical units.
    scale.resize(A.rows());
    for (int i = 0; i < A.rows(); ++i) scale[i] = 1.0;
    const auto& rp = M.row_ptr();
    const auto& val = M.values();
    for (int i = 0; i < M.rows(); ++i) {
      double m = 0.0;
      for (int k = rp[i]; k < rp[i + 1]; ++k) m = std::max(m, std::fabs(val[k]));
      if (m > 0.0) scale[i] = 1.0 / std::sqrt(m);
    }
    for (int j = 0; j < A.outerSize(); ++j)
      for (SpMat::InnerIterator it(A, j); it; ++it)
        it.valueRef() *= scale[it.row()] * scale[it.col()];

    ldlt.compute(A);
    ldlt_ok = ldlt.info() == Eigen::Success;
    if (!ldlt_ok) ensure_lu();
  }

  void ensure_lu() {
    if (lu_ok) return;
    lu.analyzePattern(A);
    lu.factorize(A);
    if (lu.info() != Eigen::Success)
      throw SingularMatrix("ldlt_solve: factorization failed (matrix singular to working precision)");
    lu_ok = true;
  }
};

LdltFactorization::LdltFactorization(const SparseMatrix& A) : impl_(new Impl(A)) {}
LdltFactorization::~LdltFactorization() = default;
LdltFactorization::LdltFactorization(LdltFactorization&&) noexcept = default;
LdltFactorization& LdltFactorization::operator=(LdltFactorization&&) noexcept = default;

std::vector<double> LdltFactorization::solve(const std::vector<double>& b) const {
  if (static_cast<int>(b.size()) != impl_->A.rows())
    throw InvalidArgument("ldlt_solve: right-hand side size mismatch");
  const Eigen::Map<const Eigen::VectorXd> bv(b.data(), b.size());
  const Eigen::VectorXd beq = impl_->scale.cwiseProduct(bv);
  const double bnorm = std::max(beq.norm(), 1e-300);

  auto residual_of = [&](const Eigen::VectorXd& y) {
    return (impl_->A * y - beq).norm() / bnorm;
  };
  auto unscale = [&](const Eigen::VectorXd& y) {
    const Eigen::VectorXd x = impl_->scale.cwiseProduct(y);
    return std::vector<double>(x.data(), x.data() + x.size());
  };

  Eigen::VectorXd y;
  if (impl_->ldlt_ok) {
    y = impl_->ldlt.solve(beq);
    // One step of iterative refinement costs a matvec and a substitution and
    // typically buys several digits on saddle systems.
    y += impl_->ldlt.solve(beq - impl_->A * y);
    impl_->last_residual = residual_of(y);
    if (impl_->last_residual <= 1e-10) return unscale(y);
  }
  impl_->ensure_lu();
  y = impl_->lu.solve(beq);
  y += impl_->lu.solve(beq - impl_->A * y);
  impl_->last_residual = residual_of(y);
  if (impl_->last_residual > 1e-10)
    throw SingularMatrix("ldlt_solve: relative residual " +
                         std::to_string(impl_->last_residual) +
                         " exceeds 1e-10; matrix is singular or severely ill-conditioned");
  return unscale(y);
}

double LdltFactorization::last_residual() const { return impl_->last_residual; }

std::vector<double> ldlt_solve(const SparseMatrix& A, const std::vector<double>& b) {
  return LdltFactorization(A).solve(b);
}

}  // namespace porofs
