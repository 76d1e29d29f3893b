#include "porofs/tensor.hpp"

#include <cmath>

namespace porofs {

double SymTensor2::norm() const { return std::sqrt(ddot(*this, *this)); }

SymTensor2 SymTensor2::operator+(const SymTensor2& o) const {
  SymTensor2 r;
  for (int i = 0; i < 6; ++i) r[i] = m_[static_cast<std::size_t>(i)] + o[i];
  return r;
}

SymTensor2 SymTensor2::operator-(const SymTensor2& o) const {
  SymTensor2 r;
  for (int i = 0; i < 6; ++i) r[i] = m_[static_cast<std::size_t>(i)] - o[i];
  return r;
}

SymTensor2 SymTensor2::operator*(double s) const {
  SymTensor2 r;
  for (int i = 0; i < 6; ++i) r[i] = m_[static_cast<std::size_t>(i)] * s;
  return r;
}

SymTensor2& SymTensor2::operator+=(const SymTensor2& o) {
  for (int i = 0; i < 6; ++i) m_[static_cast<std::size_t>(i)] += o[i];
  return *this;
}

Tensor4 Tensor4::identity() {
  Tensor4 r;
  for (int i = 0; i < 6; ++i) r(i, i) = 1.0;
  return r;
}

Tensor4 Tensor4::vol_projector() {
  return dyad(SymTensor2::identity(), SymTensor2::identity()) * (1.0 / 3.0);
}

Tensor4 Tensor4::dev_projector() { return identity() - vol_projector(); }

bool Tensor4::is_major_symmetric(double tol) const {
  for (int i = 0; i < 6; ++i)
    for (int j = i + 1; j < 6; ++j)
      if (std::abs((*this)(i, j) - (*this)(j, i)) > tol) return false;
  return true;
}

Tensor4 Tensor4::operator+(const Tensor4& o) const {
  Tensor4 r;
  for (int i = 0; i < 36; ++i)
    r.m_[static_cast<std::size_t>(i)] =
        m_[static_cast<std::size_t>(i)] + o.m_[static_cast<std::size_t>(i)];
  return r;
}

Tensor4 Tensor4::operator-(const Tensor4& o) const {
  Tensor4 r;
  for (int i = 0; i < 36; ++i)
    r.m_[static_cast<std::size_t>(i)] =
        m_[static_cast<std::size_t>(i)] - o.m_[static_cast<std::size_t>(i)];
  return r;
}

Tensor4 Tensor4::operator*(double s) const {
  Tensor4 r;
  for (int i = 0; i < 36; ++i) r.m_[static_cast<std::size_t>(i)] = m_[static_cast<std::size_t>(i)] * s;
  return r;
}

double ddot(const SymTensor2& a, const SymTensor2& b) {
  double s = 0.0;
  for (int i = 0; i < 6; ++i) s += a[i] * b[i];
  return s;
}

SymTensor2 apply4(const Tensor4& A, const SymTensor2& t) {
  SymTensor2 r;
  for (int i = 0; i < 6; ++i) {
    double s = 0.0;
    for (int j = 0; j < 6; ++j) s += A(i, j) * t[j];
    r[i] = s;
  }
  return r;
}

Tensor4 dyad(const SymTensor2& a, const SymTensor2& b) {
  Tensor4 r;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) r(i, j) = a[i] * b[j];
  return r;
}

Tensor4 compose(const Tensor4& a, const Tensor4& b) {
  Tensor4 r;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) {
      double s = 0.0;
      for (int k = 0; k < 6; ++k) s += a(i, k) * b(k, j);
      r(i, j) = s;
    }
  return r;
}

Tensor4 invert6(const Tensor4& a) {
  // Gauss-Jordan with partial pivoting on the augmented [A | I] block.
  double w[6][12];
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 6; ++j) w[i][j] = a(i, j);
    for (int j = 6; j < 12; ++j) w[i][j] = (j - 6 == i) ? 1.0 : 0.0;
  }
  double max_pivot = 0.0, min_pivot = 0.0;
  for (int col = 0; col < 6; ++col) {
    int piv = col;
    for (int r = col + 1; r < 6; ++r)
      if (std::abs(w[r][col]) > std::abs(w[piv][col])) piv = r;
    if (piv != col)
      for (int j = 0; j < 12; ++j) std::swap(w[piv][j], w[col][j]);
    const double p = std::abs(w[col][col]);
    if (col == 0) max_pivot = min_pivot = p;
    max_pivot = std::max(max_pivot, p);
    min_pivot = std::min(min_pivot, p);
    // Pivot-ratio condition estimate; 1e14 marks numerically singular input.
    if (p == 0.0 || max_pivot / p > 1e14)
      throw SingularMatrix("invert6: 6x6 tensor is singular or near-singular (pivot ratio > 1e14)");
    const double inv = 1.0 / w[col][col];
    for (int j = 0; j < 12; ++j) w[col][j] *= inv;
    for (int r = 0; r < 6; ++r) {
      if (r == col) continue;
      const double f = w[r][col];
      if (f == 0.0) continue;
      for (int j = 0; j < 12; ++j) w[r][j] -= f * w[col][j];
    }
  }
  Tensor4 out;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) out(i, j) = w[i][j + 6];
  return out;
}

double ddot_full(const Mat3& a, const Mat3& b) {
  double s = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) s += a[i][j] * b[i][j];
  return s;
}

}  // namespace porofs
