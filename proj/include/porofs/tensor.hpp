#pragma once

#include <array>

#include "porofs/common.hpp"

namespace porofs {

// Symmetric second-order tensors are stored as Mandel 6-vectors,
//   m = (T11, T22, T33, sqrt(2)*T23, sqrt(2)*T13, sqrt(2)*T12),
// so that the double contraction S:T is the plain dot product of the
// component vectors and fourth-order action is a plain 6x6 matvec.
inline constexpr double kSqrt2 = 1.4142135623730951;

class SymTensor2 {
 public:
  SymTensor2() : m_{} {}
  explicit SymTensor2(const std::array<double, 6>& mandel) : m_(mandel) {}

  static SymTensor2 identity() { return SymTensor2({1.0, 1.0, 1.0, 0.0, 0.0, 0.0}); }
  static SymTensor2 diag(double a, double b, double c) {
    return SymTensor2({a, b, c, 0.0, 0.0, 0.0});
  }
  // Builds from a full symmetric 3x3 matrix (upper triangle is read).
  static SymTensor2 from_matrix(const Mat3& M) {
    return SymTensor2({M[0][0], M[1][1], M[2][2], kSqrt2 * M[1][2], kSqrt2 * M[0][2],
                       kSqrt2 * M[0][1]});
  }

  double& operator[](int i) { return m_[static_cast<std::size_t>(i)]; }
  double operator[](int i) const { return m_[static_cast<std::size_t>(i)]; }
  const std::array<double, 6>& mandel() const { return m_; }

  Mat3 to_matrix() const {
    const double s23 = m_[3] / kSqrt2, s13 = m_[4] / kSqrt2, s12 = m_[5] / kSqrt2;
    return {{{m_[0], s12, s13}, {s12, m_[1], s23}, {s13, s23, m_[2]}}};
  }

  // Tensor component with symmetric indexing, ij in {0,1,2}.
  double comp(int i, int j) const {
    if (i == j) return m_[static_cast<std::size_t>(i)];
    const int k = 3 + (3 - i - j);  // (1,2)->3, (0,2)->4, (0,1)->5
    return m_[static_cast<std::size_t>(k)] / kSqrt2;
  }

  double trace() const { return m_[0] + m_[1] + m_[2]; }
  SymTensor2 deviator() const {
    const double p = trace() / 3.0;
    SymTensor2 d = *this;
    d.m_[0] -= p; d.m_[1] -= p; d.m_[2] -= p;
    return d;
  }
  double norm() const;  // sqrt(T:T)

  SymTensor2 operator+(const SymTensor2& o) const;
  SymTensor2 operator-(const SymTensor2& o) const;
  SymTensor2 operator*(double s) const;
  SymTensor2& operator+=(const SymTensor2& o);

 private:
  std::array<double, 6> m_;
};

inline SymTensor2 operator*(double s, const SymTensor2& t) { return t * s; }

// Fourth-order tensor with minor symmetries, stored as a Mandel 6x6 matrix
// (row-major). Major symmetry is a property of the data, not the type.
class Tensor4 {
 public:
  Tensor4() : m_{} {}

  static Tensor4 identity();             // symmetric fourth-order identity
  static Tensor4 vol_projector();        // (1/3) I (x) I
  static Tensor4 dev_projector();        // identity - vol_projector

  double& operator()(int i, int j) { return m_[static_cast<std::size_t>(i * 6 + j)]; }
  double operator()(int i, int j) const { return m_[static_cast<std::size_t>(i * 6 + j)]; }

  bool is_major_symmetric(double tol) const;

  Tensor4 operator+(const Tensor4& o) const;
  Tensor4 operator-(const Tensor4& o) const;
  Tensor4 operator*(double s) const;

 private:
  std::array<double, 36> m_;
};

// S : T, double contraction of symmetric tensors.
double ddot(const SymTensor2& a, const SymTensor2& b);

// A : T, fourth-order tensor applied to a symmetric tensor.
SymTensor2 apply4(const Tensor4& A, const SymTensor2& t);

// S (x) T, outer product as a fourth-order tensor: (S (x) T) : U = S (T : U).
Tensor4 dyad(const SymTensor2& a, const SymTensor2& b);

// A * B, composition of fourth-order tensors.
Tensor4 compose(const Tensor4& a, const Tensor4& b);

// Direct 6x6 inversion with partial pivoting. Throws SingularMatrix when the
// pivot-growth condition estimate exceeds 1e14.
Tensor4 invert6(const Tensor4& a);

// General (not necessarily symmetric) 3x3 double contraction A:B. The
// symmetric Mandel dot product cannot represent this; used by tests probing
// contractions against skew parts.
double ddot_full(const Mat3& a, const Mat3& b);

}  // namespace porofs
