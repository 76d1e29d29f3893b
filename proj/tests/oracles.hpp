// Independent reference computations used to cross-check library results.
// Everything here works in plain 3x3 / 3x3x3x3 index notation or dense
// linear algebra, deliberately avoiding the library's Mandel fast paths.
#pragma once

#include <array>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "porofs/common.hpp"
#include "porofs/mesh.hpp"
#include "porofs/tensor.hpp"

namespace oracle {

inline constexpr int kPair[6][2] = {{0, 0}, {1, 1}, {2, 2}, {1, 2}, {0, 2}, {0, 1}};

inline double mfac(int a) { return a < 3 ? 1.0 : porofs::kSqrt2; }

using Full2 = std::array<std::array<double, 3>, 3>;
using Full4 = std::array<std::array<std::array<std::array<double, 3>, 3>, 3>, 3>;

inline Full2 to_full(const porofs::SymTensor2& t) {
  Full2 m{};
  for (int a = 0; a < 6; ++a) {
    const double v = t[a] / mfac(a);
    m[kPair[a][0]][kPair[a][1]] = v;
    m[kPair[a][1]][kPair[a][0]] = v;
  }
  return m;
}

inline Full4 to_full4(const porofs::Tensor4& T) {
  Full4 c{};
  for (int a = 0; a < 6; ++a)
    for (int b = 0; b < 6; ++b) {
      const double v = T(a, b) / (mfac(a) * mfac(b));
      const int i = kPair[a][0], j = kPair[a][1];
      const int k = kPair[b][0], l = kPair[b][1];
      c[i][j][k][l] = v;
      c[j][i][k][l] = v;
      c[i][j][l][k] = v;
      c[j][i][l][k] = v;
    }
  return c;
}

inline double loop_ddot(const Full2& s, const Full2& t) {
  double r = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r += s[i][j] * t[i][j];
  return r;
}

inline Full2 loop_apply(const Full4& c, const Full2& s) {
  Full2 r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l) r[i][j] += c[i][j][k][l] * s[k][l];
  return r;
}

inline porofs::SymTensor2 from_full(const Full2& m) {
  porofs::Mat3 mm;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) mm[i][j] = m[i][j];
  return porofs::SymTensor2::from_matrix(mm);
}

struct Rng {
  std::mt19937_64 gen;
  explicit Rng(uint64_t seed) : gen(seed) {}
  double uniform(double lo = -1.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(gen);
  }
};

inline porofs::SymTensor2 random_sym(Rng& rng, double scale = 1.0) {
  porofs::Mat3 m{};
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j) m[i][j] = m[j][i] = scale * rng.uniform();
  return porofs::SymTensor2::from_matrix(m);
}

// Random SPD Tensor4: R^T R + shift*I on the Mandel matrix.
inline porofs::Tensor4 random_spd4(Rng& rng, double shift = 0.5) {
  double R[6][6];
  for (auto& row : R)
    for (double& v : row) v = rng.uniform();
  porofs::Tensor4 T{};
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) {
      double s = 0.0;
      for (int k = 0; k < 6; ++k) s += R[k][i] * R[k][j];
      T(i, j) = s + (i == j ? shift : 0.0);
    }
  return T;
}

// Dense Gaussian elimination with partial pivoting; row-major A, size n.
inline std::vector<double> solve_dense(int n, std::vector<double> A, std::vector<double> b) {
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(A[perm[r] * n + col]) > std::abs(A[perm[piv] * n + col])) piv = r;
    std::swap(perm[col], perm[piv]);
    const double d = A[perm[col] * n + col];
    if (d == 0.0) throw std::runtime_error("oracle solve_dense: singular");
    for (int r = col + 1; r < n; ++r) {
      const double f = A[perm[r] * n + col] / d;
      if (f == 0.0) continue;
      for (int c = col; c < n; ++c) A[perm[r] * n + c] -= f * A[perm[col] * n + c];
      b[perm[r]] -= f * b[perm[col]];
    }
  }
  std::vector<double> x(n);
  for (int row = n - 1; row >= 0; --row) {
    double s = b[perm[row]];
    for (int c = row + 1; c < n; ++c) s -= A[perm[row] * n + c] * x[c];
    x[row] = s / A[perm[row] * n + row];
  }
  return x;
}

// Cell volume by the divergence theorem: V = (1/3) sum_faces int x . n dA,
// with outward-of-cell orientation. Independent of the Jacobian-determinant
// route used by the library (surface integral vs volume integral).
inline double hex_volume_surface(const porofs::HexMesh& mesh, int c) {
  const auto& cell = mesh.cells[c];
  double vol = 0.0;
  for (int lf = 0; lf < 6; ++lf) {
    const auto& f = mesh.faces[cell.face[lf]];
    std::array<porofs::Vec3, 4> q;
    for (int a = 0; a < 4; ++a) q[a] = mesh.vertices[f.v[a]];
    const double g = 1.0 / std::sqrt(3.0);
    for (int it = 0; it < 2; ++it)
      for (int is = 0; is < 2; ++is) {
        const double s = is ? g : -g, t = it ? g : -g;
        const double n0 = 0.25 * (1 - s) * (1 - t), n1 = 0.25 * (1 + s) * (1 - t);
        const double n2 = 0.25 * (1 + s) * (1 + t), n3 = 0.25 * (1 - s) * (1 + t);
        const porofs::Vec3 x = q[0] * n0 + q[1] * n1 + q[2] * n2 + q[3] * n3;
        const porofs::Vec3 xs = (q[1] - q[0]) * (0.25 * (1 - t)) + (q[2] - q[3]) * (0.25 * (1 + t));
        const porofs::Vec3 xt = (q[3] - q[0]) * (0.25 * (1 - s)) + (q[2] - q[1]) * (0.25 * (1 + s));
        vol += cell.face_sign[lf] * dot(x, cross(xs, xt)) / 3.0;
      }
  }
  return vol;
}

}  // namespace oracle
