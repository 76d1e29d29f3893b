#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "porofs/tensor.hpp"

using namespace porofs;

TEST_CASE("ddot matches hand values and the full-matrix contraction") {
  const SymTensor2 I = SymTensor2::identity();
  CHECK(ddot(I, I) == doctest::Approx(3.0).epsilon(1e-15));

  const SymTensor2 S = SymTensor2::diag(1, 2, 3);
  const SymTensor2 T = SymTensor2::diag(4, 5, 6);
  CHECK(ddot(S, T) == doctest::Approx(32.0).epsilon(1e-15));

  Mat3 sm{}, tm{};
  sm[0][1] = sm[1][0] = 1.0;
  tm[0][1] = tm[1][0] = 2.0;
  CHECK(ddot(SymTensor2::from_matrix(sm), SymTensor2::from_matrix(tm)) ==
        doctest::Approx(4.0).epsilon(1e-15));

  oracle::Rng rng(101);
  for (int n = 0; n < 100; ++n) {
    const SymTensor2 a = oracle::random_sym(rng);
    const SymTensor2 b = oracle::random_sym(rng);
    const double ref = oracle::loop_ddot(oracle::to_full(a), oracle::to_full(b));
    CHECK(ddot(a, b) == doctest::Approx(ref).epsilon(1e-13));
    CHECK(ddot(a, b) == doctest::Approx(ddot(b, a)).epsilon(1e-15));
  }
}

TEST_CASE("Mandel round trip to full matrices is exact") {
  oracle::Rng rng(102);
  for (int n = 0; n < 20; ++n) {
    const SymTensor2 a = oracle::random_sym(rng);
    const SymTensor2 back = SymTensor2::from_matrix(a.to_matrix());
    for (int k = 0; k < 6; ++k) CHECK(back[k] == doctest::Approx(a[k]).epsilon(1e-15));
    const Mat3 m = a.to_matrix();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) CHECK(a.comp(i, j) == doctest::Approx(m[i][j]).epsilon(1e-15));
  }
}

TEST_CASE("apply4 equals the 4-index loop") {
  const SymTensor2 S = SymTensor2::diag(3, -1, 2);
  const SymTensor2 id_applied = apply4(Tensor4::identity(), S);
  for (int k = 0; k < 6; ++k) CHECK(id_applied[k] == doctest::Approx(S[k]).epsilon(1e-15));

  // I (x) I maps U to tr(U) I.
  const Tensor4 trace_proj = dyad(SymTensor2::identity(), SymTensor2::identity());
  oracle::Rng rng(103);
  for (int n = 0; n < 10; ++n) {
    const SymTensor2 U = oracle::random_sym(rng);
    const SymTensor2 got = apply4(trace_proj, U);
    const SymTensor2 want = SymTensor2::identity() * U.trace();
    for (int k = 0; k < 6; ++k) CHECK(got[k] == doctest::Approx(want[k]).epsilon(1e-14));
  }

  for (int n = 0; n < 100; ++n) {
    const Tensor4 P = oracle::random_spd4(rng);
    const SymTensor2 S2 = oracle::random_sym(rng);
    const SymTensor2 got = apply4(P, S2);
    const SymTensor2 want = oracle::from_full(oracle::loop_apply(oracle::to_full4(P), oracle::to_full(S2)));
    const double scale = std::max(want.norm(), 1e-30);
    for (int k = 0; k < 6; ++k) CHECK(std::abs(got[k] - want[k]) <= 1e-13 * scale);
  }
}

TEST_CASE("dyad acts as S (T : U) and matches the index oracle") {
  oracle::Rng rng(104);
  const SymTensor2 S = oracle::random_sym(rng);
  const SymTensor2 T = oracle::random_sym(rng);
  const Tensor4 P = dyad(S, T);
  for (int n = 0; n < 20; ++n) {
    const SymTensor2 U = oracle::random_sym(rng);
    const SymTensor2 got = apply4(P, U);
    const SymTensor2 want = S * ddot(T, U);
    const double scale = std::max(want.norm(), 1e-30);
    for (int k = 0; k < 6; ++k) CHECK(std::abs(got[k] - want[k]) <= 1e-13 * scale);
  }

  // Componentwise: P_ijkl = S_ij T_kl.
  const auto full = oracle::to_full4(P);
  const auto sf = oracle::to_full(S);
  const auto tf = oracle::to_full(T);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l)
          CHECK(full[i][j][k][l] == doctest::Approx(sf[i][j] * tf[k][l]).epsilon(1e-13));

  const Tensor4 zero = dyad(SymTensor2{}, T);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) CHECK(zero(i, j) == 0.0);
}

TEST_CASE("invert6 recovers known inverses and rejects singular input") {
  const Tensor4 id_inv = invert6(Tensor4::identity());
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j)
      CHECK(id_inv(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-14));

  // Isotropic stiffness K = G = 1: inverse splits into 1/(9K) I(x)I + 1/(2G) dev.
  const double K = 1.0, G = 1.0;
  const Tensor4 D = Tensor4::vol_projector() * (3.0 * K) + Tensor4::dev_projector() * (2.0 * G);
  const Tensor4 S = invert6(D);
  const Tensor4 S_want = dyad(SymTensor2::identity(), SymTensor2::identity()) * (1.0 / (9.0 * K)) +
                         Tensor4::dev_projector() * (1.0 / (2.0 * G));
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) CHECK(S(i, j) == doctest::Approx(S_want(i, j)).epsilon(1e-13));

  oracle::Rng rng(105);
  for (int n = 0; n < 20; ++n) {
    const Tensor4 A = oracle::random_spd4(rng);
    const Tensor4 Ainv = invert6(A);
    const Tensor4 prod = compose(Ainv, A);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j)
        CHECK(std::abs(prod(i, j) - (i == j ? 1.0 : 0.0)) <= 1e-12);
  }

  const SymTensor2 s = SymTensor2::diag(1, 2, 3);
  CHECK_THROWS_AS((void)invert6(dyad(s, s)), SingularMatrix);
}

TEST_CASE("symmetric-skew contraction vanishes") {
  oracle::Rng rng(106);
  for (int n = 0; n < 50; ++n) {
    Mat3 sym{}, skew{};
    for (int i = 0; i < 3; ++i)
      for (int j = i; j < 3; ++j) sym[i][j] = sym[j][i] = rng.uniform();
    for (int i = 0; i < 3; ++i)
      for (int j = i + 1; j < 3; ++j) {
        skew[i][j] = rng.uniform();
        skew[j][i] = -skew[i][j];
      }
    CHECK(std::abs(ddot_full(sym, skew)) <= 1e-15);
  }
}

TEST_CASE("major symmetry probe") {
  CHECK(Tensor4::identity().is_major_symmetric(1e-14));
  Tensor4 T = Tensor4::identity();
  T(0, 1) = 0.5;
  CHECK(!T.is_major_symmetric(1e-14));
}

TEST_CASE("projector algebra") {
  const Tensor4 vol = Tensor4::vol_projector();
  const Tensor4 dev = Tensor4::dev_projector();
  const Tensor4 sum = vol + dev;
  const Tensor4 vv = compose(vol, vol);
  const Tensor4 vd = compose(vol, dev);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) {
      CHECK(sum(i, j) == doctest::Approx(Tensor4::identity()(i, j)).epsilon(1e-15));
      CHECK(vv(i, j) == doctest::Approx(vol(i, j)).epsilon(1e-15));
      CHECK(std::abs(vd(i, j)) <= 1e-15);
    }
}
