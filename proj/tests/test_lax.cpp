#include "bo/finite_gap.hpp"
#include "bo/fourier.hpp"
#include "bo/lax.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace bo;

namespace {
FourierSeries random_small_potential(int M, double amp, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  FourierSeries u(M);
  for (int n = 1; n <= M; ++n) {
    u.at(n) = amp * cplx(g(rng), g(rng)) * std::pow(0.7, n);
    u.at(-n) = std::conj(u.at(n));
  }
  u.detect_flags();
  return u;
}
} // namespace

TEST_CASE("zero potential spectrum is diag(0..K)", "[lax]") {
  FourierSeries u(8);
  u.is_real = true;
  u.is_mean_zero = true;
  int K = 32;
  LaxSpectrum s = lax_spectrum(u, K);
  for (int n = 0; n <= K; ++n) CHECK(std::abs(s.lambdas[n] - n) < 1e-12);
  for (int n = 0; n <= K / 2; ++n) {
    HardyVector f = s.eigenfunction(n);
    f.c[n] -= 1.0;
    CHECK(f.norm() < 1e-12); // f_n = e^{inx} exactly, canonical phases
  }
  for (int n = 1; n <= K / 2; ++n) CHECK(std::abs(n * s.kappas[n - 1] - 1.0) < 1e-12);
}

TEST_CASE("one-gap Lax matrix entries match the Poisson-kernel oracle", "[lax]") {
  double r = 0.45, alpha = 1.2;
  FiniteGapParams p{{r}, {alpha}};
  FourierSeries u = build_potential(p, 32);
  int K = 20;
  Mat L = assemble_lax(u, K);
  CHECK((L - L.adjoint()).cwiseAbs().maxCoeff() == 0.0);
  for (int m = 0; m <= K; ++m)
    for (int n = 0; n <= K; ++n) {
      cplx expect = (m == n) ? cplx(double(n)) : cplx(0);
      if (m != n) expect -= std::pow(r, std::abs(m - n)) * std::exp(cplx(0, (m - n) * alpha));
      CHECK(std::abs(L(m, n) - expect) < 1e-13);
    }
}

TEST_CASE("assemble_lax validates its input", "[lax]") {
  FourierSeries bad(4);
  bad.at(1) = cplx(1.0, 0.0); // no conjugate partner: not real
  CHECK_THROWS_AS(assemble_lax(bad, 8), std::invalid_argument);
  FourierSeries mean(4);
  mean.at(0) = 1.0;
  CHECK_THROWS_AS(assemble_lax(mean, 8), std::invalid_argument);
}

TEST_CASE("one-gap spectrum: lambda_n = n, lambda_0 = -gamma_1", "[lax]") {
  FiniteGapParams p{{0.5}, {0.0}};
  FourierSeries u = build_potential(p, 48);
  LaxSpectrum s = lax_spectrum(u, 128);
  for (int n = 1; n <= 48; ++n) CHECK(std::abs(s.lambdas[n] - n) < 1e-10);
  CHECK(s.lambdas[0] < 0);
  // frozen oracle value: gamma_1 = 1/3 at r = 0.5 (Richardson-checked in K below)
  CHECK(std::abs(s.gaps[0] - 1.0 / 3.0) < 1e-9);
  LaxSpectrum s2 = lax_spectrum(u, 192);
  CHECK(std::abs(s2.gaps[0] - s.gaps[0]) < 1e-12); // Cauchy in K
  CHECK(std::abs(s.lambdas[0] + s.gaps[0]) < 1e-10);
}

TEST_CASE("two-gap potential opens exactly two gaps", "[lax]") {
  FiniteGapParams p{{0.4, 0.3}, {0.8, 2.1}};
  FourierSeries u = build_potential(p, 48);
  LaxSpectrum s = lax_spectrum(u, 96);
  CHECK(s.gaps[0] > 1e-3);
  CHECK(s.gaps[1] > 1e-3);
  for (int n = 3; n <= s.band; ++n) CHECK(std::abs(s.gaps[n - 1]) < 1e-9);
}

TEST_CASE("phase normalization is idempotent and symmetric", "[lax]") {
  FiniteGapParams p{{0.5}, {0.9}};
  FourierSeries u = build_potential(p, 32);
  LaxSpectrum s = lax_spectrum(u, 64);
  LaxSpectrum s2 = normalize_phases(s);
  CHECK((s2.efs - s.efs).cwiseAbs().maxCoeff() < 1e-12);

  // f_n(x, u_*) = conj(f_n(-x, u)): coefficientwise conjugation
  LaxSpectrum sr = lax_spectrum(s_rev(u), 64);
  for (int n = 0; n <= 16; ++n) {
    CHECK(std::abs(sr.lambdas[n] - s.lambdas[n]) < 1e-9);
    CHECK((sr.efs.col(n) - s.efs.col(n).conjugate()).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("normalize_phases raises on an ill-conditioned pairing", "[lax]") {
  FourierSeries zero(4);
  zero.is_real = true;
  zero.is_mean_zero = true;
  LaxSpectrum s = diagonalize(assemble_lax(zero, 8));
  s.efs(0, 0) = 0.0; // destroy <1|f_0>
  CHECK_THROWS_AS(normalize_phases(s), NumericalError);
}

TEST_CASE("kappa product formula and bounds", "[lax]") {
  FiniteGapParams p{{0.4, 0.3}, {0.5, 1.7}};
  FourierSeries u = build_potential(p, 48);
  LaxSpectrum s = lax_spectrum(u, 128);
  for (int n : {1, 2}) {
    double lhs = std::norm(s.one_pair(n));
    double rhs = s.gaps[n - 1] * s.kappas[n - 1];
    CHECK(std::abs(lhs / rhs - 1.0) < 1e-6); // |<1|f_n>|^2 = gamma_n kappa_n
  }
  double sup_nk = 0, sup_inv = 0;
  for (int n = 1; n <= s.band; ++n) {
    sup_nk = std::max(sup_nk, n * s.kappas[n - 1]);
    sup_inv = std::max(sup_inv, 1.0 / (n * s.kappas[n - 1]));
  }
  INFO("sup n kappa_n = " << sup_nk << ", sup 1/(n kappa_n) = " << sup_inv);
  CHECK(sup_nk < 10.0);
  CHECK(sup_inv < 10.0);
}

TEST_CASE("trace formulas", "[lax]") {
  FourierSeries zero(8);
  zero.is_real = true;
  zero.is_mean_zero = true;
  TraceReport t0 = trace_check(zero, lax_spectrum(zero, 32));
  CHECK(t0.mean_residual < 1e-13);
  CHECK(t0.l2_residual < 1e-13);

  FiniteGapParams p{{0.5}, {0.0}};
  FourierSeries u = build_potential(p, 48);
  TraceReport t1 = trace_check(u, lax_spectrum(u, 128));
  CHECK(t1.mean_residual < 1e-6);
  CHECK(t1.l2_residual < 1e-6);

  FourierSeries w = random_small_potential(24, 0.3, 77);
  TraceReport t2 = trace_check(w, lax_spectrum(w, 128));
  CHECK(t2.mean_residual < 1e-5);
  CHECK(t2.l2_residual < 1e-5);
}

TEST_CASE("gap positivity and isospectral reversibility", "[lax]") {
  FourierSeries u = random_small_potential(20, 0.5, 31);
  LaxSpectrum s = lax_spectrum(u, 96);
  for (int n = 1; n <= s.band; ++n) CHECK(s.gaps[n - 1] >= -1e-8);
  LaxSpectrum sr = lax_spectrum(s_rev(u), 96);
  for (int n = 0; n <= s.band; ++n) CHECK(std::abs(s.lambdas[n] - sr.lambdas[n]) < 1e-9);
}

TEST_CASE("eigenvalues are Cauchy in the truncation", "[lax]") {
  FourierSeries u = random_small_potential(16, 0.4, 13);
  LaxSpectrum a = lax_spectrum(u, 48);
  LaxSpectrum b = lax_spectrum(u, 96);
  LaxSpectrum c = lax_spectrum(u, 192);
  for (int n = 0; n <= 12; ++n) {
    double d1 = std::abs(b.lambdas[n] - a.lambdas[n]);
    double d2 = std::abs(c.lambdas[n] - b.lambdas[n]);
    CHECK(d2 <= d1 + 1e-12);
  }
}

TEST_CASE("spectrum CSV export has the documented columns", "[lax]") {
  FiniteGapParams p{{0.5}, {0.0}};
  FourierSeries u = build_potential(p, 24);
  std::string csv = spectrum_csv(lax_spectrum(u, 48));
  CHECK(csv.rfind("n,lambda,gamma,kappa,abs_1_fn\n", 0) == 0);
}
