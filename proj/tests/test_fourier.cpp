#include "bo/fourier.hpp"
#include "bo/report.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace bo;

namespace {

FourierSeries random_real_series(int M, double decay, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  FourierSeries u(M);
  for (int n = 1; n <= M; ++n) {
    u.at(n) = cplx(g(rng), g(rng)) * std::pow(decay, n);
    u.at(-n) = std::conj(u.at(n));
  }
  u.detect_flags();
  return u;
}

// quadrature oracle: c_m = (1/2pi) int f(x) e^{-imx} dx by trapezoid on a fine
// grid (spectrally accurate for smooth periodic f)
cplx quadrature_coeff(const std::function<double(double)>& f, int m, int Nq = 4096) {
  cplx acc = 0;
  for (int j = 0; j < Nq; ++j) {
    double x = 2 * pi * j / Nq;
    acc += f(x) * std::exp(cplx(0, -m * x));
  }
  return acc / double(Nq);
}

double one_gap_value(double r, double alpha, double x) {
  return (1 - r * r) / (1 - 2 * r * std::cos(x + alpha) + r * r) - 1.0;
}

} // namespace

TEST_CASE("grid transform of elementary samples", "[fourier]") {
  int M = 8, Ng = 2 * M + 1;
  std::vector<double> cosx(Ng), ones(Ng);
  for (int j = 0; j < Ng; ++j) {
    double x = 2 * pi * j / Ng;
    cosx[j] = std::cos(x);
    ones[j] = 1.0;
  }
  FourierSeries u = grid_transform(cosx, M);
  CHECK(std::abs(u.at(1) - 0.5) < 1e-14);
  CHECK(std::abs(u.at(-1) - 0.5) < 1e-14);
  CHECK(std::abs(u.at(0)) < 1e-14);
  CHECK(std::abs(u.at(3)) < 1e-14);
  FourierSeries v = grid_transform(ones, M);
  CHECK(std::abs(v.at(0) - 1.0) < 1e-14);
  CHECK(v.is_real);
}

TEST_CASE("one-gap coefficients match the quadrature oracle", "[fourier]") {
  double r = 0.5, alpha = 0.0;
  int M = 16, Ng = 512;
  std::vector<double> vals(Ng);
  for (int j = 0; j < Ng; ++j) vals[j] = one_gap_value(r, alpha, 2 * pi * j / Ng);
  FourierSeries u = grid_transform(vals, M);
  for (int m = -M; m <= M; ++m) {
    cplx oracle = quadrature_coeff([&](double x) { return one_gap_value(r, alpha, x); }, m);
    CHECK(std::abs(u.at(m) - oracle) < 1e-12);
    double expected = (m == 0) ? 0.0 : std::pow(r, std::abs(m));
    CHECK(std::abs(u.at(m) - expected) < 1e-12);
  }
}

TEST_CASE("transform round trip is the identity", "[fourier]") {
  FourierSeries u = random_real_series(20, 0.8, 42);
  auto vals = synthesize(u, 64);
  FourierSeries v = grid_transform(vals, 20);
  for (int n = -20; n <= 20; ++n) CHECK(std::abs(u.at(n) - v.at(n)) < 1e-12);
  CHECK_THROWS_AS(grid_transform(std::vector<double>(5, 0.0), 8), std::invalid_argument);
}

TEST_CASE("inner products and Parseval", "[fourier]") {
  int M = 6;
  FourierSeries e1(M), one(M);
  e1.at(1) = 1.0;
  one.at(0) = 1.0;
  CHECK(std::abs(inner(e1, e1) - 1.0) < 1e-15);
  CHECK(std::abs(inner(one, e1)) < 1e-15);

  // Parseval against grid quadrature for random band-limited series
  FourierSeries f = random_real_series(M, 0.9, 1), g = random_real_series(M, 0.9, 2);
  int Ng = 64;
  auto fv = synthesize(f, Ng), gv = synthesize(g, Ng);
  cplx quad = 0;
  for (int j = 0; j < Ng; ++j) quad += fv[j] * std::conj(gv[j]);
  quad /= double(Ng);
  CHECK(std::abs(quad - inner(f, g)) < 1e-12);

  FourierSeries h(M + 1);
  CHECK_THROWS_AS(inner(f, h), std::invalid_argument);

  // bilinear pairing <f,g> = sum f_n g_{-n}
  cplx quad2 = 0;
  for (int j = 0; j < Ng; ++j) quad2 += fv[j] * gv[j];
  quad2 /= double(Ng);
  CHECK(std::abs(quad2 - bilinear(f, g)) < 1e-12);
}

TEST_CASE("one-gap potential is mean-zero", "[fourier]") {
  // <u|1> = 0 numerically via quadrature
  cplx c0 = quadrature_coeff([&](double x) { return one_gap_value(0.5, 0.0, x); }, 0);
  CHECK(std::abs(c0) < 1e-13);
}

TEST_CASE("Fourier multipliers", "[fourier]") {
  int M = 8;
  FourierSeries e3(M), one(M), en(M);
  e3.at(3) = 1.0;
  one.at(0) = 1.0;
  FourierSeries a = abs_dx(e3, 1.0);
  CHECK(std::abs(a.at(3) - 3.0) < 1e-15);
  FourierSeries b = dx_pow(one, -1);
  CHECK(l2_norm(b) == 0.0); // dx^{-k}[1] = 0
  for (int n = 1; n <= M; ++n) {
    en = FourierSeries(M);
    en.at(n) = 1.0;
    FourierSeries d = D_pow(en, -1);
    FourierSeries ad = abs_dx(en, -1.0);
    CHECK(std::abs(d.at(n) - 1.0 / n) < 1e-15);
    CHECK(std::abs(d.at(n) - ad.at(n)) < 1e-15);
  }
}

TEST_CASE("multiplier composition and reality preservation", "[fourier]") {
  FourierSeries u = random_real_series(10, 0.7, 3);
  FourierSeries a = dx_pow(dx_pow(u, -2), -1);
  FourierSeries b = dx_pow(u, -3);
  // operator identity is exact; allow 1 ulp from the two evaluation paths
  for (int n = -10; n <= 10; ++n)
    CHECK(std::abs(a.at(n) - b.at(n)) <= 1e-16 + 1e-15 * std::abs(b.at(n)));
  FourierSeries r = abs_dx(u, 2.0); // real even symbol
  CHECK(r.reality_defect() < 1e-15);
}

TEST_CASE("Szego projections", "[fourier]") {
  int M = 4;
  FourierSeries cosx(M), one(M), e2(M);
  cosx.at(1) = 0.5;
  cosx.at(-1) = 0.5;
  one.at(0) = 1.0;
  e2.at(2) = 1.0;
  HardyVector p = szego_project(cosx, Sign::plus);
  CHECK(std::abs(p.c[1] - 0.5) < 1e-15);
  CHECK(std::abs(p.c[0]) < 1e-15);
  CHECK(std::abs(szego_project(one, Sign::plus).c[0] - 1.0) < 1e-15);
  HardyVector m = szego_project(e2, Sign::minus);
  CHECK(m.norm() < 1e-15);
}

TEST_CASE("partial Fourier transforms", "[fourier]") {
  int M = 8, NS = 2;
  FourierSeries u(M);
  u.at(3) = 1.0;
  u.at(1) = 1.0;
  PerpVector z = partial_fourier(u, Sign::plus, NS);
  CHECK(z.count(3) == 1);
  CHECK(std::abs(z[3] - 1.0) < 1e-15);
  CHECK(std::abs(z.count(1) ? z[1] : 0.0) == 0.0); // n=1 not in the range n >= NS+1

  // inverse o forward = identity on the band n in [NS+1, M]
  FourierSeries w = random_real_series(M, 0.8, 9);
  FourierSeries back = partial_fourier_inverse(partial_fourier(w, Sign::plus, NS), Sign::plus, NS, M);
  for (int n = NS + 1; n <= M; ++n) CHECK(std::abs(back.at(n) - w.at(n)) < 1e-15);

  // transpose identity (F^+_{NS})^{-T} = F^+_{NS}:
  // <(F^+)^{-1} z | qhat>_{L^2} = <z | F^+ qhat>_{h}
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g;
  PerpVector zr;
  for (int n = NS + 1; n <= M; ++n) zr[n] = cplx(g(rng), g(rng));
  FourierSeries qh = random_real_series(M, 0.9, 23);
  FourierSeries zin = partial_fourier_inverse(zr, Sign::plus, NS, M);
  cplx lhs = inner(zin, qh);
  PerpVector Fq = partial_fourier(qh, Sign::plus, NS);
  cplx rhs = 0;
  for (auto& [n, v] : zr) rhs += v * std::conj(Fq[n]);
  CHECK(std::abs(lhs - rhs) < 1e-12);
}

TEST_CASE("dealiased product is exact", "[fourier]") {
  FourierSeries u = random_real_series(6, 0.8, 5), v = random_real_series(6, 0.8, 6);
  FourierSeries w = product(u, v, 12);
  // direct convolution oracle
  for (int m = -12; m <= 12; ++m) {
    cplx acc = 0;
    for (int k = -6; k <= 6; ++k) acc += u.coeff(k) * v.coeff(m - k);
    CHECK(std::abs(w.at(m) - acc) < 1e-13);
  }
}

TEST_CASE("JSON round trip", "[fourier]") {
  FourierSeries u = random_real_series(5, 0.9, 7);
  json j = to_json(u);
  FourierSeries v = fourier_from_json(j);
  CHECK(v.M == u.M);
  for (int n = -5; n <= 5; ++n) CHECK(std::abs(u.at(n) - v.at(n)) == 0.0);
  CHECK(v.is_real == u.is_real);
}

TEST_CASE("s_rev is an involution", "[fourier]") {
  FourierSeries u = random_real_series(7, 0.8, 11);
  FourierSeries w = s_rev(s_rev(u));
  for (int n = -7; n <= 7; ++n) CHECK(std::abs(u.at(n) - w.at(n)) == 0.0);
}
