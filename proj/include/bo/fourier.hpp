#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace bo {

using cplx = std::complex<double>;
using Vec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;
using Mat = Eigen::MatrixXcd;
using RMat = Eigen::MatrixXd;

inline constexpr double pi = 3.141592653589793238462643383279502884;

/// Thrown when a computation leaves its validated regime (ill-conditioned
/// normalization, non-convergence, blow-up). CLI maps it to exit code 3.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Truncated Fourier series sum_{|n|<=M} c_n e^{inx} with the convention
/// c_n = (1/2pi) int_0^{2pi} q(x) e^{-inx} dx.
struct FourierSeries {
  int M = 0;
  Vec c;                     // index n in [-M,M] stored at c[n+M]
  bool is_real = false;      // c_{-n} = conj(c_n)
  bool is_mean_zero = false; // c_0 = 0

  FourierSeries() = default;
  explicit FourierSeries(int M_) : M(M_), c(Vec::Zero(2 * M_ + 1)) {}

  cplx& at(int n) { return c[n + M]; }
  cplx at(int n) const { return c[n + M]; }
  /// Coefficient with out-of-band indices read as 0.
  cplx coeff(int n) const { return std::abs(n) <= M ? c[n + M] : cplx(0.0); }

  double reality_defect() const {
    double d = 0;
    for (int n = 1; n <= M; ++n) d = std::max(d, std::abs(c[M + n] - std::conj(c[M - n])));
    return d;
  }

  void detect_flags(double tol = 1e-12) {
    is_real = reality_defect() <= tol;
    is_mean_zero = std::abs(c[M]) == 0.0;
  }

  void enforce_reality() {
    for (int n = 1; n <= M; ++n) {
      cplx avg = 0.5 * (c[M + n] + std::conj(c[M - n]));
      c[M + n] = avg;
      c[M - n] = std::conj(avg);
    }
    c[M] = cplx(c[M].real(), 0.0);
    is_real = true;
  }
};

/// Element of the Hardy space: coefficients over n in [0,M] only.
struct HardyVector {
  int M = 0;
  Vec c; // index n in [0,M]

  HardyVector() = default;
  explicit HardyVector(int M_) : M(M_), c(Vec::Zero(M_ + 1)) {}

  cplx& at(int n) { return c[n]; }
  cplx at(int n) const { return c[n]; }
  cplx coeff(int n) const { return (n >= 0 && n <= M) ? c[n] : cplx(0.0); }

  double norm() const { return c.norm(); }
};

struct SobolevIndex {
  double s = 0.0;
};

inline double bracket(int n) { return std::max(1.0, std::abs(double(n))); } // <n> = max(1,|n|)

// ---------------------------------------------------------------------------
// grids and transforms
// ---------------------------------------------------------------------------

inline std::vector<double> grid_points(int Ng) {
  std::vector<double> x(Ng);
  for (int j = 0; j < Ng; ++j) x[j] = 2.0 * pi * j / Ng;
  return x;
}

namespace detail {
inline Eigen::FFT<double>& fft_plan() {
  thread_local Eigen::FFT<double> fft; // per-thread plan cache
  return fft;
}
} // namespace detail

/// Samples on Ng >= 2M+1 uniform points -> coefficients on [-M,M].
inline FourierSeries grid_transform(const std::vector<cplx>& samples, int M) {
  const int Ng = int(samples.size());
  if (Ng < 2 * M + 1) throw std::invalid_argument("grid_transform: sample count < 2M+1");
  std::vector<cplx> out(Ng);
  std::vector<cplx> in(samples);
  detail::fft_plan().fwd(out, in);
  FourierSeries u(M);
  for (int n = -M; n <= M; ++n) {
    int k = ((n % Ng) + Ng) % Ng;
    u.at(n) = out[k] / double(Ng);
  }
  u.detect_flags();
  return u;
}

inline FourierSeries grid_transform(const std::vector<double>& samples, int M) {
  std::vector<cplx> s(samples.begin(), samples.end());
  return grid_transform(s, M);
}

/// Values of the series on Ng >= 2M+1 uniform grid points (exact synthesis).
inline std::vector<cplx> synthesize(const FourierSeries& u, int Ng) {
  if (Ng < 2 * u.M + 1) throw std::invalid_argument("synthesize: grid too small");
  std::vector<cplx> bins(Ng, cplx(0.0));
  for (int n = -u.M; n <= u.M; ++n) {
    int k = ((n % Ng) + Ng) % Ng;
    bins[k] += u.at(n);
  }
  std::vector<cplx> vals(Ng);
  detail::fft_plan().inv(vals, bins);
  for (auto& v : vals) v *= double(Ng);
  return vals;
}

inline std::vector<double> synthesize_real(const FourierSeries& u, int Ng) {
  auto vals = synthesize(u, Ng);
  std::vector<double> out(vals.size());
  for (size_t j = 0; j < vals.size(); ++j) out[j] = vals[j].real();
  return out;
}

// ---------------------------------------------------------------------------
// inner products and norms
// ---------------------------------------------------------------------------

/// <f|g> = (1/2pi) int f conj(g) = sum f_n conj(g_n).
inline cplx inner(const FourierSeries& f, const FourierSeries& g) {
  if (f.M != g.M) throw std::invalid_argument("inner_product: truncation mismatch");
  cplx s = 0;
  for (int i = 0; i < f.c.size(); ++i) s += f.c[i] * std::conj(g.c[i]);
  return s;
}

inline cplx inner(const HardyVector& f, const HardyVector& g) {
  if (f.M != g.M) throw std::invalid_argument("inner_product: truncation mismatch");
  cplx s = 0;
  for (int i = 0; i <= f.M; ++i) s += f.c[i] * std::conj(g.c[i]);
  return s;
}

template <typename T>
inline cplx inner_product(const T& f, const T& g) {
  return inner(f, g);
}

/// Bilinear pairing <f,g> = (1/2pi) int f g = sum f_n g_{-n}.
inline cplx bilinear(const FourierSeries& f, const FourierSeries& g) {
  if (f.M != g.M) throw std::invalid_argument("bilinear: truncation mismatch");
  cplx s = 0;
  for (int n = -f.M; n <= f.M; ++n) s += f.at(n) * g.at(-n);
  return s;
}

inline double l2_norm(const FourierSeries& f) { return f.c.norm(); }

inline double sobolev_norm(const FourierSeries& f, double s) {
  double acc = 0;
  for (int n = -f.M; n <= f.M; ++n) acc += std::pow(bracket(n), 2 * s) * std::norm(f.at(n));
  return std::sqrt(acc);
}

inline double sobolev_norm(const HardyVector& f, double s) {
  double acc = 0;
  for (int n = 0; n <= f.M; ++n) acc += std::pow(bracket(n), 2 * s) * std::norm(f.c[n]);
  return std::sqrt(acc);
}

inline cplx mean(const FourierSeries& f) { return f.at(0); }

// ---------------------------------------------------------------------------
// multipliers and projections
// ---------------------------------------------------------------------------

inline FourierSeries apply_multiplier(const FourierSeries& u, const std::function<cplx(int)>& symbol) {
  FourierSeries v(u.M);
  for (int n = -u.M; n <= u.M; ++n) v.at(n) = symbol(n) * u.at(n);
  v.detect_flags();
  return v;
}

/// |dx|^a : c_n -> |n|^a c_n (n=0 kept for a>=0, zeroed for a<0).
inline FourierSeries abs_dx(const FourierSeries& u, double a) {
  return apply_multiplier(u, [a](int n) -> cplx {
    if (n == 0) return a >= 0 ? cplx(a == 0 ? 1.0 : 0.0) : cplx(0.0);
    return std::pow(std::abs(double(n)), a);
  });
}

/// dx^k for integer k (k<0 defines dx^{-|k|} with the zero mode mapped to 0).
inline FourierSeries dx_pow(const FourierSeries& u, int k) {
  return apply_multiplier(u, [k](int n) -> cplx {
    if (n == 0) return k == 0 ? cplx(1.0) : cplx(0.0);
    return std::pow(cplx(0.0, double(n)), k);
  });
}

/// D^k with D = -i dx : c_n -> n^k c_n (zero mode -> 0 unless k=0).
inline FourierSeries D_pow(const FourierSeries& u, int k) {
  return apply_multiplier(u, [k](int n) -> cplx {
    if (n == 0) return k == 0 ? cplx(1.0) : cplx(0.0);
    return std::pow(double(n), k);
  });
}

/// (-D)^k on the same convention.
inline FourierSeries minusD_pow(const FourierSeries& u, int k) {
  return apply_multiplier(u, [k](int n) -> cplx {
    if (n == 0) return k == 0 ? cplx(1.0) : cplx(0.0);
    return std::pow(-double(n), k);
  });
}

enum class Sign { plus, minus };

/// Szego projector. Pi^+ keeps n>=0; Pi^- keeps n<=0 and stores the
/// coefficient of e^{-inx} at index n.
inline HardyVector szego_project(const FourierSeries& u, Sign sign) {
  HardyVector h(u.M);
  for (int n = 0; n <= u.M; ++n) h.c[n] = (sign == Sign::plus) ? u.at(n) : u.at(-n);
  return h;
}

/// Embed a HardyVector back into a FourierSeries (sign chooses e^{inx} or e^{-inx}).
inline FourierSeries embed(const HardyVector& h, Sign sign) {
  FourierSeries u(h.M);
  for (int n = 0; n <= h.M; ++n) {
    if (sign == Sign::plus)
      u.at(n) = h.c[n];
    else
      u.at(-n) = h.c[n];
  }
  u.detect_flags();
  return u;
}

// ---------------------------------------------------------------------------
// products (dealiased)
// ---------------------------------------------------------------------------

/// Exact coefficients of (u*v) on [-Mout,Mout]; padded FFT grid avoids aliasing.
inline FourierSeries product(const FourierSeries& u, const FourierSeries& v, int Mout) {
  int need = u.M + v.M + Mout + 1;
  int Ng = std::max({need, 2 * u.M + 1, 2 * v.M + 1});
  auto a = synthesize(u, Ng);
  auto b = synthesize(v, Ng);
  for (int j = 0; j < Ng; ++j) a[j] *= b[j];
  return grid_transform(a, Mout);
}

/// (1/2pi) int u^3 dx computed without aliasing.
inline double cubic_mean(const FourierSeries& u) {
  int Ng = 3 * u.M + 2;
  auto vals = synthesize(u, Ng);
  double s = 0;
  for (auto& v : vals) {
    double re = v.real();
    s += re * re * re;
  }
  return s / Ng;
}

// ---------------------------------------------------------------------------
// partial Fourier transforms over S-perp
// ---------------------------------------------------------------------------

/// Sparse coefficient vector over S^perp, keyed by mode index.
using PerpVector = std::map<int, cplx>;

/// (F^+_{NS}[q])_n = q_n for n >= NS+1, 0 on the rest of S^perp.
inline PerpVector partial_fourier(const FourierSeries& q, Sign sign, int NS) {
  PerpVector z;
  if (sign == Sign::plus) {
    for (int n = NS + 1; n <= q.M; ++n) z[n] = q.at(n);
  } else {
    for (int n = NS + 1; n <= q.M; ++n) z[-n] = q.at(-n);
  }
  return z;
}

/// (F^+_{NS})^{-1}: z -> sum_{n>=NS+1} z_n e^{inx};  (F^-_{NS})^{-1}: z -> sum_{n>=NS+1} z_{-n} e^{-inx}.
inline FourierSeries partial_fourier_inverse(const PerpVector& z, Sign sign, int NS, int M) {
  FourierSeries u(M);
  for (auto& [n, v] : z) {
    if (sign == Sign::plus && n >= NS + 1 && n <= M) u.at(n) = v;
    if (sign == Sign::minus && n <= -NS - 1 && -n <= M) u.at(n) = v;
  }
  return u;
}

// ---------------------------------------------------------------------------
// reversibility involution on the physical side
// ---------------------------------------------------------------------------

/// (S_rev u)(x) = u(-x): index flip of the coefficients.
inline FourierSeries s_rev(const FourierSeries& u) {
  FourierSeries v(u.M);
  for (int n = -u.M; n <= u.M; ++n) v.at(n) = u.at(-n);
  v.is_real = u.is_real;
  v.is_mean_zero = u.is_mean_zero;
  return v;
}

} // namespace bo
