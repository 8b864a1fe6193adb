#pragma once

#include "bo/birkhoff.hpp"
#include "bo/fourier.hpp"
#include "bo/lax.hpp"

#include <vector>

namespace bo {

/// Moduli (r_j, alpha_j) of the closed-form finite-gap potential
/// u(x) = sum_j [ (1-r_j^2) / (1 - 2 r_j cos(x+alpha_j) + r_j^2) - 1 ].
struct FiniteGapParams {
  std::vector<double> r;
  std::vector<double> alpha;

  int N() const { return int(r.size()); }

  void validate(double margin = 1e-6) const {
    if (r.size() != alpha.size()) throw std::invalid_argument("FiniteGapParams: size mismatch");
    for (double rj : r)
      if (!(rj > margin && rj < 1.0 - margin))
        throw std::invalid_argument("FiniteGapParams: r out of (0,1)");
  }

  /// Fold negative r into an alpha shift by pi and wrap angles.
  void normalize() {
    for (size_t j = 0; j < r.size(); ++j) {
      if (r[j] < 0) {
        r[j] = -r[j];
        alpha[j] += pi;
      }
      alpha[j] = wrap_angle(alpha[j]);
    }
  }
};

/// Fourier coefficients u_m = sum_j r_j^{|m|} e^{i m alpha_j}, m != 0 (Poisson kernel).
inline FourierSeries build_potential(const FiniteGapParams& p, int M) {
  p.validate();
  FourierSeries u(M);
  for (int j = 0; j < p.N(); ++j) {
    cplx e = std::exp(cplx(0, p.alpha[j]));
    cplx f = p.r[j] * e;
    cplx pw = 1.0;
    for (int m = 1; m <= M; ++m) {
      pw *= f;
      u.at(m) += pw;
      u.at(-m) += std::conj(pw);
    }
  }
  u.is_real = true;
  u.is_mean_zero = true;
  return u;
}

/// g_inf = exp(i dx^{-1} q) evaluated on Ng grid points (unimodular there).
inline std::vector<cplx> g_infinity_grid(const FourierSeries& q, int Ng) {
  FourierSeries a = dx_pow(q, -1);
  auto av = synthesize(a, Ng);
  std::vector<cplx> g(Ng);
  for (int j = 0; j < Ng; ++j) g[j] = std::exp(cplx(0, av[j].real()));
  return g;
}

/// g_inf as a truncated series; the synthesis grid is padded so the returned
/// band is accurate to roundoff for geometrically decaying q.
inline FourierSeries g_infinity(const FourierSeries& q, int Mout) {
  int Ng = std::max(4 * std::max(q.M, Mout) + 3, 2 * Mout + 1);
  return grid_transform(g_infinity_grid(q, Ng), Mout);
}

// ---------------------------------------------------------------------------
// inversion of Psi_S on the finite-gap manifold
// ---------------------------------------------------------------------------

struct InvertOptions {
  int M = 48;           // Fourier truncation for the eigensolves
  int K = 96;           // Lax truncation
  double tol = 1e-9;    // residual target
  int max_iter = 40;
  double fd_step = 1e-6; // Gauss-Newton Jacobian step in (t_j, alpha_j)
};

struct InvertReport {
  double residual = 0;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

/// z_S entries of build_potential(p) for the modes in S_plus.
inline std::vector<cplx> zs_of_params(const FiniteGapParams& p, const std::vector<int>& S_plus,
                                      const InvertOptions& o) {
  FiniteGapParams q = p;
  q.normalize();
  LaxSpectrum s = lax_spectrum(build_potential(q, o.M), o.K);
  std::vector<cplx> out;
  for (int n : S_plus)
    out.push_back(std::sqrt(double(n)) * s.one_pair(n) / std::sqrt(s.kappas[n - 1]));
  return out;
}

inline double wrap_pm_pi(double t) {
  while (t > pi) t -= 2 * pi;
  while (t < -pi) t += 2 * pi;
  return t;
}

} // namespace detail

/// Tabulates gamma_1(r) for the one-gap family on a grid (monotone in r) and
/// inverts it by bisection; used to seed the Gauss-Newton iteration.
class OneGapCurve {
public:
  explicit OneGapCurve(int samples = 24, int K = 64) {
    rs_.resize(samples);
    gs_.resize(samples);
    for (int i = 0; i < samples; ++i) {
      double r = 0.02 + (0.95 - 0.02) * i / (samples - 1);
      FiniteGapParams p{{r}, {0.0}};
      LaxSpectrum s = lax_spectrum(build_potential(p, 48), K);
      rs_[i] = r;
      gs_[i] = s.gaps[0];
    }
  }

  double gamma(double r) const { return interp(rs_, gs_, r); }

  double r_of_gamma(double g) const {
    double lo = rs_.front(), hi = rs_.back();
    if (g <= gs_.front()) return lo;
    if (g >= gs_.back()) return hi;
    for (int it = 0; it < 60; ++it) {
      double mid = 0.5 * (lo + hi);
      (gamma(mid) < g ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }

private:
  static double interp(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
    if (x <= xs.front()) return ys.front();
    if (x >= xs.back()) return ys.back();
    auto it = std::upper_bound(xs.begin(), xs.end(), x);
    size_t i = it - xs.begin();
    double t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
    return (1 - t) * ys[i - 1] + t * ys[i];
  }
  std::vector<double> rs_, gs_;
};

/// Seed from the tabulated one-gap curve: r_j from gamma = I_j, and
/// alpha_j = theta_j + pi (the empirically observed one-gap phase map:
/// arg z_1 = alpha - pi).
inline FiniteGapParams seed_params(const ActionAngleState& target, const OneGapCurve& curve) {
  FiniteGapParams p;
  for (size_t j = 0; j < target.S_plus.size(); ++j) {
    p.r.push_back(curve.r_of_gamma(target.I[j]));
    p.alpha.push_back(wrap_angle(target.theta[j] + pi));
  }
  return p;
}

/// Gauss-Newton on the residual [gamma_n - I_n; arg z_n - theta_n]_{n in S_+}
/// over the unknowns (atanh r_j, alpha_j). Damped line search, Levenberg
/// fallback on rank deficiency.
inline FiniteGapParams invert_psi_S(const ActionAngleState& target, const FiniteGapParams& seed,
                                    InvertReport* report = nullptr,
                                    const InvertOptions& opts = {}) {
  const auto& S = target.S_plus;
  const int N = int(S.size());
  if (seed.N() != N) throw std::invalid_argument("invert_psi_S: seed size mismatch");
  for (double I : target.I)
    if (!(I > 0)) throw std::invalid_argument("invert_psi_S: target actions must be positive");

  // unknowns x = (t_1..t_N, alpha_1..alpha_N) with r_j = tanh(t_j)
  RVec x(2 * N);
  for (int j = 0; j < N; ++j) {
    x[j] = std::atanh(std::min(0.999999, std::max(1e-9, seed.r[j])));
    x[N + j] = seed.alpha[j];
  }
  auto params_of = [&](const RVec& xx) {
    FiniteGapParams p;
    for (int j = 0; j < N; ++j) {
      p.r.push_back(std::tanh(xx[j]));
      p.alpha.push_back(xx[N + j]);
    }
    p.normalize();
    return p;
  };
  auto resid = [&](const RVec& xx) {
    auto zs = detail::zs_of_params(params_of(xx), S, opts);
    RVec r(2 * N);
    for (int j = 0; j < N; ++j) {
      r[2 * j] = std::norm(zs[j]) / S[j] - target.I[j]; // gamma_n - I_n
      r[2 * j + 1] = detail::wrap_pm_pi(std::arg(zs[j]) - target.theta[j]);
    }
    return r;
  };

  RVec r0 = resid(x);
  int it = 0;
  for (; it < opts.max_iter && r0.norm() > opts.tol; ++it) {
    RMat Jc(2 * N, 2 * N);
    for (int j = 0; j < 2 * N; ++j) {
      RVec xp = x, xm = x;
      xp[j] += opts.fd_step;
      xm[j] -= opts.fd_step;
      Jc.col(j) = (resid(xp) - resid(xm)) / (2 * opts.fd_step);
    }
    Eigen::FullPivLU<RMat> lu(Jc);
    RVec step;
    if (lu.isInvertible()) {
      step = lu.solve(-r0);
    } else { // Levenberg fallback
      RMat A = Jc.transpose() * Jc + 1e-8 * RMat::Identity(2 * N, 2 * N);
      step = A.ldlt().solve(-Jc.transpose() * r0);
    }
    double t = 1.0;
    RVec xn;
    for (int ls = 0; ls < 12; ++ls) {
      xn = x + t * step;
      if (resid(xn).norm() < r0.norm()) break;
      t *= 0.5;
    }
    x = xn;
    r0 = resid(x);
  }
  if (report) {
    report->residual = r0.norm();
    report->iterations = it;
    report->converged = r0.norm() <= opts.tol;
  }
  if (r0.norm() > opts.tol && !report)
    throw NumericalError("invert_psi_S: no convergence, best residual " + std::to_string(r0.norm()));
  return params_of(x);
}

/// Convenience: invert with an automatically seeded start.
inline FiniteGapParams invert_psi_S_auto(const ActionAngleState& target, const OneGapCurve& curve,
                                         InvertReport* report = nullptr,
                                         const InvertOptions& opts = {}) {
  return invert_psi_S(target, seed_params(target, curve), report, opts);
}

} // namespace bo
