#pragma once

#include "bo/fourier.hpp"

#include <vector>

namespace bo {

/// Admissible paraproduct cutoff chi(theta, eta) = psi(|theta|/(1+|eta|)) with
/// a smooth step psi: 1 on [0, eps1], 0 on [eps2, inf).
struct CutoffProfile {
  double eps1 = 0.25;
  double eps2 = 0.5;

  static double bump(double t) { return t > 0 ? std::exp(-1.0 / t) : 0.0; }

  double psi(double r) const {
    if (r <= eps1) return 1.0;
    if (r >= eps2) return 0.0;
    double t = (r - eps1) / (eps2 - eps1);
    double b0 = bump(1.0 - t), b1 = bump(t);
    return b0 / (b0 + b1);
  }

  double chi(double k, double n) const { return psi(std::abs(k) / (1.0 + std::abs(n))); }
};

/// (T_a u)(x) = sum_{k,n} chi(k,n) a_k u_n e^{i(k+n)x}, truncated at Mout.
inline FourierSeries paraproduct(const FourierSeries& a, const FourierSeries& u,
                                 const CutoffProfile& chi, int Mout = -1) {
  if (Mout < 0) Mout = std::max(a.M, u.M);
  FourierSeries out(Mout);
  for (int k = -a.M; k <= a.M; ++k) {
    cplx ak = a.at(k);
    if (ak == cplx(0.0)) continue;
    for (int n = -u.M; n <= u.M; ++n) {
      int m = k + n;
      if (std::abs(m) > Mout) continue;
      double w = chi.chi(k, n);
      if (w == 0.0) continue;
      out.at(m) += w * ak * u.at(n);
    }
  }
  out.detect_flags();
  return out;
}

/// Bony remainder R^(B)(a,b) = ab - T_a b - T_b a (ab exact, dealiased).
inline FourierSeries bony_remainder(const FourierSeries& a, const FourierSeries& b,
                                    const CutoffProfile& chi, int Mout = -1) {
  if (Mout < 0) Mout = a.M + b.M;
  FourierSeries ab = product(a, b, Mout);
  FourierSeries Tab = paraproduct(a, b, chi, Mout);
  FourierSeries Tba = paraproduct(b, a, chi, Mout);
  FourierSeries R(Mout);
  for (int m = -Mout; m <= Mout; ++m) R.at(m) = ab.at(m) - Tab.at(m) - Tba.at(m);
  R.detect_flags();
  return R;
}

// ---------------------------------------------------------------------------
// composition expansion of dx^{-k} o a dx^{-l}
// ---------------------------------------------------------------------------

/// Constants C_j(k,l) obtained by iterating the one-sided rule
/// dx^{-1} o a ~ sum_j (-1)^j (dx^j a) dx^{-1-j}; l only shifts the final
/// multiplier, so the coefficients close under the convolution recursion
/// c^(k)_j = sum_{i+i'=j} (-1)^i c^(k-1)_{i'}.
inline std::vector<double> pdo_constants(int k, int jmax) {
  std::vector<double> c(jmax + 1, 0.0);
  c[0] = 1.0; // k = 0: identity composition
  for (int step = 0; step < k; ++step) {
    std::vector<double> nxt(jmax + 1, 0.0);
    for (int j = 0; j <= jmax; ++j) {
      double acc = 0;
      double sgn = 1;
      for (int i = 0; i <= j; ++i) {
        acc += sgn * c[j - i];
        sgn = -sgn;
      }
      nxt[j] = acc;
    }
    c = nxt;
  }
  return c;
}

/// Expansion of dx^{-k} o a dx^{-l} to order N with an exact remainder
/// evaluator. The expansion reproduces the exact operator modulo the zero
/// mode, which the composition annihilates.
struct PdoExpansion {
  int k = 0, l = 0, N = 0;
  FourierSeries a;
  std::vector<double> C; // C_j, j = 0..N-k-l

  /// sum_j C_j (dx^j a) dx^{-k-l-j} h, exact products.
  FourierSeries apply_expansion(const FourierSeries& h, int Mout = -1) const {
    if (Mout < 0) Mout = a.M + h.M;
    FourierSeries out(Mout);
    for (int j = 0; j <= N - k - l; ++j) {
      FourierSeries term = product(dx_pow(a, j), dx_pow(h, -(k + l + j)), Mout);
      for (int m = -Mout; m <= Mout; ++m) out.at(m) += C[j] * term.at(m);
    }
    return out;
  }

  /// dx^{-k}[ a * dx^{-l} h ] computed exactly.
  FourierSeries apply_exact(const FourierSeries& h, int Mout = -1) const {
    if (Mout < 0) Mout = a.M + h.M;
    return dx_pow(product(a, dx_pow(h, -l), Mout), -k);
  }

  /// Remainder = exact - expansion (general (k,l)).
  FourierSeries remainder(const FourierSeries& h, int Mout = -1) const {
    if (Mout < 0) Mout = a.M + h.M;
    FourierSeries ex = apply_exact(h, Mout), ap = apply_expansion(h, Mout);
    FourierSeries r(Mout);
    for (int m = -Mout; m <= Mout; ++m) r.at(m) = ex.at(m) - ap.at(m);
    return r;
  }
};

inline PdoExpansion pdo_compose(int k, int l, const FourierSeries& a, int N) {
  if (k < 0 || l < 0) throw std::invalid_argument("pdo_compose: negative order");
  if (N < k + l) throw std::invalid_argument("pdo_compose: N < k+l");
  PdoExpansion e;
  e.k = k;
  e.l = l;
  e.N = N;
  e.a = a;
  e.C = pdo_constants(k, N - k - l);
  return e;
}

/// The displayed exact remainder for (k,l) = (1,0):
/// R(a)[h] = (-1)^N dx^{-1}[ (dx^N a) dx^{-N} h ] + (dx^{-1} a) <h|1>.
inline FourierSeries pdo_remainder_k1l0(const FourierSeries& a, int N, const FourierSeries& h,
                                        int Mout = -1) {
  if (Mout < 0) Mout = a.M + h.M;
  FourierSeries r = dx_pow(product(dx_pow(a, N), dx_pow(h, -N), Mout), -1);
  double sgn = (N % 2 == 0) ? 1.0 : -1.0;
  cplx h0 = h.coeff(0); // <h|1>
  FourierSeries ia = dx_pow(a, -1);
  FourierSeries out(Mout);
  for (int m = -Mout; m <= Mout; ++m) out.at(m) = sgn * r.at(m) + ia.coeff(m) * h0;
  return out;
}

// ---------------------------------------------------------------------------
// Hankel operators
// ---------------------------------------------------------------------------

/// H_u^+ : L^2_- -> L^2_+, f -> Pi^+(uf); f given in the minus convention
/// (f.c[p] is the coefficient of e^{-ipx}). H_u^- maps the other way.
inline HardyVector hankel_apply(const FourierSeries& u, Sign sign, const HardyVector& f) {
  HardyVector g(u.M);
  if (sign == Sign::plus) {
    for (int n = 0; n <= u.M; ++n) {
      cplx s = 0;
      for (int p = 0; p <= f.M; ++p) s += u.coeff(n + p) * f.c[p];
      g.c[n] = s;
    }
  } else {
    for (int n = 0; n <= u.M; ++n) {
      cplx s = 0;
      for (int p = 0; p <= f.M; ++p) s += u.coeff(-n - p) * f.c[p];
      g.c[n] = s;
    }
  }
  return g;
}

/// Rows of the smoothing sweep: ||H_u^{sign} e^{-ipx}||_{s+N} over p.
struct SmoothingRow {
  int p;
  double s;
  double norm;
};

inline std::vector<SmoothingRow> hankel_smoothing_sweep(const FourierSeries& u, Sign sign,
                                                        double s, int N, int p_lo, int p_hi) {
  std::vector<SmoothingRow> rows;
  for (int p = p_lo; p <= p_hi; ++p) {
    HardyVector f(p);
    f.c[p] = 1.0; // e^{-ipx} (minus convention) or e^{ipx} for H^-
    HardyVector g = hankel_apply(u, sign, f);
    rows.push_back({p, s, sobolev_norm(g, s + N)});
  }
  return rows;
}

} // namespace bo
