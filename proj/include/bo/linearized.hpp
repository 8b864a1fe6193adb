#pragma once

#include "bo/birkhoff.hpp"
#include "bo/chart.hpp"
#include "bo/finite_gap.hpp"

#include <map>
#include <vector>

namespace bo {

// ---------------------------------------------------------------------------
// truncated power series in t = 1/n (real coefficients, fixed order)
// ---------------------------------------------------------------------------

struct PowerSeries {
  std::vector<double> a; // a[k] = coefficient of t^k

  explicit PowerSeries(int order = 0) : a(order + 1, 0.0) {}
  static PowerSeries constant(double c, int order) {
    PowerSeries s(order);
    s.a[0] = c;
    return s;
  }
  int order() const { return int(a.size()) - 1; }

  PowerSeries operator+(const PowerSeries& o) const {
    PowerSeries s(order());
    for (int k = 0; k <= order(); ++k) s.a[k] = a[k] + o.a[k];
    return s;
  }
  PowerSeries operator*(const PowerSeries& o) const {
    PowerSeries s(order());
    for (int i = 0; i <= order(); ++i)
      for (int j = 0; i + j <= order(); ++j) s.a[i + j] += a[i] * o.a[j];
    return s;
  }
  PowerSeries scaled(double c) const {
    PowerSeries s = *this;
    for (auto& v : s.a) v *= c;
    return s;
  }
  /// log of a series with positive constant term (S T' = S' recurrence).
  PowerSeries log() const {
    PowerSeries T(order());
    T.a[0] = std::log(a[0]);
    for (int n = 1; n <= order(); ++n) {
      double acc = a[n];
      for (int k = 1; k < n; ++k) acc -= (double(k) / n) * T.a[k] * a[n - k];
      T.a[n] = acc / a[0];
    }
    return T;
  }
  PowerSeries exp() const {
    PowerSeries E(order());
    E.a[0] = std::exp(a[0]);
    for (int n = 1; n <= order(); ++n) {
      double acc = 0;
      for (int k = 1; k <= n; ++k) acc += k * a[k] * E.a[n - k];
      E.a[n] = acc / n;
    }
    return E;
  }
  PowerSeries pow(double expnt) const { return log().scaled(expnt).exp(); }
  /// 1/(1 - lambda t) as a building block.
  static PowerSeries geometric(double lambda, int order) {
    PowerSeries s(order);
    double p = 1;
    for (int k = 0; k <= order; ++k) {
      s.a[k] = p;
      p *= lambda;
    }
    return s;
  }
  double eval(double t) const {
    double s = 0;
    for (int k = order(); k >= 0; --k) s = s * t + a[k];
    return s;
  }
};

// ---------------------------------------------------------------------------
// spectral bundle at a finite-gap potential
// ---------------------------------------------------------------------------

struct BundleSizes {
  int M = 48;   // Fourier truncation of functions
  int K = 96;   // Lax truncation
  int Ng = 256; // working grid (>= 2M+1 and enough for pointwise products)
};

/// Everything the W_n formulas need at one finite-gap base point: spectrum,
/// g_inf, the S_0-eigenfunction grids and pairings.
struct FiniteGapBundle {
  FiniteGapParams p;
  std::vector<int> S_plus;
  BundleSizes sz;
  FourierSeries q;
  LaxSpectrum spec;
  std::vector<cplx> g;               // g_inf on grid
  std::vector<cplx> qg;              // q on grid
  std::vector<int> S0;               // S_+ and 0
  std::map<int, std::vector<cplx>> f_grid, Df_grid;
  std::map<int, cplx> one_f;         // <1|f_l>

  std::vector<cplx> zS() const {
    std::vector<cplx> out;
    for (int n : S_plus)
      out.push_back(std::sqrt(double(n)) * spec.one_pair(n) / std::sqrt(spec.kappas[n - 1]));
    return out;
  }
  RVec I_S() const {
    auto z = zS();
    RVec I(z.size());
    for (size_t j = 0; j < z.size(); ++j) I[j] = std::norm(z[j]) / S_plus[j];
    return I;
  }
};

inline FiniteGapBundle make_bundle(const FiniteGapParams& p, const std::vector<int>& S_plus,
                                   const BundleSizes& sz = {}) {
  FiniteGapBundle b;
  b.p = p;
  b.S_plus = S_plus;
  b.sz = sz;
  b.q = build_potential(p, sz.M);
  b.spec = lax_spectrum(b.q, sz.K);
  b.g = g_infinity_grid(b.q, sz.Ng);
  auto qv = synthesize(b.q, sz.Ng);
  b.qg = qv;
  b.S0 = {0};
  for (int n : S_plus) b.S0.push_back(n);
  auto x = grid_points(sz.Ng);
  for (int l : b.S0) {
    std::vector<cplx> fl(sz.Ng, 0.0), Dfl(sz.Ng, 0.0);
    for (int j = 0; j < sz.Ng; ++j) {
      const cplx step = std::exp(cplx(0, x[j]));
      cplx cur = 1.0;
      for (int m = 0; m <= sz.K; ++m) {
        cplx cm = b.spec.efs(m, l);
        fl[j] += cm * cur;
        Dfl[j] += double(m) * cm * cur;
        cur *= step;
      }
    }
    b.f_grid[l] = std::move(fl);
    b.Df_grid[l] = std::move(Dfl);
    b.one_f[l] = b.spec.one_pair(l);
  }
  return b;
}

// ---------------------------------------------------------------------------
// analytic W_n
// ---------------------------------------------------------------------------

/// W_{+n} for n >= N_S+1 from the closed formula
///   W_n = -e^{inx} (n kappa_n)^{-1/2} sum_{l in S_0}
///         conj(<1|f_l>)/(1-lambda_l/n) [ g conj(f_l) + q g conj(f_l)/n - g conj(D f_l)/n ].
/// Negative index returns the conjugate series.
inline FourierSeries w_analytic(const FiniteGapBundle& b, int n, int Mout = -1) {
  int NS = 0;
  for (int s : b.S_plus) NS = std::max(NS, s);
  int an = std::abs(n);
  if (an < NS + 1) throw std::invalid_argument("w_analytic: index below N_S+1");
  if (an > b.spec.band) throw std::invalid_argument("w_analytic: index outside trusted band");
  if (Mout < 0) Mout = b.sz.M;
  const int Ng = b.sz.Ng;
  auto x = grid_points(Ng);
  std::vector<cplx> tot(Ng, 0.0);
  for (int l : b.S0) {
    cplx w = std::conj(b.one_f.at(l)) / (1.0 - b.spec.lambdas[l] / an);
    const auto& fl = b.f_grid.at(l);
    const auto& Dfl = b.Df_grid.at(l);
    for (int j = 0; j < Ng; ++j) {
      cplx base = b.g[j] * std::conj(fl[j]);
      tot[j] += w * (base + b.qg[j].real() * base / double(an) -
                     b.g[j] * std::conj(Dfl[j]) / double(an));
    }
  }
  double nk = an * b.spec.kappas[an - 1];
  std::vector<cplx> vals(Ng);
  for (int j = 0; j < Ng; ++j) vals[j] = -std::exp(cplx(0, an * x[j])) / std::sqrt(nk) * tot[j];
  FourierSeries W = grid_transform(vals, Mout);
  if (n < 0) {
    FourierSeries V(Mout);
    for (int m = -Mout; m <= Mout; ++m) V.at(m) = std::conj(W.at(-m));
    return V;
  }
  return W;
}

// ---------------------------------------------------------------------------
// W family over S-perp: analytic where available, Jacobian-inverse for the
// small complement indices |n| <= N_S.
// ---------------------------------------------------------------------------

struct WFamily {
  std::vector<int> S_plus;
  int Mz = 0;
  int Mout = 0;
  std::map<int, FourierSeries> W; // positive perp indices only; W_{-n} = conj W_n

  const FourierSeries& at(int n) const {
    auto it = W.find(std::abs(n));
    if (it == W.end()) throw std::invalid_argument("WFamily: missing index " + std::to_string(n));
    return it->second;
  }
  FourierSeries get(int n) const {
    const FourierSeries& Wp = at(std::abs(n));
    if (n > 0) return Wp;
    FourierSeries V(Wp.M);
    for (int m = -Wp.M; m <= Wp.M; ++m) V.at(m) = std::conj(Wp.at(-m));
    return V;
  }
};

inline WFamily make_w_family(const FiniteGapBundle& b, int Mz, int Mout = -1) {
  if (Mout < 0) Mout = b.sz.M;
  WFamily F;
  F.S_plus = b.S_plus;
  F.Mz = Mz;
  F.Mout = Mout;
  int NS = 0;
  for (int s : b.S_plus) NS = std::max(NS, s);
  bool need_jac = false;
  for (int n = 1; n <= std::min(NS, Mz); ++n)
    if (std::find(b.S_plus.begin(), b.S_plus.end(), n) == b.S_plus.end()) need_jac = true;
  RMat J;
  if (need_jac) J = jacobian_forward(b.q, b.sz.M, b.sz.K);
  for (int n = 1; n <= Mz; ++n) {
    if (std::find(b.S_plus.begin(), b.S_plus.end(), n) != b.S_plus.end()) continue;
    F.W[n] = (n >= NS + 1) ? w_analytic(b, n, Mout) : w_from_jacobian(J, n);
  }
  return F;
}

/// Psi_1(z_S)[z_perp] = sum_{n in S_perp} z_n W_n; real for real-type z.
inline FourierSeries psi1_apply(const WFamily& F, const BirkhoffVector& z_perp) {
  FourierSeries out(F.Mout);
  for (auto& [n, Wn] : F.W) {
    cplx zn = z_perp.z(n);
    if (zn == cplx(0.0)) continue;
    for (int m = -F.Mout; m <= F.Mout; ++m) {
      cplx w = Wn.coeff(m);
      // z_n W_n + z_{-n} W_{-n} = 2 Re(z_n W_n) coefficientwise paired
      out.at(m) += zn * w + std::conj(zn * Wn.coeff(-m));
    }
  }
  out.detect_flags();
  return out;
}

/// Psi_1^T: q_hat -> ( <W_{-n}, q_hat> )_{n in S_perp} (bilinear pairing).
inline std::map<int, cplx> psi1_transpose(const WFamily& F, const FourierSeries& q_hat) {
  std::map<int, cplx> out;
  for (auto& [n, Wn] : F.W) {
    cplx sp = 0, sm = 0;
    for (int m = -std::min(F.Mout, q_hat.M); m <= std::min(F.Mout, q_hat.M); ++m) {
      sm += Wn.coeff(m) * q_hat.coeff(-m);             // <W_n, q_hat> -> entry -n
      sp += std::conj(Wn.coeff(-m)) * q_hat.coeff(-m); // <W_{-n}, q_hat> -> entry n
    }
    out[n] = sp;
    out[-n] = sm;
  }
  return out;
}

// ---------------------------------------------------------------------------
// asymptotic expansion of W_{+-n}
// ---------------------------------------------------------------------------

/// Coefficients c_{l,k} of (n kappa_n)^{-1/2} (1 - lambda_l/n)^{-1} as a series
/// in 1/n, and the expansion functions W_k^{ae,+}.
struct ExpansionTable {
  int N = 0;
  std::vector<int> S0;
  std::map<int, std::vector<double>> c; // c[l][k], k = 0..N+1 (c_{l,0} = 1)
  std::vector<FourierSeries> Wae_plus;  // k = 0..N
  FourierSeries Wae_minus(int k) const {
    const FourierSeries& W = Wae_plus[k];
    FourierSeries V(W.M);
    for (int m = -W.M; m <= W.M; ++m) V.at(m) = std::conj(W.at(-m));
    return V;
  }
};

inline ExpansionTable expansion_coeffs(const FiniteGapBundle& b, int N, int Mout = -1) {
  if (Mout < 0) Mout = b.sz.M;
  const int ord = N + 2;
  ExpansionTable T;
  T.N = N;
  T.S0 = b.S0;
  // (n kappa_n)^{-1/2} = (1 - lambda_0 t)^{1/2} prod_j (1 + gamma_j t/(1-lambda_j t))^{-1/2},  t = 1/n
  PowerSeries A = PowerSeries::constant(1.0, ord);
  {
    PowerSeries one = PowerSeries::constant(1.0, ord);
    PowerSeries lam0t(ord);
    lam0t.a[0] = 1.0;
    lam0t.a[1] = -b.spec.lambdas[0];
    A = A * lam0t.pow(0.5);
    for (int j : b.S_plus) {
      double gj = b.spec.gaps[j - 1], lj = b.spec.lambdas[j];
      PowerSeries t_geo = PowerSeries::geometric(lj, ord); // 1/(1-lambda_j t)
      PowerSeries inner(ord);
      inner.a[0] = 1.0;
      for (int k = 1; k <= ord; ++k) inner.a[k] = gj * t_geo.a[k - 1]; // 1 + gamma_j t/(1-lambda_j t)
      A = A * inner.pow(-0.5);
    }
  }
  for (int l : b.S0) {
    PowerSeries E = A * PowerSeries::geometric(b.spec.lambdas[l], ord);
    T.c[l] = E.a;
  }
  // W_k^{ae,+} = g sum_l c_{l,k} conj(<1|f_l> f_l) + q g sum_l c_{l,k-1} conj(<1|f_l> f_l)
  //              - g sum_l c_{l,k-1} conj(<1|f_l> D f_l)
  const int Ng = b.sz.Ng;
  for (int k = 0; k <= N; ++k) {
    std::vector<cplx> vals(Ng, 0.0);
    for (int l : b.S0) {
      double ck = T.c[l][k];
      double ckm1 = (k == 0) ? 0.0 : T.c[l][k - 1]; // c_{l,-1} = 0
      cplx ofl = b.one_f.at(l);
      const auto& fl = b.f_grid.at(l);
      const auto& Dfl = b.Df_grid.at(l);
      for (int j = 0; j < Ng; ++j) {
        vals[j] += b.g[j] * (ck * std::conj(ofl * fl[j]) + ckm1 * b.qg[j].real() * std::conj(ofl * fl[j]) -
                             ckm1 * std::conj(ofl * Dfl[j]));
      }
    }
    T.Wae_plus.push_back(grid_transform(vals, Mout));
  }
  return T;
}

/// Remainder-decay fit: slope of log || -e^{-inx} W_n - sum_{k<=N} Wae_k / n^k ||
/// against log n over n in [n_lo, n_hi]; an order-N expansion gives -(N+1).
struct DecayFit {
  double slope = 0;
  std::vector<int> n;
  std::vector<double> norm;
};

inline DecayFit remainder_decay(const FiniteGapBundle& b, int N, int n_lo, int n_hi,
                                const ExpansionTable* table = nullptr) {
  ExpansionTable local;
  if (!table) {
    local = expansion_coeffs(b, N);
    table = &local;
  }
  if (n_hi <= n_lo) throw std::invalid_argument("remainder_decay: empty range");
  DecayFit fit;
  for (int n = n_lo; n <= n_hi; ++n) {
    // W_n is concentrated near mode n: widen its band so the e^{-inx} shift
    // stays inside it
    int Mw = std::min(b.sz.M + n, (b.sz.Ng - 2) / 2);
    FourierSeries Wn = w_analytic(b, n, Mw);
    // E_n(x) = -e^{-inx} W_n : coefficient m of E_n is -(W_n)_{m+n}
    FourierSeries E(b.sz.M);
    for (int m = -E.M; m <= E.M; ++m) E.at(m) = -Wn.coeff(m + n);
    for (int k = 0; k <= N; ++k) {
      const FourierSeries& Wk = table->Wae_plus[k];
      double nk = std::pow(double(n), k);
      for (int m = -E.M; m <= E.M; ++m) E.at(m) -= Wk.coeff(m) / nk;
    }
    fit.n.push_back(n);
    fit.norm.push_back(l2_norm(E));
  }
  // least-squares slope in log-log
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = int(fit.n.size());
  for (int i = 0; i < m; ++i) {
    double lx = std::log(double(fit.n[i])), ly = std::log(std::max(fit.norm[i], 1e-300));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  double den = m * sxx - sx * sx;
  if (std::abs(den) < 1e-14) throw NumericalError("remainder_decay: degenerate fit range");
  fit.slope = (m * sxy - sx * sy) / den;
  return fit;
}

/// Log-log least-squares slope helper for scaling fits.
inline double loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = int(xs.size());
  for (int i = 0; i < m; ++i) {
    double lx = std::log(xs[i]), ly = std::log(std::max(ys[i], 1e-300));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

// ---------------------------------------------------------------------------
// Psi_L
// ---------------------------------------------------------------------------

/// Psi_L(z) = Psi^bo(z_S, 0) + sum_{n in S_perp} z_n W_n at a prepared bundle
/// (the bundle fixes z_S through its finite-gap parameters).
inline FourierSeries psi_L(const FiniteGapBundle& b, const WFamily& F, const BirkhoffVector& z) {
  BirkhoffVector zperp = z;
  for (int n : b.S_plus)
    if (n <= zperp.Mz) zperp.set(n, 0.0);
  FourierSeries out = psi1_apply(F, zperp);
  for (int m = -out.M; m <= out.M; ++m) out.at(m) += b.q.coeff(m);
  out.detect_flags();
  return out;
}

} // namespace bo
