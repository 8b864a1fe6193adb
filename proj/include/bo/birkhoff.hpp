#pragma once

#include "bo/chart.hpp"
#include "bo/fourier.hpp"
#include "bo/lax.hpp"

#include <vector>

namespace bo {

/// Frequencies omega_n^bo(I) = n^2 - 2 sum_k min(n,k) I_k and the
/// normalized Omega_n = omega_n / n.
struct FrequencyTable {
  RVec omega; // omega[n-1], n = 1..size
  RVec Omega;

  double om(int n) const { return n > 0 ? omega[n - 1] : -omega[-n - 1]; }
  double Om(int n) const { return Omega[std::abs(n) - 1]; }
};

/// Action-angle chart point (theta_S, I_S, z_perp); z_perp keyed by the
/// positive mode index (negative side paired by conjugation).
struct ActionAngleState {
  std::vector<int> S_plus;
  std::vector<double> theta; // per n in S_plus, stored in [0, 2pi)
  std::vector<double> I;     // per n in S_plus, > 0
  std::map<int, cplx> z_perp;
};

inline double wrap_angle(double t) {
  double w = std::fmod(t, 2 * pi);
  return w < 0 ? w + 2 * pi : w;
}

/// z_{+-n} = sqrt(n I_n) e^{+-i theta_n} on S, z_perp on the complement.
inline BirkhoffVector action_angle_to_z(const ActionAngleState& s, int Mz) {
  BirkhoffVector z(Mz);
  for (size_t j = 0; j < s.S_plus.size(); ++j) {
    int n = s.S_plus[j];
    z.set(n, std::sqrt(n * s.I[j]) * std::exp(cplx(0, s.theta[j])));
  }
  for (auto& [n, v] : s.z_perp)
    if (n >= 1 && n <= Mz) z.set(n, v);
  return z;
}

inline ActionAngleState z_to_action_angle(const BirkhoffVector& z, const std::vector<int>& S_plus) {
  ActionAngleState s;
  s.S_plus = S_plus;
  for (int n : S_plus) {
    cplx zn = z.z(n);
    s.I.push_back(std::norm(zn) / n);
    s.theta.push_back(wrap_angle(std::arg(zn)));
  }
  for (int n = 1; n <= z.Mz; ++n)
    if (std::find(S_plus.begin(), S_plus.end(), n) == S_plus.end()) s.z_perp[n] = z.z(n);
  return s;
}

inline ActionAngleState s_rev(const ActionAngleState& s) {
  ActionAngleState r = s;
  for (auto& t : r.theta) t = wrap_angle(-t);
  for (auto& [n, v] : r.z_perp) v = std::conj(v);
  return r;
}

// ---------------------------------------------------------------------------
// forward Birkhoff map
// ---------------------------------------------------------------------------

/// z_n = sqrt(n) <1|f_n> / sqrt(kappa_n) from a phase-normalized spectrum.
inline BirkhoffVector birkhoff_from_spectrum(const LaxSpectrum& s, int Mz) {
  if (Mz > s.band) throw std::invalid_argument("birkhoff_from_spectrum: Mz outside trusted band");
  BirkhoffVector z(Mz);
  for (int n = 1; n <= Mz; ++n)
    z.pos[n - 1] = std::sqrt(double(n)) * s.one_pair(n) / std::sqrt(s.kappas[n - 1]);
  return z;
}

/// Forward map u -> (z_n): eigensolve at truncation K (default 4*Mz).
inline BirkhoffVector birkhoff_forward(const FourierSeries& u, int Mz, int K = -1) {
  if (K < 0) K = 4 * Mz;
  return birkhoff_from_spectrum(lax_spectrum(u, K), Mz);
}

/// I_n = z_n z_{-n} / n = |z_n|^2 / n.
inline RVec actions(const BirkhoffVector& z) {
  RVec I(z.Mz);
  for (int n = 1; n <= z.Mz; ++n) I[n - 1] = std::norm(z.pos[n - 1]) / n;
  return I;
}

inline FrequencyTable frequencies(const RVec& I, int nmax = -1) {
  int B = int(I.size());
  if (nmax < 0) nmax = B;
  FrequencyTable t;
  t.omega = RVec(nmax);
  t.Omega = RVec(nmax);
  for (int n = 1; n <= nmax; ++n) {
    double acc = 0;
    for (int k = 1; k <= B; ++k) acc += std::min(n, k) * I[k - 1];
    t.omega[n - 1] = double(n) * n - 2.0 * acc;
    t.Omega[n - 1] = t.omega[n - 1] / n;
  }
  return t;
}

// ---------------------------------------------------------------------------
// Hamiltonians in both charts
// ---------------------------------------------------------------------------

/// H^bo(u) = (1/2pi) int ( (1/2)(|dx|^{1/2} u)^2 - u^3/3 ) dx.
inline double hamiltonian_physical(const FourierSeries& u) {
  double quad = 0;
  for (int n = -u.M; n <= u.M; ++n) quad += std::abs(double(n)) * std::norm(u.at(n));
  return 0.5 * quad - cubic_mean(u) / 3.0;
}

/// H^mo(u) = (1/2pi) int u^2/2 dx.
inline double moment_physical(const FourierSeries& u) {
  double s = 0;
  for (int n = -u.M; n <= u.M; ++n) s += std::norm(u.at(n));
  return 0.5 * s;
}

/// H^bo in actions: sum n^2 I_n - sum_n (sum_{k>=n} I_k)^2.
inline double hamiltonian_in_actions(const RVec& I) {
  int B = int(I.size());
  double s1 = 0;
  for (int n = 1; n <= B; ++n) s1 += double(n) * n * I[n - 1];
  double s2 = 0, tail = 0;
  for (int n = B; n >= 1; --n) {
    tail += I[n - 1];
    s2 += tail * tail;
  }
  return s1 - s2;
}

inline double moment_in_actions(const RVec& I) {
  double s = 0;
  for (int n = 1; n <= int(I.size()); ++n) s += n * I[n - 1];
  return s;
}

// ---------------------------------------------------------------------------
// Jacobian of the forward map (central finite differences)
// ---------------------------------------------------------------------------

/// d Phi^bo(u) as a real matrix (2Mz x 2M) between the real charts of
/// chart.hpp. Step h defaults to 1e-5 * max(1, ||u||).
inline RMat jacobian_forward(const FourierSeries& u, int Mz, int K = -1, double h = -1.0) {
  if (h < 0) h = 1e-5 * std::max(1.0, l2_norm(u));
  const int M = u.M;
  RVec U0 = fs_to_real(u);
  RMat J(2 * Mz, 2 * M);
  for (int j = 0; j < 2 * M; ++j) {
    RVec Up = U0, Um = U0;
    Up[j] += h;
    Um[j] -= h;
    BirkhoffVector zp = birkhoff_forward(real_to_fs(Up), Mz, K);
    BirkhoffVector zm = birkhoff_forward(real_to_fs(Um), Mz, K);
    J.col(j) = (z_to_real(zp) - z_to_real(zm)) / (2 * h);
  }
  return J;
}

/// Column of (d Phi^bo)^{-1} at the complex basis vector e^{(n)}, i.e. W_n,
/// computed from a square real Jacobian (Mz == M required).
inline FourierSeries w_from_jacobian(const RMat& J, int n) {
  const int M = int(J.cols()) / 2;
  if (J.rows() != J.cols()) throw std::invalid_argument("w_from_jacobian: Jacobian must be square");
  Eigen::PartialPivLU<RMat> lu(J);
  RVec eE = RVec::Zero(2 * M), eF = RVec::Zero(2 * M);
  int a = std::abs(n);
  eE[2 * (a - 1)] = 1.0;
  eF[2 * (a - 1) + 1] = 1.0;
  RVec wE = lu.solve(eE), wF = lu.solve(eF);
  FourierSeries uE = real_to_fs(wE), uF = real_to_fs(wF);
  FourierSeries W(M);
  // e^{(n)} = (E - iF)/2 with E,F the real coordinate directions at |n|.
  for (int m = -M; m <= M; ++m) W.at(m) = 0.5 * (uE.at(m) - cplx(0, 1) * uF.at(m));
  if (n < 0) { // W_{-|n|}(x) = conj(W_{|n|}(x))
    FourierSeries V(M);
    for (int m = -M; m <= M; ++m) V.at(m) = std::conj(W.at(-m));
    W = V;
  }
  W.detect_flags();
  return W;
}

/// Poisson structure through the chart: the matrix of {z_a, z_b} assembled
/// from gradients recovered from the Jacobian; canonically {z_n, z_{-n}} = -i n.
inline Mat poisson_matrix(const RMat& J) {
  const int Mz = int(J.rows()) / 2, M = int(J.cols()) / 2;
  // gradients: dz_n[v] = <grad z_n, v> = sum_k g_k v_{-k}; recover g from the
  // action on the real coordinate directions:
  // E_m: v_m = 1, v_{-m} = 1;  F_m: v_m = i, v_{-m} = -i.
  // <g, E_m> = g_m + g_{-m},  <g, F_m> = i(g_{-m} - g_m)
  //  => g_m = (<g,E_m> + i <g,F_m>)/2,  g_{-m} = (<g,E_m> - i <g,F_m>)/2.
  std::vector<Vec> grads(2 * Mz, Vec::Zero(2 * M + 1)); // grad of z_n (n=1..Mz) and z_{-n}
  for (int n = 1; n <= Mz; ++n) {
    for (int m = 1; m <= M; ++m) {
      cplx dE(J(2 * (n - 1), 2 * (m - 1)), J(2 * (n - 1) + 1, 2 * (m - 1)));
      cplx dF(J(2 * (n - 1), 2 * (m - 1) + 1), J(2 * (n - 1) + 1, 2 * (m - 1) + 1));
      Vec& g = grads[n - 1];
      g[M + m] = 0.5 * (dE + cplx(0, 1) * dF);
      g[M - m] = 0.5 * (dE - cplx(0, 1) * dF);
      Vec& gc = grads[Mz + n - 1]; // z_{-n} = conj(z_n): d z_{-n}[v] = conj(d z_n[v]) for real v
      gc[M + m] = 0.5 * (std::conj(dE) + cplx(0, 1) * std::conj(dF));
      gc[M - m] = 0.5 * (std::conj(dE) - cplx(0, 1) * std::conj(dF));
    }
  }
  auto bracket_of = [&](const Vec& ga, const Vec& gb) {
    cplx s = 0; // <dx grad a, grad b> = sum_k (ik) ga_k gb_{-k}
    for (int k = -M; k <= M; ++k) s += cplx(0, double(k)) * ga[M + k] * gb[M - k];
    return s;
  };
  Mat P(2 * Mz, 2 * Mz); // order: z_1..z_Mz, z_{-1}..z_{-Mz}
  for (int a = 0; a < 2 * Mz; ++a)
    for (int b = 0; b < 2 * Mz; ++b) P(a, b) = bracket_of(grads[a], grads[b]);
  return P;
}

} // namespace bo
