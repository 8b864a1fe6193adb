#pragma once

#include "bo/birkhoff.hpp"
#include "bo/fourier.hpp"

#include <functional>
#include <vector>

namespace bo {

/// Pseudo-spectral time stepper for dt u = dx(|dx| u - u^2), used as an
/// independent dynamical oracle. Exponential time differencing (ETDRK4) with
/// the linear symbol e^{i n|n| dt} treated exactly and 2/3-rule dealiasing.
struct EvolutionConfig {
  double dt = 1e-3;
  double T = 1.0;
  int M = 48;
  bool dealias = true;
  double blowup_factor = 10.0;

  /// The linear part is integrated exactly; this bound keeps the dealiased
  /// quadratic term inside the scheme's empirical stability region.
  void validate(double threshold = 500.0) const {
    if (dt <= 0 || T == 0 || M < 1) throw std::invalid_argument("EvolutionConfig: bad dt/T/M");
    if (dt * M * M > threshold)
      throw std::invalid_argument("EvolutionConfig: dt*M^2 above stability threshold");
  }
};

namespace detail {

/// phi functions phi1(z) = (e^z-1)/z, phi2, phi3 evaluated by averaging the
/// closed forms over a unit contour around z (stable near z = 0).
inline void phi_contour(cplx z, cplx& phi1, cplx& phi2, cplx& phi3) {
  const int Q = 32;
  phi1 = phi2 = phi3 = 0;
  for (int q = 0; q < Q; ++q) {
    cplx zeta = z + std::exp(cplx(0, 2.0 * pi * (q + 0.5) / Q));
    cplx ez = std::exp(zeta);
    cplx z2 = zeta * zeta, z3 = z2 * zeta;
    phi1 += (ez - 1.0) / zeta;
    phi2 += (ez - 1.0 - zeta) / z2;
    phi3 += (ez - 1.0 - zeta - 0.5 * z2) / z3;
  }
  phi1 /= Q;
  phi2 /= Q;
  phi3 /= Q;
}

struct EtdTables {
  Vec E, E2, Q, f1, f2, f3;
};

inline EtdTables etd_tables(int M, double dt) {
  int n_modes = 2 * M + 1;
  EtdTables t;
  t.E = Vec(n_modes);
  t.E2 = Vec(n_modes);
  t.Q = Vec(n_modes);
  t.f1 = Vec(n_modes);
  t.f2 = Vec(n_modes);
  t.f3 = Vec(n_modes);
  for (int n = -M; n <= M; ++n) {
    cplx L = cplx(0, double(n) * std::abs(double(n))); // i n |n|
    cplx z = dt * L;
    t.E[n + M] = std::exp(z);
    t.E2[n + M] = std::exp(0.5 * z);
    cplx p1h, p2h, p3h, p1, p2, p3;
    phi_contour(0.5 * z, p1h, p2h, p3h);
    phi_contour(z, p1, p2, p3);
    t.Q[n + M] = 0.5 * dt * p1h;
    // Cox-Matthews weights: f1 = phi1 - 3 phi2 + 4 phi3, f2 = 2 phi2 - 4 phi3,
    // f3 = -phi2 + 4 phi3 (all times dt).
    t.f1[n + M] = dt * (p1 - 3.0 * p2 + 4.0 * p3);
    t.f2[n + M] = dt * (2.0 * p2 - 4.0 * p3);
    t.f3[n + M] = dt * (-p2 + 4.0 * p3);
  }
  return t;
}

} // namespace detail

/// One trajectory; frames are sampled every `stride` steps (always including
/// t=0 and t=T).
struct Trajectory {
  std::vector<double> t;
  std::vector<FourierSeries> u;
};

inline Trajectory evolve(const FourierSeries& u0, const EvolutionConfig& cfg, int stride = 0) {
  cfg.validate();
  if (u0.reality_defect() > 1e-9) throw std::invalid_argument("evolve: u0 must be real");
  if (std::abs(u0.at(0)) > 1e-12) throw std::invalid_argument("evolve: u0 must be mean-zero");
  const int M = cfg.M;
  const int n_modes = 2 * M + 1;
  // 2/3-rule grid: modes |n| <= M kept exactly when Ng >= 3M+1
  const int Ng = cfg.dealias ? (3 * M + 2) : (2 * M + 2);

  Vec v = Vec::Zero(n_modes);
  for (int n = -std::min(M, u0.M); n <= std::min(M, u0.M); ++n) v[n + M] = u0.at(n);

  long steps = std::lround(cfg.T / cfg.dt);
  if (steps < 1) steps = 1;
  double dt = cfg.T / double(steps);
  auto tables = detail::etd_tables(M, dt);

  double norm0 = v.norm();
  auto nonlin = [&](const Vec& w) {
    FourierSeries s(M);
    s.c = w;
    auto vals = synthesize(s, Ng);
    std::vector<cplx> sq(Ng);
    for (int j = 0; j < Ng; ++j) {
      double re = vals[j].real();
      sq[j] = re * re;
    }
    FourierSeries w2 = grid_transform(sq, M);
    Vec out(n_modes);
    for (int n = -M; n <= M; ++n) out[n + M] = cplx(0, -double(n)) * w2.at(n); // -dx(u^2)
    out[M] = 0.0; // mean stays zero exactly
    return out;
  };

  Trajectory traj;
  auto record = [&](double t, const Vec& w) {
    FourierSeries s(M);
    s.c = w;
    s.enforce_reality();
    s.at(0) = 0.0;
    s.is_mean_zero = true;
    traj.t.push_back(t);
    traj.u.push_back(s);
  };
  record(0.0, v);

  for (long s = 0; s < steps; ++s) {
    Vec Nv = nonlin(v);
    Vec a = tables.E2.cwiseProduct(v) + tables.Q.cwiseProduct(Nv);
    Vec Na = nonlin(a);
    Vec b = tables.E2.cwiseProduct(v) + tables.Q.cwiseProduct(Na);
    Vec Nb = nonlin(b);
    Vec c = tables.E2.cwiseProduct(a) + tables.Q.cwiseProduct(2.0 * Nb - Nv);
    Vec Nc = nonlin(c);
    v = tables.E.cwiseProduct(v) + tables.f1.cwiseProduct(Nv) +
        tables.f2.cwiseProduct(Na + Nb) + tables.f3.cwiseProduct(Nc);
    v[M] = 0.0;
    if (v.norm() > cfg.blowup_factor * std::max(norm0, 1e-12))
      throw NumericalError("evolve: blow-up detected at t=" + std::to_string((s + 1) * dt));
    if (stride > 0 && (s + 1) % stride == 0 && s + 1 < steps) record((s + 1) * dt, v);
  }
  record(cfg.T, v);
  return traj;
}

// ---------------------------------------------------------------------------
// Birkhoff-phase verification against the dynamics oracle
// ---------------------------------------------------------------------------

struct PhaseReport {
  double max_phase_defect = 0; // max_n |zeta_n(t) - e^{i om_n t} zeta_n(0)| over samples
  double max_gap_drift = 0;    // max |gamma_n(t) - gamma_n(0)|
  double max_H_drift = 0;      // |H^bo(t) - H^bo(0)|
  double max_mo_drift = 0;
  std::vector<double> t;
  std::vector<double> phase_defect;
};

/// Evolve u0, compare zeta_n(u(t)) with e^{i omega_n t} zeta_n(u0) for
/// n in S_plus, with omega from frequencies(actions).
inline PhaseReport phase_verify(const FourierSeries& u0, const std::vector<int>& S_plus,
                                const EvolutionConfig& cfg, int samples, int K, int Mz) {
  int total_steps = int(std::lround(cfg.T / cfg.dt));
  int stride = std::max(1, total_steps / samples);
  Trajectory traj = evolve(u0, cfg, stride);

  LaxSpectrum s0 = lax_spectrum(u0, K);
  BirkhoffVector z0 = birkhoff_from_spectrum(s0, Mz);
  RVec I0 = actions(z0);
  FrequencyTable freq = frequencies(I0);
  double H0 = hamiltonian_physical(traj.u.front());
  double m0 = moment_physical(traj.u.front());

  PhaseReport rep;
  for (size_t i = 0; i < traj.t.size(); ++i) {
    double t = traj.t[i];
    LaxSpectrum st = lax_spectrum(traj.u[i], K);
    BirkhoffVector zt = birkhoff_from_spectrum(st, Mz);
    double defect = 0;
    for (int n : S_plus) {
      cplx pred = std::exp(cplx(0, freq.om(n) * t)) * z0.z(n) / std::sqrt(double(n));
      cplx got = zt.z(n) / std::sqrt(double(n));
      defect = std::max(defect, std::abs(got - pred));
    }
    for (int n = 1; n <= Mz; ++n)
      rep.max_gap_drift = std::max(rep.max_gap_drift, std::abs(st.gaps[n - 1] - s0.gaps[n - 1]));
    rep.max_phase_defect = std::max(rep.max_phase_defect, defect);
    rep.max_H_drift = std::max(rep.max_H_drift, std::abs(hamiltonian_physical(traj.u[i]) - H0));
    rep.max_mo_drift = std::max(rep.max_mo_drift, std::abs(moment_physical(traj.u[i]) - m0));
    rep.t.push_back(t);
    rep.phase_defect.push_back(defect);
  }
  return rep;
}

/// Isospectral-torus check: |z_n| constant along the flow for all n <= Mz.
inline double torus_drift(const Trajectory& traj, int K, int Mz) {
  BirkhoffVector z0 = birkhoff_from_spectrum(lax_spectrum(traj.u.front(), K), Mz);
  double drift = 0;
  for (size_t i = 1; i < traj.u.size(); ++i) {
    BirkhoffVector zt = birkhoff_from_spectrum(lax_spectrum(traj.u[i], K), Mz);
    for (int n = 1; n <= Mz; ++n)
      drift = std::max(drift, std::abs(std::abs(zt.z(n)) - std::abs(z0.z(n))));
  }
  return drift;
}

} // namespace bo
