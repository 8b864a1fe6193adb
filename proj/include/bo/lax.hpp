#pragma once

#include "bo/fourier.hpp"

#include <Eigen/Eigenvalues>

#include <sstream>
#include <vector>

namespace bo {

/// Spectral data of the truncated Lax operator L_u = D - T_u on the Hardy
/// space, eigenvalues sorted increasingly. Gaps gamma_n = lambda_n -
/// lambda_{n-1} - 1. Only indices n <= band are trusted; truncation pollutes
/// the top of the spectrum.
struct LaxSpectrum {
  int K = 0;    // matrix indices 0..K
  int band = 0; // trusted band, default K/2
  RVec lambdas; // size K+1
  RVec gaps;    // gaps[n-1] = gamma_n, n = 1..K
  Mat efs;      // column n = coefficients of f_n over e^{imx}, m = 0..K
  RVec kappas;  // kappas[n-1] = kappa_n, n = 1..band (filled by compute_kappas)
  bool phases_normalized = false;

  HardyVector eigenfunction(int n) const {
    HardyVector f(K);
    f.c = efs.col(n);
    return f;
  }
  /// <1|f_n> = conj of the zero-mode coefficient of f_n.
  cplx one_pair(int n) const { return std::conj(efs(0, n)); }
};

/// Matrix of L_u on span{e^{imx} : 0 <= m <= K}: L(m,n) = n delta_{mn} - u_{m-n}.
inline Mat assemble_lax(const FourierSeries& u, int K) {
  if (u.reality_defect() > 1e-9) throw std::invalid_argument("assemble_lax: u must be real");
  if (std::abs(u.at(0)) > 1e-12) throw std::invalid_argument("assemble_lax: u must be mean-zero");
  Mat L = Mat::Zero(K + 1, K + 1);
  for (int m = 0; m <= K; ++m)
    for (int n = 0; n <= K; ++n) {
      if (m == n) L(m, n) = double(n);
      L(m, n) -= u.coeff(m - n);
    }
  return L;
}

inline LaxSpectrum diagonalize(const Mat& L, int band = -1) {
  const int K = int(L.rows()) - 1;
  if ((L - L.adjoint()).cwiseAbs().maxCoeff() > 1e-10)
    throw std::invalid_argument("diagonalize: matrix must be Hermitian");
  Eigen::SelfAdjointEigenSolver<Mat> es(L);
  if (es.info() != Eigen::Success) throw NumericalError("diagonalize: eigensolver failed");
  LaxSpectrum s;
  s.K = K;
  s.band = band < 0 ? K / 2 : band;
  s.lambdas = es.eigenvalues();
  s.efs = es.eigenvectors();
  s.gaps = RVec(K);
  for (int n = 1; n <= K; ++n) {
    s.gaps[n - 1] = s.lambdas[n] - s.lambdas[n - 1] - 1.0;
    if (s.lambdas[n] - s.lambdas[n - 1] < 1e-12)
      throw NumericalError("diagonalize: near-degenerate eigenvalues at n=" + std::to_string(n));
  }
  return s;
}

/// Rotate eigenvector phases to the canonical normalization
/// <1|f_0> > 0 and <f_n | e^{ix} f_{n-1}> > 0. Idempotent.
inline LaxSpectrum normalize_phases(LaxSpectrum s, double threshold = 1e-10) {
  {
    cplx v = s.efs(0, 0); // <1|f_0> = conj(v)
    if (std::abs(v) < threshold)
      throw NumericalError("normalize_phases: |<1|f_0>| below threshold at index 0");
    s.efs.col(0) *= std::conj(v) / std::abs(v);
  }
  for (int n = 1; n <= s.K; ++n) {
    cplx ip = 0; // <f_n | e^{ix} f_{n-1}> = sum_m fn(m) conj(f_{n-1}(m-1))
    for (int m = 1; m <= s.K; ++m) ip += s.efs(m, n) * std::conj(s.efs(m - 1, n - 1));
    if (std::abs(ip) < threshold)
      throw NumericalError("normalize_phases: normalizing product below threshold at index " +
                           std::to_string(n));
    s.efs.col(n) *= std::conj(ip) / std::abs(ip);
  }
  s.phases_normalized = true;
  return s;
}

/// kappa_n = (lambda_n - lambda_0)^{-1} prod_{p != n} (1 - gamma_p/(lambda_p - lambda_n)),
/// product truncated at the trusted band edge.
inline LaxSpectrum compute_kappas(LaxSpectrum s) {
  s.kappas = RVec(s.band);
  for (int n = 1; n <= s.band; ++n) {
    double prod = 1.0 / (s.lambdas[n] - s.lambdas[0]);
    for (int p = 1; p <= s.band; ++p) {
      if (p == n) continue;
      double den = s.lambdas[p] - s.lambdas[n];
      if (std::abs(den) < 1e-12)
        throw NumericalError("compute_kappas: eigenvalue collision at p=" + std::to_string(p));
      prod *= 1.0 - s.gaps[p - 1] / den;
    }
    s.kappas[n - 1] = prod;
  }
  return s;
}

/// Full pipeline: assemble, diagonalize, normalize phases, kappas.
inline LaxSpectrum lax_spectrum(const FourierSeries& u, int K, int band = -1) {
  return compute_kappas(normalize_phases(diagonalize(assemble_lax(u, K), band)));
}

struct TraceReport {
  double mean_residual = 0;
  double l2_residual = 0;
};

/// Residuals of the trace formulas <u|1> = -lambda_0 - sum gamma_n and
/// ||u - <u|1>||^2 = 2 sum n gamma_n, summed over the trusted band.
inline TraceReport trace_check(const FourierSeries& u, const LaxSpectrum& s) {
  TraceReport r;
  double sum_g = 0, sum_ng = 0;
  for (int n = 1; n <= s.band; ++n) {
    sum_g += s.gaps[n - 1];
    sum_ng += n * s.gaps[n - 1];
  }
  double mean_u = u.at(0).real();
  r.mean_residual = std::abs(mean_u - (-s.lambdas[0] - sum_g));
  double l2sq = 0;
  for (int n = -u.M; n <= u.M; ++n)
    if (n != 0) l2sq += std::norm(u.at(n));
  r.l2_residual = std::abs(l2sq - 2.0 * sum_ng);
  return r;
}

/// CSV export: n, lambda, gamma, kappa, abs_1_fn.
inline std::string spectrum_csv(const LaxSpectrum& s) {
  std::ostringstream os;
  os.precision(15);
  os << "n,lambda,gamma,kappa,abs_1_fn\n";
  os << 0 << "," << s.lambdas[0] << ",,," << std::abs(s.one_pair(0)) << "\n";
  for (int n = 1; n <= s.band; ++n) {
    os << n << "," << s.lambdas[n] << "," << s.gaps[n - 1] << ","
       << (s.kappas.size() >= n ? s.kappas[n - 1] : 0.0) << "," << std::abs(s.one_pair(n)) << "\n";
  }
  return os.str();
}

} // namespace bo
