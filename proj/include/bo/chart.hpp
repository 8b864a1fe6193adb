#pragma once

#include "bo/fourier.hpp"

#include <algorithm>
#include <vector>

namespace bo {

/// Complex Birkhoff coordinates (z_n)_{0<|n|<=Mz} with z_{-n} = conj(z_n);
/// only the positive side is stored.
struct BirkhoffVector {
  int Mz = 0;
  Vec pos; // pos[n-1] = z_n, n = 1..Mz

  BirkhoffVector() = default;
  explicit BirkhoffVector(int Mz_) : Mz(Mz_), pos(Vec::Zero(Mz_)) {}

  cplx z(int n) const {
    if (n == 0 || std::abs(n) > Mz) return 0.0;
    return n > 0 ? pos[n - 1] : std::conj(pos[-n - 1]);
  }
  void set(int n, cplx v) {
    if (n > 0)
      pos[n - 1] = v;
    else
      pos[-n - 1] = std::conj(v);
  }
  /// h^0 norm: (sum_{n != 0} |z_n|^2)^{1/2} = sqrt(2) * |pos|.
  double h0_norm() const { return std::sqrt(2.0) * pos.norm(); }
};

// ---------------------------------------------------------------------------
// Real coordinates.
//
// Real mean-zero function u:   U[2(m-1)] = Re u_m, U[2(m-1)+1] = Im u_m, m=1..M.
// Real-type Birkhoff vector z: Z[2(n-1)] = Re z_n, Z[2(n-1)+1] = Im z_n, n=1..Mz.
// In both charts <.|.> = 2 * Euclidean, so operator transposes with respect to
// the standard inner products are plain matrix transposes.
// ---------------------------------------------------------------------------

inline RVec fs_to_real(const FourierSeries& u) {
  RVec U(2 * u.M);
  for (int m = 1; m <= u.M; ++m) {
    U[2 * (m - 1)] = u.at(m).real();
    U[2 * (m - 1) + 1] = u.at(m).imag();
  }
  return U;
}

inline FourierSeries real_to_fs(const RVec& U) {
  int M = int(U.size()) / 2;
  FourierSeries u(M);
  for (int m = 1; m <= M; ++m) {
    u.at(m) = cplx(U[2 * (m - 1)], U[2 * (m - 1) + 1]);
    u.at(-m) = std::conj(u.at(m));
  }
  u.is_real = true;
  u.is_mean_zero = true;
  return u;
}

inline RVec z_to_real(const BirkhoffVector& z) {
  RVec Z(2 * z.Mz);
  for (int n = 1; n <= z.Mz; ++n) {
    Z[2 * (n - 1)] = z.pos[n - 1].real();
    Z[2 * (n - 1) + 1] = z.pos[n - 1].imag();
  }
  return Z;
}

inline BirkhoffVector real_to_z(const RVec& Z) {
  BirkhoffVector z(int(Z.size()) / 2);
  for (int n = 1; n <= z.Mz; ++n) z.pos[n - 1] = cplx(Z[2 * (n - 1)], Z[2 * (n - 1) + 1]);
  return z;
}

/// dx^{-1} as a real matrix: block [[0, 1/m], [-1/m, 0]] per mode m.
inline RMat dx_inv_matrix(int M) {
  RMat A = RMat::Zero(2 * M, 2 * M);
  for (int m = 1; m <= M; ++m) {
    A(2 * (m - 1), 2 * (m - 1) + 1) = 1.0 / m;
    A(2 * (m - 1) + 1, 2 * (m - 1)) = -1.0 / m;
  }
  return A;
}

/// J: z_n -> i n z_n as a real matrix: block [[0, -n], [n, 0]].
inline RMat J_matrix(int Mz) {
  RMat J = RMat::Zero(2 * Mz, 2 * Mz);
  for (int n = 1; n <= Mz; ++n) {
    J(2 * (n - 1), 2 * (n - 1) + 1) = -double(n);
    J(2 * (n - 1) + 1, 2 * (n - 1)) = double(n);
  }
  return J;
}

inline RMat Jinv_matrix(int Mz) {
  RMat J = RMat::Zero(2 * Mz, 2 * Mz);
  for (int n = 1; n <= Mz; ++n) {
    J(2 * (n - 1), 2 * (n - 1) + 1) = 1.0 / n;
    J(2 * (n - 1) + 1, 2 * (n - 1)) = -1.0 / n;
  }
  return J;
}

/// Index split of the real chart into S and S-perp coordinate slots.
struct ChartSplit {
  std::vector<int> S_plus;
  int Mz = 0;
  std::vector<int> s_idx;    // real coordinate indices of the S block
  std::vector<int> perp_pos; // positive perp mode indices
  std::vector<int> p_idx;    // real coordinate indices of the perp block

  ChartSplit() = default;
  ChartSplit(std::vector<int> S, int Mz_) : S_plus(std::move(S)), Mz(Mz_) {
    for (int n : S_plus) {
      s_idx.push_back(2 * (n - 1));
      s_idx.push_back(2 * (n - 1) + 1);
    }
    for (int n = 1; n <= Mz; ++n) {
      if (std::find(S_plus.begin(), S_plus.end(), n) == S_plus.end()) {
        perp_pos.push_back(n);
        p_idx.push_back(2 * (n - 1));
        p_idx.push_back(2 * (n - 1) + 1);
      }
    }
  }

  int NS() const {
    int m = 0;
    for (int n : S_plus) m = std::max(m, n);
    return m;
  }

  RVec project_perp(RVec Z) const {
    for (int i : s_idx) Z[i] = 0.0;
    return Z;
  }
  RVec project_S(RVec Z) const {
    for (int i : p_idx) Z[i] = 0.0;
    return Z;
  }
};

/// S_rev on the Birkhoff side: z_n -> z_{-n}, i.e. conjugation of the stored side.
inline BirkhoffVector s_rev(const BirkhoffVector& z) {
  BirkhoffVector w(z.Mz);
  w.pos = z.pos.conjugate();
  return w;
}

inline RVec s_rev_real(const RVec& Z) {
  RVec W = Z;
  for (int i = 1; i < W.size(); i += 2) W[i] = -W[i];
  return W;
}

} // namespace bo
