#pragma once

#include "bo/chart.hpp"
#include "bo/finite_gap.hpp"
#include "bo/linearized.hpp"

#include <atomic>
#include <random>
#include <thread>
#include <vector>

namespace bo {

/// Chunked parallel map with deterministic writes (results land by index).
template <typename F>
inline void parallel_for(int n, int jobs, F&& fn) {
  jobs = std::max(1, std::min<int>(jobs, n));
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < jobs; ++t)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  for (auto& th : pool) th.join();
}

// ---------------------------------------------------------------------------
// stage operators: everything the correction operator needs at one chart point
// ---------------------------------------------------------------------------

/// Per-point data for assembling L(z): the potential, the W-columns matrix P,
/// and central finite differences over the finite-gap parameters (step hp).
/// Derivatives with respect to z_S follow by the chain rule through d_p z_S.
struct StageOperators {
  RVec q;               // 2M real coords
  RVec zS;              // 2N real coords of (z_n)_{n in S_+}
  RMat P;               // 2M x 2Mz, S columns zero: Psi_1
  RMat dzS_dp;          // 2N x 2N
  RMat dq_dp;           // 2M x 2N
  std::vector<RMat> dP_dp; // per parameter direction: 2M x 2Mz
};

/// Real-coordinate matrix of Psi_1 from a W family (columns at perp slots).
inline RMat psi1_matrix(const WFamily& F, const ChartSplit& split, int M) {
  RMat P = RMat::Zero(2 * M, 2 * split.Mz);
  for (int n : split.perp_pos) {
    const FourierSeries& Wn = F.at(n);
    FourierSeries colx(M), coly(M);
    for (int m = -M; m <= M; ++m) {
      cplx w = Wn.coeff(m);
      cplx wneg = std::conj(Wn.coeff(-m));
      colx.at(m) = w + wneg;                    // direction Re z_n: z_n=1, z_{-n}=1
      coly.at(m) = cplx(0, 1) * (w - wneg);     // direction Im z_n: z_n=i, z_{-n}=-i
    }
    P.col(2 * (n - 1)) = fs_to_real(colx);
    P.col(2 * (n - 1) + 1) = fs_to_real(coly);
  }
  return P;
}

struct CorrectorConfig {
  BundleSizes sz;
  int flow_steps = 64;
  double hp = 1e-5;        // parameter-space finite-difference step
  double radius = 0.15;    // neighborhood guard on ||z_perp||_0
  double fd_step = 1e-4;   // chart finite-difference step for dPsi probes
  int jobs = std::max(1u, std::thread::hardware_concurrency());
};

/// The full corrector pipeline around one finite-gap base point.
class Corrector {
public:
  Corrector(FiniteGapParams base, std::vector<int> S_plus, int Mz, CorrectorConfig cfg = {})
      : base_(std::move(base)), split_(std::move(S_plus), Mz), cfg_(cfg),
        A_(dx_inv_matrix(cfg.sz.M)), Jm_(J_matrix(Mz)), Jinv_(Jinv_matrix(Mz)) {
    if (cfg_.sz.K / 2 < Mz) throw std::invalid_argument("Corrector: Mz outside trusted band");
  }

  const ChartSplit& split() const { return split_; }
  const CorrectorConfig& config() const { return cfg_; }
  const FiniteGapParams& base_params() const { return base_; }

  RVec zS_real(const FiniteGapBundle& b) const {
    auto z = b.zS();
    RVec out(2 * z.size());
    for (size_t j = 0; j < z.size(); ++j) {
      out[2 * j] = z[j].real();
      out[2 * j + 1] = z[j].imag();
    }
    return out;
  }

  /// Base chart point (z_S(base), 0).
  RVec base_point() const {
    FiniteGapBundle b = make_bundle(base_, split_.S_plus, cfg_.sz);
    RVec Z = RVec::Zero(2 * split_.Mz);
    put_S(Z, zS_real(b));
    return Z;
  }

  StageOperators stage(const FiniteGapParams& p) const {
    StageOperators st;
    FiniteGapBundle b = make_bundle(p, split_.S_plus, cfg_.sz);
    WFamily F = make_w_family(b, split_.Mz);
    st.q = fs_to_real(b.q);
    st.zS = zS_real(b);
    st.P = psi1_matrix(F, split_, cfg_.sz.M);
    const int np = 2 * p.N();
    st.dzS_dp = RMat(int(st.zS.size()), np);
    st.dq_dp = RMat(2 * cfg_.sz.M, np);
    st.dP_dp.resize(np);
    for (int j = 0; j < np; ++j) {
      FiniteGapParams pp = p, pm = p;
      bump(pp, j, cfg_.hp);
      bump(pm, j, -cfg_.hp);
      FiniteGapBundle bp = make_bundle(pp, split_.S_plus, cfg_.sz);
      FiniteGapBundle bm = make_bundle(pm, split_.S_plus, cfg_.sz);
      WFamily Fp = make_w_family(bp, split_.Mz);
      WFamily Fm = make_w_family(bm, split_.Mz);
      st.dzS_dp.col(j) = (zS_real(bp) - zS_real(bm)) / (2 * cfg_.hp);
      st.dq_dp.col(j) = (fs_to_real(bp.q) - fs_to_real(bm.q)) / (2 * cfg_.hp);
      st.dP_dp[j] = (psi1_matrix(Fp, split_, cfg_.sz.M) - psi1_matrix(Fm, split_, cfg_.sz.M)) /
                    (2 * cfg_.hp);
    }
    return st;
  }

  /// The three blocks of L(z) plus the one-form E_S at (p, Zperp).
  struct Blocks {
    RMat LSS, LSp, LpS; // 2N x 2N, 2N x 2Mz, 2Mz x 2N
    RMat Lfull;         // 2Mz x 2Mz
    RVec E;             // 2Mz (supported on S slots)
  };

  /// Apply dx^{-1} to the rows of a real-coordinate matrix (2x2 block diagonal).
  RMat applyA(const RMat& m) const {
    RMat out(m.rows(), m.cols());
    for (int k = 1; 2 * k <= m.rows(); ++k) {
      out.row(2 * (k - 1)) = m.row(2 * (k - 1) + 1) / double(k);
      out.row(2 * (k - 1) + 1) = -m.row(2 * (k - 1)) / double(k);
    }
    return out;
  }

  Blocks blocks(const StageOperators& st, const RVec& Zperp) const {
    const int twoN = int(st.zS.size());
    Blocks bl;
    Eigen::PartialPivLU<RMat> lu(st.dzS_dp);
    RMat dPz(2 * cfg_.sz.M, twoN);
    for (int j = 0; j < twoN; ++j) dPz.col(j) = st.dP_dp[j] * Zperp;
    RMat D = dPz * lu.inverse();       // d_S (Psi_1 [z_perp])
    RMat G = st.dq_dp * lu.inverse();  // d_S Psi^bo(z_S, 0)
    RMat AD = applyA(D);
    bl.LSS = D.transpose() * applyA(G) + G.transpose() * AD + D.transpose() * AD;
    bl.LSp = D.transpose() * applyA(st.P);
    bl.LpS = st.P.transpose() * AD;
    bl.Lfull = RMat::Zero(2 * split_.Mz, 2 * split_.Mz);
    for (int i = 0; i < twoN; ++i) {
      for (int j = 0; j < twoN; ++j) bl.Lfull(split_.s_idx[i], split_.s_idx[j]) = bl.LSS(i, j);
      for (int c : split_.p_idx) {
        bl.Lfull(split_.s_idx[i], c) += bl.LSp(i, c);
        bl.Lfull(c, split_.s_idx[i]) += bl.LpS(c, i);
      }
    }
    RVec ES = 0.5 * (bl.LSp * Zperp);
    bl.E = RVec::Zero(2 * split_.Mz);
    for (int i = 0; i < twoN; ++i) bl.E[split_.s_idx[i]] = ES[i];
    return bl;
  }

  /// X(tau,z) via the explicit block inverse:
  /// X_S = -C11^{-1} J_S E_S,  X_perp = -tau J_perp LpS X_S,
  /// C11 = Id_S + tau J_S LSS - tau^2 J_S LSp J LpS.
  struct Field {
    RVec X;          // 2Mz
    double residual; // | J E + (Id + tau J L) X |
    double cond_C11;
  };

  Field vector_field(double tau, const StageOperators& st, const RVec& Zperp) const {
    Blocks bl = blocks(st, Zperp);
    return vector_field(tau, bl);
  }

  Field vector_field(double tau, const Blocks& bl) const {
    const int twoN = int(split_.s_idx.size());
    RMat JS = RMat::Zero(twoN, twoN);
    for (int i = 0; i < twoN; ++i)
      for (int j = 0; j < twoN; ++j) JS(i, j) = Jm_(split_.s_idx[i], split_.s_idx[j]);
    RMat C11 = RMat::Identity(twoN, twoN) + tau * JS * bl.LSS -
               tau * tau * JS * (bl.LSp * (Jm_ * bl.LpS));
    Eigen::JacobiSVD<RMat> svd(C11, Eigen::ComputeThinU | Eigen::ComputeThinV);
    double cond = svd.singularValues()(0) / svd.singularValues()(twoN - 1);
    if (cond > 1e6) throw NumericalError("vector_field: C11 near-singular, cond=" + std::to_string(cond));
    RVec ES(twoN);
    for (int i = 0; i < twoN; ++i) ES[i] = bl.E[split_.s_idx[i]];
    RVec XS = -C11.partialPivLu().solve(JS * ES);
    RVec XSfull = RVec::Zero(2 * split_.Mz);
    for (int i = 0; i < twoN; ++i) XSfull[split_.s_idx[i]] = XS[i];
    RVec Xperp = -tau * (Jm_ * (bl.LpS * XS));
    for (int i : split_.s_idx) Xperp[i] = 0.0;
    Field f;
    f.X = XSfull + Xperp;
    f.cond_C11 = cond;
    f.residual = (Jm_ * bl.E + f.X + tau * (Jm_ * (bl.Lfull * f.X))).norm();
    return f;
  }

  // -------------------------------------------------------------------------
  // flow of dz/dtau = X(tau, z), integrated in the (p, z_perp) chart
  // -------------------------------------------------------------------------

  struct FlowState {
    FiniteGapParams p;
    RVec Zperp; // 2Mz, S slots zero
  };

  FlowState flow(FiniteGapParams p, RVec Zperp, double tau0, double tau1, int steps = -1) const {
    if (steps < 0) steps = cfg_.flow_steps;
    for (int i : split_.s_idx) Zperp[i] = 0.0;
    double dt = (tau1 - tau0) / steps;
    std::vector<double> pvec = pack(p);
    for (int s = 0; s < steps; ++s) {
      double t0 = tau0 + s * dt;
      guard(Zperp, t0);
      auto [k1p, k1z] = rhs(t0, pvec, Zperp);
      auto [k2p, k2z] = rhs(t0 + dt / 2, madd(pvec, k1p, dt / 2), Zperp + dt / 2 * k1z);
      auto [k3p, k3z] = rhs(t0 + dt / 2, madd(pvec, k2p, dt / 2), Zperp + dt / 2 * k2z);
      auto [k4p, k4z] = rhs(t0 + dt, madd(pvec, k3p, dt), Zperp + dt * k3z);
      for (size_t i = 0; i < pvec.size(); ++i)
        pvec[i] += dt / 6 * (k1p[i] + 2 * k2p[i] + 2 * k3p[i] + k4p[i]);
      Zperp += dt / 6 * (k1z + 2 * k2z + 2 * k3z + k4z);
    }
    guard(Zperp, tau1);
    return {unpack(pvec), Zperp};
  }

  /// Psi_C = time-1 flow; Psi_C^{-1} = reverse flow.
  FlowState psi_C(const FiniteGapParams& p, const RVec& Zperp, int steps = -1) const {
    return flow(p, Zperp, 0.0, 1.0, steps);
  }
  FlowState psi_C_inverse(const FiniteGapParams& p, const RVec& Zperp, int steps = -1) const {
    return flow(p, Zperp, 1.0, 0.0, steps);
  }

  // -------------------------------------------------------------------------
  // the full map Psi = Psi_L o Psi_C on the chart, real coordinates
  // -------------------------------------------------------------------------

  /// Invert the S part of a chart point to finite-gap parameters (seeded by
  /// the base parameters).
  FiniteGapParams invert_S(const RVec& Z, const FiniteGapParams& seed) const {
    ActionAngleState tgt;
    tgt.S_plus = split_.S_plus;
    for (int n : split_.S_plus) {
      cplx zn(Z[2 * (n - 1)], Z[2 * (n - 1) + 1]);
      tgt.I.push_back(std::norm(zn) / n);
      tgt.theta.push_back(wrap_angle(std::arg(zn)));
    }
    InvertOptions io;
    io.M = cfg_.sz.M;
    io.K = cfg_.sz.K;
    io.tol = 1e-11;
    return invert_psi_S(tgt, seed, nullptr, io);
  }

  /// Psi_L at a flow state: q(p) + sum z_n W_n(p).
  RVec psi_L_state(const FlowState& st) const {
    FiniteGapBundle b = make_bundle(st.p, split_.S_plus, cfg_.sz);
    WFamily F = make_w_family(b, split_.Mz);
    RMat P = psi1_matrix(F, split_, cfg_.sz.M);
    return fs_to_real(b.q) + P * st.Zperp;
  }

  /// Full pipeline Psi(Z) (or Psi_L(Z) when with_corrector is false).
  RVec psi(const RVec& Z, bool with_corrector = true, int steps = -1) const {
    FiniteGapParams p = invert_S(Z, base_);
    FlowState st{p, split_.project_perp(Z)};
    if (with_corrector) st = psi_C(st.p, st.Zperp, steps);
    return psi_L_state(st);
  }

  // -------------------------------------------------------------------------
  // verification probes
  // -------------------------------------------------------------------------

  /// dPsi at Z by central differences, columns in parallel.
  RMat jacobian_psi(const RVec& Z, bool with_corrector = true, int steps = -1) const {
    const int dim = 2 * split_.Mz;
    RMat J(2 * cfg_.sz.M, dim);
    parallel_for(dim, cfg_.jobs, [&](int j) {
      RVec e = RVec::Zero(dim);
      e[j] = cfg_.fd_step;
      RVec up = psi(Z + e, with_corrector, steps);
      RVec um = psi(Z - e, with_corrector, steps);
      J.col(j) = (up - um) / (2 * cfg_.fd_step);
    });
    return J;
  }

  struct SymplecticReport {
    double max_defect = 0;      // over sampled tangent pairs, with corrector
    double max_defect_noC = 0;  // same probe with Psi_C skipped
    double matrix_defect = 0;   // entrywise max of the defect matrix
    double matrix_defect_noC = 0;
  };

  /// |Lambda_G[dPsi zhat, dPsi what] - Lambda[zhat, what]| over random unit
  /// tangent pairs (h^0-normalized), plus the same defect with Psi_C skipped.
  SymplecticReport symplecticity_check(const RVec& Z, int pairs, unsigned seed = 1234,
                                       int steps = -1) const {
    RMat JP = jacobian_psi(Z, true, steps);
    RMat JL = jacobian_psi(Z, false, steps);
    RMat MG = 2.0 * JP.transpose() * A_ * JP;
    RMat MGL = 2.0 * JL.transpose() * A_ * JL;
    RMat ML = 2.0 * Jinv_;
    RMat Dm = MG - ML, DmL = MGL - ML;
    SymplecticReport rep;
    rep.matrix_defect = Dm.cwiseAbs().maxCoeff();
    rep.matrix_defect_noC = DmL.cwiseAbs().maxCoeff();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    const int dim = 2 * split_.Mz;
    for (int t = 0; t < pairs; ++t) {
      RVec a(dim), b(dim);
      for (int i = 0; i < dim; ++i) {
        a[i] = gauss(rng);
        b[i] = gauss(rng);
      }
      a /= std::sqrt(2.0) * a.norm(); // ||a||_{h^0} = 1
      b /= std::sqrt(2.0) * b.norm();
      rep.max_defect = std::max(rep.max_defect, std::abs(double(a.transpose() * Dm * b)));
      rep.max_defect_noC = std::max(rep.max_defect_noC, std::abs(double(a.transpose() * DmL * b)));
    }
    return rep;
  }

  struct NormalFormReport {
    double cubic_slope = 0;         // fit of log|R| vs log eps for H^bo
    double quad_rel_err = 0;        // extracted eps^2 coefficient vs (1/2)<Omega z,z>
    double cubic_slope_mo = 0;      // same for H^mo
    double quad_rel_err_mo = 0;
    bool bo_below_floor = false;    // |R| at rounding noise: slope fit meaningless
    bool mo_below_floor = false;
    std::vector<double> eps, R_bo, R_mo;
  };

  /// Scaling fit of H(Psi(z_S, eps zdir)) - H(q) - eps^2 * quad around the base
  /// point, for H^bo (quad = (1/2)<Omega_perp z,z>) and H^mo (quad = sum z_n z_{-n}).
  NormalFormReport normal_form_check(const RVec& Zdir_perp, const std::vector<double>& eps_list,
                                     int steps = -1) const {
    FiniteGapBundle b = make_bundle(base_, split_.S_plus, cfg_.sz);
    RVec Zbase = RVec::Zero(2 * split_.Mz);
    put_S(Zbase, zS_real(b));
    RVec dir = split_.project_perp(Zdir_perp);
    double H0 = hamiltonian_physical(b.q);
    double M0 = moment_physical(b.q);
    RVec IS = b.I_S();
    double quad_bo = 0, quad_mo = 0;
    for (int n : split_.perp_pos) {
      double zn2 = dir[2 * (n - 1)] * dir[2 * (n - 1)] + dir[2 * (n - 1) + 1] * dir[2 * (n - 1) + 1];
      double om = double(n) * n;
      for (size_t j = 0; j < split_.S_plus.size(); ++j)
        om -= 2.0 * std::min(n, split_.S_plus[j]) * IS[j];
      quad_bo += om / n * zn2;
      quad_mo += zn2;
    }
    NormalFormReport rep;
    std::vector<double> evals_p(eps_list.size()), evals_m(eps_list.size());
    std::vector<double> mo_p(eps_list.size()), mo_m(eps_list.size());
    parallel_for(int(eps_list.size()) * 2, cfg_.jobs, [&](int idx) {
      int i = idx / 2;
      double sgn = (idx % 2 == 0) ? 1.0 : -1.0;
      RVec u = psi(Zbase + sgn * eps_list[i] * dir, true, steps);
      FourierSeries us = real_to_fs(u);
      ((idx % 2 == 0) ? evals_p : evals_m)[i] = hamiltonian_physical(us);
      ((idx % 2 == 0) ? mo_p : mo_m)[i] = moment_physical(us);
    });
    std::vector<double> absR, absRmo;
    for (size_t i = 0; i < eps_list.size(); ++i) {
      double e2 = eps_list[i] * eps_list[i];
      rep.eps.push_back(eps_list[i]);
      rep.R_bo.push_back(evals_p[i] - H0 - e2 * quad_bo);
      rep.R_mo.push_back(mo_p[i] - M0 - e2 * quad_mo);
      absR.push_back(std::abs(rep.R_bo.back()));
      absRmo.push_back(std::abs(rep.R_mo.back()));
    }
    double floor_bo = 1e-12 * std::max(1.0, std::abs(H0));
    double floor_mo = 1e-12 * std::max(1.0, std::abs(M0));
    rep.bo_below_floor = *std::max_element(absR.begin(), absR.end()) < floor_bo;
    rep.mo_below_floor = *std::max_element(absRmo.begin(), absRmo.end()) < floor_mo;
    rep.cubic_slope = loglog_slope(rep.eps, absR);
    rep.cubic_slope_mo = loglog_slope(rep.eps, absRmo);
    // Richardson extraction of the eps^2 coefficient from the even part,
    // using the two smallest eps (assumed eps_list sorted decreasing).
    auto even = [&](size_t i, const std::vector<double>& P, const std::vector<double>& Q,
                    double H) { return (P[i] + Q[i] - 2 * H) / 2.0; };
    size_t iN = eps_list.size() - 1, iM = eps_list.size() - 2;
    double A1 = even(iN, evals_p, evals_m, H0) / (eps_list[iN] * eps_list[iN]);
    double A2 = even(iM, evals_p, evals_m, H0) / (eps_list[iM] * eps_list[iM]);
    double rho = eps_list[iM] / eps_list[iN];
    double c2 = (rho * rho * A1 - A2) / (rho * rho - 1.0);
    rep.quad_rel_err = std::abs(c2 - quad_bo) / std::abs(quad_bo);
    double B1 = even(iN, mo_p, mo_m, M0) / (eps_list[iN] * eps_list[iN]);
    double B2 = even(iM, mo_p, mo_m, M0) / (eps_list[iM] * eps_list[iM]);
    double d2 = (rho * rho * B1 - B2) / (rho * rho - 1.0);
    rep.quad_rel_err_mo = std::abs(d2 - quad_mo) / std::abs(quad_mo);
    return rep;
  }

  // -------------------------------------------------------------------------
  // leading expansion coefficient of Psi_C as a consistency probe:
  // a_0^+(tau, z; X) = -i tau dx^{-1}( d_S q [X_S(tau, z)] ), and
  // a_0^+(z; Psi_C) = exp( int_0^1 a_0^+(t, flow(t); X) dt ) - 1.
  // The k = 0 term of the expansion predicts the perp shift of Psi_C up to
  // O(1/n) corrections from the higher coefficients.
  // -------------------------------------------------------------------------

  struct LeadingCoefficientProbe {
    FourierSeries alpha;      // int_0^1 a_0^+ dt (coefficients are imaginary)
    double imag_defect = 0;   // distance of a_0^+ from taking values in iR
    double rel_defect = 0;    // relative mismatch of predicted vs actual shift
    double decay_slope = 0;   // per-mode mismatch should fall ~1/n
  };

  LeadingCoefficientProbe leading_coefficient_probe(const FiniteGapParams& p, RVec Zperp,
                                                    int steps = -1) const {
    if (steps < 0) steps = cfg_.flow_steps;
    for (int i : split_.s_idx) Zperp[i] = 0.0;
    const int M = cfg_.sz.M, Mz = split_.Mz, NS = split_.NS();
    // march the flow, accumulating alpha = int a_0^+ dt by the trapezoid rule
    std::vector<double> pvec = pack(p);
    RVec Zp = Zperp;
    FourierSeries alpha(M);
    double imag_defect = 0;
    double dt = 1.0 / steps;
    auto a0_at = [&](double tau, const std::vector<double>& pv, const RVec& zp) {
      FiniteGapParams pp = unpack(pv);
      StageOperators st = stage(pp);
      RVec z2 = zp;
      for (int i : split_.s_idx) z2[i] = 0.0;
      Field f = vector_field(tau, st, z2);
      RVec XS(split_.s_idx.size());
      for (size_t i = 0; i < split_.s_idx.size(); ++i) XS[i] = f.X[split_.s_idx[i]];
      Eigen::PartialPivLU<RMat> lu(st.dzS_dp);
      RVec dq = st.dq_dp * lu.solve(XS); // d_S q [X_S]
      FourierSeries a0 = dx_pow(real_to_fs(dq), -1);
      for (int m = -M; m <= M; ++m) a0.at(m) *= cplx(0, -tau); // -i tau dx^{-1}(...)
      return a0;
    };
    for (int s = 0; s <= steps; ++s) {
      double tau = s * dt;
      FourierSeries a0 = a0_at(tau, pvec, Zp);
      // a_0^+ takes values in iR: real coefficients of a real function times -i
      FourierSeries re_part(M);
      for (int m = -M; m <= M; ++m) re_part.at(m) = cplx(0, 1) * a0.at(m);
      imag_defect = std::max(imag_defect, re_part.reality_defect());
      double w = (s == 0 || s == steps) ? 0.5 : 1.0;
      for (int m = -M; m <= M; ++m) alpha.at(m) += w * dt * a0.at(m);
      if (s == steps) break;
      // one RK4 step of the flow
      double t0 = tau;
      auto [k1p, k1z] = rhs(t0, pvec, Zp);
      auto [k2p, k2z] = rhs(t0 + dt / 2, madd(pvec, k1p, dt / 2), Zp + dt / 2 * k1z);
      auto [k3p, k3z] = rhs(t0 + dt / 2, madd(pvec, k2p, dt / 2), Zp + dt / 2 * k2z);
      auto [k4p, k4z] = rhs(t0 + dt, madd(pvec, k3p, dt), Zp + dt * k3z);
      for (size_t i = 0; i < pvec.size(); ++i)
        pvec[i] += dt / 6 * (k1p[i] + 2 * k2p[i] + 2 * k3p[i] + k4p[i]);
      Zp += dt / 6 * (k1z + 2 * k2z + 2 * k3z + k4z);
    }
    // a_0^+(z; Psi_C) = e^{alpha} - 1, applied as multiplication on the
    // (F^+)^{-1} z_perp side; compare against the actual perp shift
    int Ng = cfg_.sz.Ng;
    auto av = synthesize(alpha, Ng);
    std::vector<cplx> ea(Ng);
    for (int j = 0; j < Ng; ++j) ea[j] = std::exp(av[j]) - 1.0;
    BirkhoffVector z0 = real_to_z(Zperp);
    FourierSeries zin(M);
    for (int n = NS + 1; n <= Mz; ++n) zin.at(n) = z0.z(n); // (F^+)^{-1} z_perp
    auto zv = synthesize(zin, Ng);
    for (int j = 0; j < Ng; ++j) zv[j] *= ea[j];
    FourierSeries shift = grid_transform(zv, M);

    LeadingCoefficientProbe probe;
    probe.alpha = alpha;
    probe.imag_defect = imag_defect;
    BirkhoffVector z1 = real_to_z(Zp);
    std::vector<double> ns, defects;
    double num = 0, den = 0;
    for (int n = NS + 1; n <= Mz; ++n) {
      cplx actual = z1.z(n) - z0.z(n);
      cplx predicted = shift.at(n);
      num += std::norm(actual - predicted);
      den += std::norm(actual);
      if (std::abs(z0.z(n)) > 1e-12) {
        ns.push_back(n);
        defects.push_back(std::abs(actual - predicted) / std::abs(z0.z(n)));
      }
    }
    probe.rel_defect = den > 0 ? std::sqrt(num / den) : 0.0;
    probe.decay_slope = ns.size() >= 3 ? loglog_slope(ns, defects) : 0.0;
    return probe;
  }

  /// Calibrate the neighborhood radius by bisection on the conditioning of
  /// C11 along a reference perp direction (condition number <= 1e3).
  double calibrate_radius(const RVec& Zdir_perp, double max_radius = 1.0) {
    StageOperators st = stage(base_);
    RVec dir = split_.project_perp(Zdir_perp);
    dir /= std::sqrt(2.0) * dir.norm();
    auto cond_at = [&](double s) {
      try {
        Field f = vector_field(1.0, st, s * dir);
        return f.cond_C11;
      } catch (const NumericalError&) {
        return 1e9;
      }
    };
    double lo = 0, hi = max_radius;
    if (cond_at(hi) <= 1e3) {
      cfg_.radius = hi;
      return hi;
    }
    for (int it = 0; it < 40; ++it) {
      double mid = 0.5 * (lo + hi);
      (cond_at(mid) <= 1e3 ? lo : hi) = mid;
    }
    cfg_.radius = lo;
    return lo;
  }

private:
  static std::vector<double> pack(const FiniteGapParams& p) {
    std::vector<double> v(p.r);
    v.insert(v.end(), p.alpha.begin(), p.alpha.end());
    return v;
  }
  static FiniteGapParams unpack(const std::vector<double>& v) {
    FiniteGapParams p;
    int N = int(v.size()) / 2;
    p.r.assign(v.begin(), v.begin() + N);
    p.alpha.assign(v.begin() + N, v.end());
    return p;
  }
  static void bump(FiniteGapParams& p, int j, double h) {
    if (j < p.N())
      p.r[j] += h;
    else
      p.alpha[j - p.N()] += h;
  }
  static std::vector<double> madd(std::vector<double> a, const std::vector<double>& b, double c) {
    for (size_t i = 0; i < a.size(); ++i) a[i] += c * b[i];
    return a;
  }
  void put_S(RVec& Z, const RVec& zS) const {
    for (size_t i = 0; i < split_.s_idx.size(); ++i) Z[split_.s_idx[i]] = zS[i];
  }
  void guard(const RVec& Zperp, double tau) const {
    double n0 = std::sqrt(2.0) * Zperp.norm();
    if (n0 > cfg_.radius)
      throw NumericalError("flow: state left the neighborhood at tau=" + std::to_string(tau) +
                           ", ||z_perp||_0=" + std::to_string(n0));
  }

  std::pair<std::vector<double>, RVec> rhs(double tau, const std::vector<double>& pvec,
                                           const RVec& Zperp) const {
    FiniteGapParams p = unpack(pvec);
    StageOperators st = stage(p);
    RVec Zp = Zperp;
    for (int i : split_.s_idx) Zp[i] = 0.0;
    Field f = vector_field(tau, st, Zp);
    RVec XS(split_.s_idx.size());
    for (size_t i = 0; i < split_.s_idx.size(); ++i) XS[i] = f.X[split_.s_idx[i]];
    Eigen::PartialPivLU<RMat> lu(st.dzS_dp);
    RVec pdot = lu.solve(XS);
    std::vector<double> pd(pdot.data(), pdot.data() + pdot.size());
    RVec Zdot = f.X;
    for (int i : split_.s_idx) Zdot[i] = 0.0;
    return {pd, Zdot};
  }

  FiniteGapParams base_;
  ChartSplit split_;
  CorrectorConfig cfg_;
  RMat A_, Jm_, Jinv_;
};

} // namespace bo
