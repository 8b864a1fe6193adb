#include "bo/evolve.hpp"
#include "bo/finite_gap.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace bo;

TEST_CASE("zero data stays zero", "[evolve]") {
  FourierSeries u0(16);
  u0.is_real = true;
  u0.is_mean_zero = true;
  Trajectory t = evolve(u0, EvolutionConfig{1e-2, 0.2, 16, true, 10.0});
  for (auto& u : t.u) CHECK(l2_norm(u) == 0.0);
}

TEST_CASE("conservation of H_bo, H_mo and the gaps", "[evolve]") {
  FiniteGapParams p{{0.5}, {0.4}};
  FourierSeries u0 = build_potential(p, 32);
  EvolutionConfig cfg{1e-3, 0.5, 32, true, 10.0};
  Trajectory t = evolve(u0, cfg, 125);
  double H0 = hamiltonian_physical(t.u.front());
  double m0 = moment_physical(t.u.front());
  LaxSpectrum s0 = lax_spectrum(t.u.front(), 64);
  for (size_t i = 1; i < t.u.size(); ++i) {
    CHECK(std::abs(hamiltonian_physical(t.u[i]) - H0) < 1e-7);
    CHECK(std::abs(moment_physical(t.u[i]) - m0) < 1e-8);
    LaxSpectrum si = lax_spectrum(t.u[i], 64);
    for (int n = 1; n <= 16; ++n)
      CHECK(std::abs(si.gaps[n - 1] - s0.gaps[n - 1]) < 1e-6); // isospectral flow
  }
}

TEST_CASE("phase rotation at the BO frequencies", "[evolve]") {
  FiniteGapParams p{{0.5}, {0.4}};
  FourierSeries u0 = build_potential(p, 32);
  EvolutionConfig cfg{5e-4, 0.5, 32, true, 10.0};
  PhaseReport rep = phase_verify(u0, {1}, cfg, 5, 72, 8);
  CHECK(rep.max_phase_defect < 1e-5);
  CHECK(rep.max_gap_drift < 1e-6);
  CHECK(rep.max_H_drift < 1e-7);
}

TEST_CASE("two-gap phases track their own frequencies", "[evolve]") {
  FiniteGapParams p{{0.4, 0.3}, {0.8, 2.1}};
  FourierSeries u0 = build_potential(p, 32);
  EvolutionConfig cfg{5e-4, 0.25, 32, true, 10.0};
  PhaseReport rep = phase_verify(u0, {1, 2}, cfg, 4, 72, 8);
  CHECK(rep.max_phase_defect < 1e-5);

  Trajectory t = evolve(u0, cfg, 250);
  CHECK(torus_drift(t, 72, 8) < 1e-6); // |z_n| constant: motion on the torus
}

TEST_CASE("fourth-order convergence in dt", "[evolve]") {
  FiniteGapParams p{{0.45}, {1.0}};
  FourierSeries u0 = build_potential(p, 24);
  auto endpoint = [&](double dt) {
    Trajectory t = evolve(u0, EvolutionConfig{dt, 0.1, 24, true, 10.0});
    return t.u.back();
  };
  FourierSeries ref = endpoint(2.5e-4);
  FourierSeries a = endpoint(4e-3);
  FourierSeries b = endpoint(2e-3);
  double ea = 0, eb = 0;
  for (int m = -24; m <= 24; ++m) {
    ea = std::max(ea, std::abs(a.at(m) - ref.at(m)));
    eb = std::max(eb, std::abs(b.at(m) - ref.at(m)));
  }
  INFO("e(dt)=" << ea << " e(dt/2)=" << eb << " ratio=" << ea / eb);
  CHECK(ea / eb > 10.0); // order 4 predicts 16
  CHECK(ea / eb < 30.0);
}

TEST_CASE("time- and space-reversal symmetry", "[evolve]") {
  FiniteGapParams p{{0.4}, {0.9}};
  FourierSeries u0 = build_potential(p, 24);
  EvolutionConfig cfg{1e-3, 0.2, 24, true, 10.0};
  // S_rev o evolve(T) o S_rev o evolve(T) = id
  FourierSeries u1 = evolve(u0, cfg).u.back();
  FourierSeries u2 = evolve(s_rev(u1), cfg).u.back();
  FourierSeries back = s_rev(u2);
  double d = 0;
  for (int m = -24; m <= 24; ++m) d = std::max(d, std::abs(back.at(m) - u0.at(m)));
  CHECK(d < 1e-8);
}

TEST_CASE("mean stays exactly zero", "[evolve]") {
  FiniteGapParams p{{0.5}, {0.0}};
  FourierSeries u0 = build_potential(p, 24);
  Trajectory t = evolve(u0, EvolutionConfig{1e-3, 0.2, 24, true, 10.0}, 50);
  for (auto& u : t.u) CHECK(std::abs(u.at(0)) == 0.0);
}

TEST_CASE("input validation and blow-up detection", "[evolve]") {
  FourierSeries bad(8);
  bad.at(2) = 1.0; // not real
  CHECK_THROWS_AS(evolve(bad, EvolutionConfig{1e-3, 0.1, 8, true, 10.0}), std::invalid_argument);

  // absurdly large data + huge step drives the dealiased quadratic unstable
  FourierSeries big(24);
  for (int n = 1; n <= 24; ++n) {
    big.at(n) = 50.0 / n;
    big.at(-n) = std::conj(big.at(n));
  }
  big.detect_flags();
  bool threw = false;
  try {
    evolve(big, EvolutionConfig{0.5, 50.0, 24, true, 3.0});
  } catch (const NumericalError&) {
    threw = true;
  }
  CHECK(threw);
}
