#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "alcsim/monitors.hpp"

using namespace alcsim;

namespace {

constexpr double kPi = std::numbers::pi;

NoiseModel no_noise() {
  NoiseModel m;
  m.a_rho = m.a_u = m.a_c = m.a_Q = 0.0;
  return m;
}

State flat_state(const Grid& g, double rho0 = 1.0, double c0 = 1.0) {
  State s(g);
  s.rho.a[0] = rho0 * std::sqrt(g.volume());
  s.c.a[0] = c0 * std::sqrt(g.volume());
  return s;
}

std::array<SpectralField, 3> zero_u(const Grid& g) {
  return {SpectralField(g, all_sin()), SpectralField(g, all_sin()),
          SpectralField(g, all_sin())};
}

State random_coupled_state(const Grid& g, unsigned seed, double amp) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  State s = flat_state(g);
  for (int k0 = 0; k0 < 3; ++k0)
    for (int k1 = 0; k1 < 3; ++k1) {
      if (k0 == 0 && k1 == 0) continue;
      s.rho.at(k0, k1) = 0.3 * amp * gauss(rng);
      s.c.at(k0, k1) = 0.4 * amp * gauss(rng);
      for (int q = 0; q < 5; ++q) s.Q.comp[q].at(k0, k1) = 0.3 * amp * gauss(rng);
    }
  // keep the density perturbation safely positive
  GridArray rv = synthesize_on(s.rho, padded_grid(g, 2));
  double mn = rv.v[0];
  for (double v : rv.v) mn = std::min(mn, v);
  if (mn < 0.4) {
    double scale = 0.6 / (1.0 - mn + 1e-12);
    double mean = s.rho.a[0];
    for (double& a : s.rho.a) a *= scale;
    s.rho.a[0] = mean;
  }
  return s;
}

std::array<SpectralField, 3> random_velocity(const Grid& g, unsigned seed, double amp) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto u = zero_u(g);
  for (int i = 0; i < g.d; ++i)
    for (int k0 = 1; k0 < 4; ++k0)
      for (int k1 = 1; k1 < 4; ++k1) u[i].at(k0, k1) = amp * gauss(rng);
  return u;
}

}  // namespace

TEST_CASE("energy functional: constant-state closed forms and Q homogeneity") {
  Grid g = Grid::square(2, 8, 1.0);
  RegularizationParams p;
  p.n = 8;

  SUBCASE("rho, c constant, u = 0, Q = 0") {
    double rho0 = 1.3, c0 = 1.2;
    State s = flat_state(g, rho0, c0);
    double expect = g.volume() * (c0 * c0 + 2.0 * std::pow(rho0, p.gamma) / (p.gamma - 1) +
                                  2.0 * p.delta * std::pow(rho0, p.beta) / (p.beta - 1));
    CHECK(energy_functional(s, zero_u(g), p) == doctest::Approx(expect).epsilon(1e-12));
  }

  SUBCASE("zero fields with rho at the delta floor") {
    State s(g);
    s.rho.a[0] = p.delta * std::sqrt(g.volume());
    double expect = g.volume() * (2.0 * std::pow(p.delta, p.gamma) / (p.gamma - 1) +
                                  2.0 * std::pow(p.delta, p.beta + 1) / (p.beta - 1));
    CHECK(energy_functional(s, zero_u(g), p) == doctest::Approx(expect).epsilon(1e-12));
  }

  SUBCASE("doubling Q scales the quartic term by 16 and the quadratic by 4") {
    State s(g);
    s.rho.a[0] = 1e-9;  // suppress pressure terms
    s.Q.comp[1].at(1, 1) = 0.4;
    RegularizationParams q = p;
    q.delta = 0.0;
    double base = g.volume() * 2.0 * std::pow(1e-9 / std::sqrt(g.volume()) *
                                                  std::sqrt(g.volume()), q.gamma) /
                  (q.gamma - 1);
    double e1 = energy_functional(s, zero_u(g), q) - base;
    State s2 = s;
    for (int k = 0; k < 5; ++k) s2.Q.comp[k] = 2.0 * s.Q.comp[k];
    double e2 = energy_functional(s2, zero_u(g), q) - base;
    // e = a2 |Q|^2-part + a4 |Q|^4-part: solve the scaling
    double quad = (16.0 * e1 - e2) / 12.0;
    double quart = e1 - quad;
    CHECK(quart > 0.0);
    CHECK(e2 == doctest::Approx(4.0 * quad + 16.0 * quart).epsilon(1e-10));
  }
}

TEST_CASE("dissipation increment: constants, single mode, constant Q") {
  Grid g = Grid::square(2, 8, 1.0);
  RegularizationParams p;
  p.n = 8;
  double dt = 1e-3;

  SUBCASE("all-constant state dissipates nothing") {
    State s = flat_state(g);
    CHECK(dissipation_increment(s, zero_u(g), p, dt) == 0.0);
  }

  SUBCASE("single Dirichlet velocity mode: 2 mu1 kappa^2 ||u||^2 dt + div part") {
    State s = flat_state(g);
    auto u = zero_u(g);
    u[0].at(1, 2) = 0.3;
    double k2 = (1.0 + 4.0) * kPi * kPi;
    double expect_grad = 2.0 * p.mu1 * k2 * 0.09 * dt;
    double expect_div = 2.0 * (p.mu1 + p.mu2) * (1.0 * kPi * kPi) * 0.09 * dt;
    CHECK(dissipation_increment(s, u, p, dt) ==
          doctest::Approx(expect_grad + expect_div).epsilon(1e-12));
  }

  SUBCASE("constant Q contributes only the Gamma(c*|Q|^4 + c*^2|Q|^6) block") {
    State s = flat_state(g);
    s.Q.comp[0].a[0] = 0.5 * std::sqrt(g.volume());  // q11 = 0.5 -> diag(.5,0,-.5)
    double q2 = 0.5 * 0.5 * 2.0;                     // tr Q^2 pointwise
    double expect =
        2.0 * p.Gamma * (p.c_star * q2 * q2 + p.c_star * p.c_star * q2 * q2 * q2) *
        g.volume() * dt;
    CHECK(dissipation_increment(s, zero_u(g), p, dt) ==
          doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("energy ledger: stationary residual 0, heat-only balance exact for CN") {
  Grid g = Grid::square(2, 16, 1.0);
  RegularizationParams p;
  p.n = 16;
  p.dt = 1e-3;

  SUBCASE("stationary noise-off run") {
    Stepper st(g, p, no_noise());
    State s = flat_state(g);
    auto u0 = st.recover_velocity(s);
    EnergyLedger ledger(s, u0, p);
    for (int i = 0; i < 20; ++i) {
      State before = s;
      StepExtras ex;
      st.step(s, {}, &ex);
      ledger.record_step(before, s, ex, p.dt);
    }
    CHECK(std::abs(ledger.residual_at(s.t)) < 1e-12 * ledger.initial_energy());
  }

  SUBCASE("heat-only dynamics (u = 0): midpoint dissipation balances CN exactly") {
    Stepper st(g, p, no_noise());
    State s = flat_state(g);
    s.c.at(1, 1) = 0.3;
    s.c.at(2, 0) = -0.2;
    auto u0 = st.recover_velocity(s);
    EnergyLedger ledger(s, u0, p);
    for (int i = 0; i < 100; ++i) {
      State before = s;
      StepExtras ex;
      st.step(s, {}, &ex);
      ledger.record_step(before, s, ex, p.dt);
    }
    CHECK(std::abs(ledger.residual_at(s.t)) < 1e-8);
  }
}

TEST_CASE("max principle check: interior, spike, bounds") {
  Grid g = Grid::square(2, 16, 1.0);
  SpectralField c(g, all_cos());
  c.a[0] = 1.0 * std::sqrt(g.volume());  // c = 1 in [0.5, 1.5]
  CHECK(max_principle_check(c, 0.5, 1.5) == 0.0);
  // push the maximum to 1.6: overshoot 0.1
  c.at(1, 0) = (0.6 / std::sqrt(2.0)) * std::sqrt(g.volume());
  double over = max_principle_check(c, 0.5, 1.5);
  CHECK(over == doctest::Approx(0.1).epsilon(1e-6));
}

TEST_CASE("J-cancellations hold to quadrature tolerance on random coupled states") {
  Grid g = Grid::square(2, 8, 1.0);
  RegularizationParams p;
  p.n = 8;
  for (unsigned trial = 0; trial < 5; ++trial) {
    State s = random_coupled_state(g, 100 + trial, 0.5);
    auto u = random_velocity(g, 200 + trial, 0.4);
    JCancellationReport rep = j_cancellation(s, u, p);
    CHECK(std::abs(rep.j1_plus_j3) <= 1e-9 * rep.scale);
    CHECK(std::abs(rep.j2_plus_j4) <= 1e-9 * rep.scale);
    CHECK(std::abs(rep.j5_plus_j9) <= 1e-9 * rep.scale);
    CHECK(std::abs(rep.j6_plus_j10) <= 1e-9 * rep.scale);
    CHECK(rep.j13 <= 1e-9);
  }
}

TEST_CASE("weak residuals: stationary state, CN order for pure heat") {
  Grid g = Grid::square(2, 16, 1.0);
  RegularizationParams p;
  p.n = 16;
  p.dt = 1e-3;

  SUBCASE("stationary noise-off trajectory has vanishing residuals") {
    Stepper st(g, p, no_noise());
    State s = flat_state(g);
    TrajectoryRecorder rec(s, p, TestFunctionSet::default_set(g), 1);
    for (int i = 0; i < 10; ++i) {
      StepExtras ex;
      st.step(s, {}, &ex);
      rec.after_step(s, ex, st.halted());
    }
    Trajectory traj = rec.take();
    for (auto eq : {WeakEquation::Mass, WeakEquation::Momentum,
                    WeakEquation::Concentration, WeakEquation::QTensor}) {
      WeakResidualReport r = weak_residual(traj, eq);
      CHECK(r.max_abs < 1e-10);
    }
  }

  SUBCASE("pure heat: weak identity balances CN exactly; error vs analytic is O(dt^2)") {
    // with u = 0 the flux is linear in c, so the trapezoid rule reproduces
    // the Crank-Nicolson increment identically: the weak residual is rounding
    auto run = [&](double dt) {
      RegularizationParams q = p;
      q.dt = dt;
      Stepper st(g, q, no_noise());
      State s = flat_state(g);
      s.c.at(1, 1) = 0.3;
      TrajectoryRecorder rec(s, q, TestFunctionSet::default_set(g), 1);
      int steps = int(std::round(0.04 / dt));
      for (int i = 0; i < steps; ++i) {
        StepExtras ex;
        st.step(s, {}, &ex);
        rec.after_step(s, ex, st.halted());
      }
      Trajectory traj = rec.take();
      CHECK(weak_residual(traj, WeakEquation::Concentration).max_abs < 1e-12);
      // pairing-norm error against the analytic modal decay
      double k2 = 2.0 * kPi * kPi;
      double exact = 0.3 * std::exp(-k2 * s.t);
      return std::abs(s.c.at(1, 1) - exact);
    };
    double r1 = run(4e-3), r2 = run(2e-3), r3 = run(1e-3);
    double order_a = std::log2(r1 / r2), order_b = std::log2(r2 / r3);
    CHECK(order_a > 1.8);
    CHECK(order_a < 2.2);
    CHECK(order_b > 1.8);
    CHECK(order_b < 2.2);
  }
}

TEST_CASE("renormalized residual: identity regime, constants, rejection") {
  Grid g = Grid::square(2, 8, 1.0);
  RegularizationParams p;
  p.n = 8;
  p.dt = 2e-3;

  // short coupled run
  Stepper st(g, p, no_noise());
  State s = random_coupled_state(g, 7, 0.3);
  auto u = random_velocity(g, 8, 0.3);
  MassOp mass(s.rho, p.n);
  for (int i = 0; i < g.d; ++i) s.m[i] = mass.apply(u[i]);
  TrajectoryRecorder rec(s, p, TestFunctionSet::default_set(g), 1);
  for (int i = 0; i < 10; ++i) {
    StepExtras ex;
    st.step(s, {}, &ex);
    rec.after_step(s, ex, st.halted());
  }
  Trajectory traj = rec.take();

  SUBCASE("b = T_k in the identity regime equals the continuity residual") {
    // rho stays well below k = 8, so T_k(rho) = rho pointwise
    WeakResidualReport mass_r = weak_residual(traj, WeakEquation::Mass);
    WeakResidualReport renorm_r = renormalized_residual(traj, renorm_Tk(8.0));
    REQUIRE(mass_r.per_test_function.size() == renorm_r.per_test_function.size());
    for (std::size_t i = 0; i < mass_r.per_test_function.size(); ++i)
      CHECK(std::abs(mass_r.per_test_function[i] - renorm_r.per_test_function[i]) < 1e-12);
  }

  SUBCASE("constant b gives an exactly zero residual") {
    WeakResidualReport r = renormalized_residual(traj, renorm_constant(2.5));
    CHECK(r.max_abs < 1e-12);
  }

  SUBCASE("b without a flat tail is rejected") {
    RenormFunction bad;
    bad.b = [](double z) { return z * z; };
    bad.b_prime = [](double z) { return 2 * z; };
    bad.b_second = [](double) { return 2.0; };
    bad.flat_tail = false;
    CHECK_THROWS_AS((void)renormalized_residual(traj, bad), std::invalid_argument);
  }
}

TEST_CASE("ndjson records are one-line JSON objects") {
  std::ostringstream os;
  write_ndjson(os, {0.5, "energy_residual", 1.25e-9, 1e-6, true});
  std::string line = os.str();
  CHECK(line.find("\"name\":\"energy_residual\"") != std::string::npos);
  CHECK(line.find("\"pass\":true") != std::string::npos);
  CHECK(line.back() == '\n');
}
