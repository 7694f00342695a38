#include "alcsim/monitors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace alcsim {

namespace {

double sq(double x) { return x * x; }

double quad_weight(const Grid& g) { return g.volume() / double(g.total()); }

QField q_gradient(const QField& q, int axis) {
  QField r;
  for (int k = 0; k < 5; ++k) r.comp[k] = differentiate(q.comp[k], axis);
  return r;
}

// |Q|^4 integrated: ||tr Q^2||_L2^2 of the exact quadratic field
double q4_integral(const QField& q) {
  SpectralField w = q_trace_product_field(q, q);
  double n = l2_norm(w);
  return n * n;
}

// |Q|^6 integrated: cube of tr Q^2 on a grid fine enough for the sextic band
double q6_integral(const QField& q) {
  SpectralField w = q_trace_product_field(q, q);
  Grid fine = q.grid().refined(3);
  GridArray wv = synthesize_on(w, fine);
  double acc = 0.0;
  for (double v : wv.v) acc += v * v * v;
  return acc * quad_weight(fine);
}

// multiplier of the energy estimate: B = lap Q - Q - c* Q tr(Q^2), built on
// the widest product grid so all entries share dims
QField energy_multiplier(const QField& q, double c_star) {
  SpectralField w = q_trace_product_field(q, q);
  QField b;
  Grid g4;
  for (int k = 0; k < 5; ++k) {
    SpectralField cubic = product_padded(w, q.comp[k]);
    if (k == 0) g4 = cubic.grid;
    b.comp[k] = resample(laplacian(q.comp[k]), g4) - resample(q.comp[k], g4);
    axpy(b.comp[k], -c_star, cubic);
  }
  return b;
}

}  // namespace

// ---- energy functional / dissipation -------------------------------------------

double energy_functional(const State& s, const std::array<SpectralField, 3>& u,
                         const RegularizationParams& p) {
  const Grid& g = s.grid();
  const int d = g.d;
  double e = 0.0;
  for (int i = 0; i < d; ++i) e += pair(product_padded(s.rho, u[i]), u[i]);
  e += sq(l2_norm(s.c));
  {
    Grid g2 = padded_grid(g, 2);
    GridArray rv = synthesize_on(s.rho, g2);
    double sg = 0.0, sb = 0.0;
    for (double v : rv.v) {
      double r = std::max(v, 0.0);
      sg += std::pow(r, p.gamma);
      sb += std::pow(r, p.beta);
    }
    e += (2.0 / (p.gamma - 1.0)) * sg * quad_weight(g2);
    e += (2.0 * p.delta / (p.beta - 1.0)) * sb * quad_weight(g2);
  }
  e += s.Q.l2_norm2();
  for (int a = 0; a < d; ++a) e += q_gradient(s.Q, a).l2_norm2();
  e += 0.5 * p.c_star * q4_integral(s.Q);
  return e;
}

double dissipation_increment(const State& s, const std::array<SpectralField, 3>& u,
                             const RegularizationParams& p, double dt) {
  const Grid& g = s.grid();
  const int d = g.d;
  double di = 0.0;
  for (int i = 0; i < d; ++i)
    for (int a = 0; a < d; ++a) di += 2.0 * p.mu1 * sq(l2_norm(differentiate(u[i], a)));
  {
    std::array<SpectralField, 3> w;
    for (int c = 0; c < d; ++c) w[c] = differentiate(u[c], c);
    for (int c = 0; c < d; ++c)
      for (int c2 = 0; c2 < d; ++c2)
        di += 2.0 * (p.mu1 + p.mu2) * pair(w[c], w[c2]);
  }
  for (int a = 0; a < d; ++a) di += 2.0 * sq(l2_norm(differentiate(s.c, a)));
  for (int a = 0; a < d; ++a) di += 2.0 * p.Gamma * q_gradient(s.Q, a).l2_norm2();
  di += 2.0 * p.Gamma * s.Q.apply_laplacian().l2_norm2();
  di += 2.0 * p.Gamma * (p.c_star * q4_integral(s.Q) + sq(p.c_star) * q6_integral(s.Q));
  if (p.eps > 0.0) {
    Grid g2 = padded_grid(g, 2);
    GridArray rv = synthesize_on(s.rho, g2);
    std::vector<double> grad2(g2.total(), 0.0);
    for (int a = 0; a < d; ++a) {
      GridArray da = synthesize_on(differentiate(s.rho, a), g2);
      for (std::size_t i = 0; i < grad2.size(); ++i) grad2[i] += sq(da.v[i]);
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < grad2.size(); ++i) {
      double r = std::max(rv.v[i], 1e-300);
      acc += (p.gamma * std::pow(r, p.gamma - 2.0) +
              p.delta * p.beta * std::pow(r, p.beta - 2.0)) *
             grad2[i];
    }
    di += 2.0 * p.eps * acc * quad_weight(g2);
  }
  return dt * di;
}

// ---- ledger ---------------------------------------------------------------------

EnergyLedger::EnergyLedger(const State& initial, const std::array<SpectralField, 3>& u0,
                           const RegularizationParams& p)
    : params_(p) {
  rows_.push_back({initial.t, energy_functional(initial, u0, p), 0.0, 0.0, 0.0});
}

void EnergyLedger::record_step(const State& before, const State& after,
                               const StepExtras& extras, double dt) {
  // midpoint state (coefficient average) pairs with the Crank-Nicolson
  // treatment of the linear sub-steps
  State mid = before;
  auto blend = [](SpectralField& dst, const SpectralField& b) {
    for (std::size_t i = 0; i < dst.a.size(); ++i) dst.a[i] = 0.5 * (dst.a[i] + b.a[i]);
  };
  blend(mid.rho, after.rho);
  blend(mid.c, after.c);
  for (int k = 0; k < 5; ++k) blend(mid.Q.comp[k], after.Q.comp[k]);
  std::array<SpectralField, 3> u_mid = extras.u_old;
  for (int i = 0; i < before.dim(); ++i) blend(u_mid[i], extras.u_new[i]);

  const LedgerRow& prev = rows_.back();
  LedgerRow row;
  row.t = after.t;
  row.E = energy_functional(after, extras.u_new, params_);
  row.D = prev.D + dissipation_increment(mid, u_mid, params_, dt);
  row.I = prev.I + extras.ito_rate_dt;
  row.S = prev.S + extras.martingale_inc;
  rows_.push_back(row);
}

LedgerRow EnergyLedger::row_at(double t) const {
  LedgerRow out = rows_.front();
  for (const auto& r : rows_)
    if (r.t <= t + 1e-12) out = r;
  return out;
}

double EnergyLedger::residual_at(double t) const {
  LedgerRow r = row_at(t);
  return r.E + r.D - rows_.front().E - r.I - r.S;
}

double max_principle_check(const SpectralField& c, double c_lower, double c_upper) {
  GridArray v = synthesize_on(c, padded_grid(c.grid, 2));
  double mn = v.v[0], mx = v.v[0];
  for (double x : v.v) {
    mn = std::min(mn, x);
    mx = std::max(mx, x);
  }
  return std::max(0.0, std::max(c_lower - mn, mx - c_upper));
}

// ---- J cancellations --------------------------------------------------------------

JCancellationReport j_cancellation(const State& s, const std::array<SpectralField, 3>& u,
                                   const RegularizationParams& p) {
  const Grid& g = s.grid();
  const int d = g.d;
  JCancellationReport rep;

  // du[a][b] = d_a u_b
  std::array<std::array<SpectralField, 3>, 3> du;
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) du[a][b] = differentiate(u[b], a);
  std::array<SpectralField, 3> drho;
  for (int a = 0; a < d; ++a) drho[a] = differentiate(s.rho, a);

  // |u|^2 and rho u as exact fields
  SpectralField u2 = product_padded(u[0], u[0]);
  for (int i = 1; i < d; ++i) axpy(u2, 1.0, product_padded(u[i], u[i]));
  std::array<SpectralField, 3> ru;
  for (int j = 0; j < d; ++j) ru[j] = product_padded(s.rho, u[j]);

  double j1 = 0.0, j3 = 0.0, j2 = 0.0, j4 = 0.0;
  for (int j = 0; j < d; ++j) {
    j1 -= pair(differentiate(u2, j), ru[j]);
    j2 += p.eps * pair(differentiate(u2, j), drho[j]);
    for (int i = 0; i < d; ++i) {
      j3 += 2.0 * pair(product_padded(ru[i], u[j]), du[j][i]);
      j4 -= 2.0 * p.eps * pair(product_padded(du[j][i], drho[j]), u[i]);
    }
  }
  rep.j1_plus_j3 = j1 + j3;
  rep.j2_plus_j4 = j2 + j4;

  // gradients of Q and the energy multiplier B = lap Q - Q - c* Q trQ^2
  std::array<QField, 3> dq;
  for (int a = 0; a < d; ++a) dq[a] = q_gradient(s.Q, a);
  QField B = energy_multiplier(s.Q, p.c_star);
  SpectralField w = q_trace_product_field(s.Q, s.Q);

  // J5 = 2 <grad Q . grad Q - F(Q) I, grad u>, J9 = 2 <u . grad Q, B>
  double j5 = 0.0, j9 = 0.0;
  {
    SpectralField fq_quad = 0.5 * w;  // 1/2 tr Q^2
    for (int a = 0; a < d; ++a)
      axpy(fq_quad, 0.5, q_trace_product_field(dq[a], dq[a]));  // 1/2 |grad Q|^2
    SpectralField fq_quart = product_padded(w, w);              // (tr Q^2)^2
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j)
        j5 += 2.0 * pair(q_trace_product_field(dq[i], dq[j]), du[j][i]);
      j5 -= 2.0 * pair(fq_quad, du[i][i]);
      j5 -= 2.0 * 0.25 * p.c_star * pair(fq_quart, du[i][i]);
    }
    for (int a = 0; a < d; ++a) {
      QField udq;
      for (int k = 0; k < 5; ++k) udq.comp[k] = product_padded(u[a], dq[a].comp[k]);
      j9 += 2.0 * q_frobenius_pair(udq, B);
    }
  }
  rep.j5_plus_j9 = j5 + j9;

  // J6 = -2 <Q lapQ - lapQ Q, grad u>, J10 = -2 <Psi Q - Q Psi, B>
  double j6 = 0.0, j10 = 0.0;
  {
    QField lapq = s.Q.apply_laplacian();
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        if (i == j) continue;  // commutator of symmetric matrices is skew
        SpectralField com(padded_grid(g, 2), all_cos());
        bool first = true;
        for (int k = 0; k < 3; ++k) {
          SpectralField t1 = product_padded(q_entry_field(s.Q, i, k),
                                            q_entry_field(lapq, k, j));
          SpectralField t2 = product_padded(q_entry_field(lapq, i, k),
                                            q_entry_field(s.Q, k, j));
          if (first) {
            com = t1 - t2;
            first = false;
          } else {
            axpy(com, 1.0, t1);
            axpy(com, -1.0, t2);
          }
        }
        j6 -= 2.0 * pair(com, du[j][i]);
      }
    // (Psi Q - Q Psi)_ij = 1/2 sum_k [(d_k u_i - d_i u_k) Q_kj - Q_ik (d_j u_k - d_k u_j)]
    // paired entry-wise against B over the full 3x3 contraction
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        SpectralField be = q_entry_field(B, std::min(i, j), std::max(i, j));
        for (int k = 0; k < 3; ++k) {
          SpectralField qkj = q_entry_field(s.Q, std::min(k, j), std::max(k, j));
          SpectralField qik = q_entry_field(s.Q, std::min(i, k), std::max(i, k));
          double acc = 0.0;
          if (k < d && i < d) acc += 0.5 * pair(product_padded(du[k][i], qkj), be);
          if (i < d && k < d) acc -= 0.5 * pair(product_padded(du[i][k], qkj), be);
          if (j < d && k < d) acc -= 0.5 * pair(product_padded(qik, du[j][k]), be);
          if (k < d && j < d) acc += 0.5 * pair(product_padded(qik, du[k][j]), be);
          j10 -= 2.0 * acc;
        }
      }
  }
  rep.j6_plus_j10 = j6 + j10;

  // J13 = 2 c* Gamma int Q|Q|^2 : lap Q
  {
    QField wq;
    for (int k = 0; k < 5; ++k) wq.comp[k] = product_padded(w, s.Q.comp[k]);
    rep.j13 = 2.0 * p.c_star * p.Gamma * q_frobenius_pair(wq, s.Q.apply_laplacian());
  }

  rep.scale = std::max({std::abs(j1), std::abs(j3), std::abs(j2), std::abs(j4),
                        std::abs(j5), std::abs(j9), std::abs(j6), std::abs(j10), 1e-30});
  return rep;
}

// ---- test functions / trajectories -------------------------------------------------

TestFunctionSet TestFunctionSet::default_set(const Grid& g) {
  TestFunctionSet tfs;
  // scalar: the first six low cosine multi-indices
  int count = 0;
  for (int total = 0; total <= 3 && count < 6; ++total)
    for (int k0 = 0; k0 <= total && count < 6; ++k0)
      for (int k1 = 0; k1 <= total - k0 && count < 6; ++k1) {
        int k2 = total - k0 - k1;
        if (g.d < 2 && k1 > 0) continue;
        if (g.d < 3 && k2 > 0) continue;
        std::array<int, 3> m{k0, g.d > 1 ? k1 : 0, g.d > 2 ? k2 : 0};
        if (k0 >= g.n[0] || m[1] >= g.n[1] || m[2] >= g.n[2]) continue;
        tfs.scalar_modes.push_back(m);
        ++count;
      }
  // vector: two low sine modes per active component
  std::array<int, 3> base{1, g.d > 1 ? 1 : 0, g.d > 2 ? 1 : 0};
  for (int comp = 0; comp < g.d; ++comp) {
    tfs.vector_modes.push_back({comp, base});
    std::array<int, 3> second = base;
    second[comp] = 2;
    tfs.vector_modes.push_back({comp, second});
  }
  return tfs;
}

TrajectoryRecorder::TrajectoryRecorder(const State& initial, const RegularizationParams& p,
                                       const TestFunctionSet& tfs, int every)
    : every_(std::max(1, every)) {
  traj_.params = p;
  traj_.tfs = tfs;
  traj_.frames.push_back(initial);
  traj_.forcing_pairings.push_back(std::vector<double>(tfs.vector_modes.size(), 0.0));
  traj_.frame_halted.push_back(false);
  running_pairings_.assign(tfs.vector_modes.size(), 0.0);
}

void TrajectoryRecorder::after_step(const State& s, const StepExtras& extras, bool halted) {
  for (std::size_t t = 0; t < traj_.tfs.vector_modes.size(); ++t) {
    auto [comp, mode] = traj_.tfs.vector_modes[t];
    running_pairings_[t] += extras.forcing[comp].at(mode[0], mode[1], mode[2]);
  }
  ++count_;
  if (count_ % every_ == 0) {
    traj_.frames.push_back(s);
    traj_.forcing_pairings.push_back(running_pairings_);
    traj_.frame_halted.push_back(halted);
  }
}

Trajectory TrajectoryRecorder::take() { return std::move(traj_); }

// ---- weak residuals ----------------------------------------------------------------

namespace {

std::vector<std::array<SpectralField, 3>> recover_all(const Trajectory& traj) {
  std::vector<std::array<SpectralField, 3>> us;
  us.reserve(traj.frames.size());
  for (const auto& s : traj.frames) {
    MassOp mass(s.rho, traj.params.n);
    std::array<SpectralField, 3> u;
    for (int a = 0; a < 3; ++a) {
      if (a >= s.dim()) { u[a] = SpectralField(s.grid(), all_sin()); continue; }
      const SpectralField* guess = us.empty() ? nullptr : &us.back()[a];
      u[a] = mass.solve(s.m[a], guess);
    }
    us.push_back(u);
  }
  return us;
}

double trapezoid(const std::vector<double>& values, const std::vector<double>& times) {
  double acc = 0.0;
  for (std::size_t i = 1; i < values.size(); ++i)
    acc += 0.5 * (values[i] + values[i - 1]) * (times[i] - times[i - 1]);
  return acc;
}

}  // namespace

WeakResidualReport weak_residual(const Trajectory& traj, WeakEquation eq) {
  const Grid& g = traj.initial().grid();
  const RegularizationParams& p = traj.params;
  Stepper st(g, p, NoiseModel{1, 1.1, 0, 0, 0, 0, {1, 0, 0}});
  auto us = recover_all(traj);
  const std::size_t F = traj.frames.size();
  std::vector<double> times(F);
  for (std::size_t f = 0; f < F; ++f) times[f] = traj.frames[f].t;

  WeakResidualReport rep;
  auto finish = [&](double lhs_t, double lhs_0, const std::vector<double>& flux,
                    double stochastic) {
    double res = lhs_t - lhs_0 - trapezoid(flux, times) - stochastic;
    rep.per_test_function.push_back(std::abs(res));
    rep.max_abs = std::max(rep.max_abs, std::abs(res));
  };

  switch (eq) {
    case WeakEquation::Mass: {
      for (const auto& m : traj.tfs.scalar_modes) {
        std::vector<double> flux(F);
        for (std::size_t f = 0; f < F; ++f)
          flux[f] = st.density_rhs(traj.frames[f].rho, us[f]).at(m[0], m[1], m[2]);
        finish(traj.frames.back().rho.at(m[0], m[1], m[2]),
               traj.frames.front().rho.at(m[0], m[1], m[2]), flux, 0.0);
      }
      break;
    }
    case WeakEquation::Concentration: {
      for (const auto& m : traj.tfs.scalar_modes) {
        std::vector<double> flux(F);
        for (std::size_t f = 0; f < F; ++f)
          flux[f] = st.concentration_rhs(traj.frames[f].c, us[f]).at(m[0], m[1], m[2]);
        finish(traj.frames.back().c.at(m[0], m[1], m[2]),
               traj.frames.front().c.at(m[0], m[1], m[2]), flux, 0.0);
      }
      break;
    }
    case WeakEquation::QTensor: {
      for (const auto& m : traj.tfs.scalar_modes) {
        for (int ci = 0; ci < 5; ++ci) {
          std::vector<double> flux(F);
          for (std::size_t f = 0; f < F; ++f)
            flux[f] = st.qtensor_rhs(traj.frames[f].Q, us[f], traj.frames[f].c)
                          .comp[ci]
                          .at(m[0], m[1], m[2]);
          finish(traj.frames.back().Q.comp[ci].at(m[0], m[1], m[2]),
                 traj.frames.front().Q.comp[ci].at(m[0], m[1], m[2]), flux, 0.0);
        }
      }
      break;
    }
    case WeakEquation::Momentum: {
      // one functional evaluation per frame covers every vector test function
      std::vector<std::array<SpectralField, 3>> rhs(F);
      for (std::size_t f = 0; f < F; ++f)
        rhs[f] = st.momentum_rhs(traj.frames[f], us[f]);
      for (std::size_t t = 0; t < traj.tfs.vector_modes.size(); ++t) {
        auto [comp, mode] = traj.tfs.vector_modes[t];
        std::vector<double> flux(F);
        for (std::size_t f = 0; f < F; ++f)
          flux[f] = rhs[f][comp].at(mode[0], mode[1], mode[2]);
        finish(traj.frames.back().m[comp].at(mode[0], mode[1], mode[2]),
               traj.frames.front().m[comp].at(mode[0], mode[1], mode[2]), flux,
               traj.forcing_pairings.back()[t]);
      }
      break;
    }
  }
  return rep;
}

// ---- renormalized continuity ---------------------------------------------------------

RenormFunction renorm_Tk(double k) {
  RenormFunction f;
  f.b = [k](double z) { return cutoff_Tk(z, k); };
  f.b_prime = [k](double z) { return cutoff_Tk_prime(z, k); };
  f.b_second = [k](double z) { return cutoff_Tk_second(z, k); };
  f.flat_tail = true;
  f.name = "T_k";
  return f;
}

RenormFunction renorm_constant(double value) {
  RenormFunction f;
  f.b = [value](double) { return value; };
  f.b_prime = [](double) { return 0.0; };
  f.b_second = [](double) { return 0.0; };
  f.flat_tail = true;
  f.name = "const";
  return f;
}

WeakResidualReport renormalized_residual(const Trajectory& traj, const RenormFunction& b) {
  if (!b.flat_tail)
    throw std::invalid_argument(
        "renormalized_residual: b must have b'(z) = 0 for large z (Definition 2.1(vi))");
  const Grid& g = traj.initial().grid();
  const RegularizationParams& p = traj.params;
  Grid g2 = padded_grid(g, 2);
  auto us = recover_all(traj);
  const std::size_t F = traj.frames.size();
  std::vector<double> times(F);
  for (std::size_t f = 0; f < F; ++f) times[f] = traj.frames[f].t;

  // per frame: b(rho), b'(rho), compound fields
  struct FrameFields {
    SpectralField brho;                      // collocation field of b(rho)
    std::array<SpectralField, 3> bu;         // b(rho) u_a
    SpectralField gdiv;                      // (b' rho - b) div u against the band
    SpectralField diffusion;                 // eps [lap b(rho) - b'' |grad rho|^2]
  };
  std::vector<FrameFields> ff(F);
  for (std::size_t f = 0; f < F; ++f) {
    const State& s = traj.frames[f];
    GridArray rv = synthesize_on(s.rho, g2);
    GridArray bv(g2), gv(g2), bpv(g2), bsv(g2);
    for (std::size_t i = 0; i < rv.v.size(); ++i) {
      double z = rv.v[i];
      bv.v[i] = b.b(z);
      bpv.v[i] = b.b_prime(z);
      bsv.v[i] = b.b_second(z);
      gv.v[i] = bpv.v[i] * z - bv.v[i];
    }
    ff[f].brho = analyze(bv, all_cos());
    for (int a = 0; a < g.d; ++a)
      ff[f].bu[a] = product_padded(ff[f].brho, us[f][a]);

    // (b' rho - b) div u: per-direction exact products against the Neumann band
    SpectralField gfield = analyze(gv, all_cos());
    SpectralField total(g, all_cos());
    for (int a = 0; a < g.d; ++a) {
      SpectralField diva = differentiate(us[f][a], a);
      axpy(total, 1.0, exact_project(product_padded(gfield, diva), all_cos(), g));
    }
    ff[f].gdiv = total;

    if (p.eps > 0.0) {
      // eps b'(rho) lap rho = eps [lap b - b''|grad rho|^2]; assembled as
      // b'(rho) * lap rho directly (collocation product)
      SpectralField bprime = analyze(bpv, all_cos());
      ff[f].diffusion = exact_project(
          product_padded(bprime, laplacian(s.rho)), all_cos(), g);
    } else {
      ff[f].diffusion = SpectralField(g, all_cos());
    }
  }

  WeakResidualReport rep;
  for (const auto& m : traj.tfs.scalar_modes) {
    std::vector<double> flux(F);
    for (std::size_t f = 0; f < F; ++f) {
      // int b u . grad psi - int (b' rho - b) div u psi + eps-diffusion psi
      SpectralField psi(g, all_cos());
      psi.at(m[0], m[1], m[2]) = 1.0;
      double val = 0.0;
      for (int a = 0; a < g.d; ++a) val += pair(ff[f].bu[a], differentiate(psi, a));
      val -= ff[f].gdiv.at(m[0], m[1], m[2]);
      val += p.eps > 0.0 ? ff[f].diffusion.at(m[0], m[1], m[2]) : 0.0;
      flux[f] = val;
    }
    SpectralField psi(g, all_cos());
    psi.at(m[0], m[1], m[2]) = 1.0;
    double lhs_t = pair(ff[F - 1].brho, psi);
    double lhs_0 = pair(ff[0].brho, psi);
    double res = lhs_t - lhs_0 - trapezoid(flux, times);
    rep.per_test_function.push_back(std::abs(res));
    rep.max_abs = std::max(rep.max_abs, std::abs(res));
  }
  return rep;
}

// ---- NDJSON ---------------------------------------------------------------------------

void write_ndjson(std::ostream& os, const MonitorRecord& rec) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "{\"time\":%.17g,\"name\":\"%s\",\"value\":%.17g,\"tolerance\":%.17g,"
                "\"pass\":%s}\n",
                rec.time, rec.name.c_str(), rec.value, rec.tolerance,
                rec.pass ? "true" : "false");
  os << buf;
}

}  // namespace alcsim
