#include "alcsim/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace alcsim {

namespace {

// C1 smooth-max ramp: r(0)=0, r'(0)=0, r(1)=1, r'(1)=1, monotone, r(t) <= t.
double ramp(double t) { return t * t * (2.0 - t); }

// Smooth clamp of z into [lo, hi] with C1 joints; lo < hi assumed.
double smooth_clamp(double z, double lo, double hi) {
  double w = 0.25 * (hi - lo);
  if (z <= lo) return lo;
  if (z < lo + w) return lo + w * ramp((z - lo) / w);
  if (z >= hi) return hi;
  if (z > hi - w) return hi - w * ramp((hi - z) / w);
  return z;
}

double quad_weight(const Grid& g) { return g.volume() / double(g.total()); }

}  // namespace

// ---- mollified initial data ---------------------------------------------------

MollifyResult mollify_initial_data(const GridArray& rho0,
                                   const std::array<GridArray, 3>& m0,
                                   const RegularizationParams& p) {
  const Grid& g = rho0.grid;
  for (double v : rho0.v)
    if (v < 0.0) throw ConfigError("mollify_initial_data: rho0 has negative values");

  const double lo = p.delta, hi = p.delta_upper();
  MollifyResult out;

  // clamp -> band projection -> positivity re-clamp (sweeps on the padded
  // grid, where the solver later checks positivity)
  GridArray work = rho0;
  for (double& v : work.v) v = smooth_clamp(v, lo, hi);
  SpectralField rho_band = analyze(work, all_cos());
  Grid pad = padded_grid(g, 2);
  for (int sweep = 0; sweep < 8; ++sweep) {
    GridArray back = synthesize_on(rho_band, pad);
    bool dirty = false;
    for (double& v : back.v) {
      double c = std::min(std::max(v, lo), hi);
      if (c != v) { v = c; dirty = true; }
    }
    if (!dirty) break;
    rho_band = resample(analyze(back, all_cos()), g);
  }
  {
    // residual undershoot is removed by a constant lift (keeps smoothness,
    // guarantees the (3.6) lower bound exactly on the quadrature grid)
    GridArray back = synthesize_on(rho_band, pad);
    double mn = back.v[0];
    for (double v : back.v) mn = std::min(mn, v);
    if (mn < lo) rho_band.a[0] += (lo - mn) * std::sqrt(g.volume());
  }
  {
    GridArray clamped = rho0;
    for (double& v : clamped.v) v = smooth_clamp(v, lo, hi);
    GridArray back = synthesize(rho_band);
    double err = 0.0;
    for (std::size_t i = 0; i < back.v.size(); ++i) {
      double dd = back.v[i] - clamped.v[i];
      err += dd * dd;
    }
    out.rho_projection_error = std::sqrt(err * quad_weight(g));
  }
  out.rho = rho_band;

  // momentum: m_tilde = m0 sqrt(rho_delta/rho0) where rho0 > 0, else 0;
  // h = band projection of m_tilde / sqrt(rho_delta); m_delta = h sqrt(rho_delta)
  GridArray rho_vals = synthesize(rho_band);
  double h_err2 = 0.0;
  for (int comp = 0; comp < 3; ++comp) {
    if (comp >= g.d || m0[comp].v.empty()) {
      out.m[comp] = SpectralField(g, all_sin());
      continue;
    }
    GridArray ratio(g);
    for (std::size_t i = 0; i < ratio.v.size(); ++i) {
      double r0 = rho0.v[i];
      // m_tilde / sqrt(rho_delta) = m0 sqrt(rho_delta/rho0) / sqrt(rho_delta)
      //                           = m0 / sqrt(rho0)   where rho0 > 0
      ratio.v[i] = (r0 > 0.0) ? m0[comp].v[i] / std::sqrt(r0) : 0.0;
    }
    SpectralField h = analyze(ratio, all_sin());
    GridArray h_back = synthesize(h);
    for (std::size_t i = 0; i < ratio.v.size(); ++i) {
      double dd = h_back.v[i] - ratio.v[i];
      h_err2 += dd * dd;
    }
    // m = h sqrt(rho_delta), band-projected
    GridArray mv(g);
    for (std::size_t i = 0; i < mv.v.size(); ++i)
      mv.v[i] = h_back.v[i] * std::sqrt(std::max(rho_vals.v[i], lo * 0.5));
    out.m[comp] = analyze(mv, all_sin());
  }
  out.h_approx_error = std::sqrt(h_err2 * quad_weight(g));
  return out;
}

// ---- stepper -------------------------------------------------------------------

Stepper::Stepper(const Grid& g, const RegularizationParams& p, const NoiseModel& nm)
    : grid_(g), params_(p), noise_(nm), cutoff_(p.K) {
  params_.validate();
  noise_.validate();
  reset_running_norms();
}

void Stepper::reset_running_norms() {
  sup_u_ = 0.0;
  sup_forcing_ = 0.0;
  divu_int_ = 0.0;
  tau_k_ = -1.0;
  halted_ = false;
  for (int a = 0; a < 3; ++a) forcing_acc_[a] = SpectralField(grid_, all_sin());
  last_u_.reset();
}

double Stepper::envelope_lower() const {
  return params_.delta * std::exp(-divu_int_);
}
double Stepper::envelope_upper() const {
  return params_.delta_upper() * std::exp(divu_int_);
}

bool check_stopping(double sup_u_l2, double sup_forcing_l2, double K) {
  return std::max(sup_u_l2, sup_forcing_l2) >= K;
}

double Stepper::divu_sup(const std::array<SpectralField, 3>& u) const {
  Grid pad = padded_grid(grid_, 2);
  std::vector<double> div(pad.total(), 0.0);
  for (int a = 0; a < grid_.d; ++a) {
    GridArray da = synthesize_on(differentiate(u[a], a), pad);
    for (std::size_t i = 0; i < div.size(); ++i) div[i] += da.v[i];
  }
  double m = 0.0;
  for (double v : div) m = std::max(m, std::abs(v));
  return m;
}

std::array<SpectralField, 3> Stepper::recover_velocity(const State& s) const {
  MassOp mass(s.rho, params_.n);
  if (mass.rho_min() <= envelope_lower() - params_.envelope_tol)
    throw VacuumError("recover_velocity: density below the Lemma 3.2 envelope guard");
  std::array<SpectralField, 3> u;
  for (int a = 0; a < 3; ++a) {
    if (a >= grid_.d) { u[a] = SpectralField(grid_, all_sin()); continue; }
    const SpectralField* guess = last_u_ ? &(*last_u_)[a] : nullptr;
    u[a] = mass.solve(s.m[a], guess);
  }
  return u;
}

// ---- density -------------------------------------------------------------------

SpectralField Stepper::transport_divergence(const SpectralField& rho,
                                            const std::array<SpectralField, 3>& u) const {
  const Grid& g = rho.grid;
  SpectralField div(g, all_cos());
  for (int a = 0; a < g.d; ++a) {
    SpectralField w = product_padded(rho, u[a]);  // Dirichlet, exact
    axpy(div, 1.0, exact_project(differentiate(w, a), all_cos(), g));
  }
  div.a[0] = 0.0;  // the continuum zero mode is exactly 0 (u = 0 on the faces)
  return div;
}

SpectralField Stepper::density_rhs(const SpectralField& rho,
                                   const std::array<SpectralField, 3>& u) const {
  SpectralField r = -1.0 * transport_divergence(rho, u);
  axpy(r, params_.eps, laplacian(rho));
  return r;
}

SpectralField Stepper::advance_density(const SpectralField& rho,
                                       const std::array<SpectralField, 3>& u) const {
  SpectralField interm = rho - params_.dt * transport_divergence(rho, u);
  // exact integrating factor for the eps Laplacian
  const double eps_dt = params_.eps * params_.dt;
  return scale_by_kappa2(interm, [eps_dt](double k2) { return std::exp(-eps_dt * k2); });
}

// ---- concentration -------------------------------------------------------------

SpectralField Stepper::advection_term(const SpectralField& f,
                                      const std::array<SpectralField, 3>& u) const {
  const Grid& g = f.grid;
  SpectralField adv(g, all_cos());
  for (int a = 0; a < g.d; ++a)
    axpy(adv, 1.0, exact_project(product_padded(u[a], differentiate(f, a)), all_cos(), g));
  return adv;
}

SpectralField Stepper::concentration_rhs(const SpectralField& c,
                                         const std::array<SpectralField, 3>& u) const {
  SpectralField r = -1.0 * advection_term(c, u);
  axpy(r, 1.0, laplacian(c));
  return r;
}

SpectralField Stepper::advance_concentration(const SpectralField& c,
                                             const std::array<SpectralField, 3>& u) const {
  SpectralField adv = advection_term(c, u);
  const double alpha = 0.5 * params_.dt;
  SpectralField rhs = scale_by_kappa2(c, [alpha](double k2) { return 1.0 - alpha * k2; });
  axpy(rhs, -params_.dt, adv);
  return scale_by_kappa2(rhs, [alpha](double k2) { return 1.0 / (1.0 + alpha * k2); });
}

// ---- Q tensor ------------------------------------------------------------------

QField Stepper::q_explicit_rhs(const QField& Q, const std::array<SpectralField, 3>& u,
                               const SpectralField& c) const {
  const Grid& g = grid_;
  const int d = g.d;
  const double Gam = params_.Gamma;

  // velocity gradients du[a][b] = d_a u_b; throughout the project the
  // Jacobian convention (grad u)_ij = d_j u_i fixes Psi = (grad u - grad u^T)/2
  std::array<std::array<SpectralField, 3>, 3> du;
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) du[a][b] = differentiate(u[b], a);

  // matrix entries of Q as fields
  std::array<std::array<SpectralField, 3>, 3> qe;
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j) {
      qe[i][j] = q_entry_field(Q, i, j);
      if (j > i) qe[j][i] = qe[i][j];
    }

  // trace of Q^2 (exact quadratic field, padded band)
  SpectralField trq2 = q_trace_product_field(Q, Q);

  // constant shift of c by c_*
  SpectralField c_shift = c;
  c_shift.a[0] -= params_.c_star * std::sqrt(g.volume());

  const std::array<std::pair<int, int>, 5> comps{{{0, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 2}}};

  QField out(g);
  for (int ci = 0; ci < 5; ++ci) {
    auto [i, j] = comps[ci];
    SpectralField rhs(g, all_cos());  // explicit part (everything but Gamma lap Q)

    // advection -(u . grad) Q_ij
    for (int a = 0; a < d; ++a)
      axpy(rhs, -1.0,
           exact_project(product_padded(u[a], differentiate(Q.comp[ci], a)), all_cos(), g));

    // rotation -(Q Psi - Psi Q)_ij
    //   = -1/2 sum_k [ Q_ik d_j u_k - Q_ik d_k u_j - d_k u_i Q_kj + d_i u_k Q_kj ]
    for (int k = 0; k < 3; ++k) {
      if (j < d && k < d)
        axpy(rhs, -0.5, exact_project(product_padded(qe[i][k], du[j][k]), all_cos(), g));
      if (k < d && j < d)
        axpy(rhs, +0.5, exact_project(product_padded(qe[i][k], du[k][j]), all_cos(), g));
      if (k < d && i < d)
        axpy(rhs, +0.5, exact_project(product_padded(du[k][i], qe[k][j]), all_cos(), g));
      if (i < d && k < d)
        axpy(rhs, -0.5, exact_project(product_padded(du[i][k], qe[k][j]), all_cos(), g));
    }

    // Gamma [ -(c - c*)/2 Q + b (Q^2 - tr(Q^2)/3 I) - c* Q tr(Q^2) ]_ij
    axpy(rhs, -0.5 * Gam, exact_project(product_padded(c_shift, Q.comp[ci]), all_cos(), g));

    SpectralField q2(g, all_cos());
    for (int k = 0; k < 3; ++k)
      axpy(q2, 1.0, exact_project(product_padded(qe[i][k], qe[k][j]), all_cos(), g));
    if (i == j) axpy(q2, -1.0 / 3.0, exact_project(trq2, all_cos(), g));
    axpy(rhs, params_.b * Gam, q2);

    axpy(rhs, -params_.c_star * Gam,
         exact_project(product_padded(trq2, Q.comp[ci]), all_cos(), g));

    out.comp[ci] = rhs;
  }
  return out;
}

QField Stepper::qtensor_rhs(const QField& Q, const std::array<SpectralField, 3>& u,
                            const SpectralField& c) const {
  QField r = q_explicit_rhs(Q, u, c);
  for (int ci = 0; ci < 5; ++ci)
    axpy(r.comp[ci], params_.Gamma, laplacian(Q.comp[ci]));
  return r;
}

QField Stepper::advance_qtensor(const QField& Q, const std::array<SpectralField, 3>& u,
                                const SpectralField& c) const {
  const double dt = params_.dt;
  const double alpha = 0.5 * params_.Gamma * dt;
  QField expl = q_explicit_rhs(Q, u, c);
  QField out(grid_);
  for (int ci = 0; ci < 5; ++ci) {
    // Crank-Nicolson in Gamma lap, everything else explicit
    SpectralField acc =
        scale_by_kappa2(Q.comp[ci], [alpha](double k2) { return 1.0 - alpha * k2; });
    axpy(acc, dt, expl.comp[ci]);
    out.comp[ci] =
        scale_by_kappa2(acc, [alpha](double k2) { return 1.0 / (1.0 + alpha * k2); });
  }
  return out;
}

// ---- momentum ------------------------------------------------------------------

namespace {

// coefficients <T, d_j phi^(k)> over the X_n basis: derivative moved onto the
// test function, so slot k picks up k_j pi / L_j after the exact projection.
SpectralField weak_grad_row(const SpectralField& T, int j, const Grid& base, int nmodes) {
  SpectralField p = exact_project(T, flip(all_sin(), j), base);
  const double w = 3.14159265358979323846 / base.length[j];
  SpectralField out(base, all_sin());
  for (int k0 = 0; k0 < base.n[0]; ++k0)
    for (int k1 = 0; k1 < base.n[1]; ++k1)
      for (int k2 = 0; k2 < base.n[2]; ++k2) {
        std::array<int, 3> k{k0, k1, k2};
        out.a[base.index(k0, k1, k2)] = k[j] * w * p.a[base.index(k0, k1, k2)];
      }
  return project_Pn(out, nmodes);
}

GridArray pointwise(const Grid& g, const std::vector<const std::vector<double>*>& factors) {
  GridArray out(g, 1.0);
  for (const auto* f : factors)
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] *= (*f)[i];
  return out;
}

}  // namespace

std::array<SpectralField, 3> Stepper::viscous_apply(
    const std::array<SpectralField, 3>& u) const {
  // mu1 lap u + (mu1+mu2) grad div u, exactly projected onto the band
  std::array<SpectralField, 3> r;
  const int d = grid_.d;
  for (int i = 0; i < 3; ++i) {
    r[i] = SpectralField(grid_, all_sin());
    if (i >= d) continue;
    axpy(r[i], params_.mu1, laplacian(u[i]));
  }
  const double mu_dil = params_.mu1 + params_.mu2;
  if (mu_dil != 0.0) {
    for (int c = 0; c < d; ++c) {
      SpectralField divc = differentiate(u[c], c);
      for (int i = 0; i < d; ++i)
        axpy(r[i], mu_dil, exact_project(differentiate(divc, i), all_sin(), grid_));
    }
  }
  for (int i = 0; i < d; ++i) r[i] = project_Pn(r[i], params_.n);
  return r;
}

std::array<SpectralField, 3> Stepper::assemble_momentum(
    const State& s, const std::array<SpectralField, 3>& u, bool include_viscous) const {
  const Grid& g = grid_;
  const int d = g.d;
  const int nm = params_.n;
  Grid g2 = g.refined(2), g3 = g.refined(3), g4 = g.refined(4);

  std::array<SpectralField, 3> F;
  for (int i = 0; i < 3; ++i) F[i] = SpectralField(g, all_sin());

  // -- convection + <rho u_i u_j, d_j phi_i> (cubic; exact on the 3x grid)
  {
    std::vector<double> rho3 = synthesize_on(s.rho, g3).v;
    std::array<std::vector<double>, 3> u3;
    for (int a = 0; a < d; ++a) u3[a] = synthesize_on(u[a], g3).v;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        if (j < i) continue;
        GridArray t = pointwise(g3, {&rho3, &u3[i], &u3[j]});
        SpectralField T = analyze(t, all_cos());
        axpy(F[i], 1.0, weak_grad_row(T, j, g, nm));
        if (i != j) axpy(F[j], 1.0, weak_grad_row(T, i, g, nm));
      }

    // -- pressure + <rho^gamma + delta rho^beta, d_i phi_i>
    GridArray p(g3);
    for (std::size_t q = 0; q < p.v.size(); ++q) {
      double r = std::max(rho3[q], 0.0);
      p.v[q] = std::pow(r, params_.gamma) + params_.delta * std::pow(r, params_.beta);
    }
    SpectralField P = analyze(p, all_cos());
    for (int i = 0; i < d; ++i) axpy(F[i], 1.0, weak_grad_row(P, i, g, nm));
  }

  // -- eps grad rho . grad u, direct pairing -<(d_j rho)(d_j u_i), phi_i>
  if (params_.eps != 0.0) {
    for (int i = 0; i < d; ++i) {
      GridArray acc(g2, 0.0);
      for (int j = 0; j < d; ++j) {
        GridArray dr = synthesize_on(differentiate(s.rho, j), g2);
        GridArray duv = synthesize_on(differentiate(u[i], j), g2);
        for (std::size_t q = 0; q < acc.v.size(); ++q) acc.v[q] += dr.v[q] * duv.v[q];
      }
      SpectralField V = analyze(acc, all_sin());  // every j-term is all-sin
      axpy(F[i], -params_.eps, project_Pn(resample(V, g), nm));
    }
  }

  // -- Q-tensor stresses: -<S_ij, d_j phi_i> with
  //    S = F(Q) I - grad Q . grad Q + (Q lapQ - lapQ Q) + sigma* c^2 Q
  {
    // gradients and Laplacian of Q on the 2x grid
    std::array<std::array<std::vector<double>, 5>, 3> dq;
    for (int a = 0; a < d; ++a)
      for (int k = 0; k < 5; ++k)
        dq[a][k] = synthesize_on(differentiate(s.Q.comp[k], a), g2).v;
    std::array<std::vector<double>, 5> qv, lapqv;
    for (int k = 0; k < 5; ++k) {
      qv[k] = synthesize_on(s.Q.comp[k], g2).v;
      lapqv[k] = synthesize_on(laplacian(s.Q.comp[k]), g2).v;
    }

    auto qtensor_at = [](const std::array<std::vector<double>, 5>& comp, std::size_t q) {
      QTensor t;
      for (int k = 0; k < 5; ++k) t[k] = comp[k][q];
      return t;
    };

    // tr Q^2 on the 2x grid and its exact quadratic field
    GridArray w2(g2);
    for (std::size_t q = 0; q < w2.v.size(); ++q) w2.v[q] = qtensor_at(qv, q).norm2();
    SpectralField W2 = analyze(w2, all_cos());

    // quartic part (c*/4) (tr Q^2)^2 on the 4x grid
    {
      GridArray w4(g4);
      GridArray w2_on4 = synthesize_on(W2, g4);
      for (std::size_t q = 0; q < w4.v.size(); ++q)
        w4.v[q] = 0.25 * params_.c_star * w2_on4.v[q] * w2_on4.v[q];
      SpectralField Fq = analyze(w4, all_cos());
      for (int i = 0; i < d; ++i) axpy(F[i], -1.0, weak_grad_row(Fq, i, g, nm));
    }

    // quadratic parts of F(Q): 1/2 |grad Q|^2 + 1/2 tr Q^2
    {
      GridArray fq(g2);
      for (std::size_t q = 0; q < fq.v.size(); ++q) {
        double gg = 0.0;
        for (int a = 0; a < d; ++a) gg += qtensor_at(dq[a], q).norm2();
        fq.v[q] = 0.5 * gg + 0.5 * w2.v[q];
      }
      SpectralField Fq = analyze(fq, all_cos());
      for (int i = 0; i < d; ++i) axpy(F[i], -1.0, weak_grad_row(Fq, i, g, nm));
    }

    // Ericksen - (grad Q . grad Q)_ij, sign + after the leading minus.
    // Off-diagonal entries carry sine parity on axes i and j (each gradient
    // flips one axis), the diagonal is even everywhere.
    for (int i = 0; i < d; ++i)
      for (int j = i; j < d; ++j) {
        GridArray e(g2);
        for (std::size_t q = 0; q < e.v.size(); ++q)
          e.v[q] = ddot(qtensor_at(dq[i], q).matrix(), qtensor_at(dq[j], q).matrix());
        Sig esig = (i == j) ? all_cos() : flip(flip(all_cos(), i), j);
        SpectralField E = analyze(e, esig);
        axpy(F[i], +1.0, weak_grad_row(E, j, g, nm));
        if (i != j) axpy(F[j], +1.0, weak_grad_row(E, i, g, nm));
      }

    // commutator Q lapQ - lapQ Q (skew, zero diagonal)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        if (i == j) continue;
        GridArray e(g2);
        for (std::size_t q = 0; q < e.v.size(); ++q) {
          Matrix3 qm = qtensor_at(qv, q).matrix();
          Matrix3 lm = qtensor_at(lapqv, q).matrix();
          double s = 0.0;
          for (int k = 0; k < 3; ++k) s += qm(i, k) * lm(k, j) - lm(i, k) * qm(k, j);
          e.v[q] = s;
        }
        SpectralField E = analyze(e, all_cos());
        axpy(F[i], -1.0, weak_grad_row(E, j, g, nm));
      }

    // active stress sigma* c^2 Q (cubic; exact on the 3x grid)
    if (params_.sigma_star != 0.0) {
      std::vector<double> c3 = synthesize_on(s.c, g3).v;
      std::array<std::vector<double>, 5> q3;
      for (int k = 0; k < 5; ++k) q3[k] = synthesize_on(s.Q.comp[k], g3).v;
      for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j) {
          GridArray e(g3);
          for (std::size_t q = 0; q < e.v.size(); ++q) {
            QTensor t = qtensor_at(q3, q);
            e.v[q] = params_.sigma_star * c3[q] * c3[q] * t.matrix()(i, j);
          }
          SpectralField E = analyze(e, all_cos());
          axpy(F[i], -1.0, weak_grad_row(E, j, g, nm));
          if (i != j) axpy(F[j], -1.0, weak_grad_row(E, i, g, nm));
        }
    }
  }

  if (include_viscous) {
    auto visc = viscous_apply(u);
    for (int i = 0; i < d; ++i) axpy(F[i], 1.0, visc[i]);
  }
  for (int i = 0; i < d; ++i) F[i] = project_Pn(F[i], nm);
  return F;
}

std::array<SpectralField, 3> Stepper::momentum_rhs(
    const State& s, const std::array<SpectralField, 3>& u) const {
  return assemble_momentum(s, u, /*include_viscous=*/true);
}

std::array<SpectralField, 3> Stepper::momentum_solve(
    const MassOp& mass_new, const std::array<SpectralField, 3>& rhs,
    const std::array<SpectralField, 3>& guess) const {
  const int d = grid_.d;
  const double theta_dt = 0.5 * params_.dt;

  auto apply = [&](const std::array<SpectralField, 3>& x) {
    std::array<SpectralField, 3> ax;
    auto visc = viscous_apply(x);
    for (int i = 0; i < 3; ++i) {
      if (i >= d) { ax[i] = SpectralField(grid_, all_sin()); continue; }
      ax[i] = mass_new.apply(x[i]);
      axpy(ax[i], -theta_dt, visc[i]);
    }
    return ax;
  };
  auto dot = [&](const std::array<SpectralField, 3>& a,
                 const std::array<SpectralField, 3>& b) {
    double s = 0.0;
    for (int i = 0; i < d; ++i)
      for (std::size_t q = 0; q < a[i].a.size(); ++q) s += a[i].a[q] * b[i].a[q];
    return s;
  };

  std::array<SpectralField, 3> x = guess;
  for (int i = 0; i < d; ++i) x[i] = project_Pn(x[i], params_.n);
  std::array<SpectralField, 3> r, p;
  auto ax = apply(x);
  for (int i = 0; i < 3; ++i) {
    r[i] = (i < d) ? rhs[i] - ax[i] : SpectralField(grid_, all_sin());
    if (i < d) r[i] = project_Pn(r[i], params_.n);
    p[i] = r[i];
  }
  double rr = dot(r, r);
  double b2 = std::max(dot(rhs, rhs), 1e-300);
  const double tol2 = 1e-26 * b2;
  int it = 0, maxit = 800;
  while (rr > tol2 && it < maxit) {
    auto ap = apply(p);
    double pap = dot(p, ap);
    if (!(pap > 0.0))
      throw NumericalFailure("momentum solve: implicit operator lost definiteness");
    double alpha = rr / pap;
    for (int i = 0; i < d; ++i)
      for (std::size_t q = 0; q < x[i].a.size(); ++q) {
        x[i].a[q] += alpha * p[i].a[q];
        r[i].a[q] -= alpha * ap[i].a[q];
      }
    double rr_new = dot(r, r);
    double beta = rr_new / rr;
    for (int i = 0; i < d; ++i)
      for (std::size_t q = 0; q < p[i].a.size(); ++q)
        p[i].a[q] = r[i].a[q] + beta * p[i].a[q];
    rr = rr_new;
    ++it;
  }
  if (rr > tol2)
    throw NumericalFailure("momentum solve: CG failed to converge (ill-conditioned mass matrix)");
  return x;
}

void Stepper::apply_truncation(std::array<SpectralField, 3>& u) const {
  for (int i = 0; i < grid_.d; ++i)
    for (double& a : u[i].a) a *= cutoff_.xi(a);
}

// ---- full step -------------------------------------------------------------

StepReport Stepper::step(State& state, const std::vector<double>& dW,
                         StepExtras* extras) {
  auto t0 = std::chrono::steady_clock::now();
  const Grid& g = grid_;
  const int d = g.d;
  const double dt = params_.dt;
  StepReport rep;

  // velocity at the start of the step
  std::array<SpectralField, 3> u = recover_velocity(state);

  // accumulated int ||div u||_inf dt, used by the Lemma 3.2 envelope
  divu_int_ += dt * divu_sup(u);

  // noise evaluation on the pre-step state
  const bool with_noise = !noise_.zero() && !dW.empty();
  std::array<SpectralField, 3> forcing;
  for (int a = 0; a < 3; ++a) forcing[a] = SpectralField(g, all_sin());
  double ito_dt = 0.0, growth_worst = 0.0, forcing_gap = 0.0;
  if (with_noise) {
    NoiseEval ev = build_noise_eval(state, u, noise_, params_.gamma, params_.n);
    forcing = stochastic_forcing(ev, dW);
    if (monitor_growth) {
      GrowthReport gr = check_growth(ev);
      growth_worst = gr.worst_ratio;
      if (!gr.pass)
        throw NumericalFailure("growth condition (2.1) violated: ratio " +
                               std::to_string(gr.worst_ratio));
    }
    if (ledger_hooks) ito_dt = dt * ito_rate(ev);
    if (diagnose_forcing_gap) forcing_gap = forcing_assembly_gap(ev);
  }

  // 1) density
  SpectralField rho_new = advance_density(state.rho, u);
  MassOp mass_new(rho_new, params_.n);  // throws VacuumError if rho' <= 0
  if (mass_new.rho_min() < envelope_lower() - params_.envelope_tol ||
      mass_new.rho_max() > envelope_upper() + params_.envelope_tol)
    throw NumericalFailure(
        "advance_density: Lemma 3.2 envelope violated (rho in [" +
        std::to_string(mass_new.rho_min()) + ", " + std::to_string(mass_new.rho_max()) +
        "], envelope [" + std::to_string(envelope_lower()) + ", " +
        std::to_string(envelope_upper()) + "]); consider a smaller dt");

  // 2) concentration, 3) Q tensor (uses the fresh concentration)
  SpectralField c_new = advance_concentration(state.c, u);
  QField q_new = advance_qtensor(state.Q, u, c_new);

  // 4) momentum: M[rho'] u' - dt/2 L u' = m + dt (N_expl + 1/2 L u) + forcing
  std::array<SpectralField, 3> n_expl = assemble_momentum(state, u, false);
  auto visc_old = viscous_apply(u);
  std::array<SpectralField, 3> rhs;
  for (int i = 0; i < 3; ++i) {
    if (i >= d) { rhs[i] = SpectralField(g, all_sin()); continue; }
    rhs[i] = project_Pn(state.m[i], params_.n);
    axpy(rhs[i], dt, n_expl[i]);
    axpy(rhs[i], 0.5 * dt, visc_old[i]);
    axpy(rhs[i], 1.0, forcing[i]);
  }

  double mart = 0.0;
  if (ledger_hooks && with_noise) {
    // adapted predictor velocity (no noise) for the martingale increment
    std::array<SpectralField, 3> rhs_det;
    for (int i = 0; i < 3; ++i)
      rhs_det[i] = (i < d) ? rhs[i] - forcing[i] : SpectralField(g, all_sin());
    auto u_pred = momentum_solve(mass_new, rhs_det, u);
    for (int i = 0; i < d; ++i)
      for (std::size_t q = 0; q < u_pred[i].a.size(); ++q)
        mart += 2.0 * u_pred[i].a[q] * forcing[i].a[q];
  }

  std::array<SpectralField, 3> u_new = momentum_solve(mass_new, rhs, u);
  apply_truncation(u_new);

  std::array<SpectralField, 3> m_new;
  for (int i = 0; i < 3; ++i)
    m_new[i] = (i < d) ? mass_new.apply(u_new[i]) : SpectralField(g, all_sin());

  // tau_K bookkeeping (boundary inclusive)
  double u_l2 = 0.0;
  for (int i = 0; i < d; ++i) {
    double ni = l2_norm(u_new[i]);
    u_l2 += ni * ni;
  }
  u_l2 = std::sqrt(u_l2);
  sup_u_ = std::max(sup_u_, u_l2);
  double f_l2 = 0.0;
  for (int i = 0; i < d; ++i) {
    axpy(forcing_acc_[i], 1.0, forcing[i]);
    double ni = l2_norm(forcing_acc_[i]);
    f_l2 += ni * ni;
  }
  f_l2 = std::sqrt(f_l2);
  sup_forcing_ = std::max(sup_forcing_, f_l2);
  if (!halted_ && check_stopping(sup_u_, sup_forcing_, params_.K)) {
    halted_ = true;
    tau_k_ = state.t + dt;
  }

  // fill the report
  rep.t = state.t + dt;
  rep.u_l2 = u_l2;
  double gu = 0.0;
  for (int i = 0; i < d; ++i)
    for (int a = 0; a < d; ++a) {
      double na = l2_norm(differentiate(u_new[i], a));
      gu += na * na;
    }
  rep.grad_u_l2 = std::sqrt(gu);
  {
    Grid g2 = g.refined(2);
    GridArray rv = synthesize_on(rho_new, g2);
    double cw = g2.volume() / double(g2.total());
    double sg = 0.0, sb = 0.0;
    for (double v : rv.v) {
      double r = std::max(v, 0.0);
      sg += std::pow(r, params_.gamma);
      sb += std::pow(r, params_.beta);
    }
    rep.rho_lgamma = std::pow(sg * cw, 1.0 / params_.gamma);
    rep.rho_lbeta = std::pow(sb * cw, 1.0 / params_.beta);
    rep.rho_min = mass_new.rho_min();
    rep.rho_max = mass_new.rho_max();
    GridArray cv = synthesize_on(c_new, g2);
    rep.c_min = cv.v[0];
    rep.c_max = cv.v[0];
    for (double v : cv.v) {
      rep.c_min = std::min(rep.c_min, v);
      rep.c_max = std::max(rep.c_max, v);
    }
  }
  rep.c_l2 = l2_norm(c_new);
  double gc = 0.0;
  for (int a = 0; a < d; ++a) {
    double na = l2_norm(differentiate(c_new, a));
    gc += na * na;
  }
  rep.grad_c_l2 = std::sqrt(gc);
  {
    double h1 = 0.0, lap = 0.0;
    // Frobenius weights: the representation shares q12/q13/q23 twice and the
    // derived q33 couples q11, q22 (see QField::l2_norm2)
    h1 = q_new.l2_norm2();
    for (int a = 0; a < d; ++a) {
      QField dq;
      for (int k = 0; k < 5; ++k) dq.comp[k] = differentiate(q_new.comp[k], a);
      h1 += dq.l2_norm2();
    }
    QField lq = q_new.apply_laplacian();
    lap = lq.l2_norm2();
    rep.q_h1 = std::sqrt(h1);
    rep.lap_q_l2 = std::sqrt(lap);
  }
  rep.forcing_integral_l2 = f_l2;
  rep.q_structure_residual = 0.0;  // enforced by the 5-component representation
  rep.divu_sup_integral = divu_int_;
  rep.halted = halted_;

  if (!rep.finite())
    throw NumericalFailure("step: non-finite state norm at t = " + std::to_string(rep.t));

  if (extras) {
    extras->u_old = u;
    extras->u_new = u_new;
    extras->forcing = forcing;
    extras->ito_rate_dt = ito_dt;
    extras->martingale_inc = mart;
    extras->growth_worst_ratio = growth_worst;
    extras->forcing_gap = forcing_gap;
    extras->has_noise = with_noise;
  }

  state.rho = rho_new;
  state.c = c_new;
  state.Q = q_new;
  state.m = m_new;
  state.t += dt;
  last_u_ = u_new;

  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace alcsim
