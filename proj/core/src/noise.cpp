#include "alcsim/noise.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace alcsim {

namespace {
constexpr double kPi = std::numbers::pi;
}

double growth_constant(const NoiseModel& model, double gamma) {
  double theta = 2.0 * (gamma - 1.0) / gamma;
  double corr = std::max(1.0, std::pow(2.0, 1.0 - theta));
  double a = model.max_amplitude();
  return 4.0 * a * a * model.sum_lambda2() * corr;
}

std::vector<std::array<int, 3>> psi_mode_table(int d, int count) {
  std::vector<std::array<int, 3>> all;
  int mmax = 1;
  while (true) {
    all.clear();
    for (int m0 = 0; m0 <= mmax; ++m0)
      for (int m1 = 0; m1 <= (d > 1 ? mmax : 0); ++m1)
        for (int m2 = 0; m2 <= (d > 2 ? mmax : 0); ++m2)
          all.push_back({m0, m1, m2});
    if (int(all.size()) >= count) break;
    ++mmax;
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    int sa = a[0] + a[1] + a[2], sb = b[0] + b[1] + b[2];
    if (sa != sb) return sa < sb;
    return a < b;
  });
  all.resize(count);
  return all;
}

std::vector<double> sample_increment(const WienerPath& path, std::uint64_t step_index) {
  std::vector<double> dw(path.modes);
  double root_dt = std::sqrt(path.dt);
  for (int k = 0; k < path.modes; ++k)
    dw[k] = root_dt * counter_normal(path.seed, step_index, std::uint64_t(k));
  return dw;
}

std::array<double, 3> noise_coefficient(double rho, const std::array<double, 3>& u,
                                        double c, double grad_q_norm, double psi_k,
                                        double lambda_k, const NoiseModel& model,
                                        double gamma) {
  if (!(rho > 0.0)) throw VacuumError("noise_coefficient: rho <= 0 at evaluation point");
  double pr = std::pow(rho, 0.5 * (gamma - 1.0));
  double pc = std::pow(std::abs(c), (gamma - 1.0) / gamma);
  double pq = std::pow(grad_q_norm, (gamma - 1.0) / gamma);
  double scal = model.a_rho * pr + model.a_c * pc + model.a_Q * pq;
  std::array<double, 3> f;
  for (int i = 0; i < 3; ++i)
    f[i] = lambda_k * psi_k * (scal * model.v0[i] + model.a_u * u[i]);
  return f;
}

NoiseEval build_noise_eval(const State& state, const std::array<SpectralField, 3>& u,
                           const NoiseModel& model, double gamma, int nmodes) {
  NoiseEval ev;
  ev.base = state.grid();
  ev.pad = padded_grid(ev.base, 2);
  ev.nmodes = nmodes;
  ev.gamma = gamma;
  ev.model = &model;

  const Grid& pad = ev.pad;
  ev.rho = synthesize_on(state.rho, pad).v;
  ev.c = synthesize_on(state.c, pad).v;
  for (int a = 0; a < state.dim(); ++a) ev.u[a] = synthesize_on(u[a], pad).v;
  for (int a = state.dim(); a < 3; ++a) ev.u[a].assign(pad.total(), 0.0);
  for (int i = 0; i < 5; ++i) ev.qvals[i] = synthesize_on(state.Q.comp[i], pad).v;

  // |grad Q| pointwise
  ev.grad_q.assign(pad.total(), 0.0);
  for (int a = 0; a < state.dim(); ++a) {
    std::array<std::vector<double>, 5> dq;
    for (int i = 0; i < 5; ++i)
      dq[i] = synthesize_on(differentiate(state.Q.comp[i], a), pad).v;
    for (std::size_t p = 0; p < pad.total(); ++p) {
      QTensor q;
      q.q11 = dq[0][p]; q.q12 = dq[1][p]; q.q13 = dq[2][p];
      q.q22 = dq[3][p]; q.q23 = dq[4][p];
      ev.grad_q[p] += q.norm2();
    }
  }
  for (double& v : ev.grad_q) v = std::sqrt(v);

  ev.sqrt_rho.resize(pad.total());
  for (std::size_t p = 0; p < pad.total(); ++p) {
    if (!(ev.rho[p] > 0.0))
      throw VacuumError("noise: rho <= 0 on the evaluation grid (vacuum reached)");
    ev.sqrt_rho[p] = std::sqrt(ev.rho[p]);
  }

  // amplitude vector A(x)
  for (int i = 0; i < 3; ++i) ev.A[i].assign(pad.total(), 0.0);
  for (std::size_t p = 0; p < pad.total(); ++p) {
    double pr = std::pow(ev.rho[p], 0.5 * (gamma - 1.0));
    double pc = std::pow(std::abs(ev.c[p]), (gamma - 1.0) / gamma);
    double pq = std::pow(ev.grad_q[p], (gamma - 1.0) / gamma);
    double scal = model.a_rho * pr + model.a_c * pc + model.a_Q * pq;
    for (int i = 0; i < 3; ++i)
      ev.A[i][p] = scal * model.v0[i] + model.a_u * ev.u[i][p];
  }

  // shape values
  ev.psi.resize(model.modes);
  auto table = psi_mode_table(ev.base.d, model.modes);
  for (int k = 0; k < model.modes; ++k) {
    ev.psi[k].resize(pad.total());
    for (int i0 = 0; i0 < pad.n[0]; ++i0)
      for (int i1 = 0; i1 < pad.n[1]; ++i1)
        for (int i2 = 0; i2 < pad.n[2]; ++i2) {
          double v = std::cos(table[k][0] * kPi * pad.x(0, i0) / pad.length[0]);
          if (pad.d > 1) v *= std::cos(table[k][1] * kPi * pad.x(1, i1) / pad.length[1]);
          if (pad.d > 2) v *= std::cos(table[k][2] * kPi * pad.x(2, i2) / pad.length[2]);
          ev.psi[k][pad.index(i0, i1, i2)] = v;
        }
  }
  return ev;
}

namespace {

// P_n of pointwise Dirichlet-component data: collocation transform on the
// padded grid, truncated to the prognostic band and the Galerkin cut.
SpectralField project_Xn(const NoiseEval& ev, const std::vector<double>& vals) {
  GridArray g(ev.pad);
  g.v = vals;
  SpectralField full = analyze(g, all_sin());
  return project_Pn(resample(full, ev.base), ev.nmodes);
}

}  // namespace

std::array<SpectralField, 3> stochastic_forcing(const NoiseEval& ev,
                                                const std::vector<double>& dW) {
  const NoiseModel& model = *ev.model;
  // omega(x) = sum_k lambda_k psi_k(x) dW_k, shared by every component
  std::vector<double> omega(ev.pad.total(), 0.0);
  for (int k = 0; k < model.modes; ++k) {
    double w = model.lambda(k + 1) * dW[k];
    if (w == 0.0) continue;
    const std::vector<double>& psi = ev.psi[k];
    for (std::size_t p = 0; p < omega.size(); ++p) omega[p] += w * psi[p];
  }

  std::array<SpectralField, 3> out;
  std::vector<double> tmp(ev.pad.total());
  for (int i = 0; i < 3; ++i) {
    if (i >= ev.base.d) { out[i] = SpectralField(ev.base, all_sin()); continue; }
    for (std::size_t p = 0; p < tmp.size(); ++p)
      tmp[p] = ev.sqrt_rho[p] * omega[p] * ev.A[i][p];
    SpectralField pn = project_Xn(ev, tmp);  // P_n(sqrt(rho) sum f e_k dW_k)
    // multiply by sqrt(rho) again and project onto X_n
    GridArray pv = synthesize_on(pn, ev.pad);
    for (std::size_t p = 0; p < tmp.size(); ++p) tmp[p] = ev.sqrt_rho[p] * pv.v[p];
    out[i] = project_Xn(ev, tmp);
  }
  return out;
}

double ito_rate(const NoiseEval& ev) {
  const NoiseModel& model = *ev.model;
  double total = 0.0;
  std::vector<double> tmp(ev.pad.total());
  for (int k = 0; k < model.modes; ++k) {
    double lam = model.lambda(k + 1);
    for (int i = 0; i < ev.base.d; ++i) {
      for (std::size_t p = 0; p < tmp.size(); ++p)
        tmp[p] = ev.sqrt_rho[p] * lam * ev.psi[k][p] * ev.A[i][p];
      double nk = l2_norm(project_Xn(ev, tmp));
      total += nk * nk;
    }
  }
  return total;
}

double forcing_assembly_gap(const NoiseEval& ev) {
  const NoiseModel& model = *ev.model;
  double total = 0.0;
  std::vector<double> tmp(ev.pad.total());
  for (int k = 0; k < model.modes; ++k) {
    double lam = model.lambda(k + 1);
    for (int i = 0; i < ev.base.d; ++i) {
      for (std::size_t p = 0; p < tmp.size(); ++p)
        tmp[p] = ev.sqrt_rho[p] * lam * ev.psi[k][p] * ev.A[i][p];
      SpectralField pn = project_Xn(ev, tmp);
      GridArray pv = synthesize_on(pn, ev.pad);
      // sqrt(rho) P_n(sqrt(rho) f e_k) - rho f e_k, then projected onto X_n
      for (std::size_t p = 0; p < tmp.size(); ++p)
        tmp[p] = ev.sqrt_rho[p] * (pv.v[p] - ev.sqrt_rho[p] * lam * ev.psi[k][p] * ev.A[i][p]);
      double gap = l2_norm(project_Xn(ev, tmp));
      total += gap * gap;
    }
  }
  return std::sqrt(total);
}

double hs_norm(const NoiseEval& ev) {
  const NoiseModel& model = *ev.model;
  // sum_k lambda_k^2 int rho psi_k^2 |A|^2 dx by quadrature
  double cellw = ev.pad.volume() / double(ev.pad.total());
  double total = 0.0;
  for (int k = 0; k < model.modes; ++k) {
    double lam2 = model.lambda(k + 1) * model.lambda(k + 1);
    double acc = 0.0;
    for (std::size_t p = 0; p < ev.rho.size(); ++p) {
      double a2 = ev.A[0][p] * ev.A[0][p] + ev.A[1][p] * ev.A[1][p] + ev.A[2][p] * ev.A[2][p];
      acc += ev.rho[p] * ev.psi[k][p] * ev.psi[k][p] * a2;
    }
    total += lam2 * acc * cellw;
  }
  return std::sqrt(total);
}

double auxiliary_norm(const std::vector<double>& alpha) {
  double s = 0.0;
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    double kk = double(k + 1);
    s += alpha[k] * alpha[k] / (kk * kk);
  }
  return std::sqrt(s);
}

GrowthReport check_growth(const NoiseEval& ev) {
  const NoiseModel& model = *ev.model;
  GrowthReport rep;
  rep.constant = growth_constant(model, ev.gamma);
  if (model.zero()) return rep;
  double theta = 2.0 * (ev.gamma - 1.0) / ev.gamma;
  double worst = 0.0;
  for (std::size_t p = 0; p < ev.rho.size(); ++p) {
    double sum_psi2 = 0.0;
    for (int k = 0; k < model.modes; ++k) {
      double lp = model.lambda(k + 1) * ev.psi[k][p];
      sum_psi2 += lp * lp;
    }
    double a2 = ev.A[0][p] * ev.A[0][p] + ev.A[1][p] * ev.A[1][p] + ev.A[2][p] * ev.A[2][p];
    double lhs = sum_psi2 * a2;
    double u2 = ev.u[0][p] * ev.u[0][p] + ev.u[1][p] * ev.u[1][p] + ev.u[2][p] * ev.u[2][p];
    double rhs = std::pow(ev.rho[p], ev.gamma - 1.0) +
                 std::pow(std::abs(ev.c[p]) + ev.grad_q[p], theta) + u2;
    double ratio = lhs / (rep.constant * rhs);
    worst = std::max(worst, ratio);
  }
  rep.worst_ratio = worst;
  rep.pass = worst <= 1.0 + 1e-12;
  return rep;
}

ContinuityReport continuity_check(const NoiseEval& e1, const NoiseEval& e2,
                                  double threshold) {
  if (e1.pad != e2.pad) throw std::invalid_argument("continuity_check: grid mismatch");
  const NoiseModel& model = *e1.model;
  ContinuityReport rep;
  rep.threshold = threshold;
  double expo = (e1.gamma + 1.0) / (2.0 * e1.gamma);
  double worst = 0.0, worst_lip = 0.0;
  for (std::size_t p = 0; p < e1.rho.size(); ++p) {
    double sum_psi2 = 0.0;
    for (int k = 0; k < model.modes; ++k) {
      double lp = model.lambda(k + 1) * e1.psi[k][p];
      sum_psi2 += lp * lp;
    }
    double d2 = 0.0;  // |rho1 A1 - rho2 A2|^2 (the rho f difference)
    for (int i = 0; i < 3; ++i) {
      double di = e1.rho[p] * e1.A[i][p] - e2.rho[p] * e2.A[i][p];
      d2 += di * di;
    }
    double lhs = sum_psi2 * d2;

    double dm = 0.0;
    for (int i = 0; i < 3; ++i) {
      double di = e1.rho[p] * e1.u[i][p] - e2.rho[p] * e2.u[i][p];
      dm += di * di;
    }
    QTensor dq;
    for (int i = 0; i < 5; ++i) dq[i] = e1.qvals[i][p] - e2.qvals[i][p];
    double dstate = std::abs(e1.rho[p] - e2.rho[p]) + std::sqrt(dm) +
                    std::abs(e1.c[p] - e2.c[p]) + std::sqrt(dq.norm2());
    if (dstate == 0.0) continue;
    worst = std::max(worst, lhs / std::pow(dstate, expo));
    worst_lip = std::max(worst_lip, lhs / (dstate * dstate));
  }
  rep.worst_ratio = worst;
  rep.worst_lipschitz = worst_lip;
  rep.pass = worst <= threshold;
  return rep;
}

}  // namespace alcsim
