#pragma once

#include <array>
#include <memory>
#include <optional>
#include <vector>

#include "alcsim/cutoffs.hpp"
#include "alcsim/massmatrix.hpp"
#include "alcsim/noise.hpp"
#include "alcsim/params.hpp"
#include "alcsim/state.hpp"

namespace alcsim {

/// Mollified initial data per (3.6): density smoothly clamped into
/// [delta, delta^{-1/beta}] and band-projected with a positivity re-clamp;
/// momentum rebuilt as h sqrt(rho_delta) with h the band projection of
/// m_tilde / sqrt(rho_delta).
struct MollifyResult {
  SpectralField rho;                // band-limited, >= delta on the padded grid
  std::array<SpectralField, 3> m;   // Dirichlet momentum components
  double rho_projection_error = 0;  // L2 gap between clamped values and band field
  double h_approx_error = 0;        // || m_tilde/sqrt(rho_delta) - h ||_L2
};

MollifyResult mollify_initial_data(const GridArray& rho0,
                                   const std::array<GridArray, 3>& m0,
                                   const RegularizationParams& p);

/// Optional per-step byproducts for the energy ledger and noise monitors.
struct StepExtras {
  std::array<SpectralField, 3> u_old{}, u_new{};
  std::array<SpectralField, 3> forcing{};  // assembled (3.15) increment
  double ito_rate_dt = 0.0;                // J14 analogue times dt
  double martingale_inc = 0.0;             // 2 <u_pred, forcing>
  double growth_worst_ratio = 0.0;         // (2.1) monitor
  double forcing_gap = 0.0;                // (3.15) vs rho-f assembly gap
  bool has_noise = false;
};

/// Semi-implicit operator-split stepper for the modified system (3.1):
/// density (exact eps-heat propagator, explicit transport), concentration
/// (Crank-Nicolson heat, explicit advection), Q-tensor (Crank-Nicolson in
/// Gamma lap, explicit rest), then Galerkin momentum with the mass-matrix
/// solve, Crank-Nicolson viscosity, Euler-Maruyama noise and the xi_K
/// coefficient truncation.
class Stepper {
 public:
  Stepper(const Grid& g, const RegularizationParams& p, const NoiseModel& nm);

  /// One full dt update; deterministic given (state, dW). dW may be empty
  /// when the noise model has zero amplitude.
  StepReport step(State& state, const std::vector<double>& dW,
                  StepExtras* extras = nullptr);

  // -- sub-steps, usable standalone with a prescribed velocity ----------------
  SpectralField advance_density(const SpectralField& rho,
                                const std::array<SpectralField, 3>& u) const;
  SpectralField advance_concentration(const SpectralField& c,
                                      const std::array<SpectralField, 3>& u) const;
  QField advance_qtensor(const QField& Q, const std::array<SpectralField, 3>& u,
                         const SpectralField& c) const;

  // -- continuous-time right-hand sides, exactly projected onto the band;
  //    the coefficient k of each output is the weak pairing with the k-th
  //    basis function (used by the stepping and by the residual monitors)
  SpectralField density_rhs(const SpectralField& rho,
                            const std::array<SpectralField, 3>& u) const;
  SpectralField concentration_rhs(const SpectralField& c,
                                  const std::array<SpectralField, 3>& u) const;
  QField qtensor_rhs(const QField& Q, const std::array<SpectralField, 3>& u,
                     const SpectralField& c) const;

  /// Full momentum functional N[rho,u,c,Q] tested against the X_n basis
  /// (weak form; derivatives on the test functions where Definition 2.1(v)
  /// moves them). Exact pairings for every polynomial term.
  std::array<SpectralField, 3> momentum_rhs(const State& s,
                                            const std::array<SpectralField, 3>& u) const;

  /// u with M[rho] u = P_n-projected momentum (CG, warm-started).
  std::array<SpectralField, 3> recover_velocity(const State& s) const;

  /// sup-norm of div u on the padded grid.
  double divu_sup(const std::array<SpectralField, 3>& u) const;

  // -- tau_K / envelope bookkeeping -------------------------------------------
  void reset_running_norms();
  bool halted() const { return halted_; }
  double tau_K_estimate() const { return tau_k_; }
  double divu_sup_integral() const { return divu_int_; }
  double sup_u_l2() const { return sup_u_; }
  double sup_forcing_l2() const { return sup_forcing_; }

  /// Lemma 3.2 envelope at the current accumulated int ||div u||_inf dt.
  double envelope_lower() const;
  double envelope_upper() const;

  const RegularizationParams& params() const { return params_; }
  const NoiseModel& noise_model() const { return noise_; }
  const Grid& grid() const { return grid_; }

  bool ledger_hooks = false;          // fill martingale/predictor extras
  bool monitor_growth = true;         // hard-fail on a (2.1) violation
  bool diagnose_forcing_gap = false;  // fill StepExtras::forcing_gap

 private:
  SpectralField transport_divergence(const SpectralField& rho,
                                     const std::array<SpectralField, 3>& u) const;
  SpectralField advection_term(const SpectralField& f,
                               const std::array<SpectralField, 3>& u) const;
  QField q_explicit_rhs(const QField& Q, const std::array<SpectralField, 3>& u,
                        const SpectralField& c) const;
  std::array<SpectralField, 3> assemble_momentum(const State& s,
                                                 const std::array<SpectralField, 3>& u,
                                                 bool include_viscous) const;
  std::array<SpectralField, 3> viscous_apply(const std::array<SpectralField, 3>& u) const;
  std::array<SpectralField, 3> momentum_solve(const MassOp& mass_new,
                                              const std::array<SpectralField, 3>& rhs,
                                              const std::array<SpectralField, 3>& guess) const;
  void apply_truncation(std::array<SpectralField, 3>& u) const;

  Grid grid_;
  RegularizationParams params_;
  NoiseModel noise_;
  CutoffSpec cutoff_;

  // running tau_K data
  double sup_u_ = 0.0, sup_forcing_ = 0.0, divu_int_ = 0.0, tau_k_ = -1.0;
  bool halted_ = false;
  std::array<SpectralField, 3> forcing_acc_{};
  mutable std::optional<std::array<SpectralField, 3>> last_u_;  // CG warm start
};

/// Stopping rule of tau_K: halted once max(sup_s ||u||_L2,
/// sup_s ||int forcing dW||_L2) >= K (boundary inclusive).
bool check_stopping(double sup_u_l2, double sup_forcing_l2, double K);

}  // namespace alcsim
