#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "alcsim/solver.hpp"

namespace alcsim {

// ---- energy ledger -----------------------------------------------------------

/// Per-checkpoint record of the (3.11) balance: total energy E, accumulated
/// dissipation D, accumulated Ito correction I (J14 analogue), accumulated
/// martingale increments S (J15 analogue).
struct LedgerRow {
  double t = 0.0;
  double E = 0.0, D = 0.0, I = 0.0, S = 0.0;
};

/// E = int rho|u|^2 + c^2 + 2delta/(beta-1) rho^beta + 2/(gamma-1) rho^gamma
///     + |Q|^2 + |grad Q|^2 + c*/2 |Q|^4 dx.
double energy_functional(const State& s, const std::array<SpectralField, 3>& u,
                         const RegularizationParams& p);

/// dt * int 2mu1|grad u|^2 + 2(mu1+mu2)|div u|^2 + 2|grad c|^2
///    + 2Gamma(|grad Q|^2+|lap Q|^2) + 2Gamma(c*|Q|^4 + c*^2|Q|^6)
///    + 2eps(gamma rho^{gamma-2} + delta beta rho^{beta-2})|grad rho|^2 dx,
/// evaluated at the given state (callers pass the CN midpoint state).
double dissipation_increment(const State& s, const std::array<SpectralField, 3>& u,
                             const RegularizationParams& p, double dt);

/// Accumulates the ledger along a run. All entries are exact pairings or
/// padded quadratures of the stored fields; D uses the midpoint state of each
/// step, matching the Crank-Nicolson balance of the linear sub-steps.
class EnergyLedger {
 public:
  EnergyLedger(const State& initial, const std::array<SpectralField, 3>& u0,
               const RegularizationParams& p);

  void record_step(const State& before, const State& after, const StepExtras& extras,
                   double dt);

  const std::vector<LedgerRow>& rows() const { return rows_; }
  double initial_energy() const { return rows_.front().E; }

  /// R(t) = E(t) + D(t) - E(0) - I(t) - S(t) at the latest recorded time <= t.
  double residual_at(double t) const;
  LedgerRow row_at(double t) const;

 private:
  RegularizationParams params_;
  std::vector<LedgerRow> rows_;
};

/// max(0, c_lower - min c, max c - c_upper) on the padded collocation grid.
double max_principle_check(const SpectralField& c, double c_lower, double c_upper);

// ---- J-term cancellations ------------------------------------------------------

/// Integrated, dealiased versions of the (3.11) cancellation pairs and the
/// sign-definite J13 term, all via exact pairings of the stored state.
struct JCancellationReport {
  double j1_plus_j3 = 0.0;   // transport of kinetic energy
  double j2_plus_j4 = 0.0;   // eps-transport pair
  double j5_plus_j9 = 0.0;   // Ericksen/free-energy vs advected multiplier
  double j6_plus_j10 = 0.0;  // commutator stress vs co-rotation
  double j13 = 0.0;          // 2 c* Gamma int Q|Q|^2 : lap Q (must be <= 0)
  double scale = 1.0;        // magnitude of the larger side of each pair
};

JCancellationReport j_cancellation(const State& s, const std::array<SpectralField, 3>& u,
                                   const RegularizationParams& p);

// ---- weak residuals -------------------------------------------------------------

/// Low trigonometric test modes, fixed per run: cosine modes for the scalar
/// pairings (rho, c, Q components) and per-component sine modes for momentum.
struct TestFunctionSet {
  std::vector<std::array<int, 3>> scalar_modes;
  std::vector<std::pair<int, std::array<int, 3>>> vector_modes;  // (component, mode)

  static TestFunctionSet default_set(const Grid& g);
};

/// Stored trajectory: checkpoint states plus, per vector test function, the
/// running sum of the stochastic pairings sum_k <g_k, phi> dW_k (kept per
/// step so the momentum identity can be checked without storing fields).
struct Trajectory {
  RegularizationParams params;
  TestFunctionSet tfs;
  std::vector<State> frames;
  std::vector<std::vector<double>> forcing_pairings;  // [frame][vector mode]
  std::vector<bool> frame_halted;

  const State& initial() const { return frames.front(); }
};

/// Records checkpoints (every `every` steps, plus t = 0 and the final state).
class TrajectoryRecorder {
 public:
  TrajectoryRecorder(const State& initial, const RegularizationParams& p,
                     const TestFunctionSet& tfs, int every);

  void after_step(const State& s, const StepExtras& extras, bool halted);
  Trajectory take();

 private:
  Trajectory traj_;
  std::vector<double> running_pairings_;
  int every_, count_ = 0;
};

enum class WeakEquation { Mass, Momentum, Concentration, QTensor };

struct WeakResidualReport {
  std::vector<double> per_test_function;
  double max_abs = 0.0;
};

/// |LHS - RHS| of the selected weak identity of the modified system (3.1)
/// (Definition 2.1(v) plus the eps- and delta-terms of the running level);
/// deterministic time integrals by the trapezoid rule over checkpoints, the
/// stochastic integral from the recorded per-step pairings.
WeakResidualReport weak_residual(const Trajectory& traj, WeakEquation eq);

// ---- renormalized continuity -----------------------------------------------------

/// Renormalization function b with its derivatives; only functions with a
/// flat tail (b' = 0 for large z) are admissible per Definition 2.1(vi).
struct RenormFunction {
  std::function<double(double)> b, b_prime, b_second;
  bool flat_tail = false;
  std::string name;
};

RenormFunction renorm_Tk(double k);
RenormFunction renorm_constant(double value);

/// Residual of the renormalized continuity equation (5.25) with the
/// eps-diffusion terms of the running level; rejects b without a flat tail.
WeakResidualReport renormalized_residual(const Trajectory& traj, const RenormFunction& b);

// ---- NDJSON emission --------------------------------------------------------------

struct MonitorRecord {
  double time = 0.0;
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool pass = true;
};

void write_ndjson(std::ostream& os, const MonitorRecord& rec);

}  // namespace alcsim
