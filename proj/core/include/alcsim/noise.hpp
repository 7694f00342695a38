#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "alcsim/errors.hpp"
#include "alcsim/state.hpp"

namespace alcsim {

// ---- counter-based RNG --------------------------------------------------------

/// splitmix64 finalizer; the basis of all reproducible randomness here.
inline std::uint64_t sm64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline double uniform01(std::uint64_t x) {
  return (double((x >> 11)) + 0.5) * (1.0 / 9007199254740992.0);
}

/// Standard normal as a pure function of (seed, step, mode): identical results
/// regardless of scheduling or platform.
inline double counter_normal(std::uint64_t seed, std::uint64_t step, std::uint64_t mode) {
  std::uint64_t key = sm64(sm64(sm64(seed) ^ (step * 0xd1342543de82ef95ULL)) ^
                           (mode * 0xaf251af3b0f025b5ULL));
  double u1 = uniform01(sm64(key ^ 0x2545f4914f6cdd1dULL));
  double u2 = uniform01(sm64(key ^ 0x9fb21c651e98df25ULL));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

// ---- model ----------------------------------------------------------------------

/// Truncated cylindrical Wiener description: K_W retained modes with weights
/// lambda_k = k^{-s}, bounded cosine shapes psi_k, and the concrete
/// multiplicative coefficient
///   f e_k = lambda_k psi_k(x) (a_rho rho^{(g-1)/2} v0 + a_u u
///           + a_c |c|^{(g-1)/g} v0 + a_Q |grad Q|^{(g-1)/g} v0).
struct NoiseModel {
  int modes = 16;   // K_W
  double s = 1.1;   // weight decay exponent
  double a_rho = 0.02, a_u = 0.02, a_c = 0.02, a_Q = 0.02;
  std::array<double, 3> v0{1.0, 0.0, 0.0};

  double lambda(int k) const { return std::pow(double(k), -s); }  // k = 1..modes

  double sum_lambda2() const {
    double t = 0.0;
    for (int k = 1; k <= modes; ++k) t += lambda(k) * lambda(k);
    return t;
  }

  double max_amplitude() const {
    return std::max(std::max(std::abs(a_rho), std::abs(a_u)),
                    std::max(std::abs(a_c), std::abs(a_Q)));
  }

  bool zero() const { return max_amplitude() == 0.0; }

  void validate() const {
    if (modes < 1) throw ConfigError("noise: modes must be >= 1");
    if (!(s > 0.5)) throw ConfigError("noise: need s > 1/2 for sum lambda_k^2 < inf");
    double n2 = v0[0] * v0[0] + v0[1] * v0[1] + v0[2] * v0[2];
    if (std::abs(n2 - 1.0) > 1e-12) throw ConfigError("noise: v0 must be a unit vector");
  }
};

/// Explicit constant for the growth condition: sum_k |f e_k|^2 <=
/// C (rho^{g-1} + |c, grad Q|^{2(g-1)/g} + |u|^2) with
/// C = 4 max(a)^2 sum lambda_k^2 * max(1, 2^{1-theta}), theta = 2(g-1)/g.
double growth_constant(const NoiseModel& model, double gamma);

/// Spatial shape multi-indices: low cosine modes ordered by (|m|_1, lex);
/// psi_k(x) = prod_a cos(m_a pi x_a / L_a), so sup |psi_k| = 1.
std::vector<std::array<int, 3>> psi_mode_table(int d, int count);

// ---- Wiener increments --------------------------------------------------------

struct WienerPath {
  std::uint64_t seed = 0;
  double dt = 1e-3;
  int modes = 16;
};

/// Increments Delta W_k ~ N(0, dt) for one step, reproducible bit-for-bit.
std::vector<double> sample_increment(const WienerPath& path, std::uint64_t step_index);

// ---- state-dependent evaluation -------------------------------------------------

/// Pointwise coefficient f e_k (3-vector). `u` and the norms are the local
/// values; throws VacuumError for rho <= 0.
std::array<double, 3> noise_coefficient(double rho, const std::array<double, 3>& u,
                                        double c, double grad_q_norm, double psi_k,
                                        double lambda_k, const NoiseModel& model,
                                        double gamma);

/// Everything the per-step noise operations need, evaluated once on a padded
/// grid: field values, the common amplitude vector A(x), shape tables.
struct NoiseEval {
  Grid base;      // prognostic grid
  Grid pad;       // evaluation grid
  int nmodes;     // Galerkin band for P_n
  double gamma;
  const NoiseModel* model;
  std::vector<double> rho, sqrt_rho, c, grad_q;
  std::array<std::vector<double>, 3> u;
  std::array<std::vector<double>, 5> qvals;  // Q components (for (2.2) checks)
  std::array<std::vector<double>, 3> A;   // amplitude vector
  std::vector<std::vector<double>> psi;   // psi_k values on pad
};

/// Throws VacuumError when rho <= 0 anywhere on the evaluation grid.
NoiseEval build_noise_eval(const State& state, const std::array<SpectralField, 3>& u,
                           const NoiseModel& model, double gamma, int nmodes);

/// The (3.15) forcing increment sum_k sqrt(rho) P_n(sqrt(rho) f e_k) dW_k as
/// Dirichlet fields on the prognostic band.
std::array<SpectralField, 3> stochastic_forcing(const NoiseEval& ev,
                                                const std::vector<double>& dW);

/// J14 analogue: sum_k ||P_n(sqrt(rho) f e_k)||_L2^2.
double ito_rate(const NoiseEval& ev);

/// L2 gap between the (3.15) assembly sqrt(rho) P_n(sqrt(rho) f e_k) and the
/// limit-equation assembly rho f e_k, accumulated over modes (diagnostic).
double forcing_assembly_gap(const NoiseEval& ev);

/// Hilbert-Schmidt norm (sum_k ||sqrt(rho) f e_k||_L2^2)^{1/2} by quadrature.
double hs_norm(const NoiseEval& ev);

/// Auxiliary space H_0: ||h||^2 = sum alpha_k^2 k^{-2} (k starts at 1).
double auxiliary_norm(const std::vector<double>& alpha);

/// Growth condition (2.1) on the evaluation grid with the explicit constant.
struct GrowthReport {
  double worst_ratio = 0.0;  // sup_x lhs/rhs against the explicit constant C
  double constant = 0.0;
  bool pass = true;
};
GrowthReport check_growth(const NoiseEval& ev);

/// Continuity condition (2.2) evaluated verbatim on a state pair, plus the
/// plain squared-Lipschitz ratio for reference.
struct ContinuityReport {
  double worst_ratio = 0.0;      // sup_x lhs / |delta state|^{(g+1)/(2g)}
  double worst_lipschitz = 0.0;  // sup_x lhs / |delta state|^2
  double threshold = 0.0;
  bool pass = true;
};
ContinuityReport continuity_check(const NoiseEval& e1, const NoiseEval& e2,
                                  double threshold);

}  // namespace alcsim
