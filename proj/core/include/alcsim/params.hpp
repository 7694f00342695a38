#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "alcsim/errors.hpp"

namespace alcsim {

/// The four approximation levels (n, K, eps, delta) plus the model constants
/// and time discretization. Defaults are the desk-scale configuration.
struct RegularizationParams {
  int n = 32;               // Galerkin modes per axis for the velocity space X_n
  double K = 10.0;          // coefficient cut-off threshold of xi_K and tau_K
  double eps = 1e-2;        // artificial viscosity (eps lap rho)
  double delta = 1e-2;      // artificial pressure coefficient (delta rho^beta)
  double beta = 7.0;        // artificial adiabatic exponent, > max(6, gamma)
  double gamma = 5.0 / 3.0; // adiabatic exponent, > 3/2
  double Gamma = 1.0;       // Q-tensor relaxation rate
  double mu1 = 1.0;
  double mu2 = 0.0;
  double sigma_star = 1.0;  // active stress strength
  double c_star = 1.0;      // critical concentration
  double b = 1.0;           // material constant of the b-term in H
  double c_lower = 0.5;     // max-principle bounds for the concentration
  double c_upper = 1.5;
  double dt = 1e-3;
  double t_final = 0.5;
  double envelope_tol = 1e-8;  // slack for the Lemma 3.2 density envelope

  double delta_upper() const { return std::pow(delta, -1.0 / beta); }

  std::vector<std::string> violations() const {
    std::vector<std::string> v;
    if (n < 2) v.push_back("n must be >= 2");
    if (K <= 0) v.push_back("K must be > 0");
    if (eps < 0) v.push_back("eps must be >= 0");
    if (delta < 0) v.push_back("delta must be >= 0");
    if (!(gamma > 1.5)) v.push_back("gamma must be > 3/2");
    if (!(beta > std::max(6.0, gamma))) v.push_back("beta must be > max(6, gamma)");
    if (mu1 < 0) v.push_back("mu1 must be >= 0");
    if (2 * mu1 + 3 * mu2 < 0) v.push_back("2 mu1 + 3 mu2 must be >= 0");
    if (!(Gamma > 0)) v.push_back("Gamma must be > 0");
    if (!(c_lower > 0) || !(c_upper > c_lower)) v.push_back("need 0 < c_lower < c_upper");
    if (!(dt > 0)) v.push_back("dt must be > 0");
    if (!(t_final > 0)) v.push_back("t_final must be > 0");
    return v;
  }

  void validate() const {
    auto v = violations();
    if (!v.empty()) {
      std::string msg = "invalid parameters:";
      for (const auto& s : v) msg += " [" + s + "]";
      throw ConfigError(msg);
    }
  }
};

}  // namespace alcsim
