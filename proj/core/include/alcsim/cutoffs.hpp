#pragma once

#include <cmath>
#include <stdexcept>

namespace alcsim {

/// Smooth cut-off xi_K: 1 for |z| <= K, 0 for |z| >= 2K, monotone C^1
/// smoothstep in between (cubic by default, quintic optional).
struct CutoffSpec {
  double K = 10.0;
  int transition_degree = 3;  // 3 (cubic) or 5 (quintic)

  CutoffSpec() = default;
  CutoffSpec(double k, int degree = 3) : K(k), transition_degree(degree) {
    if (K <= 0.0) throw std::invalid_argument("CutoffSpec: K must be > 0");
    if (degree != 3 && degree != 5)
      throw std::invalid_argument("CutoffSpec: transition degree must be 3 or 5");
  }

  double xi(double z) const {
    double s = (std::abs(z) - K) / K;  // 0 at |z|=K, 1 at |z|=2K
    if (s <= 0.0) return 1.0;
    if (s >= 1.0) return 0.0;
    if (transition_degree == 3) return 1.0 - s * s * (3.0 - 2.0 * s);
    return 1.0 - s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
  }
};

/// Pressure truncation T_k(z) = k T(z/k) with the concave C^1 interpolant
///   T(z) = z            on (-inf, 1],
///   T(z) = 2 - (z-3)^2/4 on [1, 3],
///   T(z) = 2            on [3, inf).
/// Monotone nondecreasing, concave, 1-Lipschitz, T_k(z) <= min(z, 2k) for z>=0.
inline double concave_T(double z) {
  if (z <= 1.0) return z;
  if (z >= 3.0) return 2.0;
  double u = z - 3.0;
  return 2.0 - 0.25 * u * u;
}

inline double concave_T_prime(double z) {
  if (z <= 1.0) return 1.0;
  if (z >= 3.0) return 0.0;
  return -0.5 * (z - 3.0);
}

inline double cutoff_Tk(double z, double k) {
  if (k < 1.0) throw std::invalid_argument("cutoff_Tk: k must be >= 1");
  return k * concave_T(z / k);
}

inline double cutoff_Tk_prime(double z, double k) {
  if (k < 1.0) throw std::invalid_argument("cutoff_Tk: k must be >= 1");
  return concave_T_prime(z / k);
}

inline double cutoff_Tk_second(double z, double k) {
  if (k < 1.0) throw std::invalid_argument("cutoff_Tk: k must be >= 1");
  double u = z / k;
  if (u <= 1.0 || u >= 3.0) return 0.0;
  return -0.5 / k;
}

}  // namespace alcsim
