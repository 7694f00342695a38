#pragma once

#include <array>
#include <vector>

#include "alcsim/errors.hpp"
#include "alcsim/spectral.hpp"

namespace alcsim {

/// Density-weighted Gram operator <M[rho]u, v> = int rho u . v on the scalar
/// sine band (one velocity component block; the blocks are identical).
/// apply() realizes M[rho]u = P_n(rho u) through an exact padded product, so
/// the implied Gram matrix is the exact integral of rho against basis pairs
/// and lambda_min(M) >= min(rho over the quadrature grid) holds to rounding.
class MassOp {
 public:
  MassOp(const SpectralField& rho, int nmodes);

  SpectralField apply(const SpectralField& u) const;

  /// CG solve M x = b; warm start from `guess` when given. Throws
  /// NumericalFailure if the iteration stalls.
  SpectralField solve(const SpectralField& b, const SpectralField* guess = nullptr,
                      double rel_tol = 1e-13, int max_iter = 500) const;

  double rho_min() const { return rho_min_; }
  double rho_max() const { return rho_max_; }
  /// ||rho^{-1}||_inf realized on the quadrature grid (the bound of (3.11*)).
  double inv_rho_sup() const { return 1.0 / rho_min_; }

  const Grid& base() const { return base_; }
  const Grid& pad() const { return pad_; }
  int nmodes() const { return nmodes_; }
  const std::vector<double>& rho_values() const { return rho_pad_; }

 private:
  Grid base_, pad_;
  int nmodes_;
  std::vector<double> rho_pad_;
  double rho_min_ = 0.0, rho_max_ = 0.0;
};

/// Multi-indices of the velocity basis X_n (sine modes 1..min(nmodes, N-1)
/// per active axis), in row-major order. One component block.
std::vector<std::array<int, 3>> xn_basis(const Grid& g, int nmodes);

/// Dense symmetric positive-definite matrix of one component block of M[rho]
/// over xn_basis ordering (row-major flattened). Intended for diagnostics and
/// the dense eigen-oracle tests, not for stepping.
std::vector<double> assemble_mass_matrix(const MassOp& op);

}  // namespace alcsim
