#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "alcsim/grid.hpp"

namespace alcsim {

/// Boundary parity of a trigonometric expansion along one axis.
/// Cos: Neumann (normal derivative vanishes on the faces), basis
///   1/sqrt(L), sqrt(2/L) cos(k pi x / L), k = 1..n-1.
/// Sin: Dirichlet (field vanishes on the faces), basis
///   sqrt(2/L) sin(k pi x / L), k = 1..n-1 (slot 0 is unused and kept zero).
enum class Parity : std::uint8_t { Cos = 0, Sin = 1 };

using Sig = std::array<Parity, 3>;

inline Sig all_cos() { return {Parity::Cos, Parity::Cos, Parity::Cos}; }
inline Sig all_sin() { return {Parity::Sin, Parity::Sin, Parity::Sin}; }

/// Parity of a pointwise product, per axis.
inline Parity parity_product(Parity a, Parity b) {
  return (a == b) ? Parity::Cos : Parity::Sin;
}
inline Sig sig_product(const Sig& a, const Sig& b) {
  return {parity_product(a[0], b[0]), parity_product(a[1], b[1]),
          parity_product(a[2], b[2])};
}
inline Sig flip(Sig s, int axis) {
  s[axis] = (s[axis] == Parity::Cos) ? Parity::Sin : Parity::Cos;
  return s;
}

/// Real field sampled on a collocation grid.
struct GridArray {
  Grid grid;
  std::vector<double> v;

  GridArray() = default;
  explicit GridArray(const Grid& g, double fill = 0.0)
      : grid(g), v(g.total(), fill) {}
};

/// Coefficient array of a trigonometric expansion with a declared parity per
/// axis. Coefficients are in the orthonormal basis, so the plain Euclidean
/// dot product of two same-signature fields is the L2(D) inner product.
struct SpectralField {
  Grid grid;
  Sig sig = all_cos();
  std::vector<double> a;

  SpectralField() = default;
  SpectralField(const Grid& g, Sig s) : grid(g), sig(s), a(g.total(), 0.0) {
    // axes beyond d carry a single constant slot; only Cos makes sense there
    for (int ax = g.d; ax < 3; ++ax) sig[ax] = Parity::Cos;
  }

  double& at(int k0, int k1 = 0, int k2 = 0) { return a[grid.index(k0, k1, k2)]; }
  double at(int k0, int k1 = 0, int k2 = 0) const { return a[grid.index(k0, k1, k2)]; }
};

// -- transforms ---------------------------------------------------------------

/// Forward transform: collocation values -> full-band coefficients on the same
/// grid. For data outside the declared parity family this is the standard
/// pseudo-spectral (interpolatory) projection.
SpectralField analyze(const GridArray& values, Sig sig);

/// Inverse transform on the field's own grid.
GridArray synthesize(const SpectralField& f);

/// Inverse transform on a finer grid with the same box (spectral evaluation).
GridArray synthesize_on(const SpectralField& f, const Grid& eval);

// -- coefficient-space operations ---------------------------------------------

/// Exact spectral derivative along `axis`; parity flips on that axis.
SpectralField differentiate(const SpectralField& f, int axis);

/// Sum of second derivatives over all axes (mode-diagonal).
SpectralField laplacian(const SpectralField& f);

/// Multiply each mode by fn(kappa2) where kappa2 = sum_a (k_a pi / L_a)^2.
SpectralField scale_by_kappa2(const SpectralField& f,
                              const std::function<double(double)>& fn);

/// Sharp Galerkin truncation: zero every coefficient with a mode index
/// beyond `nmodes` on any axis. Idempotent, non-expansive in L2.
SpectralField project_Pn(const SpectralField& f, int nmodes);

/// Copy coefficients into a field with the given dims (truncate or zero-pad),
/// same signature. This is the orthogonal projection within one parity family.
SpectralField resample(const SpectralField& f, const Grid& out);

double l2_norm(const SpectralField& f);
double h1_norm(const SpectralField& f);

/// Exact L2(D) inner product of two expansions with arbitrary signatures and
/// dims over the same box; cross-parity axes use the analytic coupling
/// integrals, so no quadrature error is involved.
double pair(const SpectralField& f, const SpectralField& g);

/// Exact L2 projection of `f` onto the (sig, grid) family: the coefficient
/// k of the result is the exact integral of f against the k-th basis function.
SpectralField exact_project(const SpectralField& f, Sig sig, const Grid& out);

// arithmetic on matching (grid, sig)
SpectralField& axpy(SpectralField& y, double alpha, const SpectralField& x);
SpectralField operator+(const SpectralField& f, const SpectralField& g);
SpectralField operator-(const SpectralField& f, const SpectralField& g);
SpectralField operator*(double s, const SpectralField& f);

// -- products -----------------------------------------------------------------

/// Pointwise product evaluated on a padded grid (2x per axis) and truncated
/// back to the operands' band; signature is the parity product. Exact whenever
/// the true product bandwidth fits the retained modes.
SpectralField dealias_product(const SpectralField& f, const SpectralField& g);

/// Pointwise product kept at the full padded band (exact coefficients for
/// polynomial products up to quartic degree in band-limited factors).
SpectralField product_padded(const SpectralField& f, const SpectralField& g);

/// Default padded companion of a grid (2x points per axis).
Grid padded_grid(const Grid& g, int factor = 2);

// -- inverse divergence -------------------------------------------------------

/// A[f] = grad(Delta^{-1} f) for mean-free Neumann f: div A[f] = f and
/// Delta A[f] = grad f exactly in coefficients. Component i has Sin parity on
/// axis i and Cos parity elsewhere. Throws std::invalid_argument when the
/// zero mode of f is not (numerically) zero.
std::array<SpectralField, 3> inverse_div(const SpectralField& f);

/// Divergence right-inverse surrogate built from the same Neumann potential:
/// div v = f to spectral precision but only v.n = 0 on the faces, not v = 0
/// (gradient-potential construction; tangential components do not vanish).
std::array<SpectralField, 3> bogovskii_surrogate(const SpectralField& f);

/// sqrt(sum_i ||v_i||_L2^2 + sum_ij ||d_j v_i||_L2^2) for a vector field.
double h1_norm_vec(const std::array<SpectralField, 3>& v, int d);

}  // namespace alcsim
