#pragma once

#include <array>
#include <cmath>

#include "alcsim/spectral.hpp"
#include "alcsim/tensor.hpp"

namespace alcsim {

/// Q-tensor field: five Neumann scalar fields for the independent components
/// (q11, q12, q13, q22, q23); symmetry and tracelessness hold by construction.
struct QField {
  std::array<SpectralField, 5> comp;

  QField() = default;
  explicit QField(const Grid& g) {
    for (auto& f : comp) f = SpectralField(g, all_cos());
  }

  const Grid& grid() const { return comp[0].grid; }

  QField apply_laplacian() const {
    QField r;
    for (int i = 0; i < 5; ++i) r.comp[i] = laplacian(comp[i]);
    return r;
  }

  double l2_norm2() const {
    // tr(Q^2) integrated: q33 = -q11-q22 adds cross terms; off-diagonals twice
    double n11 = l2_norm(comp[0]), n12 = l2_norm(comp[1]), n13 = l2_norm(comp[2]);
    double n22 = l2_norm(comp[3]), n23 = l2_norm(comp[4]);
    double cross = 0.0;
    for (std::size_t i = 0; i < comp[0].a.size(); ++i)
      cross += comp[0].a[i] * comp[3].a[i];
    return 2.0 * (n11 * n11 + n22 * n22 + cross) +
           2.0 * (n12 * n12 + n13 * n13 + n23 * n23);
  }
};

/// Evaluate the five component fields on a grid; rows of `vals` follow the
/// component order of QField.
struct QValues {
  Grid grid;
  std::array<std::vector<double>, 5> vals;

  QTensor at(std::size_t i) const {
    QTensor q;
    q.q11 = vals[0][i]; q.q12 = vals[1][i]; q.q13 = vals[2][i];
    q.q22 = vals[3][i]; q.q23 = vals[4][i];
    return q;
  }
};

inline QValues synthesize_q(const QField& q, const Grid& eval) {
  QValues v;
  v.grid = eval;
  for (int i = 0; i < 5; ++i) v.vals[i] = synthesize_on(q.comp[i], eval).v;
  return v;
}

/// Matrix entry (i,j) of a Q-field as a scalar field; (2,2) = -(q11+q22).
inline SpectralField q_entry_field(const QField& q, int i, int j) {
  if (i > j) std::swap(i, j);
  if (i == 0) return q.comp[j];                     // (0,0)->q11,(0,1)->q12,(0,2)->q13
  if (i == 1 && j == 1) return q.comp[3];
  if (i == 1 && j == 2) return q.comp[4];
  SpectralField r = q.comp[0] + q.comp[3];
  return -1.0 * r;
}

/// tr(P Q) as an exact padded-band field: in the 5-component representation
/// B(p,q) = 2 p11 q11 + 2 p22 q22 + p11 q22 + p22 q11 + 2 (p12 q12 + p13 q13 + p23 q23).
inline SpectralField q_trace_product_field(const QField& p, const QField& q) {
  SpectralField w = 2.0 * product_padded(p.comp[0], q.comp[0]);
  axpy(w, 2.0, product_padded(p.comp[3], q.comp[3]));
  axpy(w, 1.0, product_padded(p.comp[0], q.comp[3]));
  axpy(w, 1.0, product_padded(p.comp[3], q.comp[0]));
  axpy(w, 2.0, product_padded(p.comp[1], q.comp[1]));
  axpy(w, 2.0, product_padded(p.comp[2], q.comp[2]));
  axpy(w, 2.0, product_padded(p.comp[4], q.comp[4]));
  return w;
}

/// Exact integral of tr(P Q) over the box (Frobenius pairing of two Q-fields).
inline double q_frobenius_pair(const QField& p, const QField& q) {
  return 2.0 * pair(p.comp[0], q.comp[0]) + 2.0 * pair(p.comp[3], q.comp[3]) +
         pair(p.comp[0], q.comp[3]) + pair(p.comp[3], q.comp[0]) +
         2.0 * (pair(p.comp[1], q.comp[1]) + pair(p.comp[2], q.comp[2]) +
                pair(p.comp[4], q.comp[4]));
}

/// Full prognostic state: density and concentration (Neumann), momentum
/// components (Dirichlet), Q-tensor, and the current time.
struct State {
  SpectralField rho;                 // all-cos
  std::array<SpectralField, 3> m;    // all-sin per component (axes >= d unused)
  SpectralField c;                   // all-cos
  QField Q;
  double t = 0.0;

  State() = default;
  explicit State(const Grid& g) : rho(g, all_cos()), c(g, all_cos()), Q(g) {
    for (int a = 0; a < 3; ++a) m[a] = SpectralField(g, all_sin());
    for (int a = g.d; a < 3; ++a) m[a] = SpectralField(g, all_sin());
  }

  const Grid& grid() const { return rho.grid; }
  int dim() const { return rho.grid.d; }
};

/// Per-step record of norms and guards (populated by solver::step).
struct StepReport {
  double t = 0.0;
  double u_l2 = 0.0, grad_u_l2 = 0.0;
  double rho_lgamma = 0.0, rho_lbeta = 0.0;
  double rho_min = 0.0, rho_max = 0.0;
  double c_l2 = 0.0, grad_c_l2 = 0.0;
  double c_min = 0.0, c_max = 0.0;
  double q_h1 = 0.0, lap_q_l2 = 0.0;
  double forcing_integral_l2 = 0.0;   // running ||int_0^t forcing dW||_L2
  double q_structure_residual = 0.0;  // S0^3 projection residual of the update
  double divu_sup_integral = 0.0;     // accumulated int ||div u||_inf dt
  bool halted = false;                // tau_K reached
  double wall_seconds = 0.0;

  bool finite() const {
    for (double v : {u_l2, grad_u_l2, rho_lgamma, rho_lbeta, rho_min, rho_max,
                     c_l2, grad_c_l2, q_h1, lap_q_l2, forcing_integral_l2})
      if (!std::isfinite(v)) return false;
    return true;
  }
};

}  // namespace alcsim
