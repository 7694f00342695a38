#pragma once

#include <array>
#include <cmath>

namespace alcsim {

/// General 3x3 real matrix, row-major. Used for velocity gradients, stresses
/// and intermediate products; carries no structure of its own.
struct Matrix3 {
  std::array<double, 9> m{};

  double& operator()(int i, int j) { return m[i * 3 + j]; }
  double operator()(int i, int j) const { return m[i * 3 + j]; }

  static Matrix3 identity() {
    Matrix3 r;
    r(0, 0) = r(1, 1) = r(2, 2) = 1.0;
    return r;
  }

  Matrix3 transpose() const {
    Matrix3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r(i, j) = (*this)(j, i);
    return r;
  }

  double trace() const { return m[0] + m[4] + m[8]; }

  Matrix3& operator+=(const Matrix3& o) {
    for (int i = 0; i < 9; ++i) m[i] += o.m[i];
    return *this;
  }
  Matrix3& operator-=(const Matrix3& o) {
    for (int i = 0; i < 9; ++i) m[i] -= o.m[i];
    return *this;
  }
  Matrix3& operator*=(double s) {
    for (int i = 0; i < 9; ++i) m[i] *= s;
    return *this;
  }
};

inline Matrix3 operator+(Matrix3 a, const Matrix3& b) { return a += b; }
inline Matrix3 operator-(Matrix3 a, const Matrix3& b) { return a -= b; }
inline Matrix3 operator*(double s, Matrix3 a) { return a *= s; }

inline Matrix3 matmul(const Matrix3& a, const Matrix3& b) {
  Matrix3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += a(i, k) * b(k, j);
      r(i, j) = s;
    }
  return r;
}

/// Frobenius contraction A:B = tr(A B^T) = A_ij B_ij.
inline double ddot(const Matrix3& a, const Matrix3& b) {
  double s = 0.0;
  for (int i = 0; i < 9; ++i) s += a.m[i] * b.m[i];
  return s;
}

/// tr(A B).
inline double trace_prod(const Matrix3& a, const Matrix3& b) {
  double s = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) s += a(i, j) * b(j, i);
  return s;
}

/// Symmetric traceless 3x3 order parameter, stored as the 5 independent
/// components (q11, q12, q13, q22, q23); q33 = -q11-q22 and symmetry are
/// enforced by the representation itself.
struct QTensor {
  double q11 = 0.0, q12 = 0.0, q13 = 0.0, q22 = 0.0, q23 = 0.0;

  double q33() const { return -q11 - q22; }

  std::array<double, 5> flat() const { return {q11, q12, q13, q22, q23}; }
  double& operator[](int i) { return (&q11)[i]; }
  double operator[](int i) const { return (&q11)[i]; }

  Matrix3 matrix() const {
    Matrix3 r;
    r(0, 0) = q11; r(0, 1) = q12; r(0, 2) = q13;
    r(1, 0) = q12; r(1, 1) = q22; r(1, 2) = q23;
    r(2, 0) = q13; r(2, 1) = q23; r(2, 2) = q33();
    return r;
  }

  /// |Q|^2 = tr(Q^2) = Q_ij Q_ij.
  double norm2() const {
    double z = q33();
    return q11 * q11 + q22 * q22 + z * z + 2.0 * (q12 * q12 + q13 * q13 + q23 * q23);
  }

  QTensor& operator+=(const QTensor& o) {
    q11 += o.q11; q12 += o.q12; q13 += o.q13; q22 += o.q22; q23 += o.q23;
    return *this;
  }
  QTensor& operator-=(const QTensor& o) {
    q11 -= o.q11; q12 -= o.q12; q13 -= o.q13; q22 -= o.q22; q23 -= o.q23;
    return *this;
  }
  QTensor& operator*=(double s) {
    q11 *= s; q12 *= s; q13 *= s; q22 *= s; q23 *= s;
    return *this;
  }
};

inline QTensor operator+(QTensor a, const QTensor& b) { return a += b; }
inline QTensor operator-(QTensor a, const QTensor& b) { return a -= b; }
inline QTensor operator*(double s, QTensor a) { return a *= s; }

/// Gradient of a Q-tensor field at a point: one QTensor per spatial direction.
struct QGradient {
  std::array<QTensor, 3> d{};  // d[a] = partial_a Q; entries a >= dim are zero

  /// |grad Q|^2 = d_k Q_ij d_k Q_ij over the active directions.
  double norm2(int dim) const {
    double s = 0.0;
    for (int a = 0; a < dim; ++a) s += d[a].norm2();
    return s;
  }
};

/// Projection of a general matrix onto S_0^3: (M + M^T)/2 - tr(M)/3 I.
/// Idempotent and the identity on S_0^3.
inline QTensor sym_traceless_project(const Matrix3& m) {
  QTensor q;
  double tr3 = m.trace() / 3.0;
  q.q11 = m(0, 0) - tr3;
  q.q22 = m(1, 1) - tr3;
  q.q12 = 0.5 * (m(0, 1) + m(1, 0));
  q.q13 = 0.5 * (m(0, 2) + m(2, 0));
  q.q23 = 0.5 * (m(1, 2) + m(2, 1));
  return q;
}

/// Distance of M from its S_0^3 projection (diagnostic for structure drift).
inline double s03_residual(const Matrix3& m) {
  Matrix3 p = sym_traceless_project(m).matrix();
  double s = 0.0;
  for (int i = 0; i < 9; ++i) {
    double dd = m.m[i] - p.m[i];
    s += dd * dd;
  }
  return std::sqrt(s);
}

/// Skew part Psi = (G - G^T)/2 of a velocity gradient.
inline Matrix3 vorticity_tensor(const Matrix3& g) {
  Matrix3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r(i, j) = 0.5 * (g(i, j) - g(j, i));
  return r;
}

struct TensorParams {
  double c_star = 1.0;
  double b = 1.0;
};

/// Molecular field H(Q,c) = lap Q - (c-c*)/2 Q + b (Q^2 - tr(Q^2)/3 I) - c* Q tr(Q^2).
/// All terms preserve S_0^3, so the result is assembled directly in the
/// 5-component representation.
inline QTensor molecular_field(const QTensor& q, const QTensor& lap_q, double c,
                               const TensorParams& p) {
  double t2 = q.norm2();
  QTensor h = lap_q;
  h += (-(c - p.c_star) * 0.5 - p.c_star * t2) * q;
  // b-term: Q^2 with the trace removed (Q^2 is symmetric automatically)
  Matrix3 q2 = matmul(q.matrix(), q.matrix());
  double tr3 = t2 / 3.0;
  QTensor bq;
  bq.q11 = q2(0, 0) - tr3;
  bq.q22 = q2(1, 1) - tr3;
  bq.q12 = q2(0, 1);
  bq.q13 = q2(0, 2);
  bq.q23 = q2(1, 2);
  h += p.b * bq;
  return h;
}

/// F(Q) = 1/2 |grad Q|^2 + 1/2 tr(Q^2) + c*/4 tr^2(Q^2). The gradient part is
/// carried along even though the paper names the functional F(Q).
inline double free_energy_density(const QTensor& q, const QGradient& g, int dim,
                                  const TensorParams& p) {
  double t2 = q.norm2();
  return 0.5 * g.norm2(dim) + 0.5 * t2 + 0.25 * p.c_star * t2 * t2;
}

/// (grad Q . grad Q)_{ab} = d_a Q_kl d_b Q_kl; the Gram matrix of the
/// flattened direction gradients, hence symmetric positive-semidefinite.
inline Matrix3 ericksen_stress(const QGradient& g, int dim) {
  Matrix3 r;
  for (int a = 0; a < dim; ++a)
    for (int b2 = a; b2 < dim; ++b2) {
      double s = ddot(g.d[a].matrix(), g.d[b2].matrix());
      r(a, b2) = s;
      r(b2, a) = s;
    }
  return r;
}

/// Q B - B Q for B in the role of lap Q; exactly skew-symmetric for
/// symmetric Q, B.
inline Matrix3 commutator_stress(const QTensor& q, const QTensor& b) {
  Matrix3 qm = q.matrix(), bm = b.matrix();
  return matmul(qm, bm) - matmul(bm, qm);
}

/// sigma* c^2 Q, the stress exerted by the active particles.
inline Matrix3 active_stress(double c, const QTensor& q, double sigma_star) {
  return (sigma_star * c * c) * q.matrix();
}

/// Psi Q - Q Psi, the co-rotation term of the Q equation; symmetric traceless
/// for skew Psi and Q in S_0^3.
inline QTensor corotation(const Matrix3& psi, const QTensor& q) {
  Matrix3 qm = q.matrix();
  return sym_traceless_project(matmul(psi, qm) - matmul(qm, psi));
}

}  // namespace alcsim
