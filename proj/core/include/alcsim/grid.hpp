#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>

namespace alcsim {

/// Tensor-product midpoint collocation grid on the box [0,L_1] x ... x [0,L_d].
/// Collocation nodes on axis a are x_j = (j + 1/2) * L_a / n_a; no boundary
/// points are sampled, which is what makes the sine/cosine quadrature exact.
struct Grid {
  int d = 2;
  std::array<int, 3> n{4, 4, 1};           // points per axis; axes >= d are 1
  std::array<double, 3> length{1.0, 1.0, 1.0};

  Grid() = default;
  Grid(int dim, std::array<int, 3> pts, std::array<double, 3> len)
      : d(dim), n(pts), length(len) {
    if (d < 1 || d > 3) throw std::invalid_argument("Grid: d must be 1, 2 or 3");
    for (int a = 0; a < 3; ++a) {
      if (a < d) {
        if (n[a] < 4) throw std::invalid_argument("Grid: need >= 4 points per axis");
        if (length[a] <= 0.0) throw std::invalid_argument("Grid: axis length must be > 0");
      } else {
        n[a] = 1;
        length[a] = 1.0;
      }
    }
  }

  static Grid square(int dim, int pts, double len = 1.0) {
    std::array<int, 3> nn{1, 1, 1};
    std::array<double, 3> ll{1.0, 1.0, 1.0};
    for (int a = 0; a < dim; ++a) { nn[a] = pts; ll[a] = len; }
    return Grid(dim, nn, ll);
  }

  std::size_t total() const {
    return std::size_t(n[0]) * std::size_t(n[1]) * std::size_t(n[2]);
  }

  double volume() const {
    double v = 1.0;
    for (int a = 0; a < d; ++a) v *= length[a];
    return v;
  }

  double spacing(int a) const { return length[a] / n[a]; }

  /// Node coordinate (midpoint rule).
  double x(int a, int j) const { return (j + 0.5) * length[a] / n[a]; }

  std::size_t index(int i0, int i1 = 0, int i2 = 0) const {
    return (std::size_t(i0) * n[1] + i1) * n[2] + i2;
  }

  /// Same box, num/den times the resolution per axis (rounded up).
  Grid refined(int num, int den = 1) const {
    Grid g(*this);
    for (int a = 0; a < d; ++a) g.n[a] = (n[a] * num + den - 1) / den;
    return g;
  }

  bool operator==(const Grid& o) const {
    return d == o.d && n == o.n && length == o.length;
  }
  bool operator!=(const Grid& o) const { return !(*this == o); }

  bool same_box(const Grid& o) const { return d == o.d && length == o.length; }
};

}  // namespace alcsim
