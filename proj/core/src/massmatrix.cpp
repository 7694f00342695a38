#include "alcsim/massmatrix.hpp"

#include <cmath>

namespace alcsim {

MassOp::MassOp(const SpectralField& rho, int nmodes)
    : base_(rho.grid), pad_(padded_grid(rho.grid, 2)), nmodes_(nmodes) {
  if (rho.sig != all_cos())
    throw std::invalid_argument("MassOp: density must be a Neumann field");
  rho_pad_ = synthesize_on(rho, pad_).v;
  rho_min_ = rho_pad_[0];
  rho_max_ = rho_pad_[0];
  for (double v : rho_pad_) {
    rho_min_ = std::min(rho_min_, v);
    rho_max_ = std::max(rho_max_, v);
  }
  if (!(rho_min_ > 0.0))
    throw VacuumError("MassOp: density not strictly positive on the quadrature grid");
}

SpectralField MassOp::apply(const SpectralField& u) const {
  GridArray uv = synthesize_on(u, pad_);
  for (std::size_t i = 0; i < uv.v.size(); ++i) uv.v[i] *= rho_pad_[i];
  SpectralField full = analyze(uv, u.sig);
  return project_Pn(resample(full, base_), nmodes_);
}

SpectralField MassOp::solve(const SpectralField& b, const SpectralField* guess,
                            double rel_tol, int max_iter) const {
  SpectralField x = guess ? *guess : (1.0 / (0.5 * (rho_min_ + rho_max_))) * b;
  x = project_Pn(x, nmodes_);
  SpectralField bb = project_Pn(b, nmodes_);
  SpectralField r = bb - apply(x);
  SpectralField p = r;
  double rr = 0.0;
  for (double v : r.a) rr += v * v;
  double b2 = 0.0;
  for (double v : bb.a) b2 += v * v;
  double tol2 = rel_tol * rel_tol * std::max(b2, 1e-300);
  int it = 0;
  while (rr > tol2 && it < max_iter) {
    SpectralField ap = apply(p);
    double pap = 0.0;
    for (std::size_t i = 0; i < p.a.size(); ++i) pap += p.a[i] * ap.a[i];
    if (!(pap > 0.0)) throw NumericalFailure("MassOp::solve: operator lost definiteness");
    double alpha = rr / pap;
    for (std::size_t i = 0; i < x.a.size(); ++i) {
      x.a[i] += alpha * p.a[i];
      r.a[i] -= alpha * ap.a[i];
    }
    double rr_new = 0.0;
    for (double v : r.a) rr_new += v * v;
    double beta = rr_new / rr;
    for (std::size_t i = 0; i < p.a.size(); ++i) p.a[i] = r.a[i] + beta * p.a[i];
    rr = rr_new;
    ++it;
  }
  if (rr > tol2)
    throw NumericalFailure("MassOp::solve: CG did not converge in " +
                           std::to_string(max_iter) + " iterations");
  return x;
}

std::vector<std::array<int, 3>> xn_basis(const Grid& g, int nmodes) {
  std::vector<std::array<int, 3>> idx;
  std::array<int, 3> kmax{0, 0, 0};
  for (int a = 0; a < g.d; ++a) kmax[a] = std::min(nmodes, g.n[a] - 1);
  for (int k0 = 1; k0 <= kmax[0]; ++k0)
    for (int k1 = (g.d > 1 ? 1 : 0); k1 <= kmax[1]; ++k1)
      for (int k2 = (g.d > 2 ? 1 : 0); k2 <= kmax[2]; ++k2)
        idx.push_back({k0, k1, k2});
  return idx;
}

std::vector<double> assemble_mass_matrix(const MassOp& op) {
  auto basis = xn_basis(op.base(), op.nmodes());
  const std::size_t nb = basis.size();
  std::vector<double> mat(nb * nb, 0.0);
  for (std::size_t j = 0; j < nb; ++j) {
    SpectralField e(op.base(), all_sin());
    e.at(basis[j][0], basis[j][1], basis[j][2]) = 1.0;
    SpectralField col = op.apply(e);
    for (std::size_t i = 0; i < nb; ++i)
      mat[i * nb + j] = col.at(basis[i][0], basis[i][1], basis[i][2]);
  }
  return mat;
}

}  // namespace alcsim
