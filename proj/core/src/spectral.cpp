#include "alcsim/spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstring>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace alcsim {

namespace {

constexpr double kPi = std::numbers::pi;

// ---- FFTW plan cache --------------------------------------------------------

struct PlanKey {
  int rank;
  std::array<int, 3> dims;
  std::array<int, 3> kind;
  bool operator<(const PlanKey& o) const {
    if (rank != o.rank) return rank < o.rank;
    if (dims != o.dims) return dims < o.dims;
    return kind < o.kind;
  }
};

// Plans are created once under a lock and then executed concurrently through
// the new-array interface; FFTW_UNALIGNED keeps execution valid for any
// caller-owned buffer.
fftw_plan get_plan(const PlanKey& key) {
  static std::map<PlanKey, fftw_plan> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;

  std::size_t total = 1;
  for (int a = 0; a < key.rank; ++a) total *= key.dims[a];
  std::vector<double> in(total), out(total);
  int n[3];
  fftw_r2r_kind kinds[3];
  for (int a = 0; a < key.rank; ++a) {
    n[a] = key.dims[a];
    kinds[a] = static_cast<fftw_r2r_kind>(key.kind[a]);
  }
  fftw_plan p = fftw_plan_r2r(key.rank, n, in.data(), out.data(), kinds,
                              FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (!p) throw std::runtime_error("fftw_plan_r2r failed");
  cache.emplace(key, p);
  return p;
}

void run_r2r(const Grid& g, const Sig& sig, bool forward, double* in, double* out) {
  PlanKey key;
  key.rank = g.d;
  key.dims = {1, 1, 1};
  key.kind = {0, 0, 0};
  for (int a = 0; a < g.d; ++a) {
    key.dims[a] = g.n[a];
    if (sig[a] == Parity::Cos)
      key.kind[a] = forward ? FFTW_REDFT10 : FFTW_REDFT01;
    else
      key.kind[a] = forward ? FFTW_RODFT10 : FFTW_RODFT01;
  }
  fftw_execute_r2r(get_plan(key), in, out);
}

void check_same(const SpectralField& f, const SpectralField& g) {
  if (f.grid != g.grid || f.sig != g.sig)
    throw std::invalid_argument("spectral: field grid/signature mismatch");
}

}  // namespace

Grid padded_grid(const Grid& g, int factor) { return g.refined(factor); }

// ---- forward / inverse --------------------------------------------------------

SpectralField analyze(const GridArray& values, Sig sig) {
  const Grid& g = values.grid;
  if (values.v.size() != g.total()) throw std::invalid_argument("analyze: size mismatch");
  std::vector<double> raw(g.total());
  std::vector<double> in(values.v);
  run_r2r(g, sig, /*forward=*/true, in.data(), raw.data());

  SpectralField f(g, sig);
  // Per-axis normalization to the orthonormal basis; Sin axes shift raw slot
  // r (mode r+1) into slot r+1 and drop the top mode.
  std::array<double, 3> fac_k{};  // factor for slot k >= 1
  std::array<double, 3> fac_0{};  // factor for cos slot 0
  for (int a = 0; a < g.d; ++a) {
    fac_k[a] = std::sqrt(g.length[a] / 2.0) / g.n[a];
    fac_0[a] = std::sqrt(g.length[a]) / (2.0 * g.n[a]);
  }
  for (int k0 = 0; k0 < g.n[0]; ++k0)
    for (int k1 = 0; k1 < g.n[1]; ++k1)
      for (int k2 = 0; k2 < g.n[2]; ++k2) {
        std::array<int, 3> k{k0, k1, k2};
        double fac = 1.0;
        std::array<int, 3> src = k;
        bool zero = false;
        for (int a = 0; a < g.d; ++a) {
          if (sig[a] == Parity::Sin) {
            if (k[a] == 0) { zero = true; break; }
            src[a] = k[a] - 1;
            fac *= fac_k[a];
          } else {
            fac *= (k[a] == 0) ? fac_0[a] : fac_k[a];
          }
        }
        f.a[g.index(k0, k1, k2)] =
            zero ? 0.0 : raw[g.index(src[0], src[1], src[2])] * fac;
      }
  return f;
}

GridArray synthesize(const SpectralField& f) {
  const Grid& g = f.grid;
  std::vector<double> raw(g.total(), 0.0);
  std::array<double, 3> fac_k{}, fac_0{};
  for (int a = 0; a < g.d; ++a) {
    fac_k[a] = 1.0 / std::sqrt(2.0 * g.length[a]);
    fac_0[a] = 1.0 / std::sqrt(g.length[a]);
  }
  // Build the raw input expected by REDFT01/RODFT01 (gather with shifts).
  for (int r0 = 0; r0 < g.n[0]; ++r0)
    for (int r1 = 0; r1 < g.n[1]; ++r1)
      for (int r2 = 0; r2 < g.n[2]; ++r2) {
        std::array<int, 3> r{r0, r1, r2};
        std::array<int, 3> src = r;
        double fac = 1.0;
        bool zero = false;
        for (int a = 0; a < g.d; ++a) {
          if (f.sig[a] == Parity::Sin) {
            if (r[a] + 1 > g.n[a] - 1) { zero = true; break; }  // dropped top mode
            src[a] = r[a] + 1;
            fac *= fac_k[a];
          } else {
            fac *= (r[a] == 0) ? fac_0[a] : fac_k[a];
          }
        }
        raw[g.index(r0, r1, r2)] =
            zero ? 0.0 : f.a[g.index(src[0], src[1], src[2])] * fac;
      }
  GridArray out(g);
  run_r2r(g, f.sig, /*forward=*/false, raw.data(), out.v.data());
  return out;
}

GridArray synthesize_on(const SpectralField& f, const Grid& eval) {
  if (!f.grid.same_box(eval)) throw std::invalid_argument("synthesize_on: box mismatch");
  if (eval == f.grid) return synthesize(f);
  SpectralField fine = resample(f, eval);
  return synthesize(fine);
}

// ---- coefficient-space ops ----------------------------------------------------

SpectralField resample(const SpectralField& f, const Grid& out) {
  if (!f.grid.same_box(out)) throw std::invalid_argument("resample: box mismatch");
  SpectralField r(out, f.sig);
  int m0 = std::min(f.grid.n[0], out.n[0]);
  int m1 = std::min(f.grid.n[1], out.n[1]);
  int m2 = std::min(f.grid.n[2], out.n[2]);
  for (int k0 = 0; k0 < m0; ++k0)
    for (int k1 = 0; k1 < m1; ++k1)
      for (int k2 = 0; k2 < m2; ++k2)
        r.a[out.index(k0, k1, k2)] = f.a[f.grid.index(k0, k1, k2)];
  return r;
}

SpectralField differentiate(const SpectralField& f, int axis) {
  if (axis < 0 || axis >= f.grid.d) throw std::invalid_argument("differentiate: bad axis");
  const Grid& g = f.grid;
  SpectralField r(g, flip(f.sig, axis));
  const double w = kPi / g.length[axis];
  const bool from_cos = (f.sig[axis] == Parity::Cos);
  for (int k0 = 0; k0 < g.n[0]; ++k0)
    for (int k1 = 0; k1 < g.n[1]; ++k1)
      for (int k2 = 0; k2 < g.n[2]; ++k2) {
        std::array<int, 3> k{k0, k1, k2};
        int ka = k[axis];
        if (ka == 0) continue;  // cos 0-mode differentiates to 0; sin slot 0 unused
        double fac = from_cos ? -(ka * w) : (ka * w);
        r.a[g.index(k0, k1, k2)] = fac * f.a[g.index(k0, k1, k2)];
      }
  return r;
}

SpectralField scale_by_kappa2(const SpectralField& f,
                              const std::function<double(double)>& fn) {
  const Grid& g = f.grid;
  SpectralField r(g, f.sig);
  std::array<double, 3> w{0, 0, 0};
  for (int a = 0; a < g.d; ++a) w[a] = kPi / g.length[a];
  for (int k0 = 0; k0 < g.n[0]; ++k0)
    for (int k1 = 0; k1 < g.n[1]; ++k1)
      for (int k2 = 0; k2 < g.n[2]; ++k2) {
        double kappa2 = k0 * w[0] * k0 * w[0] + k1 * w[1] * k1 * w[1] +
                        k2 * w[2] * k2 * w[2];
        std::size_t i = g.index(k0, k1, k2);
        r.a[i] = fn(kappa2) * f.a[i];
      }
  return r;
}

SpectralField laplacian(const SpectralField& f) {
  return scale_by_kappa2(f, [](double kappa2) { return -kappa2; });
}

SpectralField project_Pn(const SpectralField& f, int nmodes) {
  SpectralField r(f);
  const Grid& g = f.grid;
  for (int k0 = 0; k0 < g.n[0]; ++k0)
    for (int k1 = 0; k1 < g.n[1]; ++k1)
      for (int k2 = 0; k2 < g.n[2]; ++k2)
        if (k0 > nmodes || k1 > nmodes || k2 > nmodes)
          r.a[g.index(k0, k1, k2)] = 0.0;
  return r;
}

double l2_norm(const SpectralField& f) {
  double s = 0.0;
  for (double c : f.a) s += c * c;
  return std::sqrt(s);
}

double h1_norm(const SpectralField& f) {
  const Grid& g = f.grid;
  std::array<double, 3> w{0, 0, 0};
  for (int a = 0; a < g.d; ++a) w[a] = kPi / g.length[a];
  double s = 0.0;
  for (int k0 = 0; k0 < g.n[0]; ++k0)
    for (int k1 = 0; k1 < g.n[1]; ++k1)
      for (int k2 = 0; k2 < g.n[2]; ++k2) {
        double kappa2 = k0 * w[0] * k0 * w[0] + k1 * w[1] * k1 * w[1] +
                        k2 * w[2] * k2 * w[2];
        double c = f.a[g.index(k0, k1, k2)];
        s += (1.0 + kappa2) * c * c;
      }
  return std::sqrt(s);
}

SpectralField& axpy(SpectralField& y, double alpha, const SpectralField& x) {
  check_same(y, x);
  for (std::size_t i = 0; i < y.a.size(); ++i) y.a[i] += alpha * x.a[i];
  return y;
}

SpectralField operator+(const SpectralField& f, const SpectralField& g) {
  SpectralField r(f);
  axpy(r, 1.0, g);
  return r;
}

SpectralField operator-(const SpectralField& f, const SpectralField& g) {
  SpectralField r(f);
  axpy(r, -1.0, g);
  return r;
}

SpectralField operator*(double s, const SpectralField& f) {
  SpectralField r(f);
  for (double& c : r.a) c *= s;
  return r;
}

// ---- exact cross-parity coupling ----------------------------------------------

namespace {

// <target_k, source_r> over one axis in the orthonormal basis. Entries are
// dimensionless (the box length cancels). Nonzero only for k + r odd.
std::vector<double> make_coupling(int nt, int ns, Parity target) {
  std::vector<double> w(std::size_t(nt) * ns, 0.0);
  const double sqrt2 = std::sqrt(2.0);
  if (target == Parity::Sin) {
    // rows k = 1..nt-1 (sin), cols r = 0..ns-1 (cos)
    for (int k = 1; k < nt; ++k) {
      if (k % 2 == 1) w[std::size_t(k) * ns + 0] = 2.0 * sqrt2 / (k * kPi);
      for (int r = 1; r < ns; ++r)
        if ((k + r) % 2 == 1)
          w[std::size_t(k) * ns + r] = 4.0 * k / (kPi * (double(k) * k - double(r) * r));
    }
  } else {
    // rows k = 0..nt-1 (cos), cols r = 1..ns-1 (sin)
    for (int r = 1; r < ns; ++r) {
      if (r % 2 == 1) w[std::size_t(0) * ns + r] = 2.0 * sqrt2 / (r * kPi);
      for (int k = 1; k < nt; ++k)
        if ((k + r) % 2 == 1)
          w[std::size_t(k) * ns + r] = 4.0 * r / (kPi * (double(r) * r - double(k) * k));
    }
  }
  return w;
}

const std::vector<double>& coupling(int nt, int ns, Parity target) {
  struct Key {
    int nt, ns;
    Parity t;
    bool operator<(const Key& o) const {
      if (nt != o.nt) return nt < o.nt;
      if (ns != o.ns) return ns < o.ns;
      return t < o.t;
    }
  };
  static std::map<Key, std::vector<double>> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto [it, inserted] = cache.try_emplace(Key{nt, ns, target});
  if (inserted) it->second = make_coupling(nt, ns, target);
  return it->second;
}

// Contract one axis of `f` with the coupling matrix, changing that axis to
// the opposite parity and to dimension nt.
SpectralField contract_axis(const SpectralField& f, int axis, int nt) {
  const Grid& g = f.grid;
  Parity target = (f.sig[axis] == Parity::Cos) ? Parity::Sin : Parity::Cos;
  const std::vector<double>& w = coupling(nt, g.n[axis], target);

  Grid og = g;
  og.n[axis] = nt;
  SpectralField out(og, flip(f.sig, axis));

  // strides for iterating lines along `axis`
  std::array<int, 3> nn = g.n;
  std::size_t stride = 1;
  for (int a = axis + 1; a < 3; ++a) stride *= nn[a];

  const int ns = g.n[axis];
  std::array<int, 3> outer = nn;
  outer[axis] = 1;
  for (int i0 = 0; i0 < outer[0]; ++i0)
    for (int i1 = 0; i1 < outer[1]; ++i1)
      for (int i2 = 0; i2 < outer[2]; ++i2) {
        std::size_t base_in = g.index(i0, i1, i2);
        std::size_t base_out = og.index(i0, i1, i2);
        for (int k = 0; k < nt; ++k) {
          double s = 0.0;
          const double* row = &w[std::size_t(k) * ns];
          for (int r = 0; r < ns; ++r) s += row[r] * f.a[base_in + r * stride];
          out.a[base_out + k * stride] = s;
        }
      }
  return out;
}

SpectralField truncate_axis(const SpectralField& f, int axis, int nt) {
  Grid og = f.grid;
  og.n[axis] = nt;
  return resample(f, og);  // resample copies slot-wise; per-axis truncation is
                           // equivalent since the other dims agree
}

}  // namespace

SpectralField exact_project(const SpectralField& f, Sig sig, const Grid& out) {
  if (!f.grid.same_box(out)) throw std::invalid_argument("exact_project: box mismatch");
  SpectralField cur = f;
  for (int a = 0; a < out.d; ++a) {
    if (cur.sig[a] == sig[a]) {
      if (cur.grid.n[a] != out.n[a]) cur = truncate_axis(cur, a, out.n[a]);
    } else {
      cur = contract_axis(cur, a, out.n[a]);
    }
  }
  return cur;
}

double pair(const SpectralField& f, const SpectralField& g) {
  SpectralField p = exact_project(f, g.sig, g.grid);
  double s = 0.0;
  for (std::size_t i = 0; i < p.a.size(); ++i) s += p.a[i] * g.a[i];
  return s;
}

// ---- products -------------------------------------------------------------

SpectralField product_padded(const SpectralField& f, const SpectralField& g) {
  if (!f.grid.same_box(g.grid)) throw std::invalid_argument("product: box mismatch");
  Grid base = f.grid;
  for (int a = 0; a < base.d; ++a) base.n[a] = std::max(f.grid.n[a], g.grid.n[a]);
  Grid pad = padded_grid(base, 2);
  GridArray fv = synthesize_on(f, pad);
  GridArray gv = synthesize_on(g, pad);
  for (std::size_t i = 0; i < fv.v.size(); ++i) fv.v[i] *= gv.v[i];
  return analyze(fv, sig_product(f.sig, g.sig));
}

SpectralField dealias_product(const SpectralField& f, const SpectralField& g) {
  Grid base = f.grid;
  for (int a = 0; a < base.d; ++a) base.n[a] = std::max(f.grid.n[a], g.grid.n[a]);
  return resample(product_padded(f, g), base);
}

// ---- inverse divergence -----------------------------------------------------

std::array<SpectralField, 3> inverse_div(const SpectralField& f) {
  if (f.sig != all_cos())
    throw std::invalid_argument("inverse_div: expects a Neumann (all-cos) field");
  double nrm = l2_norm(f);
  if (std::abs(f.a[0]) > 1e-12 * std::max(nrm, 1.0))
    throw std::invalid_argument("inverse_div: field has nonzero mean");
  SpectralField chi = scale_by_kappa2(
      f, [](double kappa2) { return kappa2 > 0.0 ? -1.0 / kappa2 : 0.0; });
  std::array<SpectralField, 3> v;
  for (int a = 0; a < f.grid.d; ++a) v[a] = differentiate(chi, a);
  for (int a = f.grid.d; a < 3; ++a) v[a] = SpectralField(f.grid, flip(all_cos(), 0));
  return v;
}

std::array<SpectralField, 3> bogovskii_surrogate(const SpectralField& f) {
  // Same gradient-potential construction; kept as a named entry point because
  // its contract (divergence right-inverse with v.n = 0 only) and its uses
  // (integrability probes) differ from the flux operator A.
  return inverse_div(f);
}

double h1_norm_vec(const std::array<SpectralField, 3>& v, int d) {
  double s = 0.0;
  for (int i = 0; i < d; ++i) {
    double n0 = l2_norm(v[i]);
    s += n0 * n0;
    for (int a = 0; a < d; ++a) {
      double na = l2_norm(differentiate(v[i], a));
      s += na * na;
    }
  }
  return std::sqrt(s);
}

}  // namespace alcsim
