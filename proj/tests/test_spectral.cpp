#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "alcsim/grid.hpp"
#include "alcsim/spectral.hpp"

using namespace alcsim;

namespace {

constexpr double kPi = std::numbers::pi;

GridArray sample(const Grid& g, const std::function<double(double, double, double)>& f) {
  GridArray out(g);
  for (int i0 = 0; i0 < g.n[0]; ++i0)
    for (int i1 = 0; i1 < g.n[1]; ++i1)
      for (int i2 = 0; i2 < g.n[2]; ++i2)
        out.v[g.index(i0, i1, i2)] = f(g.x(0, i0), g.x(1, i1), g.x(2, i2));
  return out;
}

SpectralField random_band_limited(const Grid& g, Sig sig, int band, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  SpectralField f(g, sig);
  for (int k0 = 0; k0 < g.n[0]; ++k0)
    for (int k1 = 0; k1 < g.n[1]; ++k1)
      for (int k2 = 0; k2 < g.n[2]; ++k2) {
        if (k0 > band || k1 > band || k2 > band) continue;
        bool dead = false;
        std::array<int, 3> k{k0, k1, k2};
        for (int a = 0; a < g.d; ++a)
          if (sig[a] == Parity::Sin && k[a] == 0) dead = true;
        if (!dead) f.at(k0, k1, k2) = gauss(rng);
      }
  return f;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("constant field has a single zero-mode coefficient (Neumann)") {
  Grid g = Grid::square(2, 8, 2.0);
  GridArray v = sample(g, [](double, double, double) { return 3.5; });
  SpectralField f = analyze(v, all_cos());
  CHECK(f.at(0, 0) == doctest::Approx(3.5 * std::sqrt(g.volume())).epsilon(1e-13));
  double off = 0.0;
  for (std::size_t i = 1; i < f.a.size(); ++i) off = std::max(off, std::abs(f.a[i]));
  CHECK(off < 1e-13);
}

TEST_CASE("sin(pi x / L) is a single mode-1 coefficient (Dirichlet)") {
  Grid g = Grid::square(1, 16, 1.5);
  double L = g.length[0];
  GridArray v = sample(g, [L](double x, double, double) { return std::sin(kPi * x / L); });
  SpectralField f = analyze(v, all_sin());
  // orthonormal coefficient of sin(pi x/L) is sqrt(L/2)
  CHECK(f.at(1) == doctest::Approx(std::sqrt(L / 2.0)).epsilon(1e-13));
  double off = 0.0;
  for (int k = 0; k < g.n[0]; ++k)
    if (k != 1) off = std::max(off, std::abs(f.at(k)));
  CHECK(off < 1e-13);
}

TEST_CASE("round trip is the identity for band-limited fields") {
  for (int d = 1; d <= 3; ++d) {
    Grid g = Grid::square(d, 8, 1.0);
    for (Sig sig : {all_cos(), all_sin()}) {
      SpectralField f = random_band_limited(g, sig, 7, 42 + d);
      GridArray v = synthesize(f);
      SpectralField f2 = analyze(v, sig);
      double err = 0.0;
      for (std::size_t i = 0; i < f.a.size(); ++i)
        err = std::max(err, std::abs(f.a[i] - f2.a[i]));
      CHECK(err < 1e-12 * std::max(1.0, l2_norm(f)));
    }
  }
}

TEST_CASE("Parseval: grid inner product equals coefficient inner product") {
  Grid g = Grid::square(2, 16, 1.3);
  SpectralField f = random_band_limited(g, all_cos(), 15, 7);
  SpectralField h = random_band_limited(g, all_cos(), 15, 8);
  GridArray fv = synthesize(f), hv = synthesize(h);
  double quad = 0.0;
  for (std::size_t i = 0; i < fv.v.size(); ++i) quad += fv.v[i] * hv.v[i];
  quad *= g.volume() / double(g.total());
  double coef = 0.0;
  for (std::size_t i = 0; i < f.a.size(); ++i) coef += f.a[i] * h.a[i];
  CHECK(quad == doctest::Approx(coef).epsilon(1e-12));
}

TEST_CASE("boundary values honor the declared parity") {
  Grid g = Grid::square(1, 32, 1.0);
  SpectralField fs = random_band_limited(g, all_sin(), 10, 3);
  SpectralField fc = random_band_limited(g, all_cos(), 10, 4);
  // evaluate the expansions analytically at the faces
  double L = g.length[0];
  double at0_s = 0.0, at0_cd = 0.0;
  for (int k = 1; k < g.n[0]; ++k) {
    at0_s += fs.at(k) * std::sqrt(2.0 / L) * std::sin(0.0);
    at0_cd += fc.at(k) * std::sqrt(2.0 / L) * (-k * kPi / L) * std::sin(0.0);
  }
  CHECK(std::abs(at0_s) < 1e-14);   // Dirichlet: field vanishes at x=0
  CHECK(std::abs(at0_cd) < 1e-14);  // Neumann: derivative vanishes at x=0
}

TEST_CASE("derivative of a single sine mode is exact") {
  Grid g = Grid::square(1, 16, 2.0);
  double L = g.length[0];
  int k = 3;
  GridArray v = sample(g, [=](double x, double, double) { return std::sin(k * kPi * x / L); });
  SpectralField f = analyze(v, all_sin());
  SpectralField df = differentiate(f, 0);
  GridArray dv = synthesize(df);
  GridArray expect =
      sample(g, [=](double x, double, double) { return k * kPi / L * std::cos(k * kPi * x / L); });
  CHECK(max_abs_diff(dv.v, expect.v) < 1e-12);
  CHECK(df.sig[0] == Parity::Cos);
}

TEST_CASE("derivative of a constant is zero; Laplacian is the mode eigenvalue") {
  Grid g = Grid::square(2, 8, 1.0);
  GridArray v = sample(g, [](double, double, double) { return 2.0; });
  SpectralField f = analyze(v, all_cos());
  SpectralField df = differentiate(f, 0);
  CHECK(l2_norm(df) < 1e-14);

  SpectralField mode(g, all_cos());
  mode.at(2, 3) = 1.0;
  SpectralField lap = laplacian(mode);
  double expect = -(4.0 + 9.0) * kPi * kPi;
  CHECK(lap.at(2, 3) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("project_Pn: fixed point, annihilation, non-expansive, composition") {
  Grid g = Grid::square(2, 16, 1.0);
  SpectralField f = random_band_limited(g, all_cos(), 15, 11);

  SpectralField low = random_band_limited(g, all_cos(), 4, 12);
  SpectralField p = project_Pn(low, 4);
  double diff = 0.0;
  for (std::size_t i = 0; i < p.a.size(); ++i) diff = std::max(diff, std::abs(p.a[i] - low.a[i]));
  CHECK(diff == 0.0);

  SpectralField single(g, all_cos());
  single.at(5, 0) = 1.0;
  CHECK(l2_norm(project_Pn(single, 4)) == 0.0);

  CHECK(l2_norm(project_Pn(f, 6)) <= l2_norm(f) + 1e-15);

  SpectralField a = project_Pn(project_Pn(f, 9), 5);
  SpectralField b = project_Pn(f, 5);
  double dd = 0.0;
  for (std::size_t i = 0; i < a.a.size(); ++i) dd = std::max(dd, std::abs(a.a[i] - b.a[i]));
  CHECK(dd == 0.0);
}

TEST_CASE("dealias product: constant times field, two-mode identity, oversampled oracle") {
  Grid g = Grid::square(1, 16, 1.0);
  double L = g.length[0];

  SUBCASE("constant factor") {
    GridArray cv = sample(g, [](double, double, double) { return 2.5; });
    SpectralField c = analyze(cv, all_cos());
    SpectralField f = random_band_limited(g, all_cos(), 15, 5);
    SpectralField prod = dealias_product(c, f);
    double err = 0.0;
    for (std::size_t i = 0; i < f.a.size(); ++i)
      err = std::max(err, std::abs(prod.a[i] - 2.5 * f.a[i]));
    CHECK(err < 1e-12);
  }

  SUBCASE("product-to-sum trigonometric identity") {
    // cos(2 pi x/L) * cos(3 pi x/L) = [cos(pi x/L) + cos(5 pi x/L)]/2
    GridArray a = sample(g, [L](double x, double, double) { return std::cos(2 * kPi * x / L); });
    GridArray b = sample(g, [L](double x, double, double) { return std::cos(3 * kPi * x / L); });
    SpectralField fa = analyze(a, all_cos()), fb = analyze(b, all_cos());
    SpectralField prod = dealias_product(fa, fb);
    double amp = std::sqrt(L / 2.0) * 0.5;  // orthonormal coefficient of a half-amplitude mode
    CHECK(prod.at(1) == doctest::Approx(amp).epsilon(1e-12));
    CHECK(prod.at(5) == doctest::Approx(amp).epsilon(1e-12));
    CHECK(std::abs(prod.at(2)) < 1e-13);
  }

  SUBCASE("matches fine-grid product for band-fitting inputs") {
    Grid g2 = Grid::square(2, 12, 1.0);
    SpectralField f = random_band_limited(g2, all_cos(), 5, 21);
    SpectralField h = random_band_limited(g2, all_sin(), 5, 22);
    SpectralField prod = dealias_product(f, h);
    CHECK(prod.sig[0] == Parity::Sin);  // cos * sin per active axis
    CHECK(prod.sig[1] == Parity::Sin);
    // oracle: pointwise product on a 4x grid, projected
    Grid fine = g2.refined(4);
    GridArray fv = synthesize_on(f, fine), hv = synthesize_on(h, fine);
    for (std::size_t i = 0; i < fv.v.size(); ++i) fv.v[i] *= hv.v[i];
    SpectralField oracle = resample(analyze(fv, all_sin()), g2);
    double err = 0.0;
    for (std::size_t i = 0; i < prod.a.size(); ++i)
      err = std::max(err, std::abs(prod.a[i] - oracle.a[i]));
    CHECK(err < 1e-10);
  }
}

TEST_CASE("exact cross-parity pairing agrees with analytic integrals") {
  Grid g = Grid::square(1, 16, 1.0);
  double L = g.length[0];
  // <sin_k, cos_r> with k=2, r=1: analytic (2/pi) * 2 * k/(k^2-r^2)
  SpectralField s(g, all_sin()), c(g, all_cos());
  s.at(2) = 1.0;
  c.at(1) = 1.0;
  double analytic = 4.0 * 2.0 / (kPi * (4.0 - 1.0));
  CHECK(pair(s, c) == doctest::Approx(analytic).epsilon(1e-14));
  CHECK(pair(c, s) == doctest::Approx(analytic).epsilon(1e-14));

  // against brute-force quadrature on a very fine grid
  Grid fine = Grid::square(1, 4096, L);
  SpectralField sf = random_band_limited(g, all_sin(), 7, 31);
  SpectralField cf = random_band_limited(g, all_cos(), 7, 32);
  GridArray sv = synthesize_on(sf, fine), cv = synthesize_on(cf, fine);
  double quad = 0.0;
  for (std::size_t i = 0; i < sv.v.size(); ++i) quad += sv.v[i] * cv.v[i];
  quad *= L / fine.n[0];
  // midpoint quadrature of odd content converges at O(M^-2); 4096 points is
  // plenty to confirm the analytic pairing to ~1e-8
  CHECK(pair(sf, cf) == doctest::Approx(quad).epsilon(1e-7));
}

TEST_CASE("exact_project onto the cosine family reproduces L2 projection") {
  Grid g = Grid::square(2, 8, 1.0);
  SpectralField f = random_band_limited(g, Sig{Parity::Sin, Parity::Cos, Parity::Cos}, 7, 44);
  SpectralField p = exact_project(f, all_cos(), g);
  // pairing of f with each retained cosine basis function must equal p's coeff
  SpectralField basis(g, all_cos());
  basis.at(3, 2) = 1.0;
  CHECK(p.at(3, 2) == doctest::Approx(pair(f, basis)).epsilon(1e-13));
  basis.at(3, 2) = 0.0;
  basis.at(0, 5) = 1.0;
  CHECK(p.at(0, 5) == doctest::Approx(pair(f, basis)).epsilon(1e-13));
}

TEST_CASE("inverse_div: divergence identity, Laplacian identity, rejection") {
  Grid g = Grid::square(2, 16, 1.0);

  SpectralField zero(g, all_cos());
  auto v0 = inverse_div(zero);
  CHECK(l2_norm(v0[0]) == 0.0);

  SpectralField bad(g, all_cos());
  bad.at(0, 0) = 1.0;
  CHECK_THROWS_AS((void)inverse_div(bad), std::invalid_argument);

  SUBCASE("single cosine mode has the analytic Fourier solution") {
    SpectralField f(g, all_cos());
    f.at(3, 0) = 2.0;
    auto v = inverse_div(f);
    // A[f] = (sin mode / kappa, 0): check div A[f] = f
    SpectralField div(g, all_cos());
    for (int a = 0; a < g.d; ++a) axpy(div, 1.0, exact_project(differentiate(v[a], a), all_cos(), g));
    double err = 0.0;
    for (std::size_t i = 0; i < f.a.size(); ++i) err = std::max(err, std::abs(div.a[i] - f.a[i]));
    CHECK(err < 1e-12);
    // A[f] = grad(-cos/kappa^2) = +sin/kappa for a unit cosine mode
    CHECK(v[0].at(3, 0) == doctest::Approx(2.0 / (3.0 * kPi)).epsilon(1e-13));
    CHECK(l2_norm(v[1]) < 1e-14);
  }

  SUBCASE("div A[f] = f and Delta A[f] = grad f for random mean-free f") {
    SpectralField f = random_band_limited(g, all_cos(), 9, 77);
    f.a[0] = 0.0;
    auto v = inverse_div(f);
    SpectralField div(g, all_cos());
    for (int a = 0; a < g.d; ++a) axpy(div, 1.0, exact_project(differentiate(v[a], a), all_cos(), g));
    double err = 0.0;
    for (std::size_t i = 0; i < f.a.size(); ++i) err = std::max(err, std::abs(div.a[i] - f.a[i]));
    CHECK(err < 1e-12 * std::max(1.0, l2_norm(f)));
    for (int a = 0; a < g.d; ++a) {
      SpectralField lhs = laplacian(v[a]);
      SpectralField rhs = differentiate(f, a);
      double e2 = 0.0;
      for (std::size_t i = 0; i < lhs.a.size(); ++i)
        e2 = std::max(e2, std::abs(lhs.a[i] - rhs.a[i]));
      CHECK(e2 < 1e-12 * std::max(1.0, l2_norm(f)));
    }
    // per mode: ||v||^2 gains f^2/kappa^2 and ||grad v||^2 gains f^2, so
    // ||A f||_H1 <= sqrt(1 + 1/kappa_min^2) ||f||_L2 with kappa_min = pi/L
    CHECK(h1_norm_vec(v, g.d) <=
          std::sqrt(1.0 + 1.0 / (kPi * kPi)) * l2_norm(f) * (1.0 + 1e-12));
  }
}

TEST_CASE("bogovskii surrogate: divergence recovery and H1/L2 ratio plateau") {
  std::mt19937 rng(5);
  double worst = 0.0;
  for (int res : {8, 16, 32}) {
    Grid g = Grid::square(2, res, 1.0);
    for (int trial = 0; trial < (res == 32 ? 20 : 40); ++trial) {
      SpectralField f = random_band_limited(g, all_cos(), res - 1, rng());
      f.a[0] = 0.0;
      auto v = bogovskii_surrogate(f);
      SpectralField div(g, all_cos());
      for (int a = 0; a < g.d; ++a)
        axpy(div, 1.0, exact_project(differentiate(v[a], a), all_cos(), g));
      double err = 0.0;
      for (std::size_t i = 0; i < f.a.size(); ++i)
        err = std::max(err, std::abs(div.a[i] - f.a[i]));
      CHECK(err < 1e-12 * std::max(1.0, l2_norm(f)));
      worst = std::max(worst, h1_norm_vec(v, g.d) / l2_norm(f));
    }
  }
  // gradient-potential surrogate: ||v||_H1 <= sqrt(1 + kappa_min^-2) * ||f||_L2;
  // the measured ratio must plateau below a fixed constant across resolutions
  CHECK(worst < std::sqrt(1.0 + 1.0 / (kPi * kPi)) + 1e-12);
}
