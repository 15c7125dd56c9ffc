#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "qbar/bvd_model.hpp"
#include "qbar/errors.hpp"

using namespace qbar::bvd;

namespace {

// (R, L, C, C0) = (1 ohm, 1 uH, 1 pF, 10 pF); reference values below were
// computed with 40-digit arithmetic outside this code base.
const BvdParams kSmall{1.0, 1e-6, 1e-12, 10e-12};

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }
double rel(cplx a, cplx b) { return std::abs(a - b) / std::abs(b); }

// Circumcircle through three points.
void circumcircle(cplx a, cplx b, cplx c, cplx& centre, double& radius) {
  const double d = 2.0 * (a.real() * (b.imag() - c.imag()) + b.real() * (c.imag() - a.imag()) +
                          c.real() * (a.imag() - b.imag()));
  const double ux = (std::norm(a) * (b.imag() - c.imag()) + std::norm(b) * (c.imag() - a.imag()) +
                     std::norm(c) * (a.imag() - b.imag())) / d;
  const double uy = (std::norm(a) * (c.real() - b.real()) + std::norm(b) * (a.real() - c.real()) +
                     std::norm(c) * (b.real() - a.real())) / d;
  centre = {ux, uy};
  radius = std::abs(a - centre);
}

}  // namespace

TEST_CASE("impedance_exact") {
  SUBCASE("series branch is purely resistive at the series resonance") {
    const double fs = series_resonance(kSmall);
    const double w = kTwoPi * fs;
    // R in parallel with C0.
    const cplx expected = kSmall.R / cplx{1.0, w * kSmall.C0 * kSmall.R};
    CHECK(rel(impedance_exact(kSmall, fs), expected) < 1e-9);
  }
  SUBCASE("reference point at 1 MHz") {
    const cplx z = impedance_exact(kSmall, 1e6);
    CHECK(rel(z.real(), 0.0082650560559736740794) < 1e-6);
    CHECK(rel(z.imag(), -14468.579261204510976) < 1e-12);
  }
  SUBCASE("|Z| peaks at the parallel resonance") {
    const double f0 = parallel_resonance(kSmall);
    // Grid step: one hundredth of a linewidth.
    const double step = f0 / internal_q(kSmall) / 100.0;
    double best_f = 0.0, best = 0.0;
    for (int k = -2000; k <= 2000; ++k) {
      const double f = f0 + step * k;
      const double m = std::abs(impedance_exact(kSmall, f));
      if (m > best) {
        best = m;
        best_f = f;
      }
    }
    CHECK(std::abs(best_f - f0) <= step);
  }
  SUBCASE("non-positive frequency is a domain error") {
    CHECK_THROWS_AS(impedance_exact(kSmall, 0.0), qbar::DomainError);
    CHECK_THROWS_AS(impedance_exact(kSmall, -1.0), qbar::DomainError);
  }
  SUBCASE("invalid parameters") {
    CHECK_THROWS_AS(impedance_exact(BvdParams{0.0, 1e-6, 1e-12, 1e-12}, 1e6), qbar::DomainError);
  }
}

TEST_CASE("parallel_resonance") {
  CHECK(rel(parallel_resonance(kSmall), 166923112.54479676502) < 1e-13);
  CHECK(rel(series_resonance(kSmall), 159154943.09189533577) < 1e-13);
  CHECK(parallel_resonance(kSmall) > series_resonance(kSmall));

  BvdParams big = kSmall;
  big.C0 = 1e3;  // farads: effectively infinite
  CHECK(rel(parallel_resonance(big), series_resonance(big)) < 1e-12);

  CHECK(rel(parallel_resonance(default_device()), 4.88e9) < 1e-12);
}

TEST_CASE("internal_q") {
  CHECK(rel(internal_q(kSmall), 1048.808848170151547) < 1e-13);
  BvdParams doubled = kSmall;
  doubled.R *= 2.0;
  CHECK(internal_q(doubled) == doctest::Approx(internal_q(kSmall) / 2.0).epsilon(1e-15));
  CHECK(rel(internal_q(default_device()), 4.3e4) < 1e-12);
}

TEST_CASE("z1_factor") {
  const auto c = z1_factor(kSmall);
  CHECK(rel(c.z1.value.real(), -8.667841720414475595) < 1e-12);
  CHECK(rel(c.z1.value.imag(), 0.090909090909090909091) < 1e-12);
  CHECK(rel(c.Qc, 0.086683184385997087955) < 1e-12);

  const auto c100 = z1_factor(kSmall, LineImpedance{100.0});
  CHECK(c100.z1.value == c.z1.value);
  CHECK(c100.Qc == doctest::Approx(c.Qc / 2.0).epsilon(1e-15));

  BvdParams lossless = kSmall;
  lossless.R = 1e-30;
  const auto cl = z1_factor(lossless);
  CHECK(std::abs(cl.z1.value.imag()) < 1e-25);
  const double w0 = kTwoPi * parallel_resonance(lossless);
  const double expected = (1.0 - w0 * w0 * lossless.L * lossless.C) / (w0 * (lossless.C + lossless.C0));
  CHECK(rel(cl.z1.value.real(), expected) < 1e-12);

  CHECK(rel(z1_factor(default_device()).Qc, 1.0e4) < 1e-10);
}

TEST_CASE("impedance_approx") {
  const ResonanceParams rp{4.88e9, 4.3e4, 1e4, 0.3};
  const double z1 = 123.0;
  CHECK(rel(impedance_approx(rp, z1, rp.f0), rp.Qi * z1 * std::polar(1.0, rp.phi)) < 1e-15);
  const double half_bw = rp.f0 / (2.0 * rp.Qi);
  CHECK(rel(std::abs(impedance_approx(rp, z1, rp.f0 + half_bw)), rp.Qi * z1 / std::sqrt(2.0)) < 1e-9);

  SUBCASE("agreement with the exact circuit improves toward f0") {
    const BvdParams dev = default_device();
    const ResonanceParams eq = to_resonance_params(dev);
    const double z1m = std::abs(z1_factor(dev).z1.value);
    const double linewidth = eq.f0 / eq.Qi;
    double previous = 1e300;
    for (double n : {10.0, 5.0, 2.0, 1.0, 0.5, 0.2, 0.1, 0.01}) {
      const double f = eq.f0 + n * linewidth;
      const double err = rel(impedance_approx(eq, z1m, f), impedance_exact(dev, f));
      CHECK(err < previous);
      previous = err;
    }
    CHECK(rel(impedance_approx(eq, z1m, eq.f0), impedance_exact(dev, eq.f0)) < 1e-10);
  }
}

TEST_CASE("s21_inverse_model and s21_model") {
  const ResonanceParams rp{4.88e9, 9e4, 1e4, 0.0};
  CHECK(rel(s21_inverse_model(rp, rp.f0), cplx{10.0, 0.0}) < 1e-15);
  CHECK(std::abs(s21_model(rp, rp.f0)) == doctest::Approx(0.1).epsilon(1e-15));

  const double linewidth = rp.f0 / rp.Qi;
  for (double sign : {-1.0, 1.0}) {
    const double f = rp.f0 + sign * 100.0 * linewidth;
    CHECK(std::abs(s21_inverse_model(rp, f) - 1.0) < rp.Qi / (rp.Qc * 200.0));
    CHECK(std::abs(s21_model(rp, f) - 1.0) < rp.Qi / (rp.Qc * 200.0));
  }

  SUBCASE("inverse locus is a circle of diameter Qi/Qc rotated by phi about 1") {
    const ResonanceParams r2{4.88e9, 4.3e4, 1e4, 0.7};
    std::vector<cplx> pts;
    for (int k = -400; k <= 400; ++k) pts.push_back(s21_inverse_model(r2, r2.f0 + k * r2.f0 / r2.Qi / 40.0));
    cplx centre;
    double radius;
    circumcircle(pts.front(), pts[pts.size() / 2 + 17], pts.back(), centre, radius);
    CHECK(2.0 * radius == doctest::Approx(r2.Qi / r2.Qc).epsilon(1e-9));
    CHECK(std::abs(centre - (1.0 + 0.5 * r2.Qi / r2.Qc * std::polar(1.0, r2.phi))) < 1e-9);
    for (const auto& z : pts) CHECK(std::abs(std::abs(z - centre) - radius) < 1e-9);
    // Reciprocal locus: also a circle (inversion maps circles to circles).
    circumcircle(1.0 / pts.front(), 1.0 / pts[300], 1.0 / pts[650], centre, radius);
    for (const auto& z : pts) CHECK(std::abs(std::abs(1.0 / z - centre) - radius) < 1e-9);
  }
}

TEST_CASE("wrap_phase maps into (-pi, pi]") {
  const double pi = std::numbers::pi;
  CHECK(wrap_phase(pi) == doctest::Approx(pi));
  CHECK(wrap_phase(-pi) == doctest::Approx(pi));
  CHECK(wrap_phase(3.0 * pi / 2.0) == doctest::Approx(-pi / 2.0));
  CHECK(wrap_phase(0.25) == 0.25);
}

TEST_CASE("properties") {
  std::mt19937_64 rng(20200131);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  SUBCASE("circuit and resonance parameters round trip") {
    for (int k = 0; k < 100; ++k) {
      const double f0 = std::pow(10.0, 9.0 + u(rng));
      const double Qi = std::pow(10.0, 2.0 + 3.0 * u(rng));
      const double Qc = std::pow(10.0, 1.0 + 4.0 * u(rng));
      const double ratio = std::pow(10.0, -3.0 + 2.0 * u(rng));
      const auto p = bvd_from_resonance(f0, Qi, Qc, ratio);
      const auto rp = to_resonance_params(p);
      CHECK(rel(rp.f0, f0) < 1e-12);
      CHECK(rel(rp.Qi, Qi) < 1e-10);
      CHECK(rel(rp.Qc, Qc) < 1e-10);
    }
  }
  SUBCASE("conjugate symmetry about the resonance for phi = 0") {
    for (int k = 0; k < 50; ++k) {
      const ResonanceParams rp{4.88e9, std::pow(10.0, 2.0 + 4.0 * u(rng)), std::pow(10.0, 2.0 + 3.0 * u(rng)), 0.0};
      const double delta = rp.f0 / rp.Qi * 5.0 * u(rng);
      const cplx a = s21_inverse_model(rp, rp.f0 + delta);
      const cplx b = s21_inverse_model(rp, rp.f0 - delta);
      CHECK(std::abs(a - std::conj(b)) < 1e-12 * std::abs(a));
    }
  }
  SUBCASE("model times inverse is one") {
    for (int k = 0; k < 200; ++k) {
      const ResonanceParams rp{1e9 + 9e9 * u(rng), std::pow(10.0, 2.0 + 4.0 * u(rng)),
                               std::pow(10.0, 1.0 + 4.0 * u(rng)), -3.0 + 6.0 * u(rng)};
      const double f = rp.f0 * (1.0 + (u(rng) - 0.5) * 1e-3);
      CHECK(std::abs(s21_model(rp, f) * s21_inverse_model(rp, f) - 1.0) < 1e-14);
    }
  }
  SUBCASE("depth depends only on Qi/Qc") {
    for (int k = 0; k < 50; ++k) {
      const ResonanceParams rp{4.88e9, std::pow(10.0, 2.0 + 4.0 * u(rng)), std::pow(10.0, 2.0 + 3.0 * u(rng)), 0.0};
      ResonanceParams scaled = rp;
      const double factor = std::pow(10.0, -2.0 + 4.0 * u(rng));
      scaled.Qi *= factor;
      scaled.Qc *= factor;
      CHECK(std::abs(s21_model(scaled, scaled.f0)) == doctest::Approx(std::abs(s21_model(rp, rp.f0))).epsilon(1e-13));
    }
  }
}
