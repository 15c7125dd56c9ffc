#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "qbar/errors.hpp"
#include "qbar/grid.hpp"
#include "qbar/io/synth.hpp"
#include "qbar/least_squares.hpp"
#include "qbar/resonator_fit.hpp"

using namespace qbar;
using namespace qbar::fit;
using bvd::ResonanceParams;

namespace {

const ResonanceParams kCryo{4.88e9, 4.3e4, 1.0e4, 0.2};

std::vector<double> window(const ResonanceParams& rp, double half_width_linewidths, std::size_t n,
                           double centre_offset = 0.0) {
  const double lw = rp.f0 / rp.Qi;
  const double c = rp.f0 + centre_offset * lw;
  return linspace(c - half_width_linewidths * lw, c + half_width_linewidths * lw, n);
}

ComplexTrace synth(const ResonanceParams& rp, const std::vector<double>& grid, double sigma = 0.0,
                   std::uint64_t seed = 0, BaselineModel baseline = {}) {
  io::SynthOptions o;
  o.noise_sigma = sigma;
  o.seed = seed;
  o.baseline = baseline;
  return io::synth_trace(rp, grid, o);
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace

TEST_CASE("normalize_trace") {
  SUBCASE("a trace that is already normalized keeps an identity baseline") {
    const ResonanceParams rp{4.88e9, 4.3e4, 4.3e4, 0.0};
    const auto grid = window(rp, 100.0, 2001);
    const auto t = synth(rp, grid);
    const auto n = normalize_trace(t);
    // Edge tails of the line shape are at most Qi/(Qc * 2 * 60) here.
    const double tail = 1.0 / 120.0;
    CHECK(std::abs(n.baseline.amplitude_offset - 1.0) < tail * tail);
    CHECK(std::abs(n.baseline.phase_offset) < tail);
    for (std::size_t k = 0; k < t.size(); ++k) CHECK(std::abs(n.trace.values[k] - t.values[k]) < tail);
  }
  SUBCASE("restores an amplitude and delay baseline") {
    const ResonanceParams rp{4.88e9, 4.3e4, 4.3e4, 0.2};
    const auto grid = window(rp, 100.0, 2001);
    const double span = grid.back() - grid.front();
    BaselineModel b;
    b.amplitude_offset = 0.8;
    b.phase_offset = 1.1;
    b.group_delay = 0.3 / span;
    b.reference_freq = 0.5 * (grid.front() + grid.back());
    const auto clean = synth(rp, grid);
    const auto raw = synth(rp, grid, 0.0, 0, b);
    const auto n = normalize_trace(raw);
    CHECK(std::abs(n.baseline.group_delay - b.group_delay) < 0.01 / span);
    CHECK(std::abs(n.baseline.amplitude_offset - 0.8) < 1e-3);
    for (std::size_t k = 0; k < raw.size(); ++k) CHECK(std::abs(n.trace.values[k] - clean.values[k]) < 1e-2);
  }
  SUBCASE("pure noise normalizes to unit mean magnitude") {
    const double sigma = 0.01;
    ComplexTrace t;
    std::mt19937_64 rng(7);
    std::normal_distribution<double> nd(0.0, sigma / std::sqrt(2.0));
    for (int k = 0; k < 1000; ++k) {
      t.freqs.push_back(4e9 + k * 1e3);
      t.values.push_back(cplx{1.0 + nd(rng), nd(rng)} * 0.5);
    }
    const auto n = normalize_trace(t);
    double mean = 0.0;
    for (const auto& v : n.trace.values) mean += std::abs(v);
    mean /= 1000.0;
    CHECK(std::abs(mean - 1.0) < 2.0 * sigma);
  }
  SUBCASE("errors") {
    const auto grid = window(kCryo, 10.0, 30);
    CHECK_THROWS_AS(normalize_trace(synth(kCryo, grid)), NormalizationError);
    const auto ok_grid = window(kCryo, 10.0, 200);
    auto t = synth(kCryo, ok_grid);
    CHECK_THROWS_AS(normalize_trace(t, 0.5), ArgumentError);
    CHECK_THROWS_AS(normalize_trace(t, 0.0), ArgumentError);
    t.values[5] = 0.0;
    CHECK_THROWS_AS(normalize_trace(t), DataError);
    auto bad = synth(kCryo, ok_grid);
    std::swap(bad.freqs[3], bad.freqs[4]);
    CHECK_THROWS_AS(normalize_trace(bad), DataError);
    auto shorty = synth(kCryo, window(kCryo, 10.0, 12));
    CHECK_THROWS_AS(normalize_trace(shorty), DataError);
  }
}

TEST_CASE("circle_init") {
  SUBCASE("noise-free trace recovered within 1 percent") {
    const auto t = synth(kCryo, window(kCryo, 10.0, 2001, 0.37));
    const auto p = circle_init(t);
    CHECK(rel(p.f0, kCryo.f0) < 0.01);
    CHECK(rel(p.Qi, kCryo.Qi) < 0.01);
    CHECK(rel(p.Qc, kCryo.Qc) < 0.01);
    CHECK(rel(p.phi, kCryo.phi) < 0.01);
  }
  SUBCASE("symmetric trace gives zero rotation") {
    ResonanceParams rp = kCryo;
    rp.phi = 0.0;
    const auto p = circle_init(synth(rp, window(rp, 10.0, 801)));
    CHECK(std::abs(p.phi) < 1e-3);
  }
  SUBCASE("deep resonance: farthest excursion is Qi/Qc") {
    const ResonanceParams rp{4.88e9, 9e4, 1e4, 0.0};
    const auto t = synth(rp, window(rp, 10.0, 801));
    double far = 0.0;
    for (const auto& v : t.values) far = std::max(far, std::abs(1.0 / v - 1.0));
    CHECK(far == doctest::Approx(9.0).epsilon(1e-9));
    CHECK(circle_init(t).Qc == doctest::Approx(1e4).epsilon(1e-6));
  }
  SUBCASE("pure noise is rejected") {
    ComplexTrace t;
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd(0.0, 0.01);
    for (int k = 0; k < 1000; ++k) {
      t.freqs.push_back(4e9 + k * 1e3);
      t.values.push_back(cplx{1.0 + nd(rng), nd(rng)});
    }
    CHECK_THROWS_AS(circle_init(t), NoResonanceError);
  }
}

TEST_CASE("fit_resonance") {
  SUBCASE("noise-free recovery") {
    const auto t = synth(kCryo, window(kCryo, 10.0, 1001, -0.4));
    ResonanceParams init = kCryo;
    init.f0 *= 1.0 + 2e-6;
    init.Qi *= 1.05;
    init.Qc *= 0.95;
    init.phi += 0.05;
    const auto r = fit_resonance(t, init);
    CHECK(r.converged);
    CHECK(rel(r.params.f0, kCryo.f0) < 1e-6);
    CHECK(rel(r.params.Qi, kCryo.Qi) < 1e-6);
    CHECK(rel(r.params.Qc, kCryo.Qc) < 1e-6);
    CHECK(rel(r.params.phi, kCryo.phi) < 1e-6);
    CHECK(r.residual_rms < 1e-12);
  }
  SUBCASE("room-temperature regime") {
    const ResonanceParams rt{4.88e9, 1.0e3, 2.0e3, -0.1};
    const auto t = synth(rt, window(rt, 10.0, 1001));
    const auto r = fit_resonance(t, circle_init(t));
    CHECK(rel(r.params.Qi, rt.Qi) < 0.01);
  }
  SUBCASE("iteration limit yields a flagged partial result") {
    const auto t = synth(kCryo, window(kCryo, 10.0, 1001));
    ResonanceParams init = kCryo;
    init.Qi *= 1.3;
    FitOptions o;
    o.max_iter = 1;
    o.reweight_passes = 1;
    const auto r = fit_resonance(t, init, o);
    CHECK_FALSE(r.converged);
    CHECK(r.iterations == 1);
  }
  SUBCASE("noisy traces: reported sigmas are calibrated") {
    const auto grid = window(kCryo, 10.0, 1001);
    const auto clean = synth(kCryo, grid);
    int inside = 0, total = 0;
    for (std::uint64_t seed = 1; seed <= 500; ++seed) {
      const auto t = synth(kCryo, grid, 0.01, seed);
      const auto r = fit_resonance(t, circle_init(t));
      const double est[4] = {r.params.f0, r.params.Qi, r.params.Qc, r.params.phi};
      const double truth[4] = {kCryo.f0, kCryo.Qi, kCryo.Qc, kCryo.phi};
      for (int k = 0; k < 4; ++k) {
        ++total;
        if (std::abs(est[k] - truth[k]) <= 3.0 * r.uncertainties[k]) ++inside;
      }
    }
    MESSAGE("coverage " << inside << "/" << total);
    CHECK(static_cast<double>(inside) >= 0.99 * total);
  }
}

TEST_CASE("fit_trace round trip and invariants") {
  SUBCASE("random physical parameters") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 40; ++k) {
      ResonanceParams rp;
      rp.f0 = 4e9 + 2e9 * u(rng);
      rp.Qi = std::pow(10.0, 2.0 + 4.0 * u(rng));
      rp.Qc = rp.Qi / std::pow(10.0, -2.0 + 4.0 * u(rng));
      rp.phi = -0.99 + 1.98 * u(rng);
      BaselineModel b;
      b.amplitude_offset = 0.5 + u(rng);
      b.phase_offset = 3.0 * u(rng);
      const auto grid = window(rp, 12.0, 1201, u(rng) - 0.5);
      b.reference_freq = grid[600];
      b.group_delay = (u(rng) - 0.5) / (grid.back() - grid.front());
      const auto r = fit_trace(synth(rp, grid, 0.0, 0, b));
      CHECK(r.converged);
      CHECK(rel(r.params.f0, rp.f0) < 1e-5);
      CHECK(rel(r.params.Qi, rp.Qi) < 1e-5);
      CHECK(rel(r.params.Qc, rp.Qc) < 1e-5);
      CHECK(std::abs(r.params.phi - rp.phi) < 1e-5 * std::max(1.0, std::abs(rp.phi)));
      REQUIRE(r.baseline.has_value());
    }
  }
  SUBCASE("f0 is invariant under complex scaling and sub-period delay") {
    const auto grid = window(kCryo, 10.0, 1001);
    const double span = grid.back() - grid.front();
    const auto base = fit_trace(synth(kCryo, grid, 0.005, 42));
    auto t = synth(kCryo, grid, 0.005, 42);
    const double tau = 0.7 / span;
    for (std::size_t k = 0; k < t.size(); ++k) {
      t.values[k] *= cplx{0.3, -1.7} * std::polar(1.0, -2.0 * std::numbers::pi * grid[k] * tau);
    }
    const auto moved = fit_trace(t);
    CHECK(std::abs(moved.params.f0 - base.params.f0) < 1e-6 * base.uncertainties[0] + 1e-3);
  }
  SUBCASE("residual rms never increases over accepted iterations") {
    const auto grid = window(kCryo, 10.0, 801);
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const auto r = fit_trace(synth(kCryo, grid, 0.02, seed));
      for (std::size_t k = 1; k < r.rms_history.size(); ++k) CHECK(r.rms_history[k] <= r.rms_history[k - 1]);
    }
  }
  SUBCASE("uncertainties scale as 1/sqrt(N) at fixed span") {
    std::array<double, 4> scaled_prev{};
    for (std::size_t n : {256u, 1024u, 4096u}) {
      const auto grid = window(kCryo, 10.0, n);
      std::array<double, 4> acc{};
      const int seeds = 8;
      for (int s = 1; s <= seeds; ++s) {
        const auto r = fit_trace(synth(kCryo, grid, 0.01, 1000 + s));
        for (int k = 0; k < 4; ++k) acc[k] += r.uncertainties[k] * std::sqrt(static_cast<double>(n)) / seeds;
      }
      if (n != 256u) {
        for (int k = 0; k < 4; ++k) CHECK(acc[k] == doctest::Approx(scaled_prev[k]).epsilon(0.1));
      }
      scaled_prev = acc;
    }
  }
}

TEST_CASE("fit_report") {
  const auto t = synth(kCryo, window(kCryo, 10.0, 601));
  const auto r = fit_trace(t);
  const auto rep = fit_report(r);
  CHECK(rep.converged == r.converged);
  CHECK(rel(rep.params.Qi, kCryo.Qi) < 1e-8);
  CHECK(rep.residual_rms < 1e-12);
  REQUIRE(rep.model_raw.size() == t.size());
  for (std::size_t k = 0; k < t.size(); ++k) CHECK(std::abs(rep.model_raw[k] - t.values[k]) < 1e-9);
  CHECK(rep.window.num_points == 601);
  CHECK(rep.window.edge_fraction == 0.2);
}

TEST_CASE("least squares covariance rejects rank deficiency") {
  Eigen::MatrixXd j(4, 2);
  j << 1, 2, 2, 4, 3, 6, 4, 8;
  CHECK_THROWS_AS(lsq::covariance(j, 1.0), DegenerateFitError);
  j(0, 1) = 0.0;
  CHECK_NOTHROW(lsq::covariance(j, 1.0));
}
