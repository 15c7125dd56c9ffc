#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <random>

#include "qbar/errors.hpp"
#include "qbar/quantum_sim.hpp"

using namespace qbar::sim;
using qbar::ArgumentError;
using qbar::linspace;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = std::numbers::pi;

SystemParams lossless(double g, double g_spur) {
  SystemParams sp;
  sp.g = g;
  sp.g_spur = g_spur;
  sp.T1_qb = sp.T2_qb = sp.T1_r = sp.T1_spur = kInf;
  return sp;
}

double expectation(const DensityState& rho, const SparseOp& op) {
  return (Matrix(op) * rho.matrix).trace().real();
}

// Roots of det(M - x I) for the symmetric arrowhead matrix
// [[a, g, h], [g, b, 0], [h, 0, c]] by the trigonometric cubic formula.
std::array<long double, 3> cubic_roots(long double a, long double b, long double c, long double g, long double h) {
  // x^3 + p2 x^2 + p1 x + p0 = 0
  const long double p2 = -(a + b + c);
  const long double p1 = a * b + a * c + b * c - g * g - h * h;
  const long double p0 = -(a * b * c - g * g * c - h * h * b);
  const long double q = (3.0L * p1 - p2 * p2) / 9.0L;
  const long double r = (9.0L * p2 * p1 - 27.0L * p0 - 2.0L * p2 * p2 * p2) / 54.0L;
  const long double m = 2.0L * std::sqrt(-q);
  const long double theta = std::acos(std::clamp(r / std::sqrt(-q * q * q), -1.0L, 1.0L));
  std::array<long double, 3> x{};
  for (int k = 0; k < 3; ++k) x[k] = m * std::cos((theta + 2.0L * kPi * k) / 3.0L) - p2 / 3.0L;
  std::sort(x.begin(), x.end());
  return x;
}

}  // namespace

TEST_CASE("parameter validation") {
  SystemParams sp;
  CHECK_NOTHROW(sp.validate());
  sp.T2_qb = 2.5 * sp.T1_qb;
  CHECK_THROWS_AS(sp.validate(), qbar::DomainError);
  sp = SystemParams{};
  sp.g = -1.0;
  CHECK_THROWS_AS(sp.validate(), qbar::DomainError);
  sp = SystemParams{};
  sp.T1_r = 0.0;
  CHECK_THROWS_AS(sp.validate(), qbar::DomainError);

  CHECK_THROWS_AS((HilbertConfig{1, 3}.validate()), qbar::ConfigError);
  CHECK_THROWS_AS((HilbertConfig{9, 8}.validate()), qbar::ConfigError);
  CHECK_NOTHROW((HilbertConfig{8, 8}.validate()));
  CHECK_THROWS_AS(build_hamiltonian(SystemParams{}, HilbertConfig{10, 10}, 4.86e9), qbar::ConfigError);
  CHECK_THROWS_AS((DriveParams{0.1e6, 4.86e9, 0.0}.validate()), qbar::DomainError);
}

TEST_CASE("build_hamiltonian") {
  const HilbertConfig hc{3, 3};
  SUBCASE("decoupled limit is diagonal in the detunings") {
    SystemParams sp = lossless(0.0, 0.0);
    sp.f_q = 4.90e9;
    const double frame = 4.85e9;
    const Matrix h = build_hamiltonian(sp, hc, frame);
    for (std::size_t q = 0; q < 2; ++q) {
      for (std::size_t n1 = 0; n1 < 3; ++n1) {
        for (std::size_t n2 = 0; n2 < 3; ++n2) {
          const auto i = static_cast<Eigen::Index>(hc.index(q, n1, n2));
          const double expected =
              2.0 * kPi * ((sp.f_q - frame) * q + (sp.f_r - frame) * n1 + (sp.f_spur - frame) * n2);
          CHECK(std::abs(h(i, i).real() - expected) <= 1e-6);
        }
      }
    }
    Matrix off = h;
    off.diagonal().setZero();
    CHECK(off.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("Hermitian and excitation conserving") {
    const Matrix h = build_hamiltonian(SystemParams{}, hc, 4.86e9);
    CHECK((h - h.adjoint()).cwiseAbs().maxCoeff() == 0.0);
    const Matrix n = excitation_number(hc);
    CHECK((h * n - n * h).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("resonant splitting at the maximum coupler setting") {
    const SystemParams sp = lossless(5.6e6, 0.0);
    const Matrix h = build_hamiltonian(sp, hc, sp.f_r);
    // Single-excitation block: |1,0,0>, |0,1,0>, |0,0,1>.
    const Eigen::Index idx[3] = {static_cast<Eigen::Index>(hc.index(1, 0, 0)),
                                 static_cast<Eigen::Index>(hc.index(0, 1, 0)),
                                 static_cast<Eigen::Index>(hc.index(0, 0, 1))};
    Eigen::Matrix3cd block;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) block(r, c) = h(idx[r], idx[c]);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3cd> es(block);
    const auto ev = es.eigenvalues() / (2.0 * kPi);
    // Branches at -g and +g around f_r, the uncoupled spur at +10 MHz.
    CHECK(ev(1) - ev(0) == doctest::Approx(11.2e6).epsilon(1e-12));
  }
  SUBCASE("drive operator") {
    const Matrix d = drive_hamiltonian(hc, 1e6);
    const auto g = static_cast<Eigen::Index>(hc.index(0, 0, 0));
    const auto e = static_cast<Eigen::Index>(hc.index(1, 0, 0));
    CHECK(d(e, g).real() == doctest::Approx(kPi * 1e6));
    CHECK((d - d.adjoint()).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("collapse_operators") {
  const HilbertConfig hc{2, 2};
  SystemParams sp;
  CHECK(collapse_operators(sp, hc).size() == 4);
  sp.T2_qb = 2.0 * sp.T1_qb;
  CHECK(collapse_operators(sp, hc).size() == 3);
  sp = lossless(1e6, 1e6);
  CHECK(collapse_operators(sp, hc).empty());
  CHECK(collapse_operators(sp, hc, 1e5).size() == 1);
  CHECK_THROWS_AS(collapse_operators(sp, hc, -1.0), qbar::DomainError);

  SUBCASE("pure dephasing decays coherence at 1/T2") {
    SystemParams p = lossless(0.0, 0.0);
    p.f_q = p.f_r;
    p.T1_qb = 10e-6;
    p.T2_qb = 1e-6;
    DensityState rho = DensityState::ground(hc);
    const auto g = static_cast<Eigen::Index>(hc.index(0, 0, 0));
    const auto e = static_cast<Eigen::Index>(hc.index(1, 0, 0));
    rho.matrix.setZero();
    rho.matrix(g, g) = rho.matrix(e, e) = rho.matrix(g, e) = rho.matrix(e, g) = 0.5;
    const double t = 1e-6;
    const DensityState out = evolve(rho, build_hamiltonian(p, hc, p.f_q), p, t);
    CHECK(std::abs(out.matrix(e, g)) == doctest::Approx(0.5 * std::exp(-t / p.T2_qb)).epsilon(1e-7));
  }
}

TEST_CASE("evolve") {
  const HilbertConfig hc{3, 3};

  SUBCASE("vanishing generator leaves the state unchanged") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> n(0.0, 1.0);
    const auto dim = static_cast<Eigen::Index>(hc.dimension());
    Matrix a(dim, dim);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = {n(rng), n(rng)};
    DensityState rho = DensityState::ground(hc);
    rho.matrix = a * a.adjoint();
    rho.matrix /= rho.matrix.trace();
    const MasterEquation eq(SparseOp(dim, dim), {});
    const DensityState out = evolve(rho, eq, 1e-6);
    CHECK((out.matrix - rho.matrix).cwiseAbs().maxCoeff() < 1e-15);
  }

  SUBCASE("qubit energy relaxation") {
    SystemParams sp = lossless(0.0, 0.0);
    sp.T1_qb = 10e-6;
    sp.T2_qb = 2.0 * sp.T1_qb;
    const DensityState rho = DensityState::basis(hc, 1, 0, 0);
    EvolveStats stats;
    const DensityState out = evolve(rho, build_hamiltonian(sp, hc, sp.f_q), sp, sp.T1_qb, {}, &stats);
    CHECK(std::abs(measure_pe(out) / std::exp(-1.0) - 1.0) < 1e-6);
    CHECK(stats.trace_drift < 1e-8 * 10.0);
  }

  SUBCASE("vacuum Rabi oscillation") {
    const SystemParams sp = lossless(5.6e6, 0.0);
    const double swap = 1.0 / (2.0 * 2.0 * sp.g);
    CHECK(swap == doctest::Approx(44.643e-9).epsilon(1e-4));
    const MasterEquation eq(build_hamiltonian(sp, hc, sp.f_r), {});
    DensityState rho = DensityState::basis(hc, 1, 0, 0);
    double worst = 0.0;
    const int samples = 64;
    for (int k = 1; k <= samples; ++k) {
      rho = evolve(rho, eq, swap / samples);
      const double t = swap * k / samples;
      worst = std::max(worst, std::abs(measure_pe(rho) - std::pow(std::cos(2.0 * kPi * sp.g * t), 2)));
    }
    CHECK(worst < 1e-6);
    const auto m = static_cast<Eigen::Index>(hc.index(0, 1, 0));
    CHECK(rho.matrix(m, m).real() == doctest::Approx(1.0).epsilon(1e-6));
  }

  SUBCASE("detuned lossless swap") {
    for (double delta : {5e6, -10e6, 20e6}) {
      SystemParams sp = lossless(5.6e6, 0.0);
      sp.f_q = sp.f_r + delta;
      const double omega = std::hypot(delta, 2.0 * sp.g);
      const double vis = std::pow(2.0 * sp.g / omega, 2);
      const MasterEquation eq(build_hamiltonian(sp, hc, sp.f_r), {});
      DensityState rho = DensityState::basis(hc, 1, 0, 0);
      double worst = 0.0;
      for (int k = 1; k <= 40; ++k) {
        rho = evolve(rho, eq, 2.5e-9);
        const double expected = 1.0 - vis * std::pow(std::sin(kPi * omega * 2.5e-9 * k), 2);
        worst = std::max(worst, std::abs(measure_pe(rho) - expected));
      }
      CHECK(worst < 1e-6);
    }
  }

  SUBCASE("excitation number conserved without loss") {
    const SystemParams sp = lossless(5.6e6, 1.75e6);
    DensityState rho = DensityState::basis(hc, 1, 0, 0);
    rho = evolve(rho, build_hamiltonian(sp, hc, 4.861e9), sp, 1e-6);
    CHECK(std::abs(expectation(rho, excitation_number(hc)) - 1.0) < 1e-8);
  }

  SUBCASE("step-size convergence with every channel on") {
    const SystemParams sp;
    const SparseOp h = build_hamiltonian(sp, hc, sp.f_r);
    const MasterEquation eq(h, collapse_operators(sp, hc));
    const DensityState rho = DensityState::basis(hc, 1, 0, 0);
    EvolveStats stats;
    const double a = measure_pe(evolve(rho, eq, 1e-6, {}, &stats));
    const double b = measure_pe(evolve(rho, eq, 1e-6, {eq.default_step() / 2.0}));
    CHECK(std::abs(a - b) < 1e-6);
    CHECK(stats.trace_drift < 1e-8);
    CHECK(stats.hermiticity_defect < 1e-12);
    CHECK(stats.min_eigenvalue >= -1e-9);
    CHECK(eq.default_step() <= 1e-9);
  }

  SUBCASE("oversized steps are reported as instability") {
    const SystemParams sp = lossless(5.6e6, 1.75e6);
    const MasterEquation eq(build_hamiltonian(sp, hc, sp.f_r), {});
    CHECK_THROWS_AS(evolve(DensityState::basis(hc, 1, 0, 0), eq, 2e-6, {1e-7, 1}), qbar::InstabilityError);
  }

  SUBCASE("invalid arguments") {
    const MasterEquation eq(build_hamiltonian(SystemParams{}, hc, 4.86e9), {});
    CHECK_THROWS_AS(evolve(DensityState::ground(hc), eq, -1.0), qbar::DomainError);
    CHECK_THROWS_AS(evolve(DensityState::ground(HilbertConfig{2, 2}), eq, 1e-9), qbar::ArgumentError);
  }
}

TEST_CASE("single_excitation_eigenfrequencies") {
  SUBCASE("decoupled") {
    SystemParams sp = lossless(0.0, 0.0);
    sp.f_q = 4.9e9;
    const auto ev = single_excitation_eigenfrequencies(sp);
    CHECK(ev[0] == sp.f_r);
    CHECK(ev[1] == sp.f_spur);
    CHECK(ev[2] == sp.f_q);
  }
  SUBCASE("isolated crossing splits by 2g") {
    SystemParams sp = SystemParams::spectroscopy_preset();
    sp.g_spur = 0.0;
    const auto ev = single_excitation_eigenfrequencies(sp);
    CHECK(ev[1] - ev[0] == doctest::Approx(9.6e6).epsilon(1e-9));
  }
  SUBCASE("cubic-root oracle over the spectroscopy sweep") {
    SystemParams sp = SystemParams::spectroscopy_preset();
    for (int k = 0; k <= 20; ++k) {
      sp.f_q = 4.83e9 + 3e6 * k;
      const auto ev = single_excitation_eigenfrequencies(sp);
      const auto x = cubic_roots(sp.f_q - sp.f_r, 0.0L, sp.f_spur - sp.f_r, sp.g, sp.g_spur);
      for (int i = 0; i < 3; ++i) {
        const double oracle = static_cast<double>(x[i] + sp.f_r);
        CHECK(std::abs(ev[i] - oracle) / oracle < 1e-6);
        // Offsets from f_r agree far more tightly than the spec tolerance.
        CHECK(std::abs((ev[i] - sp.f_r) - static_cast<double>(x[i])) < 1e-3);
      }
    }
  }
}

TEST_CASE("measure_pe") {
  const HilbertConfig hc{3, 3};
  CHECK(measure_pe(DensityState::ground(hc)) == 0.0);
  CHECK(measure_pe(DensityState::basis(hc, 1, 0, 0)) == 1.0);
  CHECK(measure_pe(DensityState::basis(hc, 0, 2, 1)) == 0.0);

  SUBCASE("pi/2 drive") {
    SystemParams sp = lossless(0.0, 0.0);
    sp.f_q = 4.9e9;
    const double amp = 5e6;
    const SparseOp h = build_hamiltonian(sp, hc, sp.f_q) + drive_hamiltonian(hc, amp);
    const DensityState out = evolve(DensityState::ground(hc), h, sp, 1.0 / (4.0 * amp));
    CHECK(std::abs(measure_pe(out) - 0.5) < 1e-6);
  }
}

TEST_CASE("DensityState invariants") {
  const HilbertConfig hc{2, 3};
  DensityState rho = DensityState::ground(hc);
  CHECK_NOTHROW(rho.validate());
  CHECK(rho.matrix.rows() == 12);
  rho.matrix(0, 0) = 0.5;
  CHECK_THROWS_AS(rho.validate(), qbar::DomainError);
  CHECK_THROWS_AS(DensityState::basis(hc, 0, 2, 0), qbar::ArgumentError);
}

TEST_CASE("spectroscopy_scan") {
  // Two levels per mode suffice for a weak drive from the ground state.
  const HilbertConfig hc{2, 2};
  const SystemParams sp = SystemParams::spectroscopy_preset();

  SUBCASE("far-detuned drive leaves the qubit in the ground state") {
    DriveParams drive;
    const auto map = spectroscopy_scan(sp, hc, drive, {4.86e9}, {4.96e9, 4.76e9});
    for (double v : map.values) CHECK(v < 1e-3);
  }

  SUBCASE("response peaks at the branch frequencies") {
    SystemParams p = sp;
    p.f_q = 4.845e9;
    const auto ev = single_excitation_eigenfrequencies(p);
    const double step = 0.5e6;
    std::vector<double> fd;
    for (int k = -6; k <= 6; ++k) fd.push_back(ev[0] + 0.13e6 + step * k);
    const auto map = spectroscopy_scan(p, hc, DriveParams{}, {p.f_q}, fd);
    const auto best = std::max_element(map.values.begin(), map.values.end()) - map.values.begin();
    CHECK(std::abs(fd[best] - ev[0]) <= step);
    CHECK(map.values[best] > 0.02);
  }

  SUBCASE("truncation adequacy") {
    SystemParams p = sp;
    p.f_q = 4.858e9;
    const auto a = spectroscopy_scan(p, HilbertConfig{3, 3}, DriveParams{}, {p.f_q}, {4.855e9});
    const auto b = spectroscopy_scan(p, HilbertConfig{4, 4}, DriveParams{}, {p.f_q}, {4.855e9});
    CHECK(std::abs(a.values[0] - b.values[0]) < 1e-6);
  }

  SUBCASE("results do not depend on the worker count") {
    ScanOptions one;
    one.workers = 1;
    ScanOptions three;
    three.workers = 3;
    const std::vector<double> fq{4.85e9, 4.86e9, 4.87e9};
    const std::vector<double> fd{4.855e9, 4.865e9};
    const auto a = spectroscopy_scan(sp, hc, DriveParams{}, fq, fd, one);
    const auto b = spectroscopy_scan(sp, hc, DriveParams{}, fq, fd, three);
    CHECK(a.values == b.values);
  }

  SUBCASE("grid budget") {
    ScanOptions opts;
    opts.max_points = 3;
    CHECK_THROWS_AS(spectroscopy_scan(sp, hc, DriveParams{}, {4.85e9, 4.86e9}, {4.85e9, 4.86e9}, opts),
                    qbar::ResourceError);
  }
}

TEST_CASE("minimum branch gaps") {
  const auto grid = linspace(4.82e9, 4.91e9, 91);
  SUBCASE("isolated crossings give 2g and 2g_spur") {
    const auto sp = SystemParams::spectroscopy_preset();
    const auto iso = isolated_crossing_gaps(sp, grid);
    CHECK(std::abs(iso[0].gap - 2.0 * sp.g) < 1e-6 * 2.0 * sp.g);
    CHECK(std::abs(iso[0].f_q - sp.f_r) < 1e3);
    CHECK(std::abs(iso[1].gap - 2.0 * sp.g_spur) < 1e-6 * 2.0 * sp.g_spur);
    CHECK(std::abs(iso[1].f_q - sp.f_spur) < 1e3);
  }
  SUBCASE("refined minimum matches a dense scan and never exceeds the grid minimum") {
    const auto sp = SystemParams::spectroscopy_preset();
    const auto gaps = minimum_branch_gaps(sp, grid);
    for (std::size_t k = 0; k < 2; ++k) {
      double dense = HUGE_VAL;
      double coarse = HUGE_VAL;
      for (double fq : linspace(4.82e9, 4.91e9, 90001)) {
        SystemParams p = sp;
        p.f_q = fq;
        const auto ev = single_excitation_eigenfrequencies(p);
        dense = std::min(dense, ev[k + 1] - ev[k]);
      }
      for (double fq : grid) {
        SystemParams p = sp;
        p.f_q = fq;
        const auto ev = single_excitation_eigenfrequencies(p);
        coarse = std::min(coarse, ev[k + 1] - ev[k]);
      }
      CHECK(gaps[k].gap <= coarse);
      CHECK(std::abs(gaps[k].gap - dense) < 1.0);
    }
    // The two crossings interact, so each full-model gap is below its isolated value.
    CHECK(gaps[0].gap < 2.0 * sp.g);
    CHECK(gaps[1].gap < 2.0 * sp.g_spur);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(minimum_branch_gaps(SystemParams{}, {4.8e9, 4.9e9}), ArgumentError);
    CHECK_THROWS_AS(minimum_branch_gaps(SystemParams{}, {4.8e9, 4.9e9, 4.85e9}), ArgumentError);
  }
}
