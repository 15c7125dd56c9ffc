#include "qbar/protocols.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "qbar/errors.hpp"
#include "qbar/least_squares.hpp"
#include "qbar/parallel.hpp"

namespace qbar::proto {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool positive_finite(double v) { return v > 0.0 && std::isfinite(v); }

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// Applies segments to a state, tracking elapsed time and the rotating frame.
class Sequencer {
 public:
  Sequencer(const SystemParams& sp, const HilbertConfig& hc, const ProtocolOptions& options)
      : sp_(sp), hc_(hc), options_(options), state_(DensityState::ground(hc)), frame_(sp.f_r) {
    excitations_.resize(hc.dimension());
    for (std::size_t q = 0; q < 2; ++q) {
      for (std::size_t n1 = 0; n1 < hc.fock_dim_primary; ++n1) {
        for (std::size_t n2 = 0; n2 < hc.fock_dim_spur; ++n2) excitations_[hc.index(q, n1, n2)] = int(q + n1 + n2);
      }
    }
  }

  void apply(const Segment& s) {
    std::visit(Overloaded{
                   [&](const Excite&) { flip_qubit(); },
                   [&](const Drive& d) {
                     SystemParams p = sp_;
                     p.g = p.g_spur = 0.0;
                     set_frame(d.params.frequency);
                     const sim::SparseOp h = sim::build_hamiltonian(p, hc_, frame_) +
                                             sim::drive_hamiltonian(hc_, d.params.amplitude);
                     run(h, sim::collapse_operators(p, hc_), d.params.duration);
                   },
                   [&](const CouplerOn& c) {
                     SystemParams p = sp_;
                     p.g = c.g;
                     p.g_spur = c.g_spur;
                     set_frame(sp_.f_r);
                     run(sim::build_hamiltonian(p, hc_, frame_),
                         sim::collapse_operators(p, hc_, options_.coupler_extra_qubit_decay), c.duration);
                   },
                   [&](const Idle& i) {
                     SystemParams p = sp_;
                     p.g = p.g_spur = 0.0;
                     set_frame(sp_.f_r);
                     run(sim::build_hamiltonian(p, hc_, frame_), sim::collapse_operators(p, hc_), i.duration);
                   },
                   [&](const Measure&) {},
               },
               s);
  }

  double pe() const { return sim::measure_pe(state_); }
  const EvolveStats& stats() const { return stats_; }
  void reset_stats() { stats_ = {}; }
  DensityState state_in_primary_frame() {
    set_frame(sp_.f_r);
    return state_;
  }

 private:
  void run(const sim::SparseOp& h, const std::vector<sim::SparseOp>& collapse, double duration) {
    const sim::MasterEquation eq(h, collapse);
    state_ = sim::evolve(state_, eq, duration, options_.evolve, &stats_);
    time_ += duration;
  }

  // rho_ij picks up exp(i 2 pi (F_new - F_old)(n_i - n_j) t).
  void set_frame(double frame) {
    if (frame == frame_) return;
    const double w = kTwoPi * (frame - frame_) * time_;
    const auto n = static_cast<Eigen::Index>(hc_.dimension());
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const int dn = excitations_[i] - excitations_[j];
        if (dn != 0) state_.matrix(i, j) *= std::polar(1.0, w * dn);
      }
    }
    frame_ = frame;
  }

  void flip_qubit() {
    const std::size_t half = hc_.dimension() / 2;
    const auto flip = [half](Eigen::Index i) { return static_cast<Eigen::Index>((i + half) % (2 * half)); };
    sim::Matrix out(state_.matrix.rows(), state_.matrix.cols());
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
      for (Eigen::Index i = 0; i < out.rows(); ++i) out(i, j) = state_.matrix(flip(i), flip(j));
    }
    state_.matrix.swap(out);
  }

  SystemParams sp_;
  HilbertConfig hc_;
  ProtocolOptions options_;
  DensityState state_;
  EvolveStats stats_;
  std::vector<int> excitations_;
  double frame_;
  double time_ = 0.0;
};

Segment excite_segment(const SystemParams& sp, const ScanOptions& options) {
  if (options.pi_pulse_amplitude) return pi_pulse(sp, *options.pi_pulse_amplitude);
  return Excite{};
}

std::vector<std::size_t> sorted_order(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  return idx;
}

void check_times(const std::vector<double>& v, const char* what) {
  if (v.empty()) throw ArgumentError(std::string(what) + " grid is empty");
  for (double t : v) {
    if (!(t >= 0.0) || !std::isfinite(t)) throw ArgumentError(std::string(what) + " must be finite and >= 0");
  }
}

// Best rate by variable projection on a log grid, then the linear coefficients.
struct LinearFit {
  double ssr = std::numeric_limits<double>::infinity();
  Eigen::VectorXd coef;
};

LinearFit linear_fit(const Eigen::MatrixXd& basis, const Eigen::VectorXd& y) {
  LinearFit f;
  f.coef = basis.colPivHouseholderQr().solve(y);
  f.ssr = (basis * f.coef - y).squaredNorm();
  return f;
}

}  // namespace

void Protocol::validate() const {
  if (segments.empty()) throw ArgumentError("protocol has no segments");
  std::size_t measures = 0;
  for (const auto& s : segments) {
    std::visit(Overloaded{
                   [](const Excite&) {},
                   [](const Drive& d) { d.params.validate(); },
                   [](const CouplerOn& c) {
                     if (!(c.g >= 0.0) || !(c.g_spur >= 0.0) || !std::isfinite(c.g) || !std::isfinite(c.g_spur)) {
                       throw ArgumentError("coupler_on couplings must be finite and >= 0");
                     }
                     if (!positive_finite(c.duration)) throw ArgumentError("coupler_on duration must be > 0");
                   },
                   [](const Idle& i) {
                     if (!positive_finite(i.duration)) throw ArgumentError("idle duration must be > 0");
                   },
                   [&](const Measure&) { ++measures; },
               },
               s);
  }
  if (measures != 1 || !std::holds_alternative<Measure>(segments.back())) {
    throw ArgumentError("protocol needs exactly one measure, as its last segment");
  }
}

double Protocol::duration() const {
  double total = 0.0;
  for (const auto& s : segments) {
    if (const auto* d = std::get_if<Drive>(&s)) total += d->params.duration;
    if (const auto* c = std::get_if<CouplerOn>(&s)) total += c->duration;
    if (const auto* i = std::get_if<Idle>(&s)) total += i->duration;
  }
  return total;
}

ProtocolResult run_protocol(const Protocol& p, const SystemParams& sp, const HilbertConfig& hc,
                            const ProtocolOptions& options) {
  p.validate();
  sp.validate();
  hc.validate();
  Sequencer seq(sp, hc, options);
  for (const auto& s : p.segments) seq.apply(s);
  ProtocolResult r;
  r.pe = seq.pe();
  r.stats = seq.stats();
  r.state = seq.state_in_primary_frame();
  return r;
}

double swap_time(double g) {
  if (!positive_finite(g)) throw DomainError("swap needs a positive coupling");
  return 1.0 / (2.0 * (2.0 * g));
}

Drive pi_pulse(const SystemParams& sp, double amplitude) {
  if (!positive_finite(amplitude)) throw DomainError("pi pulse amplitude must be > 0");
  return Drive{DriveParams{amplitude, sp.f_q, 1.0 / (2.0 * amplitude)}};
}

T1ScanResult phonon_t1_scan(const SystemParams& sp, const HilbertConfig& hc, const std::vector<double>& delays,
                            const ScanOptions& options) {
  check_times(delays, "delay");
  sp.validate();
  hc.validate();
  if (delays.size() > options.max_points) throw ResourceError("delay grid exceeds the point budget");

  T1ScanResult result;
  result.delays = delays;
  result.pe.assign(delays.size(), 0.0);
  result.swap_time = swap_time(sp.g);
  const CouplerOn swap{sp.g, sp.g_spur, result.swap_time};

  // Shared prefix, then one idle chain in increasing delay order.
  Sequencer seq(sp, hc, options.protocol);
  seq.apply(excite_segment(sp, options));
  seq.apply(swap);
  const auto order = sorted_order(delays);
  std::vector<Sequencer> snapshots;
  snapshots.reserve(delays.size());
  double elapsed = 0.0;
  for (std::size_t k : order) {
    if (delays[k] > elapsed) {
      seq.apply(Idle{delays[k] - elapsed});
      elapsed = delays[k];
    }
    snapshots.push_back(seq);
  }
  std::vector<EvolveStats> stats(delays.size());
  parallel_for(order.size(), worker_count(options.workers), [&](std::size_t i) {
    Sequencer branch = snapshots[i];
    branch.reset_stats();
    branch.apply(swap);
    result.pe[order[i]] = branch.pe();
    stats[i] = branch.stats();
  });
  result.stats = seq.stats();
  for (const auto& s : stats) result.stats.merge(s);
  return result;
}

ChevronResult rabi_chevron(const SystemParams& sp, const HilbertConfig& hc, const std::vector<double>& f_q_grid,
                           const std::vector<double>& times, const ScanOptions& options) {
  if (f_q_grid.empty()) throw ArgumentError("qubit frequency grid is empty");
  check_times(times, "interaction time");
  sp.validate();
  hc.validate();
  if (f_q_grid.size() * times.size() > options.max_points) {
    throw ResourceError("chevron grid has " + std::to_string(f_q_grid.size() * times.size()) +
                        " points; budget is " + std::to_string(options.max_points));
  }

  ChevronResult result;
  result.map.axis0 = f_q_grid;
  result.map.axis1 = times;
  result.map.values.assign(f_q_grid.size() * times.size(), 0.0);
  const auto order = sorted_order(times);
  std::vector<EvolveStats> stats(f_q_grid.size());
  parallel_for(f_q_grid.size(), worker_count(options.workers), [&](std::size_t col) {
    SystemParams p = sp;
    p.f_q = f_q_grid[col];
    p.validate();
    Sequencer seq(p, hc, options.protocol);
    seq.apply(excite_segment(p, options));
    double elapsed = 0.0;
    for (std::size_t k : order) {
      if (times[k] > elapsed) {
        seq.apply(CouplerOn{p.g, p.g_spur, times[k] - elapsed});
        elapsed = times[k];
      }
      result.map.at(col, k) = seq.pe();
    }
    stats[col] = seq.stats();
  });
  for (const auto& s : stats) result.stats.merge(s);
  return result;
}

DecayFit fit_exponential(const std::vector<double>& x_in, const std::vector<double>& y_in) {
  if (x_in.size() != y_in.size()) throw ArgumentError("x and y differ in length");
  if (x_in.size() < 5) throw ArgumentError("exponential fit needs at least 5 points");
  for (std::size_t i = 0; i < x_in.size(); ++i) {
    if (!std::isfinite(x_in[i])) throw ArgumentError("x must be finite");
    if (!(y_in[i] >= 0.0 && y_in[i] <= 1.0)) throw ArgumentError("y must lie in [0, 1]");
  }
  // Canonical order so the result does not depend on the input order.
  std::vector<std::size_t> idx(x_in.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return x_in[a] != x_in[b] ? x_in[a] < x_in[b] : y_in[a] < y_in[b];
  });
  const auto m = static_cast<Eigen::Index>(idx.size());
  Eigen::VectorXd x(m), y(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    x(i) = x_in[idx[i]];
    y(i) = y_in[idx[i]];
  }
  const double span = x(m - 1) - x(0);
  if (!(span > 0.0)) throw ArgumentError("x values must not all coincide");
  const Eigen::VectorXd xs = x / span;  // rates below are per span

  Eigen::MatrixXd basis(m, 2);
  basis.col(0).setOnes();
  double best_u = 1.0;
  LinearFit best;
  for (int k = 0; k <= 240; ++k) {
    const double u = std::pow(10.0, -4.0 + 7.0 * k / 240.0);
    basis.col(1) = (-u * xs).array().exp().matrix();
    const LinearFit f = linear_fit(basis, y);
    if (f.ssr < best.ssr) {
      best = f;
      best_u = u;
    }
  }

  // Parameters (u, amplitude[, offset]) with y = offset + amplitude exp(-u x / span);
  // the offset is held at 0 when its lower bound is active.
  const auto run = [&](bool free_offset, const Eigen::VectorXd& p0) {
    const lsq::ResidualFn fn = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
      if (!(p(0) > 0.0)) return false;
      const Eigen::ArrayXd e = (-p(0) * xs).array().exp();
      r = ((free_offset ? p(2) : 0.0) + p(1) * e).matrix() - y;
      if (jac != nullptr) {
        jac->col(0) = (-p(1) * xs.array() * e).matrix();
        jac->col(1) = e.matrix();
        if (free_offset) jac->col(2).setOnes();
      }
      return true;
    };
    lsq::Options opts;
    opts.tol = 1e-12;
    opts.step_floor = Eigen::VectorXd::Constant(p0.size(), 1e-6);
    opts.step_floor(0) = 1e-9;
    return lsq::levenberg_marquardt(fn, static_cast<std::size_t>(m), p0, opts);
  };
  Eigen::VectorXd p0(3);
  p0 << best_u, best.coef(1), best.coef(0);
  lsq::Result fit = run(true, p0);
  const bool bounded = fit.params(2) < 0.0;
  if (bounded) fit = run(false, Eigen::Vector2d(fit.params(0), fit.params(1)));
  const Eigen::Index np = fit.params.size();

  DecayFit out;
  out.T1 = span / fit.params(0);
  out.amplitude = fit.params(1);
  out.offset = bounded ? 0.0 : fit.params(2);
  out.converged = fit.converged;
  out.residual_rms = std::sqrt(2.0 * fit.cost / static_cast<double>(m));
  out.degenerate = !(out.T1 <= 1e6 * span) || !(out.amplitude > 1e-12);
  if (!out.degenerate) {
    try {
      const double s2 = 2.0 * fit.cost / static_cast<double>(m - np);
      const Eigen::MatrixXd cov = lsq::covariance(fit.jacobian, s2);
      out.uncertainties = {out.T1 * std::sqrt(cov(0, 0)) / fit.params(0), std::sqrt(cov(1, 1)),
                           bounded ? 0.0 : std::sqrt(cov(2, 2))};
    } catch (const DegenerateFitError&) {
      out.degenerate = true;
    }
  }
  if (out.degenerate) {
    const double inf = std::numeric_limits<double>::infinity();
    out.uncertainties = {inf, inf, inf};
  }
  return out;
}

OscillationFit fit_oscillation(const std::vector<double>& t_in, const std::vector<double>& y_in, bool damped) {
  if (t_in.size() != y_in.size()) throw ArgumentError("t and y differ in length");
  const auto m = static_cast<Eigen::Index>(t_in.size());
  const Eigen::Index np = damped ? 6 : 4;
  if (m < np + 4) throw ArgumentError("oscillation fit needs more samples");
  const double span = t_in.back() - t_in.front();
  if (!(span > 0.0)) throw ArgumentError("times must increase");
  Eigen::VectorXd ts(m), y(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    ts(i) = (t_in[i] - t_in.front()) / span;
    y(i) = y_in[i];
  }

  // Start: variable projection over cycles per span (at least one full
  // cycle, up to Nyquist) and, when damped, a coarse grid of decay rates.
  const std::vector<double> rates = damped ? std::vector<double>{0.0, 0.5, 1.0, 2.0, 4.0} : std::vector<double>{0.0};
  const Eigen::Index nb = damped ? 4 : 3;
  Eigen::MatrixXd basis(m, nb);
  basis.col(0).setOnes();
  const double nyquist = 0.5 * static_cast<double>(m - 1);
  double best_nu = 0.0, best_rate = 0.0;
  LinearFit best;
  for (double rate : rates) {
    const Eigen::ArrayXd env = (-rate * ts.array()).exp();
    if (damped) basis.col(3) = env.matrix();
    for (double nu = 1.0; nu <= nyquist; nu += 0.02) {
      basis.col(1) = (env * (kTwoPi * nu * ts.array()).cos()).matrix();
      basis.col(2) = (env * (kTwoPi * nu * ts.array()).sin()).matrix();
      const LinearFit f = linear_fit(basis, y);
      if (f.ssr < best.ssr) {
        best = f;
        best_nu = nu;
        best_rate = rate;
      }
    }
  }
  if (!std::isfinite(best.ssr)) throw DegenerateFitError("no oscillation found");

  // Parameters (mean, C, S, nu[, gamma, B]):
  // mean + exp(-gamma t)(B + C cos + S sin).
  const lsq::ResidualFn fn = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
    if (!(p(3) > 0.0)) return false;
    const Eigen::ArrayXd arg = kTwoPi * p(3) * ts.array();
    const Eigen::ArrayXd c = arg.cos(), s = arg.sin();
    const Eigen::ArrayXd env = damped ? Eigen::ArrayXd((-p(4) * ts.array()).exp()) : Eigen::ArrayXd::Ones(m);
    const Eigen::ArrayXd osc = p(1) * c + p(2) * s + (damped ? p(5) : 0.0);
    r = (p(0) + env * osc).matrix() - y;
    if (jac != nullptr) {
      jac->col(0).setOnes();
      jac->col(1) = (env * c).matrix();
      jac->col(2) = (env * s).matrix();
      jac->col(3) = (env * kTwoPi * ts.array() * (-p(1) * s + p(2) * c)).matrix();
      if (damped) {
        jac->col(4) = (-ts.array() * env * osc).matrix();
        jac->col(5) = env.matrix();
      }
    }
    return true;
  };
  Eigen::VectorXd p0(np);
  p0.head(4) << best.coef(0), best.coef(1), best.coef(2), best_nu;
  if (damped) p0.tail(2) << best_rate, best.coef(3);
  lsq::Options opts;
  opts.tol = 1e-12;
  opts.step_floor = Eigen::VectorXd::Constant(np, 1e-6);
  const lsq::Result fit = lsq::levenberg_marquardt(fn, static_cast<std::size_t>(m), p0, opts);

  OscillationFit out;
  const double C = fit.params(1), S = fit.params(2);
  const double amp = std::hypot(C, S);
  out.frequency = fit.params(3) / span;
  out.visibility = 2.0 * amp;
  out.mean = fit.params(0);
  out.phase = std::atan2(-S, C);
  out.decay_time = damped && fit.params(4) != 0.0 ? span / fit.params(4) : std::numeric_limits<double>::infinity();
  out.converged = fit.converged;
  out.residual_rms = std::sqrt(2.0 * fit.cost / static_cast<double>(m));
  if (fit.cost > 0.0) {
    try {
      const Eigen::MatrixXd cov = lsq::covariance(fit.jacobian, 2.0 * fit.cost / static_cast<double>(m - np));
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(np);
      if (amp > 0.0) {
        grad(1) = 2.0 * C / amp;
        grad(2) = 2.0 * S / amp;
      }
      out.uncertainties = {std::sqrt(cov(3, 3)) / span, std::sqrt(grad.dot(cov * grad))};
    } catch (const DegenerateFitError&) {
      const double inf = std::numeric_limits<double>::infinity();
      out.uncertainties = {inf, inf};
    }
  }
  return out;
}

double phonon_q_from_t1(double f, double T1) {
  if (!positive_finite(f) || !positive_finite(T1)) throw DomainError("frequency and T1 must be positive");
  return kTwoPi * f * T1;
}

SpectroscopyPreset spectroscopy_preset() {
  SpectroscopyPreset p;
  p.f_q_grid = linspace(4.835e9, 4.885e9, 26);
  p.f_drive_grid = linspace(4.835e9, 4.885e9, 51);
  return p;
}

T1SwapPreset t1_swap_preset() {
  T1SwapPreset p;
  p.delays = linspace(0.0, 1e-6, 41);
  return p;
}

ChevronPreset chevron_preset() {
  ChevronPreset p;
  p.f_q_grid = linspace(p.sp.f_r - 25e6, p.sp.f_r + 25e6, 51);
  p.times = linspace(0.0, 300e-9, 151);
  return p;
}

std::vector<std::string> preset_names() { return {"spectroscopy", "t1-swap", "chevron"}; }

}  // namespace qbar::proto
