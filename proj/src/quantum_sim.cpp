#include "qbar/quantum_sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <string>

#include "qbar/errors.hpp"
#include "qbar/parallel.hpp"

namespace qbar::sim {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kMaxStep = 1e-9;
// Step constant: dt * omega_max. Chosen so halving dt moves P_e by well
// under 1e-8 over microsecond protocols.
constexpr double kStepConstant = 0.1;
constexpr double kInstabilityFloor = -1e-6;

using Triplet = Eigen::Triplet<cplx>;

bool positive_time(double t) { return t > 0.0 && !std::isnan(t); }

double rate(double lifetime) { return std::isinf(lifetime) ? 0.0 : 1.0 / lifetime; }

SparseOp from_triplets(std::size_t dim, const std::vector<Triplet>& t) {
  SparseOp op(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  op.setFromTriplets(t.begin(), t.end());
  op.makeCompressed();
  return op;
}

template <typename Fn>
SparseOp basis_map(const HilbertConfig& hc, Fn fn) {
  std::vector<Triplet> t;
  for (std::size_t q = 0; q < 2; ++q) {
    for (std::size_t n1 = 0; n1 < hc.fock_dim_primary; ++n1) {
      for (std::size_t n2 = 0; n2 < hc.fock_dim_spur; ++n2) fn(q, n1, n2, t);
    }
  }
  return from_triplets(hc.dimension(), t);
}

double gershgorin_bound(const SparseOp& op) {
  double bound = 0.0;
  for (Eigen::Index r = 0; r < op.outerSize(); ++r) {
    double row = 0.0;
    for (SparseOp::InnerIterator it(op, r); it; ++it) row += std::abs(it.value());
    bound = std::max(bound, row);
  }
  return bound;
}

double min_eigenvalue_of(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

}  // namespace

void SystemParams::validate() const {
  for (double f : {f_q, f_r, f_spur}) {
    if (!(f > 0.0) || !std::isfinite(f)) throw DomainError("frequencies must be positive and finite");
  }
  if (!(g >= 0.0) || !(g_spur >= 0.0) || !std::isfinite(g) || !std::isfinite(g_spur)) {
    throw DomainError("couplings must be non-negative and finite");
  }
  for (double t : {T1_qb, T2_qb, T1_r, T1_spur}) {
    if (!positive_time(t)) throw DomainError("lifetimes must be positive");
  }
  if (T2_qb > 2.0 * T1_qb * (1.0 + 1e-12)) throw DomainError("T2_qb must not exceed 2 T1_qb");
}

SystemParams SystemParams::spectroscopy_preset() {
  SystemParams sp;
  sp.g = 4.8e6;
  return sp;
}

void HilbertConfig::validate() const {
  if (fock_dim_primary < 2 || fock_dim_spur < 2) throw ConfigError("each mode needs at least 2 Fock levels");
  if (fock_dim_primary > kMaxDimension || fock_dim_spur > kMaxDimension || dimension() > kMaxDimension) {
    throw ConfigError("Hilbert space dimension " + std::to_string(2 * fock_dim_primary * fock_dim_spur) +
                      " exceeds " + std::to_string(kMaxDimension));
  }
}

DensityState DensityState::basis(const HilbertConfig& hc, std::size_t qubit, std::size_t n1, std::size_t n2) {
  hc.validate();
  if (qubit > 1 || n1 >= hc.fock_dim_primary || n2 >= hc.fock_dim_spur) {
    throw ArgumentError("basis state outside the truncated space");
  }
  DensityState s;
  s.dims = hc;
  const auto n = static_cast<Eigen::Index>(hc.dimension());
  s.matrix = Matrix::Zero(n, n);
  const auto i = static_cast<Eigen::Index>(hc.index(qubit, n1, n2));
  s.matrix(i, i) = 1.0;
  return s;
}

DensityState DensityState::ground(const HilbertConfig& hc) { return basis(hc, 0, 0, 0); }

double DensityState::trace() const { return matrix.trace().real(); }

double DensityState::hermiticity_defect() const {
  return (matrix - matrix.adjoint()).cwiseAbs().maxCoeff();
}

double DensityState::min_eigenvalue() const { return min_eigenvalue_of(matrix); }

void DensityState::validate() const {
  if (matrix.rows() != static_cast<Eigen::Index>(dims.dimension()) || matrix.cols() != matrix.rows()) {
    throw DomainError("density matrix does not match its basis");
  }
  if (!matrix.allFinite()) throw DomainError("density matrix has non-finite entries");
  if (hermiticity_defect() > 1e-12) throw DomainError("density matrix is not Hermitian");
  if (std::abs(trace() - 1.0) > 1e-9) throw DomainError("density matrix trace differs from 1");
  if (min_eigenvalue() < -1e-9) throw DomainError("density matrix has a negative eigenvalue");
}

void DriveParams::validate() const {
  if (!(amplitude >= 0.0) || !std::isfinite(amplitude)) throw DomainError("drive amplitude must be >= 0");
  if (!(duration > 0.0) || !std::isfinite(duration)) throw DomainError("drive duration must be > 0");
  if (!(frequency > 0.0) || !std::isfinite(frequency)) throw DomainError("drive frequency must be > 0");
}

SparseOp qubit_lowering(const HilbertConfig& hc) {
  return basis_map(hc, [&](std::size_t q, std::size_t n1, std::size_t n2, std::vector<Triplet>& t) {
    if (q == 1) t.emplace_back(hc.index(0, n1, n2), hc.index(1, n1, n2), 1.0);
  });
}

SparseOp primary_lowering(const HilbertConfig& hc) {
  return basis_map(hc, [&](std::size_t q, std::size_t n1, std::size_t n2, std::vector<Triplet>& t) {
    if (n1 > 0) t.emplace_back(hc.index(q, n1 - 1, n2), hc.index(q, n1, n2), std::sqrt(double(n1)));
  });
}

SparseOp spur_lowering(const HilbertConfig& hc) {
  return basis_map(hc, [&](std::size_t q, std::size_t n1, std::size_t n2, std::vector<Triplet>& t) {
    if (n2 > 0) t.emplace_back(hc.index(q, n1, n2 - 1), hc.index(q, n1, n2), std::sqrt(double(n2)));
  });
}

SparseOp qubit_excited_projector(const HilbertConfig& hc) {
  return basis_map(hc, [&](std::size_t q, std::size_t n1, std::size_t n2, std::vector<Triplet>& t) {
    if (q == 1) t.emplace_back(hc.index(q, n1, n2), hc.index(q, n1, n2), 1.0);
  });
}

SparseOp excitation_number(const HilbertConfig& hc) {
  return basis_map(hc, [&](std::size_t q, std::size_t n1, std::size_t n2, std::vector<Triplet>& t) {
    if (q + n1 + n2 > 0) t.emplace_back(hc.index(q, n1, n2), hc.index(q, n1, n2), double(q + n1 + n2));
  });
}

SparseOp build_hamiltonian(const SystemParams& sp, const HilbertConfig& hc, double frame_freq) {
  sp.validate();
  hc.validate();
  const double dq = kTwoPi * (sp.f_q - frame_freq);
  const double d1 = kTwoPi * (sp.f_r - frame_freq);
  const double d2 = kTwoPi * (sp.f_spur - frame_freq);
  const double g1 = kTwoPi * sp.g;
  const double g2 = kTwoPi * sp.g_spur;
  return basis_map(hc, [&](std::size_t q, std::size_t n1, std::size_t n2, std::vector<Triplet>& t) {
    const std::size_t i = hc.index(q, n1, n2);
    const double diag = dq * q + d1 * n1 + d2 * n2;
    if (diag != 0.0) t.emplace_back(i, i, diag);
    if (q == 0) {
      // s+ a: |0, n1, n2> -> |1, n1 - 1, n2> and its conjugate.
      if (n1 > 0 && g1 != 0.0) {
        const std::size_t j = hc.index(1, n1 - 1, n2);
        const double v = g1 * std::sqrt(double(n1));
        t.emplace_back(j, i, v);
        t.emplace_back(i, j, v);
      }
      if (n2 > 0 && g2 != 0.0) {
        const std::size_t j = hc.index(1, n1, n2 - 1);
        const double v = g2 * std::sqrt(double(n2));
        t.emplace_back(j, i, v);
        t.emplace_back(i, j, v);
      }
    }
  });
}

SparseOp drive_hamiltonian(const HilbertConfig& hc, double amplitude) {
  hc.validate();
  const double v = kTwoPi * amplitude / 2.0;
  return basis_map(hc, [&](std::size_t q, std::size_t n1, std::size_t n2, std::vector<Triplet>& t) {
    if (q == 0 && v != 0.0) {
      t.emplace_back(hc.index(1, n1, n2), hc.index(0, n1, n2), v);
      t.emplace_back(hc.index(0, n1, n2), hc.index(1, n1, n2), v);
    }
  });
}

std::vector<SparseOp> collapse_operators(const SystemParams& sp, const HilbertConfig& hc, double extra_qubit_decay) {
  sp.validate();
  hc.validate();
  if (!(extra_qubit_decay >= 0.0) || !std::isfinite(extra_qubit_decay)) {
    throw DomainError("extra qubit decay rate must be >= 0");
  }
  std::vector<SparseOp> ops;
  const double gamma1 = rate(sp.T1_qb) + extra_qubit_decay;
  // Pure dephasing of the intrinsic qubit; clamp roundoff at T2 = 2 T1.
  const double gamma_phi = std::max(0.0, rate(sp.T2_qb) - 0.5 * rate(sp.T1_qb));
  if (gamma1 > 0.0) ops.push_back(std::sqrt(gamma1) * qubit_lowering(hc));
  if (gamma_phi > 0.0) ops.push_back(std::sqrt(2.0 * gamma_phi) * qubit_excited_projector(hc));
  if (rate(sp.T1_r) > 0.0) ops.push_back(std::sqrt(rate(sp.T1_r)) * primary_lowering(hc));
  if (rate(sp.T1_spur) > 0.0) ops.push_back(std::sqrt(rate(sp.T1_spur)) * spur_lowering(hc));
  return ops;
}

MasterEquation::MasterEquation(const SparseOp& hamiltonian, const std::vector<SparseOp>& collapse)
    : dim_(static_cast<int>(hamiltonian.rows())), h_eff_(hamiltonian) {
  if (hamiltonian.rows() != hamiltonian.cols()) throw ArgumentError("Hamiltonian must be square");
  double decay = 0.0;
  for (const auto& l : collapse) {
    if (l.rows() != hamiltonian.rows() || l.cols() != hamiltonian.cols()) {
      throw ArgumentError("collapse operator dimension mismatch");
    }
    SparseOp ldl = SparseOp(l.adjoint()) * l;
    h_eff_ -= cplx{0.0, 0.5} * ldl;
    decay += gershgorin_bound(ldl);

    MonomialJump mono{std::vector<int>(dim_, -1), std::vector<cplx>(dim_, 0.0)};
    bool is_monomial = true;
    for (int r = 0; r < dim_ && is_monomial; ++r) {
      int count = 0;
      for (SparseOp::InnerIterator it(l, r); it; ++it) {
        if (it.value() == cplx{}) continue;
        mono.source[r] = static_cast<int>(it.col());
        mono.coef[r] = it.value();
        is_monomial = ++count <= 1;
      }
    }
    if (is_monomial) {
      monomial_.push_back(std::move(mono));
    } else {
      general_.push_back(l);
    }
  }
  h_eff_.prune(cplx{});
  h_eff_.makeCompressed();
  h_ptr_.assign(h_eff_.outerIndexPtr(), h_eff_.outerIndexPtr() + dim_ + 1);
  h_col_.assign(h_eff_.innerIndexPtr(), h_eff_.innerIndexPtr() + h_eff_.nonZeros());
  h_val_.assign(h_eff_.valuePtr(), h_eff_.valuePtr() + h_eff_.nonZeros());
  // Spectral radius bound of the Liouvillian: commutator plus dissipator.
  omega_max_ = 2.0 * gershgorin_bound(hamiltonian) + decay;
}

void MasterEquation::derivative(const Matrix& rho, Matrix& out) const {
  // -i H_eff rho + h.c. + sum L rho L+, using rho = rho+. Complex products are
  // written out on real and imaginary parts to skip the inf/nan recovery of
  // std::complex multiplication.
  const int n = dim_;
  y_.resize(n, n);
  out.resize(n, n);
  const double* p = reinterpret_cast<const double*>(rho.data());
  double* y = reinterpret_cast<double*>(y_.data());
  for (int j = 0; j < n; ++j) {
    const double* pc = p + 2 * static_cast<std::ptrdiff_t>(j) * n;
    double* yc = y + 2 * static_cast<std::ptrdiff_t>(j) * n;
    for (int r = 0; r < n; ++r) {
      double re = 0.0, im = 0.0;
      for (int k = h_ptr_[r]; k < h_ptr_[r + 1]; ++k) {
        const double hr = h_val_[k].real(), hi = h_val_[k].imag();
        const double xr = pc[2 * h_col_[k]], xi = pc[2 * h_col_[k] + 1];
        re += hr * xr - hi * xi;
        im += hr * xi + hi * xr;
      }
      // Multiply by -i.
      yc[2 * r] = im;
      yc[2 * r + 1] = -re;
    }
  }
  double* o = reinterpret_cast<double*>(out.data());
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const std::ptrdiff_t ij = 2 * (static_cast<std::ptrdiff_t>(j) * n + i);
      const std::ptrdiff_t ji = 2 * (static_cast<std::ptrdiff_t>(i) * n + j);
      o[ij] = y[ij] + y[ji];
      o[ij + 1] = y[ij + 1] - y[ji + 1];
    }
  }
  for (const auto& m : monomial_) {
    for (int j = 0; j < n; ++j) {
      const int sj = m.source[j];
      if (sj < 0) continue;
      const double cjr = m.coef[j].real(), cji = -m.coef[j].imag();
      for (int i = 0; i < n; ++i) {
        const int si = m.source[i];
        if (si < 0) continue;
        // coef_i * conj(coef_j) * rho(si, sj)
        const double ar = m.coef[i].real() * cjr - m.coef[i].imag() * cji;
        const double ai = m.coef[i].real() * cji + m.coef[i].imag() * cjr;
        const std::ptrdiff_t src = 2 * (static_cast<std::ptrdiff_t>(sj) * n + si);
        const std::ptrdiff_t dst = 2 * (static_cast<std::ptrdiff_t>(j) * n + i);
        o[dst] += ar * p[src] - ai * p[src + 1];
        o[dst + 1] += ar * p[src + 1] + ai * p[src];
      }
    }
  }
  for (const auto& l : general_) {
    z_.noalias() = l * rho;
    y_ = z_.adjoint();
    out.noalias() += l * y_;
  }
}

void MasterEquation::step(Matrix& rho, double dt) const {
  const Eigen::Index size = rho.size();
  derivative(rho, k1_);
  tmp_.resize(rho.rows(), rho.cols());
  const auto axpy = [size](Matrix& dst, const Matrix& x, double a, const Matrix& y) {
    for (Eigen::Index k = 0; k < size; ++k) dst.data()[k] = x.data()[k] + a * y.data()[k];
  };
  axpy(tmp_, rho, 0.5 * dt, k1_);
  derivative(tmp_, k2_);
  axpy(tmp_, rho, 0.5 * dt, k2_);
  derivative(tmp_, k3_);
  axpy(tmp_, rho, dt, k3_);
  derivative(tmp_, k4_);
  const double w = dt / 6.0;
  for (Eigen::Index k = 0; k < size; ++k) {
    rho.data()[k] += w * (k1_.data()[k] + 2.0 * (k2_.data()[k] + k3_.data()[k]) + k4_.data()[k]);
  }
  // Re-symmetrize: the result is Hermitian to the last bit.
  const Eigen::Index n = rho.rows();
  for (Eigen::Index j = 0; j < n; ++j) {
    rho(j, j) = rho(j, j).real();
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const cplx avg = 0.5 * (rho(i, j) + std::conj(rho(j, i)));
      rho(i, j) = avg;
      rho(j, i) = std::conj(avg);
    }
  }
}

double MasterEquation::default_step() const {
  if (omega_max_ <= 0.0) return kMaxStep;
  return std::min(kMaxStep, kStepConstant / omega_max_);
}

void EvolveStats::merge(const EvolveStats& other) {
  steps += other.steps;
  dt = std::max(dt, other.dt);
  trace_drift = std::max(trace_drift, other.trace_drift);
  hermiticity_defect = std::max(hermiticity_defect, other.hermiticity_defect);
  min_eigenvalue = std::min(min_eigenvalue, other.min_eigenvalue);
}

DensityState evolve(const DensityState& rho, const MasterEquation& eq, double t, const EvolveOptions& options,
                    EvolveStats* stats) {
  if (static_cast<std::size_t>(rho.matrix.rows()) != eq.dimension()) {
    throw ArgumentError("state and generator dimensions differ");
  }
  if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("evolution time must be >= 0");
  if (options.dt < 0.0 || std::isnan(options.dt)) throw DomainError("dt must be > 0");
  if (!(options.step_scale > 0.0) || std::isinf(options.step_scale)) throw DomainError("step_scale must be > 0");
  const double max_dt = (options.dt > 0.0 ? options.dt : eq.default_step()) * options.step_scale;
  const auto steps = static_cast<std::size_t>(std::ceil(t / max_dt - 1e-9));
  const double dt = steps > 0 ? t / static_cast<double>(steps) : 0.0;
  const std::size_t check = std::max<std::size_t>(1, options.check_interval);

  DensityState out = rho;
  const double trace0 = out.trace();
  EvolveStats local;
  local.dt = dt;
  local.steps = steps;
  for (std::size_t k = 1; k <= steps; ++k) {
    eq.step(out.matrix, dt);
    if (k % check == 0 || k == steps) {
      const double lam = out.min_eigenvalue();
      local.min_eigenvalue = std::min(local.min_eigenvalue, lam);
      if (lam < kInstabilityFloor || !out.matrix.allFinite()) {
        throw InstabilityError("density matrix eigenvalue " + std::to_string(lam) + " after " + std::to_string(k) +
                               " steps; reduce dt (currently " + std::to_string(dt) + " s)");
      }
      local.hermiticity_defect = std::max(local.hermiticity_defect, out.hermiticity_defect());
    }
  }
  if (steps == 0) local.min_eigenvalue = out.min_eigenvalue();
  local.trace_drift = std::abs(out.trace() - trace0);
  if (stats != nullptr) stats->merge(local);
  return out;
}

DensityState evolve(const DensityState& rho, const SparseOp& hamiltonian, const SystemParams& sp, double t,
                    const EvolveOptions& options, EvolveStats* stats) {
  const MasterEquation eq(hamiltonian, collapse_operators(sp, rho.dims));
  return evolve(rho, eq, t, options, stats);
}

std::array<double, 3> single_excitation_eigenfrequencies(const SystemParams& sp) {
  sp.validate();
  // Shift by f_r so the eigenproblem is solved on MHz-scale numbers.
  Eigen::Matrix3d m;
  m << sp.f_q - sp.f_r, sp.g, sp.g_spur,
       sp.g, 0.0, 0.0,
       sp.g_spur, 0.0, sp.f_spur - sp.f_r;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(m, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  return {ev(0) + sp.f_r, ev(1) + sp.f_r, ev(2) + sp.f_r};
}

std::array<BranchGap, 2> minimum_branch_gaps(const SystemParams& sp, const std::vector<double>& f_q_grid) {
  if (f_q_grid.size() < 3) throw ArgumentError("gap search needs at least 3 grid points");
  for (std::size_t i = 1; i < f_q_grid.size(); ++i) {
    if (!(f_q_grid[i] > f_q_grid[i - 1])) throw ArgumentError("gap search grid must be increasing");
  }
  std::array<BranchGap, 2> out;
  for (std::size_t k = 0; k < 2; ++k) {
    const auto gap = [&](double fq) {
      SystemParams p = sp;
      p.f_q = fq;
      const auto ev = single_excitation_eigenfrequencies(p);
      return ev[k + 1] - ev[k];
    };
    std::size_t best = 0;
    double best_gap = gap(f_q_grid[0]);
    for (std::size_t i = 1; i < f_q_grid.size(); ++i) {
      const double v = gap(f_q_grid[i]);
      if (v < best_gap) {
        best_gap = v;
        best = i;
      }
    }
    double a = f_q_grid[best == 0 ? 0 : best - 1];
    double b = f_q_grid[std::min(best + 1, f_q_grid.size() - 1)];
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - r * (b - a);
    double d = a + r * (b - a);
    double gc = gap(c);
    double gd = gap(d);
    for (int it = 0; it < 200 && (b - a) > 1e-6; ++it) {
      if (gc < gd) {
        b = d;
        d = c;
        gd = gc;
        c = b - r * (b - a);
        gc = gap(c);
      } else {
        a = c;
        c = d;
        gc = gd;
        d = a + r * (b - a);
        gd = gap(d);
      }
    }
    const double fq = 0.5 * (a + b);
    const double g = gap(fq);
    out[k] = g < best_gap ? BranchGap{g, fq} : BranchGap{best_gap, f_q_grid[best]};
  }
  return out;
}

std::array<BranchGap, 2> isolated_crossing_gaps(const SystemParams& sp, const std::vector<double>& f_q_grid) {
  SystemParams primary = sp;
  primary.g_spur = 0.0;
  primary.f_spur = sp.f_r + 1e9;
  SystemParams spur = sp;
  spur.g = 0.0;
  spur.f_r = sp.f_spur + 1e9;
  return {minimum_branch_gaps(primary, f_q_grid)[0], minimum_branch_gaps(spur, f_q_grid)[0]};
}

double measure_pe(const DensityState& rho) {
  const HilbertConfig& hc = rho.dims;
  double pe = 0.0;
  for (std::size_t n1 = 0; n1 < hc.fock_dim_primary; ++n1) {
    for (std::size_t n2 = 0; n2 < hc.fock_dim_spur; ++n2) {
      const auto i = static_cast<Eigen::Index>(hc.index(1, n1, n2));
      pe += rho.matrix(i, i).real();
    }
  }
  return std::clamp(pe, 0.0, 1.0);
}

GridMap spectroscopy_scan(const SystemParams& sp, const HilbertConfig& hc, const DriveParams& drive,
                          const std::vector<double>& f_q_grid, const std::vector<double>& f_drive_grid,
                          const ScanOptions& options) {
  sp.validate();
  hc.validate();
  drive.validate();
  if (f_q_grid.empty() || f_drive_grid.empty()) throw ArgumentError("spectroscopy grids must be non-empty");
  const std::size_t points = f_q_grid.size() * f_drive_grid.size();
  if (points > options.max_points) {
    throw ResourceError("spectroscopy grid has " + std::to_string(points) + " points; budget is " +
                        std::to_string(options.max_points));
  }

  GridMap map;
  map.axis0 = f_q_grid;
  map.axis1 = f_drive_grid;
  map.values.assign(points, 0.0);
  std::vector<EvolveStats> per_point(points);
  const SparseOp hd = drive_hamiltonian(hc, drive.amplitude);
  const DensityState ground = DensityState::ground(hc);

  parallel_for(points, worker_count(options.workers), [&](std::size_t idx) {
    SystemParams p = sp;
    p.f_q = f_q_grid[idx / f_drive_grid.size()];
    const double fd = f_drive_grid[idx % f_drive_grid.size()];
    const SparseOp h = build_hamiltonian(p, hc, fd) + hd;
    const MasterEquation eq(h, collapse_operators(p, hc));
    map.values[idx] = measure_pe(evolve(ground, eq, drive.duration, options.evolve, &per_point[idx]));
  });
  if (options.stats != nullptr) {
    for (const auto& s : per_point) options.stats->merge(s);
  }
  return map;
}

}  // namespace qbar::sim
