#pragma once

// Qubit coupled to two harmonic modes: rotating-frame Jaynes-Cummings
// Hamiltonian, zero-temperature Lindblad evolution and single-excitation
// spectra. Frequencies are in Hz; operators are in rad/s.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <array>
#include <complex>
#include <cstddef>
#include <vector>

#include "qbar/grid.hpp"

namespace qbar::sim {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using SparseOp = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;

struct SystemParams {
  double f_q = 4.86e9;
  double f_r = 4.86e9;
  double f_spur = 4.87e9;
  double g = 5.6e6;         // half splitting with the primary mode
  double g_spur = 1.75e6;   // half splitting with the spurious mode
  double T1_qb = 10e-6;
  double T2_qb = 1e-6;
  double T1_r = 178e-9;
  double T1_spur = 70e-9;

  // Times may be +infinity (channel off).
  void validate() const;

  // Coupler setting of the spectroscopy map (2g = 9.6 MHz).
  static SystemParams spectroscopy_preset();
};

struct HilbertConfig {
  std::size_t fock_dim_primary = 3;
  std::size_t fock_dim_spur = 3;

  static constexpr std::size_t kMaxDimension = 128;

  void validate() const;  // ConfigError
  std::size_t dimension() const { return 2 * fock_dim_primary * fock_dim_spur; }
  std::size_t index(std::size_t qubit, std::size_t n1, std::size_t n2) const {
    return (qubit * fock_dim_primary + n1) * fock_dim_spur + n2;
  }
};

struct DensityState {
  Matrix matrix;
  HilbertConfig dims;

  static DensityState ground(const HilbertConfig& hc);
  // Pure product state |qubit, n1, n2>.
  static DensityState basis(const HilbertConfig& hc, std::size_t qubit, std::size_t n1, std::size_t n2);

  double trace() const;
  double hermiticity_defect() const;  // max |rho - rho^dagger|
  double min_eigenvalue() const;
  // Throws DomainError when an invariant of a physical state is violated.
  void validate() const;
};

struct DriveParams {
  double amplitude = 0.1e6;  // Rabi rate, Hz
  double frequency = 4.86e9;
  double duration = 1e-6;

  void validate() const;
};

// Basis operators on the full space.
SparseOp qubit_lowering(const HilbertConfig& hc);
SparseOp primary_lowering(const HilbertConfig& hc);
SparseOp spur_lowering(const HilbertConfig& hc);
SparseOp qubit_excited_projector(const HilbertConfig& hc);
SparseOp excitation_number(const HilbertConfig& hc);

// 2 pi [(f_q - F) s+s- + (f_r - F) a1+a1 + (f_spur - F) a2+a2
//       + g (s+ a1 + s- a1+) + g_spur (s+ a2 + s- a2+)].
SparseOp build_hamiltonian(const SystemParams& sp, const HilbertConfig& hc, double frame_freq);

// 2 pi (amplitude / 2)(s+ + s-): a resonant drive in its own rotating frame.
SparseOp drive_hamiltonian(const HilbertConfig& hc, double amplitude);

// Jump operators with the rate folded in (sqrt(gamma) L). Pure dephasing is
// sqrt(2 gamma_phi) |e><e|. extra_qubit_decay adds to 1/T1_qb.
std::vector<SparseOp> collapse_operators(const SystemParams& sp, const HilbertConfig& hc,
                                         double extra_qubit_decay = 0.0);

// drho/dt = -i[H, rho] + sum_k (L rho L+ - {L+L, rho}/2), integrated with
// fixed-step classical Runge-Kutta. Holds scratch buffers, so one instance
// must not be stepped from several threads at once.
class MasterEquation {
 public:
  MasterEquation(const SparseOp& hamiltonian, const std::vector<SparseOp>& collapse);

  void derivative(const Matrix& rho, Matrix& out) const;
  // One RK4 step followed by Hermitian re-symmetrization.
  void step(Matrix& rho, double dt) const;
  // Default step: min(1 ns, c / omega_max) with omega_max bounding the
  // generator spectrum.
  double default_step() const;
  std::size_t dimension() const { return static_cast<std::size_t>(dim_); }

 private:
  // Jump operator with at most one entry per row: (L rho L+)_ij =
  // coef_i conj(coef_j) rho(source_i, source_j).
  struct MonomialJump {
    std::vector<int> source;  // -1 for an empty row
    std::vector<cplx> coef;
  };

  int dim_ = 0;
  SparseOp h_eff_;  // H - (i/2) sum L+L
  std::vector<int> h_ptr_, h_col_;
  std::vector<cplx> h_val_;
  std::vector<MonomialJump> monomial_;
  std::vector<SparseOp> general_;
  double omega_max_ = 0.0;
  mutable Matrix k1_, k2_, k3_, k4_, tmp_, y_, z_;
};

struct EvolveOptions {
  double dt = 0.0;                 // 0: MasterEquation::default_step()
  double step_scale = 1.0;         // multiplies the step, explicit or default
  std::size_t check_interval = 200;  // steps between eigenvalue checks
};

struct EvolveStats {
  std::size_t steps = 0;
  double dt = 0.0;
  double trace_drift = 0.0;         // |tr(rho_end) - tr(rho_start)|
  double hermiticity_defect = 0.0;  // worst value seen after a step
  double min_eigenvalue = 1.0;      // worst value seen at checks and at the end

  void merge(const EvolveStats& other);
};

// Evolves rho for time t with n = ceil(t / dt) equal steps. Throws
// InstabilityError when an eigenvalue falls below -1e-6.
DensityState evolve(const DensityState& rho, const MasterEquation& eq, double t, const EvolveOptions& options = {},
                    EvolveStats* stats = nullptr);

DensityState evolve(const DensityState& rho, const SparseOp& hamiltonian, const SystemParams& sp, double t,
                    const EvolveOptions& options = {}, EvolveStats* stats = nullptr);

// Eigenvalues of [[f_q, g, g_spur], [g, f_r, 0], [g_spur, 0, f_spur]], ascending.
std::array<double, 3> single_excitation_eigenfrequencies(const SystemParams& sp);

struct BranchGap {
  double gap = 0.0;  // Hz
  double f_q = 0.0;  // qubit frequency at the minimum
};

// Minimum over f_q of ev[1] - ev[0] and ev[2] - ev[1], located on the grid
// (ascending, >= 3 points) and refined by golden-section search between the
// neighbouring grid points.
std::array<BranchGap, 2> minimum_branch_gaps(const SystemParams& sp, const std::vector<double>& f_q_grid);

// Minimum gap of each crossing with the other mode decoupled and moved
// 1 GHz away: {primary, spurious}.
std::array<BranchGap, 2> isolated_crossing_gaps(const SystemParams& sp, const std::vector<double>& f_q_grid);

// tr(rho |e><e|), clamped to [0, 1].
double measure_pe(const DensityState& rho);

struct ScanOptions {
  EvolveOptions evolve;
  std::size_t workers = 0;         // 0: QBAR_WORKERS or hardware concurrency
  std::size_t max_points = 40000;  // ResourceError above this
  EvolveStats* stats = nullptr;    // merged over all points when set
};

// P_e after driving the qubit from the ground state. axis0 = f_q grid,
// axis1 = drive frequency grid.
GridMap spectroscopy_scan(const SystemParams& sp, const HilbertConfig& hc, const DriveParams& drive,
                          const std::vector<double>& f_q_grid, const std::vector<double>& f_drive_grid,
                          const ScanOptions& options = {});

}  // namespace qbar::sim
