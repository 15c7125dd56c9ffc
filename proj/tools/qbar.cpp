// Command-line front end: trace synthesis and fitting, and the qubit/mode
// simulations. Errors go to stderr as {"error": {"code", "message"}}.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qbar/bvd_model.hpp"
#include "qbar/errors.hpp"
#include "qbar/grid.hpp"
#include "qbar/io/config.hpp"
#include "qbar/io/csv.hpp"
#include "qbar/io/output.hpp"
#include "qbar/io/svg.hpp"
#include "qbar/io/synth.hpp"
#include "qbar/io/touchstone.hpp"
#include "qbar/protocols.hpp"
#include "qbar/quantum_sim.hpp"
#include "qbar/resonator_fit.hpp"

namespace fs = std::filesystem;
using namespace qbar;
using io::json;
using io::json_array;
using io::json_number;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "qbar_out";
  std::string format = "csv,json";
};

struct Formats {
  bool json = false;
  bool svg = false;
};

Formats parse_formats(const std::string& list) {
  Formats f;
  std::stringstream ss(list);
  std::string item;
  bool any = false;
  while (std::getline(ss, item, ',')) {
    if (item == "csv") {
      // always written
    } else if (item == "json") {
      f.json = true;
    } else if (item == "svg") {
      f.svg = true;
    } else {
      throw ConfigError("--format: unknown format '" + item + "' (expected csv, json, svg)");
    }
    any = true;
  }
  if (!any) throw ConfigError("--format: empty list");
  return f;
}

io::Config load_config(const Common& c) {
  io::Config cfg;
  if (!c.config_path.empty()) cfg.merge_text(io::read_file(c.config_path), c.config_path);
  for (const auto& s : c.sets) cfg.set(std::string_view(s));
  if (c.seed) cfg.set("seed", std::to_string(*c.seed));
  return cfg;
}

json config_json(const io::Config& cfg) {
  json j = json::object();
  for (const auto& [k, v] : cfg.entries()) j[k] = v;
  return j;
}

json resonance_json(const bvd::ResonanceParams& rp) {
  return {{"f0", json_number(rp.f0)}, {"Qi", json_number(rp.Qi)}, {"Qc", json_number(rp.Qc)},
          {"phi", json_number(rp.phi)}};
}

json stats_json(const sim::EvolveStats& s) {
  return {{"steps", s.steps},
          {"dt", json_number(s.dt)},
          {"trace_drift", json_number(s.trace_drift)},
          {"hermiticity_defect", json_number(s.hermiticity_defect)},
          {"min_eigenvalue", json_number(s.min_eigenvalue)}};
}

io::Table one_row(const std::vector<std::pair<std::string, double>>& cells) {
  io::Table t;
  std::vector<double> row;
  for (const auto& [name, v] : cells) {
    t.columns.push_back(name);
    row.push_back(v);
  }
  t.rows.push_back(std::move(row));
  return t;
}

std::vector<double> magnitude_db(const std::vector<bvd::cplx>& v) {
  std::vector<double> out;
  for (auto z : v) out.push_back(20.0 * std::log10(std::abs(z)));
  return out;
}

std::vector<double> phase(const std::vector<bvd::cplx>& v) {
  std::vector<double> out;
  for (auto z : v) out.push_back(std::arg(z));
  return out;
}

std::vector<double> real_parts(const std::vector<bvd::cplx>& v) {
  std::vector<double> out;
  for (auto z : v) out.push_back(z.real());
  return out;
}

std::vector<double> imag_parts(const std::vector<bvd::cplx>& v) {
  std::vector<double> out;
  for (auto z : v) out.push_back(z.imag());
  return out;
}

std::vector<io::LinePlot> trace_plots(const std::vector<double>& f, const std::vector<bvd::cplx>& data,
                                      const std::vector<bvd::cplx>* model) {
  io::LinePlot mag{"Transmission magnitude", "frequency (Hz)", "|S21| (dB)", {}, false};
  io::LinePlot ph{"Transmission phase", "frequency (Hz)", "arg S21 (rad)", {}, false};
  io::LinePlot iq{"Complex plane", "Re S21", "Im S21", {}, true};
  mag.series.push_back({"data", f, magnitude_db(data), model != nullptr});
  ph.series.push_back({"data", f, phase(data), model != nullptr});
  iq.series.push_back({"data", real_parts(data), imag_parts(data), model != nullptr});
  if (model) {
    mag.series.push_back({"model", f, magnitude_db(*model), false});
    ph.series.push_back({"model", f, phase(*model), false});
    iq.series.push_back({"model", real_parts(*model), imag_parts(*model), false});
  }
  return {mag, ph, iq};
}

// ---------------------------------------------------------------- synth

void run_synth(const io::Config& cfg, const Formats& fmt, io::StagedOutput& out) {
  const auto model = io::synth_model(cfg);
  const auto grid = io::synth_grid(cfg);
  io::SynthOptions opt;
  opt.baseline = io::baseline_model(cfg);
  opt.noise_sigma = cfg.number("synth.noise_sigma");
  if (!(opt.noise_sigma >= 0.0) || std::isinf(opt.noise_sigma)) throw ConfigError("synth.noise_sigma must be >= 0");
  opt.seed = opt.noise_sigma > 0.0 ? cfg.seed() : (cfg.has("seed") ? cfg.seed() : 0);
  auto trace = io::synth_trace(model, grid, opt);
  trace.comments = {"qbar synth", "model " + cfg.text("synth.model")};

  out.add("trace.s2p", io::emit_touchstone(trace));
  out.add("trace.csv", io::emit_csv(io::trace_table(trace)));
  if (fmt.json) {
    const auto rp = io::resonance_params(cfg);
    json j = {{"command", "synth"},
              {"resonance", resonance_json(rp)},
              {"points", grid.size()},
              {"f_min", json_number(grid.front())},
              {"f_max", json_number(grid.back())},
              {"noise_sigma", json_number(opt.noise_sigma)},
              {"seed", opt.seed},
              {"config", config_json(cfg)}};
    if (const auto* b = std::get_if<bvd::BvdParams>(&model)) {
      j["bvd"] = {{"R", json_number(b->R)}, {"L", json_number(b->L)}, {"C", json_number(b->C)},
                  {"C0", json_number(b->C0)}};
    }
    out.add("synth.json", io::dump_json(j));
  }
  if (fmt.svg) out.add("synth.svg", io::render_svg(trace_plots(trace.freqs, trace.values, nullptr)));
}

// ---------------------------------------------------------------- fit

fit::ComplexTrace load_trace(const std::string& path) {
  const std::string text = io::read_file(path);
  std::string ext = fs::path(path).extension().string();
  for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".csv") {
    auto t = io::trace_from_table(io::parse_csv(text));
    t.source = path;
    return t;
  }
  auto t = io::parse_touchstone(text, io::ports_from_filename(path));
  t.source = path;
  return t;
}

void run_fit(const io::Config& cfg, const Formats& fmt, const std::string& input, io::StagedOutput& out) {
  const auto trace = load_trace(input);
  if (trace.is_reflection) throw DataError("one-port reflection data cannot be fit with the notch transmission model");
  fit::TraceFitOptions opt;
  opt.edge_fraction = cfg.number("fit.edge_fraction");
  const std::string w = cfg.text("fit.weighting");
  if (w == "propagated") {
    opt.fit.weighting = fit::Weighting::propagated;
  } else if (w == "uniform") {
    opt.fit.weighting = fit::Weighting::uniform;
  } else {
    throw ConfigError("fit.weighting: expected propagated or uniform, got '" + w + "'");
  }
  const auto result = fit::fit_trace(trace, opt);
  const auto report = fit::fit_report(result);
  const auto& p = report.params;
  const auto& u = report.uncertainties;
  const auto& model = report.model_raw.empty() ? report.model_normalized : report.model_raw;

  out.add("fit_params.csv", io::emit_csv(one_row({{"f0", p.f0},
                                                  {"Qi", p.Qi},
                                                  {"Qc", p.Qc},
                                                  {"phi", p.phi},
                                                  {"sigma_f0", u[0]},
                                                  {"sigma_Qi", u[1]},
                                                  {"sigma_Qc", u[2]},
                                                  {"sigma_phi", u[3]},
                                                  {"residual_rms", report.residual_rms}})));
  io::Table curve;
  curve.columns = {"freq_hz", "data_re", "data_im", "model_re", "model_im"};
  for (std::size_t i = 0; i < trace.size(); ++i) {
    curve.rows.push_back(
        {trace.freqs[i], trace.values[i].real(), trace.values[i].imag(), model[i].real(), model[i].imag()});
  }
  out.add("fit_model.csv", io::emit_csv(curve));
  if (fmt.json) {
    json j = {{"command", "fit"},
              {"input", fs::path(input).filename().string()},
              {"params", resonance_json(p)},
              {"uncertainties",
               {{"f0", json_number(u[0])}, {"Qi", json_number(u[1])}, {"Qc", json_number(u[2])},
                {"phi", json_number(u[3])}}},
              {"residual_rms", json_number(report.residual_rms)},
              {"iterations", report.iterations},
              {"converged", report.converged},
              {"stop_reason", report.stop_reason},
              {"window",
               {{"f_min", json_number(report.window.f_min)},
                {"f_max", json_number(report.window.f_max)},
                {"points", report.window.num_points},
                {"edge_fraction", json_number(report.window.edge_fraction)}}},
              {"comments", trace.comments}};
    if (report.baseline) {
      const auto& b = *report.baseline;
      j["baseline"] = {{"amplitude", json_number(b.amplitude_offset)},
                       {"slope", json_number(b.amplitude_slope)},
                       {"phase", json_number(b.phase_offset)},
                       {"delay", json_number(b.group_delay)},
                       {"reference_freq", json_number(b.reference_freq)}};
    }
    out.add("fit.json", io::dump_json(j));
  }
  if (fmt.svg) out.add("fit.svg", io::render_svg(trace_plots(trace.freqs, trace.values, &model)));
}

// ---------------------------------------------------------------- simulations

std::vector<double> grid_from(const io::Config& cfg, const std::string& prefix, const std::string& start,
                              const std::string& stop, const std::string& points) {
  const double a = cfg.number(prefix + start);
  const double b = cfg.number(prefix + stop);
  const std::size_t n = cfg.count(prefix + points);
  if (n < 1 || !(b >= a) || !std::isfinite(a) || !std::isfinite(b)) {
    throw ConfigError(prefix + "*: grid needs start <= stop and at least one point");
  }
  return linspace(a, b, n);
}

sim::SystemParams spectroscopy_system(const io::Config& cfg) {
  auto sp = io::system_params(cfg);
  sp.g = cfg.number("spectroscopy.g");
  sp.validate();
  return sp;
}

void run_sim_eigen(const io::Config& cfg, const Formats& fmt, io::StagedOutput& out) {
  const auto sp = spectroscopy_system(cfg);
  const auto grid = grid_from(cfg, "eigen.", "fq_start", "fq_stop", "fq_points");
  io::Table t;
  t.columns = {"f_q_hz", "branch_0_hz", "branch_1_hz", "branch_2_hz"};
  std::vector<std::vector<double>> branches(3);
  for (double fq : grid) {
    auto p = sp;
    p.f_q = fq;
    const auto ev = sim::single_excitation_eigenfrequencies(p);
    t.rows.push_back({fq, ev[0], ev[1], ev[2]});
    for (int k = 0; k < 3; ++k) branches[k].push_back(ev[k]);
  }
  const auto gaps = grid.size() >= 3 ? sim::minimum_branch_gaps(sp, grid) : std::array<sim::BranchGap, 2>{};
  const auto iso = grid.size() >= 3 ? sim::isolated_crossing_gaps(sp, grid) : std::array<sim::BranchGap, 2>{};
  out.add("eigen.csv", io::emit_csv(t));
  out.add("eigen_gaps.csv", io::emit_csv(one_row({{"gap_01_hz", gaps[0].gap},
                                                  {"gap_01_f_q_hz", gaps[0].f_q},
                                                  {"gap_12_hz", gaps[1].gap},
                                                  {"gap_12_f_q_hz", gaps[1].f_q},
                                                  {"isolated_primary_gap_hz", iso[0].gap},
                                                  {"isolated_spur_gap_hz", iso[1].gap}})));
  if (fmt.json) {
    json j = {{"command", "sim-eigen"},
              {"g", json_number(sp.g)},
              {"g_spur", json_number(sp.g_spur)},
              {"minimum_gaps",
               json::array({{{"branches", "0-1"}, {"gap", json_number(gaps[0].gap)}, {"f_q", json_number(gaps[0].f_q)}},
                            {{"branches", "1-2"}, {"gap", json_number(gaps[1].gap)}, {"f_q", json_number(gaps[1].f_q)}}})},
              {"isolated_crossings",
               {{"primary", json_number(iso[0].gap)}, {"spurious", json_number(iso[1].gap)}}},
              {"config", config_json(cfg)}};
    out.add("eigen.json", io::dump_json(j));
  }
  if (fmt.svg) {
    io::LinePlot plot{"Single-excitation branches", "qubit frequency (Hz)", "eigenfrequency (Hz)", {}, false};
    for (int k = 0; k < 3; ++k) plot.series.push_back({"branch " + std::to_string(k), grid, branches[k], false});
    out.add("eigen.svg", io::render_svg(std::vector<io::LinePlot>{plot}));
  }
}

void run_sim_spectroscopy(const io::Config& cfg, const Formats& fmt, io::StagedOutput& out) {
  const auto sp = spectroscopy_system(cfg);
  const auto hc = io::hilbert_config(cfg);
  const auto drive = io::drive_params(cfg);
  const auto fq = grid_from(cfg, "spectroscopy.", "fq_start", "fq_stop", "fq_points");
  const auto fd = grid_from(cfg, "spectroscopy.", "drive_start", "drive_stop", "drive_points");
  sim::EvolveStats stats;
  sim::ScanOptions opt;
  opt.evolve = io::evolve_options(cfg);
  opt.stats = &stats;
  const GridMap map = sim::spectroscopy_scan(sp, hc, drive, fq, fd, opt);
  out.add("spectroscopy.csv", io::emit_csv(io::grid_table(map, "f_q_hz", "f_drive_hz", "pe")));
  if (fmt.json) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < map.values.size(); ++k) {
      if (map.values[k] > map.values[best]) best = k;
    }
    json j = {{"command", "sim-spectroscopy"},
              {"f_q_points", fq.size()},
              {"drive_points", fd.size()},
              {"max_pe",
               {{"pe", json_number(map.values[best])},
                {"f_q", json_number(map.axis0[best / fd.size()])},
                {"f_drive", json_number(map.axis1[best % fd.size()])}}},
              {"stats", stats_json(stats)},
              {"config", config_json(cfg)}};
    out.add("spectroscopy.json", io::dump_json(j));
  }
  if (fmt.svg) {
    out.add("spectroscopy.svg",
            io::render_svg(io::Heatmap{"Qubit spectroscopy", "qubit frequency (Hz)", "drive frequency (Hz)", "P_e", map}));
  }
}

void run_sim_t1(const io::Config& cfg, const Formats& fmt, io::StagedOutput& out) {
  const auto sp = io::system_params(cfg);
  const auto hc = io::hilbert_config(cfg);
  const double tmax = cfg.number("t1.delay_max");
  const std::size_t n = cfg.count("t1.points");
  if (!(tmax > 0.0) || std::isinf(tmax) || n < 2) throw ConfigError("t1: need delay_max > 0 and at least 2 points");
  proto::ScanOptions opt;
  opt.protocol.evolve = io::evolve_options(cfg);
  if (cfg.has("t1.pi_pulse_amplitude")) opt.pi_pulse_amplitude = cfg.number("t1.pi_pulse_amplitude");
  const auto scan = proto::phonon_t1_scan(sp, hc, linspace(0.0, tmax, n), opt);
  const auto fit = proto::fit_exponential(scan.delays, scan.pe);
  const double q = fit.degenerate ? HUGE_VAL : proto::phonon_q_from_t1(sp.f_r, fit.T1);

  io::Table t;
  t.columns = {"delay_s", "pe"};
  for (std::size_t i = 0; i < scan.delays.size(); ++i) t.rows.push_back({scan.delays[i], scan.pe[i]});
  out.add("t1.csv", io::emit_csv(t));
  out.add("t1_fit.csv", io::emit_csv(one_row({{"T1_s", fit.T1},
                                              {"amplitude", fit.amplitude},
                                              {"offset", fit.offset},
                                              {"sigma_T1_s", fit.uncertainties[0]},
                                              {"Q", q},
                                              {"swap_time_s", scan.swap_time},
                                              {"degenerate", fit.degenerate ? 1.0 : 0.0}})));
  if (fmt.json) {
    json j = {{"command", "sim-t1"},
              {"swap_time", json_number(scan.swap_time)},
              {"fit",
               {{"T1", json_number(fit.T1)},
                {"amplitude", json_number(fit.amplitude)},
                {"offset", json_number(fit.offset)},
                {"uncertainties", json_array({fit.uncertainties.begin(), fit.uncertainties.end()})},
                {"residual_rms", json_number(fit.residual_rms)},
                {"converged", fit.converged},
                {"degenerate", fit.degenerate}}},
              {"Q", json_number(q)},
              {"stats", stats_json(scan.stats)},
              {"config", config_json(cfg)}};
    out.add("t1.json", io::dump_json(j));
  }
  if (fmt.svg) {
    io::LinePlot plot{"Phonon lifetime", "delay (s)", "P_e", {}, false};
    plot.series.push_back({"simulation", scan.delays, scan.pe, true});
    if (!fit.degenerate) {
      std::vector<double> model;
      for (double d : scan.delays) model.push_back(fit.offset + fit.amplitude * std::exp(-d / fit.T1));
      plot.series.push_back({"fit", scan.delays, model, false});
    }
    out.add("t1.svg", io::render_svg(std::vector<io::LinePlot>{plot}));
  }
}

void run_sim_chevron(const io::Config& cfg, const Formats& fmt, io::StagedOutput& out) {
  const auto sp = io::system_params(cfg);
  const auto hc = io::hilbert_config(cfg);
  const double span = cfg.number("chevron.detuning_span");
  const std::size_t nf = cfg.count("chevron.fq_points");
  const double tmax = cfg.number("chevron.t_max");
  const std::size_t nt = cfg.count("chevron.t_points");
  if (!(span >= 0.0) || !(tmax > 0.0) || std::isinf(tmax) || nf < 1 || nt < 2) {
    throw ConfigError("chevron: need detuning_span >= 0, t_max > 0, fq_points >= 1, t_points >= 2");
  }
  proto::ScanOptions opt;
  opt.protocol.evolve = io::evolve_options(cfg);
  opt.protocol.coupler_extra_qubit_decay = cfg.number("chevron.extra_qubit_decay");
  const auto fq = linspace(sp.f_r - span, sp.f_r + span, nf);
  const auto times = linspace(0.0, tmax, nt);
  const auto result = proto::rabi_chevron(sp, hc, fq, times, opt);
  const GridMap& map = result.map;
  out.add("chevron.csv", io::emit_csv(io::grid_table(map, "f_q_hz", "time_s", "pe")));

  io::Table ft;
  ft.columns = {"f_q_hz", "frequency_hz", "visibility", "decay_time_s"};
  json cols = json::array();
  for (std::size_t i = 0; i < fq.size(); ++i) {
    std::vector<double> col(map.values.begin() + static_cast<std::ptrdiff_t>(i * nt),
                            map.values.begin() + static_cast<std::ptrdiff_t>((i + 1) * nt));
    double f = std::nan(""), v = std::nan(""), tau = std::nan("");
    try {
      const auto of = proto::fit_oscillation(times, col, true);
      f = of.frequency;
      v = of.visibility;
      tau = of.decay_time;
    } catch (const qbar::Error&) {
      // column without a resolvable oscillation
    }
    ft.rows.push_back({fq[i], f, v, tau});
    cols.push_back({{"f_q", json_number(fq[i])},
                    {"frequency", json_number(f)},
                    {"visibility", json_number(v)},
                    {"decay_time", json_number(tau)}});
  }
  out.add("chevron_fit.csv", io::emit_csv(ft));
  if (fmt.json) {
    json j = {{"command", "sim-chevron"},
              {"f_q_points", fq.size()},
              {"time_points", times.size()},
              {"columns", cols},
              {"stats", stats_json(result.stats)},
              {"config", config_json(cfg)}};
    out.add("chevron.json", io::dump_json(j));
  }
  if (fmt.svg) {
    out.add("chevron.svg",
            io::render_svg(io::Heatmap{"Qubit-mode swaps", "qubit frequency (Hz)", "interaction time (s)", "P_e", map}));
  }
}

// ---------------------------------------------------------------- report

void run_report(const Formats& fmt, const std::string& dir, io::StagedOutput& out) {
  if (!fs::is_directory(dir)) throw ResourceError("not a directory: '" + dir + "'");
  json sections = json::object();
  for (const char* name : {"synth", "fit", "eigen", "spectroscopy", "t1", "chevron"}) {
    const fs::path p = fs::path(dir) / (std::string(name) + ".json");
    if (!fs::exists(p)) continue;
    try {
      sections[name] = json::parse(io::read_file(p));
    } catch (const json::parse_error& e) {
      throw DataError(p.string() + ": " + e.what());
    }
  }
  struct GridSource {
    const char* name;
    const char* x;
    const char* y;
  };
  json grids = json::object();
  for (const GridSource g : {GridSource{"spectroscopy", "qubit frequency (Hz)", "drive frequency (Hz)"},
                             GridSource{"chevron", "qubit frequency (Hz)", "interaction time (s)"}}) {
    const fs::path p = fs::path(dir) / (std::string(g.name) + ".csv");
    if (!fs::exists(p)) continue;
    const GridMap map = io::grid_from_table(io::parse_csv(io::read_file(p)));
    double lo = HUGE_VAL, hi = -HUGE_VAL;
    for (double v : map.values) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    grids[g.name] = {{"axis0_points", map.axis0.size()},
                     {"axis1_points", map.axis1.size()},
                     {"min", json_number(lo)},
                     {"max", json_number(hi)}};
    if (fmt.svg) out.add(std::string("report_") + g.name + ".svg", io::render_svg(io::Heatmap{g.name, g.x, g.y, "P_e", map}));
  }
  const fs::path fit_csv = fs::path(dir) / "fit_model.csv";
  if (fmt.svg && fs::exists(fit_csv)) {
    const auto t = io::parse_csv(io::read_file(fit_csv));
    std::vector<double> f;
    std::vector<bvd::cplx> data, model;
    for (const auto& r : t.rows) {
      f.push_back(r[t.column("freq_hz")]);
      data.emplace_back(r[t.column("data_re")], r[t.column("data_im")]);
      model.emplace_back(r[t.column("model_re")], r[t.column("model_im")]);
    }
    out.add("report_fit.svg", io::render_svg(trace_plots(f, data, &model)));
  }
  if (sections.empty() && grids.empty()) throw DataError("no qbar outputs found in '" + dir + "'");
  io::Table idx;
  idx.columns = {"sections", "grids"};
  idx.rows.push_back({static_cast<double>(sections.size()), static_cast<double>(grids.size())});
  out.add("report.csv", io::emit_csv(idx));
  out.add("report.json", io::dump_json({{"command", "report"}, {"sections", sections}, {"grids", grids}}));
}

std::string config_help() {
  std::string s = "Configuration keys (--config FILE with 'key = value' lines, or --set key=value):\n";
  for (const auto& k : io::config_schema()) {
    std::string line = "  " + k.name;
    line.resize(std::max<std::size_t>(line.size() + 1, 30), ' ');
    line += (k.default_value.empty() ? std::string("(unset)") : k.default_value);
    line.resize(std::max<std::size_t>(line.size() + 1, 44), ' ');
    line += "[" + std::string(io::provenance_name(k.provenance)) + "] " + k.help;
    s += line + "\n";
  }
  s += "Provenance: reported = value reported for the measured device; derived = follows from reported values; "
       "chosen = numerical or presentation choice.\n";
  s += "Environment: QBAR_WORKERS sets the number of worker threads for scans.";
  return s;
}

void print_error(const std::string& code, const std::string& message) {
  std::cerr << json({{"error", {{"code", code}, {"message", message}}}}).dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qbar: resonator trace fitting and qubit/mechanical-mode simulation"};
  app.require_subcommand(1);
  app.footer(config_help());

  Common common;
  std::string fit_input;
  std::string report_dir;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "configuration file")->check(CLI::ExistingFile);
    sub->add_option("--set", common.sets, "override one key (key=value); repeatable");
    sub->add_option("--seed", common.seed, "noise seed");
    sub->add_option("--out-dir", common.out_dir, "output directory")->capture_default_str();
    sub->add_option("--format", common.format, "comma list of csv, json, svg (CSV is always written)")
        ->capture_default_str();
    sub->footer(config_help());
  };

  auto* synth = app.add_subcommand("synth", "generate a synthetic transmission trace");
  auto* fitc = app.add_subcommand("fit", "fit a transmission trace (.s2p, .s1p or .csv)");
  fitc->add_option("input", fit_input, "trace file")->required();
  auto* eigen = app.add_subcommand("sim-eigen", "single-excitation branches versus qubit frequency");
  auto* spec = app.add_subcommand("sim-spectroscopy", "qubit spectroscopy map");
  auto* t1 = app.add_subcommand("sim-t1", "swap-based phonon lifetime measurement");
  auto* chev = app.add_subcommand("sim-chevron", "qubit-mode Rabi swap map");
  auto* report = app.add_subcommand("report", "summarize and re-plot outputs found in a directory");
  report->add_option("dir", report_dir, "directory with qbar outputs")->required();
  for (auto* s : {synth, fitc, eigen, spec, t1, chev, report}) add_common(s);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage_error", e.what());
    return 2;
  }

  try {
    const Formats fmt = parse_formats(common.format);
    const io::Config cfg = load_config(common);
    io::StagedOutput out;
    if (synth->parsed()) {
      run_synth(cfg, fmt, out);
    } else if (fitc->parsed()) {
      run_fit(cfg, fmt, fit_input, out);
    } else if (eigen->parsed()) {
      run_sim_eigen(cfg, fmt, out);
    } else if (spec->parsed()) {
      run_sim_spectroscopy(cfg, fmt, out);
    } else if (t1->parsed()) {
      run_sim_t1(cfg, fmt, out);
    } else if (chev->parsed()) {
      run_sim_chevron(cfg, fmt, out);
    } else if (report->parsed()) {
      run_report(fmt, report_dir, out);
    }
    for (const auto& p : out.commit(common.out_dir)) std::cout << p.string() << "\n";
    return 0;
  } catch (const qbar::Error& e) {
    print_error(e.code(), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("internal_error", e.what());
    return 3;
  }
}
