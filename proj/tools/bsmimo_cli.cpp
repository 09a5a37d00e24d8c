#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "bsmimo/channel.hpp"
#include "bsmimo/error.hpp"
#include "bsmimo/evaluation.hpp"
#include "bsmimo/farfield.hpp"
#include "bsmimo/load_synthesis.hpp"
#include "bsmimo/network.hpp"
#include "bsmimo/scenario.hpp"

namespace fs = std::filesystem;
using namespace bsmimo;
using nlohmann::json;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  int threads = 1;
};

void write_text(const fs::path& p, const std::string& s) {
  fs::create_directories(p.parent_path().empty() ? fs::path(".") : p.parent_path());
  std::ofstream out(p, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::InvalidArgument, "cannot write " + p.string());
  out << s;
  std::cout << p.string() << '\n';
}

// "a:step:b" or "a,b,c"
std::vector<double> parse_grid(const std::string& spec) {
  std::vector<double> out;
  try {
    if (spec.find(':') != std::string::npos) {
      std::stringstream ss(spec);
      std::string a, st, b;
      std::getline(ss, a, ':');
      std::getline(ss, st, ':');
      std::getline(ss, b, ':');
      const double lo = std::stod(a), step = std::stod(st), hi = std::stod(b);
      require(step > 0 && hi >= lo, ErrorCode::Validation, "grid '" + spec + "' needs step > 0 and hi >= lo");
      const long n = std::lround(std::floor((hi - lo) / step + 1e-9)) + 1;
      for (long i = 0; i < n; ++i) out.push_back(lo + step * static_cast<double>(i));
    } else {
      std::stringstream ss(spec);
      std::string tok;
      while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
    }
  } catch (const std::logic_error&) {
    fail(ErrorCode::Validation, "cannot parse grid '" + spec + "'");
  }
  require(!out.empty(), ErrorCode::Validation, "empty grid '" + spec + "'");
  return out;
}

scenario::Mode parse_mode(const std::string& m) {
  if (m == "beamspace") return scenario::Mode::BeamSpace;
  if (m == "conventional") return scenario::Mode::Conventional;
  fail(ErrorCode::Validation, "--mode must be 'beamspace' or 'conventional'");
}

network::ScatteringMatrix3 amended(const network::ScatteringMatrix3& s, bool raw, double loss) {
  return raw ? s : network::amend_with_losses(s, loss, loss);
}

scenario::ScenarioConfig load_config_with_overrides(const Globals& g) {
  require(!g.config.empty(), ErrorCode::Validation, "--config is required");
  auto cfg = scenario::load_config(g.config);
  if (g.seed) cfg.seed = *g.seed;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Beam-space MIMO toolkit"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "Scenario config (JSON)");
  app.add_option("--seed", g.seed, "Override the master seed");
  app.add_option("--out-dir", g.out_dir, "Output directory")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  // Global flags are also accepted after the subcommand.
  auto add_globals = [&](CLI::App* sub) {
    sub->add_option("--config", g.config);
    sub->add_option("--seed", g.seed);
    sub->add_option("--out-dir", g.out_dir);
    sub->add_option("--threads", g.threads)->check(CLI::PositiveNumber);
  };

  // synth-loads
  auto* synth = app.add_subcommand("synth-loads", "Load schedule or free-parameter sweep as CSV");
  add_globals(synth);
  std::string s_path;
  int order = 4;
  std::optional<double> x1_free;
  std::string sweep_spec;
  double range_min = -210.0, range_max = -8.0, loss_ohm = 2.0;
  bool raw = false;
  synth->add_option("--s-matrix", s_path, "S-matrix JSON")->required();
  synth->add_option("--order", order, "PSK order")->capture_default_str();
  synth->add_option("--x1-free", x1_free, "Free parameter X1 at ratio -1 [ohm]");
  synth->add_option("--sweep", sweep_spec, "Free-parameter grid lo:step:hi (default -500:1:500)");
  synth->add_option("--range-min", range_min, "Tuning range minimum [ohm]")->capture_default_str();
  synth->add_option("--range-max", range_max, "Tuning range maximum [ohm]")->capture_default_str();
  synth->add_option("--loss-ohm", loss_ohm, "Series loss added to each passive port")->capture_default_str();
  synth->add_flag("--raw", raw, "Use the S-matrix without loss amendment");

  // antenna-report
  auto* report = app.add_subcommand("antenna-report", "Return loss, imbalance, orthogonality and EVM as JSON");
  add_globals(report);
  std::vector<std::string> pattern_paths;
  double report_x1 = -200.0;
  report->add_option("--s-matrix", s_path, "S-matrix JSON")->required();
  report->add_option("--patterns", pattern_paths, "State patterns for ratios -1, +1, +j, -j")
      ->required()
      ->expected(4)
      ->delimiter(',');
  report->add_option("--x1-free", report_x1, "Free parameter X1 [ohm]")->capture_default_str();
  report->add_option("--loss-ohm", loss_ohm, "Series loss used for synthesis")->capture_default_str();

  // simulate
  auto* sim = app.add_subcommand("simulate", "Frame-level link simulation runs as CSV");
  add_globals(sim);

  // analyze-dataset
  auto* analyze = app.add_subcommand("analyze-dataset", "Filter, average, normalize; correlation and ellipticity");
  add_globals(analyze);
  std::string input;
  double ser_threshold = 0.10;
  std::string mode = "beamspace";
  analyze->add_option("--input", input, "Ensemble file")->required();
  analyze->add_option("--ser-threshold", ser_threshold)->capture_default_str();
  analyze->add_option("--mode", mode, "beamspace or conventional")->capture_default_str();

  // sweep
  auto* sweep = app.add_subcommand("sweep", "MI, capacity and SER curves over an SNR grid as CSV");
  add_globals(sweep);
  std::string ensemble_path, generator = "rayleigh", snr_spec = "-10:5:30";
  int count = 400, mi_noise = 200;
  long long ser_trials = 20000;
  double k_factor = 0.0;
  sweep->add_option("--ensemble", ensemble_path, "Ensemble file (filtered, averaged, normalized first)");
  sweep->add_option("--generator", generator, "rayleigh or ricean")->capture_default_str();
  sweep->add_option("--k-factor", k_factor, "Ricean K (linear)")->capture_default_str();
  sweep->add_option("--count", count, "Generated channels")->check(CLI::PositiveNumber)->capture_default_str();
  sweep->add_option("--snr", snr_spec, "SNR grid, lo:step:hi or a,b,c [dB]")->capture_default_str();
  sweep->add_option("--mi-noise", mi_noise, "Noise samples per channel for MI")->check(CLI::PositiveNumber)
      ->capture_default_str();
  sweep->add_option("--ser-trials", ser_trials, "SER trials per SNR point")->check(CLI::PositiveNumber)
      ->capture_default_str();
  sweep->add_option("--ser-threshold", ser_threshold)->capture_default_str();
  sweep->add_option("--mode", mode, "beamspace or conventional")->capture_default_str();

  // run
  auto* run = app.add_subcommand("run", "Full scenario pipeline: summary.json plus CSV curves");
  add_globals(run);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  }

  try {
    const fs::path out_dir = g.out_dir;
    if (*synth) {
      const auto s = network::load_s_matrix(s_path);
      const auto sa = amended(s, raw, loss_ohm);
      std::vector<double> grid;
      if (!sweep_spec.empty())
        grid = parse_grid(sweep_spec);
      else if (x1_free)
        grid = {*x1_free};
      else
        grid = loads::default_sweep_grid();
      const auto points = loads::sweep_free_parameter(sa, order, grid, loads::TuningRange(range_min, range_max));
      std::ostringstream csv;
      loads::write_schedule_csv(csv, points);
      write_text(out_dir / "loads.csv", csv.str());
    } else if (*report) {
      const auto s = network::load_s_matrix(s_path);
      const auto sched = loads::build_schedule(amended(s, false, loss_ohm), 4, report_x1, s_path);
      std::vector<farfield::FarFieldPattern> pats;
      for (const auto& p : pattern_paths) pats.push_back(farfield::load_pattern(p));
      const cplx ratios[4] = {-1.0, 1.0, cplx(0, 1), cplx(0, -1)};
      const auto basis = farfield::basis_from_states(pats[1], pats[0]);
      std::vector<farfield::StatePattern> states;
      for (int k = 0; k < 4; ++k) states.push_back({ratios[k], pats[k]});
      const auto evm = farfield::evm_map(basis, states);
      const auto& grid = basis.b1.grid();
      json j;
      j["schema_version"] = scenario::kSchemaVersion;
      json rl = json::array();
      for (int k = 0; k < 4; ++k) {
        const auto* st = sched.find(ratios[k]);
        require(st != nullptr, ErrorCode::Validation, "schedule lacks a state");
        const cplx gam = network::input_reflection(s, network::LoadTermination(st->x1, st->x2, loss_ohm, loss_ohm));
        rl.push_back({{"re_xbar", ratios[k].real()},
                      {"im_xbar", ratios[k].imag()},
                      {"x1", st->x1},
                      {"x2", st->x2},
                      {"return_loss_db", -20.0 * std::log10(std::abs(gam))}});
      }
      j["states"] = rl;
      j["imbalance_db"] = farfield::imbalance_ratio_db(basis);
      j["orthogonality_residual"] = farfield::orthogonality_residual(basis);
      j["evm_cut_avg_db"] = {{"phi_0deg", farfield::evm_cut_average_db(grid, evm, 0)},
                             {"phi_90deg", farfield::evm_cut_average_db(grid, evm, grid.n_phi / 4)}};
      write_text(out_dir / "antenna_report.json", j.dump(2) + "\n");
    } else if (*sim) {
      const auto cfg = load_config_with_overrides(g);
      std::ostringstream csv;
      scenario::simulate_runs(cfg, csv, g.threads);
      write_text(out_dir / "simulate.csv", csv.str());
    } else if (*analyze) {
      const auto ens = channel::load_ensemble(input);
      const auto a = scenario::analyze_dataset(ens, ser_threshold, parse_mode(mode));
      json j = scenario::analysis_json(a);
      j["schema_version"] = scenario::kSchemaVersion;
      j["scenario"] = ens.meta().scenario;
      write_text(out_dir / "analysis.json", j.dump(2) + "\n");
      std::ostringstream ell;
      scenario::write_ellipticity_cdf_csv(ell, a.ellipticity);
      write_text(out_dir / "ellipticity_cdf.csv", ell.str());
      std::ostringstream corr;
      channel::write_correlation_magnitude(corr, channel::correlation_magnitude(a.correlation));
      write_text(out_dir / "correlation.csv", corr.str());
    } else if (*sweep) {
      std::uint64_t seed = g.seed.value_or(1);
      std::vector<Mat2> hs;
      if (!ensemble_path.empty()) {
        hs = scenario::analyze_dataset(channel::load_ensemble(ensemble_path), ser_threshold, parse_mode(mode))
                 .normalized;
      } else {
        Mat2 los;
        los << 1, 1, 1, 1;
        for (int i = 0; i < count; ++i) {
          const auto si = derive_seed(seed, 1, static_cast<std::uint64_t>(i));
          if (generator == "rayleigh")
            hs.push_back(channel::iid_rayleigh(si));
          else if (generator == "ricean")
            hs.push_back(channel::ricean(k_factor, los, si));
          else
            fail(ErrorCode::Validation, "--generator must be 'rayleigh' or 'ricean'");
        }
        hs = channel::normalize_ensemble(hs);
      }
      scenario::EvaluationParams ev;
      ev.snr_db = parse_grid(snr_spec);
      ev.mi_noise_samples = mi_noise;
      ev.ser_trials = ser_trials;
      const auto curves = scenario::compute_curves(hs, ev, seed, g.threads);
      std::ostringstream csv;
      scenario::write_curves_csv(csv, curves);
      write_text(out_dir / "sweep.csv", csv.str());
    } else if (*run) {
      const auto cfg = load_config_with_overrides(g);
      const auto art = scenario::run(cfg, out_dir, g.threads);
      for (const auto& f : art.files) std::cout << f.string() << '\n';
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return is_input_error(e.code()) ? kExitValidation : kExitNumerical;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error [filesystem]: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return 0;
}
