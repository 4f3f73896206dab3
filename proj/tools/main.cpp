// Command-line front end: characterize, train, fit, simulate, compare,
// decompose. See README.md for usage examples.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sigsim/engine.hpp"
#include "sigsim/errors.hpp"
#include "sigsim/fit.hpp"
#include "sigsim/netlist.hpp"
#include "sigsim/refmodel.hpp"
#include "sigsim/sampled.hpp"
#include "sigsim/trace.hpp"
#include "sigsim/training.hpp"
#include "sigsim/transfer.hpp"
#include "sigsim/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sigsim;

namespace {

class PhaseTimer {
 public:
  void start(const std::string& phase) {
    finish();
    current_ = phase;
    begin_ = std::chrono::steady_clock::now();
  }
  void finish() {
    if (current_.empty()) return;
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - begin_).count();
    seconds_[current_] += s;
    current_.clear();
  }
  json to_json() {
    finish();
    json j = json::object();
    for (const auto& [k, v] : seconds_) j[k] = v;
    return j;
  }

 private:
  std::map<std::string, double> seconds_;
  std::string current_;
  std::chrono::steady_clock::time_point begin_;
};

struct Manifest {
  std::string subcommand;
  uint64_t config_hash = 0;
  json seeds = json::object();
  json model_hashes = json::object();
  json warnings = json::object();
  std::vector<std::string> outputs;
  PhaseTimer timer;

  void write(const std::string& path) {
    json j;
    j["subcommand"] = subcommand;
    j["config_hash"] = hash_hex(config_hash);
    j["seeds"] = seeds;
    j["model_hashes"] = model_hashes;
    j["warnings"] = warnings;
    j["outputs"] = outputs;
    j["timings_seconds"] = timer.to_json();
    write_text_file(path, j.dump(2) + "\n");
  }
};

uint64_t hash_args(const std::vector<std::string>& args) {
  uint64_t h = fnv1a64("sigsim");
  for (const auto& a : args) h = fnv1a64(a, h);
  return h;
}

std::string sanitize_net_name(const std::string& name) {
  std::string out;
  for (char c : name) {
    out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.'
                      ? c
                      : '_');
  }
  return out.empty() ? "_" : out;
}

// "lo:hi:step" or a single value, picoseconds.
Range parse_range_ps(const std::string& text) {
  Range r;
  double lo = 0, hi = 0, step = 1;
  if (std::sscanf(text.c_str(), "%lf:%lf:%lf", &lo, &hi, &step) == 3) {
  } else if (std::sscanf(text.c_str(), "%lf", &lo) == 1) {
    hi = lo;
    step = 1;
  } else {
    throw UsageError("cannot parse range '" + text + "' (expected lo:hi:step in ps)");
  }
  r.lo = lo * 1e-12;
  r.hi = hi * 1e-12;
  r.step = step * 1e-12;
  r.validate();
  return r;
}

struct AnalogFlags {
  AnalogGateParams params;
  void attach(CLI::App* cmd) {
    cmd->add_option("--vdd", params.vdd, "Supply voltage [V]")->capture_default_str();
    cmd->add_option("--tau-rise", params.tau_rise, "Reference rise time constant [s]")
        ->capture_default_str();
    cmd->add_option("--tau-fall", params.tau_fall, "Reference fall time constant [s]")
        ->capture_default_str();
    cmd->add_option("--load-alpha", params.load_alpha, "Extra tau per additional driven gate")
        ->capture_default_str();
    cmd->add_option("--slew-beta", params.slew_beta, "Strength of the input-slew dependence")
        ->capture_default_str();
  }
};

Circuit load_circuit(const std::string& bench_path, bool all_nor, std::string* mapping = nullptr) {
  const RawCircuit raw = parse_bench(read_text_file(bench_path));
  const DecomposeResult res = decompose_to_nor(raw, !all_nor);
  if (mapping != nullptr) *mapping = mapping_report(res);
  return res.circuit;
}

ModelRegistry load_registry(const std::string& models_dir, Manifest* manifest,
                            double* slope_lo, double* slope_hi, double* mean_delay) {
  ModelRegistry registry;
  *slope_lo = std::numeric_limits<double>::infinity();
  *slope_hi = 0.0;
  double delay_acc = 0.0;
  int delay_n = 0;
  bool any = false;
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(models_dir)) {
    if (entry.is_directory() && fs::exists(entry.path() / "meta.txt")) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  for (const auto& dir : dirs) {
    const auto model = load_bundle(dir.string());
    registry.add(model->kind(), model->fanout_class(), model);
    any = true;
    uint64_t h = fnv1a64("");
    for (const char* f : {"rise_slope.mlp", "rise_delay.mlp", "fall_slope.mlp", "fall_delay.mlp",
                          "region.txt", "meta.txt"}) {
      h = fnv1a64(read_text_file((dir / f).string()), h);
    }
    manifest->model_hashes[dir.filename().string()] = hash_hex(h);
    const auto get = [&](const char* key) {
      const auto it = model->meta.find(key);
      return it == model->meta.end() ? std::optional<double>{}
                                     : std::optional<double>{std::strtod(it->second.c_str(), nullptr)};
    };
    if (const auto lo = get("slope_min")) *slope_lo = std::min(*slope_lo, *lo);
    if (const auto hi = get("slope_max")) *slope_hi = std::max(*slope_hi, *hi);
    if (const auto d = get("mean_delay")) {
      delay_acc += *d;
      ++delay_n;
    }
  }
  if (!any) throw MissingModel("no model bundles found under " + models_dir);
  if (!(*slope_lo < *slope_hi)) {
    *slope_lo = 20.0;
    *slope_hi = 60.0;
  }
  *mean_delay = delay_n > 0 ? delay_acc / delay_n : 0.0;
  return registry;
}

// ---------------------------------------------------------------------------

int cmd_characterize(const SweepSpec& spec, const AnalogGateParams& params, const std::string& kind,
                     int fanout, const std::string& out_dir, int jobs, bool dump_waves,
                     Manifest& manifest) {
  fs::create_directories(out_dir);
  if (dump_waves) {
    // reference waveforms of the first grid point, for inspection and fitting
    const auto waves =
        characterization_chain(spec, params, fanout, spec.ta.lo, spec.tb.lo, spec.tc.lo);
    for (size_t i = 0; i < waves.size(); ++i) {
      const std::string path =
          (fs::path(out_dir) / ("wave_stage" + std::to_string(i) + ".txt")).string();
      write_waveform_file(path, waves[i]);
      manifest.outputs.push_back(path);
    }
  }
  manifest.timer.start("characterize");
  CharacterizationReport report;
  const TrainingTable table =
      run_characterization(spec, params, gate_kind_from_string(kind), fanout, jobs, &report);
  manifest.timer.start("write");
  const std::string table_path = (fs::path(out_dir) / "table.tsv").string();
  write_table_file(table_path, table);
  manifest.outputs.push_back(table_path);

  std::string rep;
  rep += "grid_points\t" + std::to_string(spec.grid_points()) + "\n";
  rep += "rows_kept\t" + std::to_string(report.rows_kept) + "\n";
  rep += "rows_deduplicated\t" + std::to_string(report.rows_deduplicated) + "\n";
  rep += "recordings_skipped\t" + std::to_string(report.recordings_skipped) + "\n";
  rep += "fits_failed\t" + std::to_string(report.fits_failed) + "\n";
  const std::string report_path = (fs::path(out_dir) / "report.txt").string();
  write_text_file(report_path, rep);
  manifest.outputs.push_back(report_path);
  manifest.warnings["recordings_skipped"] = report.recordings_skipped;
  manifest.warnings["fits_failed"] = report.fits_failed;

  std::cout << "characterized " << spec.grid_points() << " grid points -> " << report.rows_kept
            << " rows (" << report.rows_deduplicated << " deduplicated, "
            << report.recordings_skipped << " recordings skipped)\n"
            << "table: " << table_path << "\n";
  return 0;
}

int cmd_train(const std::string& table_path, const std::string& out_dir, const std::string& kind,
              const std::string& fo_class, const TrainConfig& cfg, int resolution, int jobs,
              Manifest& manifest) {
  manifest.timer.start("load");
  const TrainingTable table = read_table_file(table_path);
  manifest.timer.start("train");
  BundleTrainResult result =
      train_transfer_bundle(table, gate_kind_from_string(kind),
                            fanout_class_from_string(fo_class), cfg, resolution, jobs);
  manifest.timer.start("write");
  result.model->meta["table_hash"] = hash_hex(hash_file(table_path));
  save_bundle(out_dir, *result.model);
  manifest.outputs.push_back(out_dir);
  manifest.seeds["train"] = cfg.seed;

  std::cout << "trained 4 networks on " << table.rows.size() << " rows\n";
  const char* names[4] = {"rise_slope", "rise_delay", "fall_slope", "fall_delay"};
  for (int i = 0; i < 4; ++i) {
    std::cout << "  " << names[i] << " val_mse " << result.val_mse[i] << "\n";
  }
  std::cout << "  delay val RMS " << result.val_rms_delay << " ("
            << 100.0 * result.val_rms_delay / std::max(result.delay_spread, 1e-300)
            << "% of table delay spread)\n"
            << "bundle: " << out_dir << "\n";
  return 0;
}

int cmd_fit(const std::string& waveform_path, int n, double vdd, const std::string& initial,
            const FitConfig& cfg, const std::string& out_path, const std::string& report_path,
            Manifest& manifest) {
  manifest.timer.start("fit");
  const SampledWaveform w = read_waveform_file(waveform_path);
  int initial_level;
  if (initial == "auto") {
    initial_level = w.samples.front() >= 0.5 * vdd ? 1 : 0;
  } else if (initial == "0" || initial == "1") {
    initial_level = initial == "1" ? 1 : 0;
  } else {
    throw UsageError("--initial must be auto, 0 or 1");
  }
  const FitReport report = fit_trace(w, n, vdd, initial_level, cfg);
  manifest.timer.start("write");
  std::cout << "fit " << n << " transitions, rms residual " << report.rms << " V ("
            << report.rms / vdd << " of vdd), " << report.lm.iterations << " accepted steps\n";
  for (const Transition& t : report.trace.transitions) {
    std::cout << "  a " << format_double(t.slope) << "  b " << format_double(t.time) << "\n";
  }
  if (!out_path.empty()) {
    write_trace_file(out_path, report.trace);
    manifest.outputs.push_back(out_path);
    std::cout << "trace: " << out_path << "\n";
  }
  if (!report_path.empty()) {
    std::string log;
    for (size_t i = 0; i < report.lm.cost_log.size(); ++i) {
      log += std::to_string(i) + "\t" + format_double(report.lm.cost_log[i]) + "\n";
    }
    write_text_file(report_path, log);
    manifest.outputs.push_back(report_path);
  }
  return 0;
}

struct SimulateArgs {
  std::string bench;
  bool all_nor = false;
  std::string models_dir;
  double stub_delay = 0.0;
  double stub_slope = 40.0;
  std::string stimuli_dir;
  std::string random_spec;  // "mu_ps,sigma_ps,n,seed"
  std::string out_dir;
  bool oracle = false;
  double horizon = 0.0;
  double sim_dt = 1e-13;
  double dump_dt = 0.0;
  int jobs = 1;
};

int cmd_simulate(const SimulateArgs& args, const AnalogGateParams& params, Manifest& manifest) {
  fs::create_directories(args.out_dir);
  manifest.timer.start("parse");
  std::string mapping;
  const Circuit circuit = load_circuit(args.bench, args.all_nor, &mapping);
  write_text_file((fs::path(args.out_dir) / "mapping.txt").string(), mapping);

  // transfer models
  ModelRegistry registry;
  double slope_lo = 20.0, slope_hi = 60.0, mean_delay = 0.0;
  if (!args.models_dir.empty()) {
    registry = load_registry(args.models_dir, &manifest, &slope_lo, &slope_hi, &mean_delay);
  } else if (args.stub_delay > 0.0) {
    const auto stub = std::make_shared<StubTransfer>(args.stub_delay, args.stub_slope);
    for (GateKind k : {GateKind::Inv, GateKind::Nor2}) {
      for (FanoutClass f : {FanoutClass::Fo1, FanoutClass::Fo2Plus}) registry.add(k, f, stub);
    }
    slope_lo = 0.8 * args.stub_slope;
    slope_hi = 1.2 * args.stub_slope;
  } else {
    throw UsageError("either --models or --stub-delay is required");
  }

  // stimuli
  manifest.timer.start("stimuli");
  std::map<std::string, SigmoidTrace> stimuli;
  if (!args.random_spec.empty()) {
    double mu_ps = 0, sigma_ps = 0;
    long n = 0;
    unsigned long long seed = 0;
    if (std::sscanf(args.random_spec.c_str(), "%lf,%lf,%ld,%llu", &mu_ps, &sigma_ps, &n, &seed) !=
        4) {
      throw UsageError("--random expects mu_ps,sigma_ps,n,seed");
    }
    manifest.seeds["stimuli"] = seed;
    for (const auto& pi : circuit.primary_inputs) {
      const uint64_t pi_seed = fnv1a64(pi, seed ^ 0x9e3779b97f4a7c15ULL);
      stimuli[pi] = gen_random_stimuli(mu_ps * 1e-12, sigma_ps * 1e-12, static_cast<int>(n),
                                       pi_seed, slope_lo, slope_hi, 0, params.vdd);
    }
  } else if (!args.stimuli_dir.empty()) {
    for (const auto& pi : circuit.primary_inputs) {
      const std::string path =
          (fs::path(args.stimuli_dir) / (sanitize_net_name(pi) + ".trace")).string();
      if (!fs::exists(path)) throw MissingStimulus("no stimulus file for input '" + pi + "'");
      stimuli[pi] = read_trace_file(path);
    }
  } else {
    throw UsageError("either --stimuli or --random is required");
  }

  manifest.timer.start("simulate");
  const SimulationResult result = simulate_circuit(circuit, registry, stimuli, args.jobs);
  manifest.warnings["tie_events"] = result.tie_events;

  manifest.timer.start("write");
  const double vdd = stimuli.begin()->second.vdd;
  const double vth = 0.5 * vdd;
  double horizon = args.horizon;
  if (horizon <= 0.0) {
    double last = 0.0;
    for (const auto& [name, tr] : result.nets) {
      for (const auto& t : tr.transitions) last = std::max(last, to_seconds(t.time));
    }
    horizon = last + 50.0 * std::max(params.tau_rise, params.tau_fall) + 1e-10;
  }

  std::string digest = "# net\tinitial\tcrossings (time:direction)\n";
  for (const auto& [name, tr] : result.nets) {
    const std::string path =
        (fs::path(args.out_dir) / (sanitize_net_name(name) + ".trace")).string();
    write_trace_file(path, tr);
    manifest.outputs.push_back(path);
    const DigitalTrace d = tr.digitize(vth);
    digest += name + "\t" + std::to_string(d.initial_level);
    for (const Crossing& c : d.crossings) {
      digest += "\t" + format_double(c.time) + (c.rising ? ":R" : ":F");
    }
    digest += "\n";
    if (args.dump_dt > 0.0) {
      const SampledWaveform samples = sample_trace(tr, 0.0, horizon, args.dump_dt);
      std::string tsv;
      for (size_t i = 0; i < samples.samples.size(); ++i) {
        tsv += format_double(samples.time_at(i)) + "\t" + format_double(samples.samples[i]) + "\n";
      }
      write_text_file((fs::path(args.out_dir) / (sanitize_net_name(name) + ".samples")).string(),
                      tsv);
    }
  }
  write_text_file((fs::path(args.out_dir) / "digest.tsv").string(), digest);
  std::cout << "simulated " << circuit.gates.size() << " gates, " << result.nets.size()
            << " nets -> " << args.out_dir << "\n";

  if (args.oracle) {
    manifest.timer.start("oracle");
    std::map<std::string, SampledWaveform> analog_stim;
    for (const auto& [name, tr] : stimuli) {
      analog_stim[name] = sample_trace(tr, 0.0, horizon, args.sim_dt);
    }
    const auto analog_nets = analog_simulate(circuit, params, analog_stim);
    double total = 0.0;
    std::cout << "t_err vs analog reference (horizon " << horizon << " s):\n";
    for (const auto& po : circuit.primary_outputs) {
      const DigitalTrace predicted = result.nets.at(po).digitize(vth);
      const DigitalTrace reference = analog_nets.at(po).crossings(vth);
      const double err = mismatch_time(predicted, reference, horizon);
      total += err;
      std::cout << "  " << po << "\t" << err << " s\n";
    }
    std::cout << "  total\t" << total << " s\n";
  }
  return 0;
}

int cmd_compare(const std::string& a_path, const std::string& b_path, double horizon) {
  auto compare_files = [&](const std::string& fa, const std::string& fb) {
    const SigmoidTrace a = read_trace_file(fa);
    const SigmoidTrace b = read_trace_file(fb);
    if (a.vdd != b.vdd) throw DataError("traces disagree on vdd");
    return mismatch_time(a.digitize(0.5 * a.vdd), b.digitize(0.5 * b.vdd), horizon);
  };
  double total = 0.0;
  if (fs::is_directory(a_path) && fs::is_directory(b_path)) {
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(a_path)) {
      if (e.path().extension() == ".trace") names.push_back(e.path().filename().string());
    }
    std::sort(names.begin(), names.end());
    if (names.empty()) throw DataError("no .trace files under " + a_path);
    for (const auto& name : names) {
      const std::string other = (fs::path(b_path) / name).string();
      if (!fs::exists(other)) throw DataError("missing counterpart trace: " + other);
      const double err = compare_files((fs::path(a_path) / name).string(), other);
      total += err;
      std::cout << name << "\tt_err " << err << " s\n";
    }
  } else {
    total = compare_files(a_path, b_path);
  }
  std::cout << "total\tt_err " << total << " s\n";
  return 0;
}

int cmd_decompose(const std::string& bench, const std::string& out, bool all_nor,
                  const std::string& map_path, Manifest& manifest) {
  manifest.timer.start("decompose");
  std::string mapping;
  const Circuit circuit = load_circuit(bench, all_nor, &mapping);
  write_text_file(out, emit_bench(circuit));
  manifest.outputs.push_back(out);
  if (!map_path.empty()) {
    write_text_file(map_path, mapping);
    manifest.outputs.push_back(map_path);
  }
  std::cout << "decomposed to " << circuit.gates.size() << " gates -> " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic timing simulation with sigmoidal signal traces"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read defaults from a key=value file");

  std::string manifest_path;
  app.add_option("--manifest", manifest_path, "Manifest output path (default: <out>/manifest.json)");

  // characterize
  auto* c_cmd = app.add_subcommand("characterize", "Sweep the reference model into a training table");
  std::string c_kind = "nor", c_ta = "5:20:1", c_tb = "5:20:1", c_tc = "5:20:1", c_out;
  int c_fanout = 1, c_jobs = 1;
  bool c_dump_waves = false;
  SweepSpec c_spec;
  AnalogFlags c_analog;
  c_cmd->add_option("--kind", c_kind, "Gate kind: inv|nor")->capture_default_str();
  c_cmd->add_option("--fanout", c_fanout, "Fan-out of every chain gate")->capture_default_str();
  c_cmd->add_option("--ta", c_ta, "First interval range lo:hi:step [ps]")->capture_default_str();
  c_cmd->add_option("--tb", c_tb, "Second interval range [ps]")->capture_default_str();
  c_cmd->add_option("--tc", c_tc, "Third interval range [ps]")->capture_default_str();
  c_cmd->add_option("--targets", c_spec.target_gates, "Recorded chain stages")->capture_default_str();
  c_cmd->add_option("--prefix", c_spec.prefix_gates, "Shaping gates before the targets")
      ->capture_default_str();
  c_cmd->add_option("--suffix", c_spec.suffix_gates, "Termination gates after the targets")
      ->capture_default_str();
  c_cmd->add_option("--sim-dt", c_spec.sim_dt, "Integration step [s]")->capture_default_str();
  c_cmd->add_option("--fit-stride", c_spec.fit_stride, "Waveform thinning before fitting")
      ->capture_default_str();
  c_cmd->add_option("--out", c_out, "Output directory")->required();
  c_cmd->add_option("--jobs", c_jobs, "Parallel workers")->capture_default_str();
  c_cmd->add_flag("--dump-waves", c_dump_waves,
                  "Also write the first grid point's chain waveforms");
  c_analog.attach(c_cmd);

  // train
  auto* t_cmd = app.add_subcommand("train", "Train a transfer-model bundle from a table");
  std::string t_table, t_out, t_kind = "nor", t_class = "fo1";
  TrainConfig t_cfg;
  int t_resolution = ValidRegion::kDefaultResolution, t_jobs = 1;
  t_cmd->add_option("--table", t_table, "Training table (tsv)")->required();
  t_cmd->add_option("--out", t_out, "Bundle output directory")->required();
  t_cmd->add_option("--kind", t_kind, "Gate kind: inv|nor")->capture_default_str();
  t_cmd->add_option("--fanout-class", t_class, "fo1|fo2")->capture_default_str();
  t_cmd->add_option("--epochs", t_cfg.epochs)->capture_default_str();
  t_cmd->add_option("--batch", t_cfg.batch_size)->capture_default_str();
  t_cmd->add_option("--lr", t_cfg.learning_rate)->capture_default_str();
  t_cmd->add_option("--val-frac", t_cfg.validation_fraction)->capture_default_str();
  t_cmd->add_option("--seed", t_cfg.seed)->capture_default_str();
  t_cmd->add_option("--resolution", t_resolution, "Valid-region grid resolution")
      ->capture_default_str();
  t_cmd->add_option("--jobs", t_jobs)->capture_default_str();

  // fit
  auto* f_cmd = app.add_subcommand("fit", "Fit a sigmoid trace to a sampled waveform");
  std::string f_wave, f_initial = "auto", f_out, f_report;
  int f_n = 1;
  double f_vdd = 0.8;
  FitConfig f_cfg;
  f_cmd->add_option("--waveform", f_wave, "Sampled waveform file")->required();
  f_cmd->add_option("--n", f_n, "Number of transitions")->required();
  f_cmd->add_option("--vdd", f_vdd)->capture_default_str();
  f_cmd->add_option("--initial", f_initial, "Initial level: auto|0|1")->capture_default_str();
  f_cmd->add_option("--out", f_out, "Write the fitted trace here");
  f_cmd->add_option("--report", f_report, "Write the per-iteration cost log here");
  f_cmd->add_option("--max-iter", f_cfg.max_iterations)->capture_default_str();
  f_cmd->add_option("--damping", f_cfg.initial_damping)->capture_default_str();
  f_cmd->add_option("--tol", f_cfg.convergence_tol)->capture_default_str();
  f_cmd->add_option("--weight", f_cfg.inflection_weight)->capture_default_str();
  f_cmd->add_option("--window", f_cfg.inflection_window)->capture_default_str();

  // simulate
  auto* s_cmd = app.add_subcommand("simulate", "Predict all net traces of a bench circuit");
  SimulateArgs s_args;
  AnalogFlags s_analog;
  s_cmd->add_option("--bench", s_args.bench, "Bench netlist")->required();
  s_cmd->add_flag("--all-nor", s_args.all_nor, "Decompose inverters into NOR(a,a) too");
  s_cmd->add_option("--models", s_args.models_dir, "Directory of model bundles")
      ->envname("SIGSIM_MODELS");
  s_cmd->add_option("--stub-delay", s_args.stub_delay, "Constant-delay stub transfer [scaled]");
  s_cmd->add_option("--stub-slope", s_args.stub_slope, "Stub slope magnitude")->capture_default_str();
  s_cmd->add_option("--stimuli", s_args.stimuli_dir, "Directory of <input>.trace stimuli");
  s_cmd->add_option("--random", s_args.random_spec, "Random stimuli mu_ps,sigma_ps,n,seed");
  s_cmd->add_option("--out", s_args.out_dir, "Output directory")->required();
  s_cmd->add_flag("--oracle", s_args.oracle, "Also run the analog reference and print t_err");
  s_cmd->add_option("--horizon", s_args.horizon, "Comparison horizon [s] (default: auto)");
  s_cmd->add_option("--sim-dt", s_args.sim_dt, "Oracle integration step [s]")->capture_default_str();
  s_cmd->add_option("--dump-samples", s_args.dump_dt, "Also dump (t, V) samples at this step [s]");
  s_cmd->add_option("--jobs", s_args.jobs)->capture_default_str();
  s_analog.attach(s_cmd);

  // compare
  auto* m_cmd = app.add_subcommand("compare", "Print t_err between two traces or directories");
  std::string m_a, m_b;
  double m_horizon = 0.0;
  m_cmd->add_option("--a", m_a, "Trace file or directory")->required();
  m_cmd->add_option("--b", m_b, "Trace file or directory")->required();
  m_cmd->add_option("--horizon", m_horizon, "Horizon [s]")->required();

  // decompose
  auto* d_cmd = app.add_subcommand("decompose", "Rewrite a bench netlist into the INV/NOR basis");
  std::string d_bench, d_out, d_map;
  bool d_all_nor = false;
  d_cmd->add_option("--bench", d_bench)->required();
  d_cmd->add_option("--out", d_out)->required();
  d_cmd->add_flag("--all-nor", d_all_nor);
  d_cmd->add_option("--map", d_map, "Write the per-gate mapping report here");

  std::vector<std::string> raw_args(argv + 1, argv + argc);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  Manifest manifest;
  manifest.config_hash = hash_args(raw_args);

  try {
    int rc = 1;
    std::string out_dir;
    if (app.got_subcommand(c_cmd)) {
      manifest.subcommand = "characterize";
      c_spec.ta = parse_range_ps(c_ta);
      c_spec.tb = parse_range_ps(c_tb);
      c_spec.tc = parse_range_ps(c_tc);
      rc = cmd_characterize(c_spec, c_analog.params, c_kind, c_fanout, c_out, c_jobs, c_dump_waves,
                            manifest);
      out_dir = c_out;
    } else if (app.got_subcommand(t_cmd)) {
      manifest.subcommand = "train";
      rc = cmd_train(t_table, t_out, t_kind, t_class, t_cfg, t_resolution, t_jobs, manifest);
      out_dir = t_out;
    } else if (app.got_subcommand(f_cmd)) {
      manifest.subcommand = "fit";
      rc = cmd_fit(f_wave, f_n, f_vdd, f_initial, f_cfg, f_out, f_report, manifest);
    } else if (app.got_subcommand(s_cmd)) {
      manifest.subcommand = "simulate";
      rc = cmd_simulate(s_args, s_analog.params, manifest);
      out_dir = s_args.out_dir;
    } else if (app.got_subcommand(m_cmd)) {
      manifest.subcommand = "compare";
      rc = cmd_compare(m_a, m_b, m_horizon);
    } else if (app.got_subcommand(d_cmd)) {
      manifest.subcommand = "decompose";
      rc = cmd_decompose(d_bench, d_out, d_all_nor, d_map, manifest);
    }
    manifest.timer.finish();
    if (manifest_path.empty()) {
      manifest_path = out_dir.empty() ? "sigsim_manifest.json"
                                      : (fs::path(out_dir) / "manifest.json").string();
    }
    manifest.write(manifest_path);
    return rc;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
