// detmon: generate synthetic streams, train and evaluate the performance
// monitor and its baselines, run live monitoring, and inspect streams.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "detmon/app/commands.hpp"
#include "detmon/app/config.hpp"
#include "detmon/synthgen.hpp"

namespace {

using namespace detmon;

constexpr int kUsageError = 2;
constexpr int kDataError = 3;

struct CommonOptions {
  std::string config_file;
  std::vector<std::string> settings;
  std::optional<std::size_t> window_size;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_file, "key=value configuration file");
  cmd->add_option("--set", o.settings, "override a setting, e.g. --set epochs=20")->take_all();
  cmd->add_option("--window-size", o.window_size, "sliding window length in frames");
  cmd->add_option("--seed", o.seed, "random seed");
}

app::RunConfig resolve(const CommonOptions& o) {
  app::RunConfig cfg;
  if (!o.config_file.empty()) app::load_config_file(cfg, o.config_file);
  for (const auto& s : o.settings) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw app::ConfigError("--set expects key=value, got '" + s + "'");
    app::apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
  }
  if (o.window_size) cfg.window_size = *o.window_size;
  if (o.seed) cfg.seed = *o.seed;
  if (o.epochs) cfg.epochs = *o.epochs;
  cfg.check();
  return cfg;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path + " for writing");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"detmon - sliding-window performance monitor for object detectors"};
  cli.require_subcommand(1);

  // generate
  CommonOptions gen_o;
  std::string gen_out, gen_difficulty;
  std::optional<std::uint64_t> gen_frames;
  auto* gen = cli.add_subcommand("generate", "write a synthetic .dstream");
  add_common(gen, gen_o);
  gen->add_option("--out,-o", gen_out, "output .dstream path")->required();
  gen->add_option("--difficulty-out", gen_difficulty, "optional CSV of the hidden difficulty series");
  gen->add_option("--frames", gen_frames, "number of frames");

  // train
  CommonOptions train_o;
  std::string train_stream, train_model, train_log, train_kind = "monitor";
  auto* train = cli.add_subcommand("train", "train the monitor or a baseline on a ground-truth stream");
  add_common(train, train_o);
  train->add_option("--epochs", train_o.epochs, "training epochs");
  train->add_option("--stream,-s", train_stream, "training .dstream")->required()->check(CLI::ExistingFile);
  train->add_option("--model,-m", train_model, "output model file")->required();
  train->add_option("--kind", train_kind, "monitor | handcrafted | pooled");
  train->add_option("--log", train_log, "per-epoch loss CSV");

  // eval
  CommonOptions eval_o;
  std::string eval_stream, eval_model, eval_csv, eval_roc;
  std::vector<std::string> eval_baselines;
  auto* eval = cli.add_subcommand("eval", "evaluate a monitor (and baselines) on a ground-truth stream");
  add_common(eval, eval_o);
  eval->add_option("--stream,-s", eval_stream, "test .dstream")->required()->check(CLI::ExistingFile);
  eval->add_option("--model,-m", eval_model, "monitor model file")->required()->check(CLI::ExistingFile);
  eval->add_option("--baseline,-b", eval_baselines, "baseline model file (repeatable)")->check(CLI::ExistingFile);
  eval->add_option("--csv", eval_csv, "write the report table as CSV");
  eval->add_option("--roc-csv", eval_roc, "write the monitor ROC points as CSV");

  // monitor
  std::string mon_stream, mon_model, mon_out;
  double mon_threshold = 0.5;
  int mon_critical = 2;
  std::size_t mon_queue = 16;
  auto* mon = cli.add_subcommand("monitor", "predict per-window quality on a live or recorded stream");
  mon->add_option("--stream,-s", mon_stream, "input .dstream")->required()->check(CLI::ExistingFile);
  mon->add_option("--model,-m", mon_model, "monitor model file")->required()->check(CLI::ExistingFile);
  mon->add_option("--threshold,-t", mon_threshold, "decision threshold in [0,1]")->check(CLI::Range(0.0, 1.0));
  mon->add_option("--critical-class", mon_critical, "alert when the predicted class is below this");
  mon->add_option("--queue", mon_queue, "ingest queue capacity in frames");
  mon->add_option("--out,-o", mon_out, "write emissions here instead of stdout");

  // analyze-window
  CommonOptions an_o;
  std::string an_stream;
  std::vector<std::size_t> an_windows{1, 5, 10, 20};
  auto* an = cli.add_subcommand("analyze-window", "mean absolute consecutive-window mAP change per window size");
  add_common(an, an_o);
  an->add_option("--stream,-s", an_stream, "ground-truth .dstream")->required()->check(CLI::ExistingFile);
  an->add_option("--windows", an_windows, "window sizes")->delimiter(',');

  // validate
  std::string val_stream;
  auto* val = cli.add_subcommand("validate", "check a .dstream for format errors and report warnings");
  val->add_option("--stream,-s", val_stream, "input .dstream")->required()->check(CLI::ExistingFile);

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = cli.exit(e);
    return rc == 0 ? 0 : kUsageError;
  }

  try {
    if (gen->parsed()) {
      auto cfg = resolve(gen_o);
      auto sc = cfg.synth;
      if (gen_o.seed) sc.seed = *gen_o.seed;
      if (gen_frames) sc.frame_count = *gen_frames;
      auto out = open_out(gen_out);
      const auto difficulty = synth::generate_stream_to(out, sc);
      if (!gen_difficulty.empty()) {
        auto dout = open_out(gen_difficulty);
        synth::write_difficulty_csv(dout, difficulty);
      }
      std::cerr << "wrote " << difficulty.size() << " frames to " << gen_out << '\n';
    } else if (train->parsed()) {
      const auto cfg = resolve(train_o);
      std::ofstream log;
      if (!train_log.empty()) log = open_out(train_log);
      const auto summary = app::cmd_train(train_stream, cfg, app::model_kind_from_string(train_kind), train_model,
                                          train_log.empty() ? nullptr : &log);
      std::cout << "trained " << train_kind << " on " << summary.windows << " windows";
      if (summary.undefined_windows) std::cout << " (" << summary.undefined_windows << " without ground truth skipped)";
      std::cout << "\nloss: epoch 0 " << summary.loss_history.front() << ", final " << summary.loss_history.back()
                << "\nmodel written to " << train_model << '\n';
    } else if (eval->parsed()) {
      const auto cfg = resolve(eval_o);
      std::vector<std::filesystem::path> bpaths(eval_baselines.begin(), eval_baselines.end());
      const auto reports = app::cmd_eval(eval_stream, eval_model, bpaths, cfg);
      metrics::write_report_table(std::cout, reports);
      if (!reports.front().roc)
        std::cerr << "warning: test labels contain a single alert class; ROC metrics are not defined\n";
      if (!eval_csv.empty()) {
        auto out = open_out(eval_csv);
        metrics::write_report_csv(out, reports);
      }
      if (!eval_roc.empty() && reports.front().roc) {
        auto out = open_out(eval_roc);
        metrics::write_roc_csv(out, reports.front().roc->points);
      }
    } else if (mon->parsed()) {
      app::MonitorOptions opts{mon_threshold, mon_critical, mon_queue};
      std::ofstream file;
      if (!mon_out.empty()) file = open_out(mon_out);
      std::ostream& out = mon_out.empty() ? std::cout : file;
      const auto emissions = app::cmd_monitor(mon_stream, mon_model, opts, &out);
      std::size_t alerts = 0;
      for (const auto& e : emissions) alerts += e.alert;
      std::cerr << emissions.size() << " windows, " << alerts << " alerts\n";
    } else if (an->parsed()) {
      const auto cfg = resolve(an_o);
      const auto rows = app::cmd_analyze_window(an_stream, an_windows, cfg);
      app::write_window_size_table(std::cout, rows);
    } else if (val->parsed()) {
      auto reader = stream::StreamReader::open_file(val_stream);
      const auto report = stream::validate(*reader);
      std::cout << "frames: " << report.frames << " (ground truth on " << report.frames_with_ground_truth << ")\n"
                << "layers: " << report.header.num_layers() << ", classes: " << report.header.num_classes() << '\n';
      for (const auto& w : report.warnings) std::cout << "warning: " << w << '\n';
      std::cout << (report.warnings.empty() ? "valid\n" : "valid with warnings\n");
    }
  } catch (const app::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDataError;
  }
  return 0;
}
