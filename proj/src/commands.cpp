#include "detmon/app/commands.hpp"

#include <chrono>
#include <exception>
#include <iomanip>
#include <ostream>
#include <thread>

#include "detmon/app/bounded_queue.hpp"

namespace detmon::app {

ordinal::CriticalRule critical_rule(const RunConfig& config) {
  ordinal::CriticalRule rule{config.critical_class, config.num_classes};
  rule.check();
  return rule;
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "monitor") return ModelKind::kMonitor;
  if (s == "handcrafted") return ModelKind::kHandcrafted;
  if (s == "pooled" || s == "pooled_last_layer") return ModelKind::kPooledLastLayer;
  throw ConfigError("unknown model kind '" + s + "' (expected monitor, handcrafted or pooled)");
}

Dataset build_dataset(stream::StreamReader& reader, const RunConfig& config, bool with_baselines) {
  config.check();
  stream::PreprocessOptions pre_opts{config.min_size_px, config.class_merge};
  stream::Preprocessor pre(reader.header(), pre_opts);

  Dataset data;
  data.header = pre.header();
  mapeval::LabelOptions label_opts{config.window_size, config.stride, config.num_classes, config.iou_threshold};
  mapeval::WindowLabeler labeler(data.header.num_classes(), label_opts);
  features::WindowAssembler assembler(config.window_size);
  baselines::WindowVectorizer hand(baselines::BaselineKind::kHandcrafted, config.window_size, data.header.image_size);
  baselines::WindowVectorizer pooled(baselines::BaselineKind::kPooledLastLayer, config.window_size,
                                     data.header.image_size);

  std::size_t frames = 0;
  while (auto f = reader.next()) {
    ++frames;
    pre.apply(*f);
    auto window = assembler.push(features::pool_frame(f->features));
    std::optional<std::vector<double>> hv, pv;
    if (with_baselines) {
      hv = hand.push(*f);
      pv = pooled.push(*f);
    }
    auto label = labeler.push(std::move(*f));
    if (!label) continue;
    WindowSample s{*label, std::move(*window), {}, {}};
    if (with_baselines) {
      s.handcrafted = std::move(*hv);
      s.pooled_last = std::move(*pv);
    }
    data.samples.push_back(std::move(s));
  }
  if (frames < config.window_size)
    data.warning = "stream has " + std::to_string(frames) + " frames, fewer than the window size " +
                   std::to_string(config.window_size);
  return data;
}

namespace {

nn::TrainOptions train_options(const RunConfig& config, int epochs) {
  nn::TrainOptions o;
  o.epochs = epochs;
  o.batch_size = config.batch_size;
  o.learning_rate = config.learning_rate;
  o.seed = config.seed;
  return o;
}

void require_windows(const Dataset& data, const RunConfig& config) {
  if (data.samples.empty())
    throw DataError(data.warning ? *data.warning
                                 : "stream yields no windows of size " + std::to_string(config.window_size));
}

}  // namespace

nn::TrainResult train_monitor_on(const Dataset& data, const RunConfig& config) {
  require_windows(data, config);
  std::vector<nn::TrainingExample> examples;
  for (const auto& s : data.samples)
    if (s.label.defined()) examples.push_back({s.window, *s.label.ordinal_class});
  if (examples.empty()) throw DataError("no window has a defined mAP label (no ground-truth objects)");
  auto cascade = nn::cascade_config_for(data.header, static_cast<std::int64_t>(config.window_size), config.num_classes);
  cascade.filter_out_channels = config.filter_out_channels;
  cascade.hidden_dims = config.hidden_dims;
  cascade.mode = nn::cascade_mode_from_string(config.cascade_mode);
  return nn::train_monitor(std::move(examples), cascade, train_options(config, config.epochs));
}

baselines::BaselineTrainResult train_baseline_on(const Dataset& data, const RunConfig& config,
                                                 baselines::BaselineKind kind) {
  require_windows(data, config);
  const auto rule = critical_rule(config);
  std::vector<std::vector<double>> xs;
  std::vector<bool> ys;
  for (const auto& s : data.samples) {
    if (!s.label.defined()) continue;
    const auto& v = kind == baselines::BaselineKind::kHandcrafted ? s.handcrafted : s.pooled_last;
    if (v.empty()) throw std::logic_error("dataset was built without baseline vectors");
    xs.push_back(v);
    ys.push_back(ordinal::to_alert(*s.label.ordinal_class, rule));
  }
  if (xs.empty()) throw DataError("no window has a defined mAP label (no ground-truth objects)");
  try {
    return baselines::train_baseline(kind, config.window_size, xs, ys, train_options(config, config.baseline_epochs),
                                     config.baseline_hidden_dims);
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
}

TrainSummary cmd_train(const std::filesystem::path& stream_path, const RunConfig& config, ModelKind kind,
                       const std::filesystem::path& model_path, std::ostream* loss_log) {
  auto reader = stream::StreamReader::open_file(stream_path);
  if (const auto& fc = reader->header().frame_count; fc && *fc < config.window_size)
    throw DataError("window size " + std::to_string(config.window_size) + " exceeds the stream's " +
                    std::to_string(*fc) + " frames");
  const Dataset data = build_dataset(*reader, config, kind != ModelKind::kMonitor);

  TrainSummary summary;
  for (const auto& s : data.samples) (s.label.defined() ? summary.windows : summary.undefined_windows) += 1;

  if (kind == ModelKind::kMonitor) {
    auto result = train_monitor_on(data, config);
    nn::save_monitor(model_path, result.model);
    summary.loss_history = std::move(result.loss_history);
  } else {
    const auto bk = kind == ModelKind::kHandcrafted ? baselines::BaselineKind::kHandcrafted
                                                    : baselines::BaselineKind::kPooledLastLayer;
    auto result = train_baseline_on(data, config, bk);
    baselines::save_baseline(model_path, result.model);
    summary.loss_history = std::move(result.loss_history);
  }
  if (loss_log) {
    *loss_log << "epoch,loss\n" << std::setprecision(10);
    for (std::size_t e = 0; e < summary.loss_history.size(); ++e) *loss_log << e << ',' << summary.loss_history[e] << '\n';
  }
  return summary;
}

std::vector<metrics::EvalReport> evaluate_on(const Dataset& data, const RunConfig& config,
                                             const nn::MonitorModel& monitor,
                                             const std::vector<baselines::BaselineModel>& baseline_models) {
  nn::check_compatible(monitor, data.header);
  if (static_cast<std::size_t>(monitor.config().window_size) != config.window_size)
    throw DataError("model window size " + std::to_string(monitor.config().window_size) +
                    " differs from the configured window size " + std::to_string(config.window_size));
  if (monitor.config().num_classes != config.num_classes)
    throw DataError("model class count differs from the configured num_classes");
  const auto rule = critical_rule(config);

  std::vector<int> preds, labels;
  std::vector<double> scores;
  std::vector<bool> alerts;
  std::vector<std::vector<double>> baseline_scores(baseline_models.size());
  for (const auto& s : data.samples) {
    if (!s.label.defined()) continue;
    const auto p = nn::predict(s.window, monitor, config.decision_threshold);
    preds.push_back(p.ordinal_class);
    labels.push_back(*s.label.ordinal_class);
    scores.push_back(ordinal::alert_score(p.rank_probs, rule));
    alerts.push_back(ordinal::to_alert(*s.label.ordinal_class, rule));
    for (std::size_t b = 0; b < baseline_models.size(); ++b) {
      const auto& bm = baseline_models[b];
      if (bm.window_size != config.window_size) throw DataError("baseline window size differs from the configuration");
      const auto& v = bm.kind == baselines::BaselineKind::kHandcrafted ? s.handcrafted : s.pooled_last;
      baseline_scores[b].push_back(baselines::predict_baseline(v, bm));
    }
  }
  if (labels.empty()) throw DataError("no window has a defined mAP label (no ground-truth objects)");

  std::vector<metrics::EvalReport> reports;
  reports.push_back(metrics::evaluate("monitor", preds, labels, scores, alerts));
  for (std::size_t b = 0; b < baseline_models.size(); ++b) {
    const std::string name = "baseline-" + baselines::to_string(baseline_models[b].kind);
    reports.push_back(metrics::evaluate(name, {}, {}, baseline_scores[b], alerts));
  }
  return reports;
}

std::vector<metrics::EvalReport> cmd_eval(const std::filesystem::path& stream_path,
                                          const std::filesystem::path& model_path,
                                          const std::vector<std::filesystem::path>& baseline_paths,
                                          const RunConfig& config) {
  const auto monitor = nn::load_monitor(model_path);
  std::vector<baselines::BaselineModel> bms;
  for (const auto& p : baseline_paths) bms.push_back(baselines::load_baseline(p));
  auto reader = stream::StreamReader::open_file(stream_path);
  nn::check_compatible(monitor, reader->header());
  const Dataset data = build_dataset(*reader, config, !bms.empty());
  require_windows(data, config);
  return evaluate_on(data, config, monitor, bms);
}

std::size_t run_monitor(stream::StreamReader& reader, const nn::MonitorModel& model, const MonitorOptions& options,
                        const std::function<void(const Emission&)>& sink) {
  nn::check_compatible(model, reader.header());
  const ordinal::CriticalRule rule{options.critical_class, model.config().num_classes};
  rule.check();
  if (!(options.decision_threshold >= 0.0 && options.decision_threshold <= 1.0))
    throw ConfigError("decision threshold must lie in [0, 1]");

  struct Item {
    std::uint64_t frame_id;
    features::PooledFrame pooled;
  };
  BoundedQueue<Item> queue(options.queue_capacity);
  std::exception_ptr ingest_error;
  std::thread ingest([&] {
    try {
      while (auto f = reader.next()) {
        if (!queue.push({f->frame_id, features::pool_frame(f->features)})) break;
      }
    } catch (...) {
      ingest_error = std::current_exception();
    }
    queue.close();
  });

  std::size_t emitted = 0;
  std::exception_ptr infer_error;
  try {
    features::WindowAssembler assembler(static_cast<std::size_t>(model.config().window_size));
    std::deque<std::uint64_t> ids;
    while (auto item = queue.pop()) {
      ids.push_back(item->frame_id);
      if (ids.size() > assembler.window_size()) ids.pop_front();
      const auto t0 = std::chrono::steady_clock::now();
      auto window = assembler.push(std::move(item->pooled));
      if (!window) continue;
      const auto p = nn::predict(*window, model, options.decision_threshold);
      Emission e;
      e.start_frame = ids.front();
      e.ordinal_class = p.ordinal_class;
      e.alert = ordinal::to_alert(p.ordinal_class, rule);
      e.alert_score = ordinal::alert_score(p.rank_probs, rule);
      e.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      sink(e);
      ++emitted;
    }
  } catch (...) {
    infer_error = std::current_exception();
    queue.close();
  }
  ingest.join();
  if (infer_error) std::rethrow_exception(infer_error);
  if (ingest_error) std::rethrow_exception(ingest_error);
  return emitted;
}

void write_emission_header(std::ostream& out) { out << "start_frame,class,alert,alert_score,latency_ms\n"; }

void write_emission(std::ostream& out, const Emission& e) {
  out << e.start_frame << ',' << e.ordinal_class << ',' << (e.alert ? 1 : 0) << ',' << std::setprecision(9)
      << e.alert_score << ',' << std::fixed << std::setprecision(3) << e.latency_ms << std::defaultfloat << '\n';
}

std::vector<Emission> cmd_monitor(const std::filesystem::path& stream_path, const std::filesystem::path& model_path,
                                  const MonitorOptions& options, std::ostream* out) {
  const auto model = nn::load_monitor(model_path);
  auto reader = stream::StreamReader::open_file(stream_path);
  std::vector<Emission> emissions;
  if (out) write_emission_header(*out);
  run_monitor(*reader, model, options, [&](const Emission& e) {
    emissions.push_back(e);
    if (out) {
      write_emission(*out, e);
      if (e.alert) out->flush();
    }
  });
  return emissions;
}

std::vector<mapeval::WindowSizeRow> cmd_analyze_window(const std::filesystem::path& stream_path,
                                                       const std::vector<std::size_t>& window_sizes,
                                                       const RunConfig& config) {
  auto contents = stream::read_stream_file(stream_path);
  contents = stream::preprocess(std::move(contents), {config.min_size_px, config.class_merge});
  for (std::size_t w : window_sizes) {
    if (w < 1) throw ConfigError("window sizes must be >= 1");
    if (w > contents.frames.size())
      throw DataError("window size " + std::to_string(w) + " exceeds the stream's " +
                      std::to_string(contents.frames.size()) + " frames");
  }
  return mapeval::window_size_analysis(contents.frames, contents.header.num_classes(), window_sizes,
                                       config.iou_threshold);
}

void write_window_size_table(std::ostream& out, const std::vector<mapeval::WindowSizeRow>& rows) {
  out << "window_size,windows,mean_abs_consecutive_diff\n" << std::setprecision(10);
  for (const auto& r : rows) out << r.window_size << ',' << r.windows << ',' << r.mean_abs_diff << '\n';
}

}  // namespace detmon::app
