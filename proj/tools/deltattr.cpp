// deltattr command line: generate benchmark data, train desk-scale models,
// compute prediction-change attributions, and run the evaluation suite.
//
// Subcommands: gen-data, train, attribute, evaluate, report.
// Every command is a pure function of its flags and seeds; reruns produce
// byte-identical artifacts.
//
// Exit codes: 0 success, 2 bad usage or unknown method, 3 missing input file,
// 4 schema or config mismatch, 5 runtime/numeric failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "deltattr/baselines.hpp"
#include "deltattr/datagen.hpp"
#include "deltattr/metrics.hpp"
#include "deltattr/models.hpp"
#include "deltattr/paths.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace deltattr;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitMissingFile = 3;
constexpr int kExitSchema = 4;
constexpr int kExitRuntime = 5;

struct CliError {
  int code;
  std::string message;
};

void require_file(const std::string& path) {
  if (!fs::exists(path)) throw CliError{kExitMissingFile, "missing file: " + path};
}

void ensure_dir(const std::string& path) {
  if (!path.empty()) fs::create_directories(path);
}

std::vector<uint64_t> parse_seeds(const std::string& text) {
  std::vector<uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) seeds.push_back(std::stoull(item));
  }
  if (seeds.empty()) throw CliError{kExitUsage, "no seeds in '" + text + "'"};
  return seeds;
}

// Optional JSON config file; explicitly passed flags win over file values.
void apply_json_config(CLI::App* cmd, const std::string& config_path) {
  if (config_path.empty()) return;
  require_file(config_path);
  std::ifstream in(config_path);
  ordered_json obj;
  try {
    in >> obj;
  } catch (const std::exception& e) {
    throw CliError{kExitSchema, "config " + config_path + ": " + e.what()};
  }
  for (const auto& [key, value] : obj.items()) {
    CLI::Option* opt = cmd->get_option_no_throw("--" + key);
    if (!opt || opt->count() > 0) continue;  // unknown key or flag given
    const std::string text = value.is_string() ? value.get<std::string>() : value.dump();
    opt->add_result(text);
    opt->run_callback();
  }
}

int infer_num_classes(const std::vector<TimeSeries>& data) {
  int c = 2;
  for (const TimeSeries& s : data) {
    for (int label : s.labels) c = std::max(c, label + 1);
  }
  return c;
}

const std::vector<std::string> kMethods = {"swing", "rbs", "ig-zero", "occlusion", "random"};

Attributor make_attributor(const std::string& method, const Classifier& model,
                           const WindowSpec& spec, int n_samples, int offset) {
  if (std::find(kMethods.begin(), kMethods.end(), method) == kMethods.end()) {
    throw CliError{kExitUsage, "unknown method '" + method +
                                   "' (expected swing, rbs, ig-zero, occlusion or random)"};
  }
  Attributor a;
  a.name = method;
  a.min_t1 = spec.window_size + ((method == "swing" || method == "rbs") ? offset - 1 : 0);
  const IntegratorConfig cfg{n_samples};
  if (method == "swing") {
    a.fn = [&model, spec, cfg, offset](const TimeSeries& s, int, const ChangeTarget& t, uint64_t) {
      return swing_attribute(model, s, spec, t, cfg, offset);
    };
  } else if (method == "rbs") {
    a.fn = [&model, spec, cfg, offset](const TimeSeries& s, int, const ChangeTarget& t, uint64_t) {
      return rbs_attribute(model, s, spec, t, cfg, offset);
    };
  } else if (method == "ig-zero") {
    a.fn = [&model, spec, cfg](const TimeSeries& s, int, const ChangeTarget& t, uint64_t) {
      return zero_baseline_ig_change(model, s, spec, t, cfg);
    };
  } else if (method == "occlusion") {
    a.fn = [&model, spec](const TimeSeries& s, int, const ChangeTarget& t, uint64_t) {
      return occlusion_attribute(model, s, spec, t);
    };
  } else {
    a.fn = [spec](const TimeSeries& s, int series_index, const ChangeTarget& t, uint64_t seed) {
      const uint64_t stream = derive_stream(derive_stream(seed, series_index),
                                            static_cast<uint64_t>(t.t1) * 100003 + t.t2);
      return random_attribute(s, spec, t, stream);
    };
  }
  return a;
}

// All valid (t1, t1+gap) targets, optionally subsampled to max_targets with a
// seeded shuffle (order restored afterwards so per-series caching stays
// effective).
std::vector<EvalTarget> collect_targets(const Classifier& model,
                                        const std::vector<TimeSeries>& data,
                                        const WindowSpec& spec, int gap, int min_t1,
                                        int max_targets, uint64_t seed) {
  std::vector<EvalTarget> targets;
  for (int si = 0; si < static_cast<int>(data.size()); ++si) {
    const int L = data[si].length();
    for (int t1 = min_t1; t1 + gap < L; ++t1) {
      targets.push_back({si, select_target_class(model, data[si], spec, t1, t1 + gap)});
    }
  }
  if (max_targets > 0 && static_cast<int>(targets.size()) > max_targets) {
    SplitMix64 rng(derive_stream(seed, 0x7a72674554ULL));
    shuffle(targets, rng);
    targets.resize(max_targets);
    std::sort(targets.begin(), targets.end(), [](const EvalTarget& a, const EvalTarget& b) {
      return a.series_index != b.series_index ? a.series_index < b.series_index
                                              : a.target.t1 < b.target.t1;
    });
  }
  if (targets.empty()) throw CliError{kExitRuntime, "no valid targets for this window/gap"};
  return targets;
}

std::string scaled_cell(const MetricSummary& s, double scale) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f±%.2f", s.mean * scale, s.stderr_ * scale);
  return buf;
}

// ---------------------------------------------------------------------------

int cmd_gen_data(const std::string& dataset, int num_series, int seq_len, uint64_t seed,
                 const std::string& out_dir) {
  ensure_dir(out_dir);
  const std::string data_path = (fs::path(out_dir) / "data.jsonl").string();
  ordered_json sidecar;
  sidecar["dataset"] = dataset;

  if (dataset == "switch-feature") {
    SwitchFeatureConfig cfg;
    cfg.num_series = num_series;
    if (seq_len > 0) cfg.seq_len = seq_len;
    cfg.seed = seed;
    write_series_jsonl(gen_switch_feature(cfg), data_path);
    sidecar["num_series"] = cfg.num_series;
    sidecar["seq_len"] = cfg.seq_len;
    sidecar["window"] = cfg.window;
    sidecar["rbf_gamma"] = cfg.rbf_gamma;
    sidecar["marginal_variance"] = cfg.marginal_variance;
    sidecar["transition"] = cfg.transition;
    sidecar["state_means"] = cfg.state_means;
    sidecar["seed"] = cfg.seed;
  } else if (dataset == "delayed-spike") {
    DelayedSpikeConfig cfg;
    cfg.num_series = num_series;
    if (seq_len > 0) cfg.seq_len = seq_len;
    cfg.seed = seed;
    write_series_jsonl(gen_delayed_spike(cfg), data_path);
    sidecar["num_series"] = cfg.num_series;
    sidecar["seq_len"] = cfg.seq_len;
    sidecar["num_features"] = cfg.num_features;
    sidecar["spike_probability"] = cfg.spike_probability;
    sidecar["spike_magnitude"] = cfg.spike_magnitude;
    sidecar["narma_coeffs"] = cfg.narma_coeffs;
    sidecar["seed"] = cfg.seed;
  } else {
    throw CliError{kExitUsage, "unknown dataset '" + dataset + "'"};
  }

  std::ofstream side((fs::path(out_dir) / "config.json").string());
  side << sidecar.dump(2) << "\n";
  std::cout << "wrote " << data_path << "\n";
  return 0;
}

int cmd_train(const std::string& data_path, const std::string& model_kind, int window, int hidden,
              const TrainConfig& cfg, double train_ratio, const std::string& out_path) {
  require_file(data_path);
  const std::vector<TimeSeries> data = read_series_jsonl(data_path);
  if (data.empty()) throw CliError{kExitSchema, "no series in " + data_path};
  const int D = data.front().num_features();
  const int C = infer_num_classes(data);
  const WindowSpec spec{window, C};
  spec.validate();

  const Splits splits = make_splits(static_cast<int>(data.size()), train_ratio, 0.0, cfg.seed);
  std::vector<LabeledWindow> train_set, held_out;
  for (int i : splits.train) {
    auto w = sliding_windows(data[i], spec);
    train_set.insert(train_set.end(), w.begin(), w.end());
  }
  for (int i : splits.test) {
    auto w = sliding_windows(data[i], spec);
    held_out.insert(held_out.end(), w.begin(), w.end());
  }
  if (train_set.empty()) throw CliError{kExitRuntime, "training split is empty"};

  std::unique_ptr<TrainableClassifier> model;
  if (model_kind == "recurrent") {
    model = std::make_unique<RecurrentClassifier>(window, D, hidden, C, cfg.seed);
  } else if (model_kind == "mlp") {
    model = std::make_unique<WindowMLP>(window, D, hidden, C, cfg.seed);
  } else if (model_kind == "affine") {
    model = std::make_unique<AffineScorer>(window, D, C, AffineScorer::Link::softmax, cfg.seed);
  } else {
    throw CliError{kExitUsage, "unknown model '" + model_kind + "'"};
  }

  const TrainResult result = train_sgd(*model, train_set, cfg);
  for (size_t e = 0; e < result.epoch_loss.size(); ++e) {
    std::cout << "epoch " << e << " loss " << result.epoch_loss[e] << "\n";
  }
  if (!held_out.empty()) {
    const auto [loss, acc] = evaluate_model(*model, held_out);
    std::cout << "held-out loss " << loss << " accuracy " << acc << "\n";
  }
  ensure_dir(fs::path(out_path).parent_path().string());
  save_model(*model, out_path, cfg.seed);
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

int cmd_attribute(const std::string& data_path, const std::string& model_path,
                  const std::string& method, int gap, int n_samples, int offset, uint64_t seed,
                  int max_targets, const std::string& series_id, const std::string& out_path) {
  require_file(data_path);
  require_file(model_path);
  std::vector<TimeSeries> data = read_series_jsonl(data_path);
  if (!series_id.empty()) {
    std::erase_if(data, [&](const TimeSeries& s) { return s.series_id != series_id; });
    if (data.empty()) throw CliError{kExitRuntime, "series '" + series_id + "' not found"};
  }
  const std::unique_ptr<TrainableClassifier> model = load_model(model_path);
  const WindowSpec spec{model->window_size(), model->num_classes()};
  if (!data.empty() && data.front().num_features() != model->num_features()) {
    throw CliError{kExitSchema, "data has " + std::to_string(data.front().num_features()) +
                                    " features, model expects " +
                                    std::to_string(model->num_features())};
  }

  const Attributor attributor = make_attributor(method, *model, spec, n_samples, offset);
  const std::vector<EvalTarget> targets =
      collect_targets(*model, data, spec, gap, std::max(spec.window_size, attributor.min_t1),
                      max_targets, seed);

  ensure_dir(fs::path(out_path).parent_path().string());
  std::ofstream out(out_path);
  if (!out) throw CliError{kExitRuntime, "cannot open for writing: " + out_path};
  for (const EvalTarget& t : targets) {
    const AttributionMap map = attributor.fn(data[t.series_index], t.series_index, t.target, seed);
    out << attribution_to_json(map) << "\n";
  }
  std::cout << "wrote " << targets.size() << " attribution maps to " << out_path << "\n";
  return 0;
}

int cmd_evaluate(const std::string& data_path, const std::string& model_path,
                 const std::string& method, int K, int gap, int n_samples, int offset,
                 const std::string& seeds_text, int max_targets, int jobs,
                 const std::string& substitution, const std::string& out_dir) {
  require_file(data_path);
  require_file(model_path);
  const std::vector<TimeSeries> data = read_series_jsonl(data_path);
  const std::unique_ptr<TrainableClassifier> model = load_model(model_path);
  const WindowSpec spec{model->window_size(), model->num_classes()};
  if (!data.empty() && data.front().num_features() != model->num_features()) {
    throw CliError{kExitSchema, "data/model feature mismatch"};
  }

  Substitution mode = Substitution::forward_fill;
  if (substitution == "zero") {
    mode = Substitution::zero;
  } else if (substitution == "average") {
    mode = Substitution::average;
  } else if (substitution != "forward-fill") {
    throw CliError{kExitUsage, "unknown substitution '" + substitution + "'"};
  }

  const std::vector<uint64_t> seeds = parse_seeds(seeds_text);
  const Attributor attributor = make_attributor(method, *model, spec, n_samples, offset);
  const std::vector<EvalTarget> targets =
      collect_targets(*model, data, spec, gap, std::max(spec.window_size, attributor.min_t1),
                      max_targets, seeds.front());

  const MetricReport report =
      evaluate_suite(*model, data, spec, targets, attributor, K, seeds, mode, jobs);

  ensure_dir(out_dir);
  const std::string csv_path = (fs::path(out_dir) / (method + "_report.csv")).string();
  const std::string json_path = (fs::path(out_dir) / (method + "_summary.json")).string();
  {
    std::ofstream csv(csv_path);
    write_report_csv(report, csv);
    std::ofstream json(json_path);
    write_report_json(report, json);
  }

  std::cout << "method " << method << ", " << report.rows.size() << " samples, K=" << K << "\n";
  for (const std::string& name : MetricReport::metric_names()) {
    const double scale = (name == "corr") ? 1.0 : report.display_scale;
    std::cout << "  " << name << " " << scaled_cell(report.summary.at(name), scale)
              << (name == "corr" ? "" : " (x1000)") << "\n";
  }
  std::cout << "wrote " << csv_path << " and " << json_path << "\n";
  return 0;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& out_path) {
  if (inputs.empty()) throw CliError{kExitUsage, "no summary files given"};
  std::vector<MetricReport> reports;
  for (const std::string& path : inputs) {
    require_file(path);
    std::ifstream in(path);
    try {
      reports.push_back(read_report_json(in));
    } catch (const std::exception& e) {
      throw CliError{kExitSchema, "summary " + path + ": " + e.what()};
    }
  }

  std::ostringstream table;
  table << "method";
  for (const std::string& name : MetricReport::metric_names()) {
    table << "," << name << (name == "corr" ? "" : "_x1000");
  }
  table << "\n";
  for (const MetricReport& r : reports) {
    table << r.method;
    for (const std::string& name : MetricReport::metric_names()) {
      const double scale = (name == "corr") ? 1.0 : r.display_scale;
      table << "," << scaled_cell(r.summary.at(name), scale);
    }
    table << "\n";
  }

  std::cout << table.str();
  if (!out_path.empty()) {
    ensure_dir(fs::path(out_path).parent_path().string());
    std::ofstream out(out_path);
    out << table.str();
    std::cout << "wrote " << out_path << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "deltattr: attribute prediction changes of windowed time-series classifiers\n"
      "Exit codes: 0 ok, 2 usage/unknown method, 3 missing file, 4 schema mismatch, 5 runtime"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic benchmark");
  std::string gen_dataset = "switch-feature";
  int gen_num = 100, gen_len = 0;
  uint64_t gen_seed = 7;
  std::string gen_out = "out/data";
  gen->add_option("--dataset", gen_dataset, "switch-feature or delayed-spike");
  gen->add_option("--num-series", gen_num, "number of series");
  gen->add_option("--seq-len", gen_len, "series length (0 = dataset default)");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--out", gen_out, "output directory");

  // train
  auto* train = app.add_subcommand("train", "train a classifier on JSONL data");
  std::string train_data, train_model = "recurrent", train_out = "out/models/model.json";
  int train_window = 50, train_hidden = 16;
  double train_ratio = 0.8;
  TrainConfig tc;
  train->add_option("--data", train_data, "JSONL data path")->required();
  train->add_option("--model", train_model, "recurrent, mlp or affine");
  train->add_option("--window", train_window, "window size W");
  train->add_option("--hidden", train_hidden, "hidden/state width");
  train->add_option("--epochs", tc.epochs, "training epochs");
  train->add_option("--lr", tc.learning_rate, "learning rate");
  train->add_option("--batch", tc.batch_size, "batch size");
  train->add_option("--l2", tc.l2, "L2 penalty");
  train->add_option("--seed", tc.seed, "init/shuffle seed");
  train->add_option("--train-ratio", train_ratio, "fraction of series used for training");
  train->add_option("--out", train_out, "checkpoint path");

  // attribute
  auto* attr = app.add_subcommand("attribute", "write attribution maps as JSONL");
  std::string attr_data, attr_model, attr_method = "swing", attr_series;
  std::string attr_out = "out/attrib/attributions.jsonl", attr_config;
  int attr_gap = 1, attr_samples = 50, attr_offset = 1, attr_max = 0;
  uint64_t attr_seed = 1;
  attr->add_option("--data", attr_data, "JSONL data path")->required();
  attr->add_option("--model", attr_model, "model checkpoint")->required();
  attr->add_option("--method", attr_method, "swing, rbs, ig-zero, occlusion or random");
  attr->add_option("--t-gap", attr_gap, "t2 - t1");
  attr->add_option("--n-samples", attr_samples, "integration samples");
  attr->add_option("--offset", attr_offset, "retrospective baseline offset d");
  attr->add_option("--seed", attr_seed, "seed for stochastic methods/subsampling");
  attr->add_option("--max-targets", attr_max, "cap on targets (0 = all)");
  attr->add_option("--series-id", attr_series, "restrict to one series");
  attr->add_option("--out", attr_out, "output JSONL path");
  attr->add_option("--config", attr_config, "JSON config file (flags override)");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "run the nine-metric suite");
  std::string eval_data, eval_model, eval_method = "swing", eval_seeds = "1";
  std::string eval_sub = "forward-fill", eval_out = "out/reports", eval_config;
  int eval_K = 50, eval_gap = 1, eval_samples = 50, eval_offset = 1, eval_max = 0, eval_jobs = 1;
  eval->add_option("--data", eval_data, "JSONL data path")->required();
  eval->add_option("--model", eval_model, "model checkpoint")->required();
  eval->add_option("--method", eval_method, "swing, rbs, ig-zero, occlusion or random");
  eval->add_option("--K", eval_K, "cells removed per sequence");
  eval->add_option("--t-gap", eval_gap, "t2 - t1");
  eval->add_option("--n-samples", eval_samples, "integration samples");
  eval->add_option("--offset", eval_offset, "retrospective baseline offset d");
  eval->add_option("--seeds", eval_seeds, "comma-separated run seeds");
  eval->add_option("--max-targets", eval_max, "cap on targets (0 = all)");
  eval->add_option("--jobs", eval_jobs, "worker threads (results independent of this)");
  eval->add_option("--substitution", eval_sub, "forward-fill, zero or average");
  eval->add_option("--out", eval_out, "report directory");
  eval->add_option("--config", eval_config, "JSON config file (flags override)");

  // report
  auto* rep = app.add_subcommand("report", "join evaluation summaries into one table");
  std::vector<std::string> rep_inputs;
  std::string rep_out;
  rep->add_option("--inputs", rep_inputs, "summary JSON files")->required()->expected(-1);
  rep->add_option("--out", rep_out, "table CSV path (also printed)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_data(gen_dataset, gen_num, gen_len, gen_seed, gen_out);
    if (train->parsed()) {
      return cmd_train(train_data, train_model, train_window, train_hidden, tc, train_ratio,
                       train_out);
    }
    if (attr->parsed()) {
      apply_json_config(attr, attr_config);
      return cmd_attribute(attr_data, attr_model, attr_method, attr_gap, attr_samples, attr_offset,
                           attr_seed, attr_max, attr_series, attr_out);
    }
    if (eval->parsed()) {
      apply_json_config(eval, eval_config);
      return cmd_evaluate(eval_data, eval_model, eval_method, eval_K, eval_gap, eval_samples,
                          eval_offset, eval_seeds, eval_max, eval_jobs, eval_sub, eval_out);
    }
    if (rep->parsed()) return cmd_report(rep_inputs, rep_out);
  } catch (const CliError& e) {
    std::cerr << "error: " << e.message << "\n";
    return e.code;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSchema;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
