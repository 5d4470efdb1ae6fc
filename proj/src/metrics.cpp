#include "deltattr/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <thread>
#include <unordered_map>

#include "json.hpp"

namespace deltattr {

std::string substitution_name(Substitution mode) {
  switch (mode) {
    case Substitution::forward_fill: return "forward_fill";
    case Substitution::zero: return "zero";
    case Substitution::average: return "average";
  }
  return "?";
}

Matrix RemovalState::reconstruct(Substitution mode) const {
  return substitute_removed(original, removed, mode);
}

Matrix substitute_removed(const Matrix& original, const std::vector<Cell>& removed,
                          Substitution mode) {
  std::vector<char> mask(original.size(), 0);
  for (const Cell& cell : removed) {
    if (cell.row < 0 || cell.row >= original.rows() || cell.col < 0 ||
        cell.col >= original.cols()) {
      throw std::out_of_range("substitute_removed: cell (" + std::to_string(cell.row) + "," +
                              std::to_string(cell.col) + ") outside " +
                              std::to_string(original.rows()) + "x" +
                              std::to_string(original.cols()));
    }
    mask[static_cast<size_t>(cell.row) * original.cols() + cell.col] = 1;
  }

  std::vector<double> feature_mean;
  if (mode == Substitution::average) {
    feature_mean.assign(original.cols(), 0.0);
    for (int c = 0; c < original.cols(); ++c) {
      for (int r = 0; r < original.rows(); ++r) feature_mean[c] += original(r, c);
      feature_mean[c] /= original.rows();
    }
  }

  Matrix out = original;
  for (const Cell& cell : removed) {
    switch (mode) {
      case Substitution::zero:
        out(cell.row, cell.col) = 0.0;
        break;
      case Substitution::average:
        out(cell.row, cell.col) = feature_mean[cell.col];
        break;
      case Substitution::forward_fill: {
        // nearest earlier retained row on the same feature; none -> keep
        for (int r = cell.row - 1; r >= 0; --r) {
          if (!mask[static_cast<size_t>(r) * original.cols() + cell.col]) {
            out(cell.row, cell.col) = original(r, cell.col);
            break;
          }
        }
        break;
      }
    }
  }
  return out;
}

Matrix forward_fill_remove(const Matrix& original, const std::vector<Cell>& removed) {
  return substitute_removed(original, removed, Substitution::forward_fill);
}

std::vector<Cell> saliency_order(const Matrix& scores, bool most_first) {
  std::vector<Cell> cells;
  cells.reserve(scores.size());
  for (int r = 0; r < scores.rows(); ++r) {
    for (int c = 0; c < scores.cols(); ++c) cells.push_back({r, c});
  }
  std::sort(cells.begin(), cells.end(), [&](const Cell& a, const Cell& b) {
    const double sa = std::abs(scores(a.row, a.col));
    const double sb = std::abs(scores(b.row, b.col));
    if (sa != sb) return most_first ? sa > sb : sa < sb;
    if (a.row != b.row) return a.row < b.row;
    return a.col < b.col;
  });
  return cells;
}

Matrix concatenated_input(const TimeSeries& series, const WindowSpec& spec,
                          const ChangeTarget& target) {
  const int start = std::min(target.t1, target.t2) - spec.window_size + 1;
  const int rows = std::abs(target.t2 - target.t1) + spec.window_size;
  if (start < 0 || start + rows > series.length()) {
    throw std::out_of_range("concatenated_input: rows " + std::to_string(start) + ".." +
                            std::to_string(start + rows - 1) + " outside series of length " +
                            std::to_string(series.length()));
  }
  Matrix input(rows, series.num_features());
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < series.num_features(); ++c) input(r, c) = series.values(start + r, c);
  }
  return input;
}

double RemovalCurve::total() const {
  double acc = 0.0;
  for (double s : steps) acc += s;
  return acc;
}

namespace {

// g on a substituted concatenated input: first window vs last window.
std::vector<double> wrapper_on_input(const Classifier& f, const WindowSpec& spec,
                                     const Matrix& input) {
  const int W = spec.window_size;
  Matrix w1(W, input.cols()), w2(W, input.cols());
  for (int r = 0; r < W; ++r) {
    for (int c = 0; c < input.cols(); ++c) {
      w1(r, c) = input(r, c);
      w2(r, c) = input(input.rows() - W + r, c);
    }
  }
  return wrapper_eval_perturbed(f, spec, w1, w2);
}

double l1_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
  return acc;
}

std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

Matrix abs_scores_from_map(const AttributionMap& attribution, const ChangeTarget& target,
                           const WindowSpec& spec) {
  const int rows = std::abs(target.t2 - target.t1) + spec.window_size;
  attribution.values.require_shape(rows, attribution.values.cols(), "attribution for metric");
  Matrix scores(rows, attribution.values.cols());
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < scores.cols(); ++c) scores(r, c) = std::abs(attribution.values(r, c));
  }
  return scores;
}

Matrix abs_scores_from_macro(const MacroMap& macro, const ChangeTarget& target,
                             const WindowSpec& spec) {
  const int start = std::min(target.t1, target.t2) - spec.window_size + 1;
  const int rows = std::abs(target.t2 - target.t1) + spec.window_size;
  Matrix scores(rows, macro.values.cols());
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < scores.cols(); ++c) scores(r, c) = std::abs(macro.values(start + r, c));
  }
  return scores;
}

CurveResult curve_result(const RemovalCurve& curve) {
  return CurveResult{curve.total(), curve.steps};
}

}  // namespace

RemovalCurve removal_curve(const Classifier& f, const TimeSeries& series, const WindowSpec& spec,
                           const ChangeTarget& target, const std::vector<Cell>& order, int K,
                           Substitution mode) {
  if (K < 0 || K > static_cast<int>(order.size())) {
    throw std::out_of_range("removal_curve: K=" + std::to_string(K) + " outside 0.." +
                            std::to_string(order.size()));
  }
  const Matrix original = concatenated_input(series, spec, target);
  RemovalCurve curve;
  curve.steps.reserve(K);
  std::vector<Cell> removed;
  std::vector<double> g_prev = wrapper_on_input(f, spec, original);
  for (int k = 0; k < K; ++k) {
    removed.push_back(order[k]);
    const Matrix substituted = substitute_removed(original, removed, mode);
    const std::vector<double> g_cur = wrapper_on_input(f, spec, substituted);
    curve.steps.push_back(l1_diff(g_prev, g_cur));
    g_prev = g_cur;
  }
  return curve;
}

CurveResult cpd(const Classifier& f, const TimeSeries& series, const WindowSpec& spec,
                const ChangeTarget& target, const AttributionMap& attribution, int K,
                Substitution mode) {
  const Matrix scores = abs_scores_from_map(attribution, target, spec);
  return curve_result(removal_curve(f, series, spec, target, saliency_order(scores, true), K, mode));
}

CurveResult cpp(const Classifier& f, const TimeSeries& series, const WindowSpec& spec,
                const ChangeTarget& target, const AttributionMap& attribution, int K,
                Substitution mode) {
  const Matrix scores = abs_scores_from_map(attribution, target, spec);
  return curve_result(removal_curve(f, series, spec, target, saliency_order(scores, false), K, mode));
}

double area_under_curve(const std::vector<double>& steps, int K) {
  if (K < 1 || K > static_cast<int>(steps.size())) {
    throw std::out_of_range("area_under_curve: K=" + std::to_string(K) + " outside 1.." +
                            std::to_string(steps.size()));
  }
  // prefix sums C(k); area = (1/2K) sum_{k=1..K} (C(k) + C(k-1))
  double prefix = 0.0, acc = 0.0;
  for (int k = 1; k <= K; ++k) {
    const double prev = prefix;
    prefix += steps[k - 1];
    acc += prefix + prev;
  }
  return acc / (2.0 * K);
}

double aupd(const Classifier& f, const TimeSeries& series, const WindowSpec& spec,
            const ChangeTarget& target, const AttributionMap& attribution, int K,
            Substitution mode) {
  return area_under_curve(cpd(f, series, spec, target, attribution, K, mode).steps, K);
}

double aupp(const Classifier& f, const TimeSeries& series, const WindowSpec& spec,
            const ChangeTarget& target, const AttributionMap& attribution, int K,
            Substitution mode) {
  return area_under_curve(cpp(f, series, spec, target, attribution, K, mode).steps, K);
}

MacroMap macro_aggregate(const std::vector<AttributionMap>& per_step_maps, const WindowSpec& spec,
                         int series_length) {
  if (per_step_maps.empty()) {
    throw std::invalid_argument("macro_aggregate: no per-step maps");
  }
  const int D = per_step_maps.front().values.cols();
  MacroMap macro{Matrix(series_length, D), Matrix(series_length, D)};
  for (const AttributionMap& map : per_step_maps) {
    if (map.target.t2 != map.target.t1 + 1) {
      throw std::invalid_argument("macro_aggregate: map for (" + std::to_string(map.target.t1) +
                                  "," + std::to_string(map.target.t2) +
                                  ") is not a consecutive-step map");
    }
    if (map.values.cols() != D) {
      throw std::invalid_argument("macro_aggregate: inconsistent feature counts");
    }
    if (map.values.rows() != spec.window_size + 1) {
      throw std::invalid_argument("macro_aggregate: map has " +
                                  std::to_string(map.values.rows()) + " rows, expected W+1 = " +
                                  std::to_string(spec.window_size + 1));
    }
    for (int r = 0; r < map.values.rows(); ++r) {
      const int t = map.start_time + r;
      if (t < 0 || t >= series_length) {
        throw std::out_of_range("macro_aggregate: map row outside series");
      }
      // every map covering the cell contributes; a consecutive-step map at
      // reference T' covers t in [T'-W, T'], which already lies inside the
      // reference neighborhood of t
      for (int c = 0; c < D; ++c) {
        macro.values(t, c) += map.values(r, c);
        macro.counts(t, c) += 1.0;
      }
    }
  }
  for (int t = 0; t < series_length; ++t) {
    for (int c = 0; c < D; ++c) {
      if (macro.counts(t, c) > 0.0) macro.values(t, c) /= macro.counts(t, c);
    }
  }
  return macro;
}

CurveResult mpd(const Classifier& f, const TimeSeries& series, const WindowSpec& spec,
                const ChangeTarget& target, const MacroMap& macro, int K, Substitution mode) {
  const Matrix scores = abs_scores_from_macro(macro, target, spec);
  return curve_result(removal_curve(f, series, spec, target, saliency_order(scores, true), K, mode));
}

CurveResult mpp(const Classifier& f, const TimeSeries& series, const WindowSpec& spec,
                const ChangeTarget& target, const MacroMap& macro, int K, Substitution mode) {
  const Matrix scores = abs_scores_from_macro(macro, target, spec);
  return curve_result(removal_curve(f, series, spec, target, saliency_order(scores, false), K, mode));
}

namespace {

std::optional<double> corr_from_parts(const Matrix& scores, const std::vector<Cell>& order_top,
                                      const std::vector<Cell>& order_bottom,
                                      const RemovalCurve& top, const RemovalCurve& bottom, int K) {
  std::vector<double> attr, effect;
  attr.reserve(2 * K);
  effect.reserve(2 * K);
  for (int k = 0; k < K; ++k) {
    attr.push_back(std::abs(scores(order_top[k].row, order_top[k].col)));
    effect.push_back(top.steps[k]);
  }
  for (int k = 0; k < K; ++k) {
    attr.push_back(std::abs(scores(order_bottom[k].row, order_bottom[k].col)));
    effect.push_back(bottom.steps[k]);
  }
  return pearson(attr, effect);
}

}  // namespace

std::optional<double> corr_metric(const Classifier& f, const TimeSeries& series,
                                  const WindowSpec& spec, const ChangeTarget& target,
                                  const AttributionMap& attribution, int K, Substitution mode) {
  const Matrix scores = abs_scores_from_map(attribution, target, spec);
  if (2 * K > static_cast<int>(scores.size())) {
    throw std::out_of_range("corr_metric: 2K=" + std::to_string(2 * K) + " exceeds cell count " +
                            std::to_string(scores.size()));
  }
  const std::vector<Cell> order_top = saliency_order(scores, true);
  const std::vector<Cell> order_bottom = saliency_order(scores, false);
  const RemovalCurve top = removal_curve(f, series, spec, target, order_top, K, mode);
  const RemovalCurve bottom = removal_curve(f, series, spec, target, order_bottom, K, mode);
  return corr_from_parts(scores, order_top, order_bottom, top, bottom, K);
}

// ---------------------------------------------------------------------------
// Evaluation suite

double SampleRow::metric(const std::string& name) const {
  if (name == "cpd") return cpd;
  if (name == "aupd") return aupd;
  if (name == "mpd") return mpd;
  if (name == "aumpd") return aumpd;
  if (name == "cpp") return cpp;
  if (name == "aupp") return aupp;
  if (name == "mpp") return mpp;
  if (name == "aumpp") return aumpp;
  if (name == "corr") return corr.value_or(std::numeric_limits<double>::quiet_NaN());
  throw std::invalid_argument("unknown metric: " + name);
}

const std::vector<std::string>& MetricReport::metric_names() {
  static const std::vector<std::string> names = {"cpd",  "aupd", "mpd",  "aumpd", "cpp",
                                                 "aupp", "mpp",  "aumpp", "corr"};
  return names;
}

void MetricReport::recompute_summary() {
  summary.clear();
  for (const std::string& name : metric_names()) {
    std::vector<double> values;
    values.reserve(rows.size());
    for (const SampleRow& row : rows) {
      if (name == "corr") {
        if (row.corr) values.push_back(*row.corr);
      } else {
        values.push_back(row.metric(name));
      }
    }
    MetricSummary s;
    s.n = static_cast<int>(values.size());
    if (s.n > 0) {
      for (double v : values) s.mean += v;
      s.mean /= s.n;
      if (s.n > 1) {
        double var = 0.0;
        for (double v : values) var += (v - s.mean) * (v - s.mean);
        var /= (s.n - 1);
        s.stderr_ = std::sqrt(var / s.n);
      }
    }
    summary[name] = s;
  }
}

namespace {

struct SeriesWork {
  int series_index;
  std::vector<int> target_positions;  // indices into the targets vector
};

}  // namespace

MetricReport evaluate_suite(const Classifier& f, const std::vector<TimeSeries>& dataset,
                            const WindowSpec& spec, const std::vector<EvalTarget>& targets,
                            const Attributor& attributor, int K,
                            const std::vector<uint64_t>& seeds, Substitution mode, int jobs) {
  if (targets.empty()) throw std::invalid_argument("evaluate_suite: no targets");
  if (seeds.empty()) throw std::invalid_argument("evaluate_suite: no seeds");
  spec.validate();

  MetricReport report;
  report.method = attributor.name;
  report.K = K;
  report.substitution = mode;
  report.rows.resize(seeds.size() * targets.size());

  std::vector<SeriesWork> work;
  {
    std::unordered_map<int, size_t> slot;
    for (int i = 0; i < static_cast<int>(targets.size()); ++i) {
      const int si = targets[i].series_index;
      if (si < 0 || si >= static_cast<int>(dataset.size())) {
        throw std::out_of_range("evaluate_suite: series index " + std::to_string(si));
      }
      auto [it, inserted] = slot.try_emplace(si, work.size());
      if (inserted) work.push_back({si, {}});
      work[it->second].target_positions.push_back(i);
    }
  }

  const int min_t1 = std::max(spec.window_size, attributor.min_t1);

  const auto process_series = [&](size_t seed_idx, const SeriesWork& sw) {
    const uint64_t seed = seeds[seed_idx];
    const TimeSeries& series = dataset[sw.series_index];
    const int L = series.length();

    // per-step maps for the macro aggregation, one per consecutive pair
    std::vector<AttributionMap> per_step;
    for (int t1 = min_t1; t1 + 1 < L; ++t1) {
      const ChangeTarget ct = select_target_class(f, series, spec, t1, t1 + 1);
      per_step.push_back(attributor.fn(series, sw.series_index, ct, seed));
    }
    if (per_step.empty()) {
      throw std::runtime_error("evaluate_suite: series '" + series.series_id +
                               "' too short for any consecutive-step map");
    }
    const MacroMap macro = macro_aggregate(per_step, spec, L);

    for (int pos : sw.target_positions) {
      const ChangeTarget& target = targets[pos].target;
      SampleRow row;
      row.seed = seed;
      row.series_id = series.series_id;
      row.target = target;
      try {
        const AttributionMap* raw = nullptr;
        AttributionMap computed;
        if (target.t2 == target.t1 + 1 && target.t1 >= min_t1) {
          const AttributionMap& cached = per_step[target.t1 - min_t1];
          if (cached.target.target_class == target.target_class) raw = &cached;
        }
        if (!raw) {
          computed = attributor.fn(series, sw.series_index, target, seed);
          raw = &computed;
        }

        const Matrix scores = abs_scores_from_map(*raw, target, spec);
        if (2 * K > static_cast<int>(scores.size())) {
          throw std::out_of_range("2K=" + std::to_string(2 * K) + " exceeds cell count " +
                                  std::to_string(scores.size()));
        }
        const std::vector<Cell> order_top = saliency_order(scores, true);
        const std::vector<Cell> order_bottom = saliency_order(scores, false);
        const RemovalCurve top = removal_curve(f, series, spec, target, order_top, K, mode);
        const RemovalCurve bottom = removal_curve(f, series, spec, target, order_bottom, K, mode);
        row.cpd = top.total();
        row.cpp = bottom.total();
        row.aupd = area_under_curve(top.steps, K);
        row.aupp = area_under_curve(bottom.steps, K);
        row.corr = corr_from_parts(scores, order_top, order_bottom, top, bottom, K);

        const Matrix macro_scores = abs_scores_from_macro(macro, target, spec);
        const RemovalCurve macro_top =
            removal_curve(f, series, spec, target, saliency_order(macro_scores, true), K, mode);
        const RemovalCurve macro_bottom =
            removal_curve(f, series, spec, target, saliency_order(macro_scores, false), K, mode);
        row.mpd = macro_top.total();
        row.mpp = macro_bottom.total();
        row.aumpd = area_under_curve(macro_top.steps, K);
        row.aumpp = area_under_curve(macro_bottom.steps, K);
      } catch (const std::exception& e) {
        throw std::runtime_error("evaluate_suite: sample " + series.series_id + " t1=" +
                                 std::to_string(target.t1) + " t2=" + std::to_string(target.t2) +
                                 ": " + e.what());
      }
      report.rows[seed_idx * targets.size() + pos] = std::move(row);
    }
  };

  for (size_t seed_idx = 0; seed_idx < seeds.size(); ++seed_idx) {
    if (jobs <= 1 || work.size() == 1) {
      for (const SeriesWork& sw : work) process_series(seed_idx, sw);
    } else {
      std::atomic<size_t> next{0};
      std::exception_ptr error;
      std::mutex error_mutex;
      const int n_threads = std::min<int>(jobs, static_cast<int>(work.size()));
      std::vector<std::thread> pool;
      pool.reserve(n_threads);
      for (int t = 0; t < n_threads; ++t) {
        pool.emplace_back([&] {
          for (size_t i = next.fetch_add(1); i < work.size(); i = next.fetch_add(1)) {
            try {
              process_series(seed_idx, work[i]);
            } catch (...) {
              std::lock_guard<std::mutex> lock(error_mutex);
              if (!error) error = std::current_exception();
            }
          }
        });
      }
      for (std::thread& t : pool) t.join();
      if (error) std::rethrow_exception(error);
    }
  }

  report.recompute_summary();
  return report;
}

// ---------------------------------------------------------------------------
// Report output

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void write_report_csv(const MetricReport& report, std::ostream& out) {
  out << "seed,series_id,t1,t2,class,delta";
  for (const std::string& name : MetricReport::metric_names()) out << "," << name;
  out << "\n";
  for (const SampleRow& row : report.rows) {
    out << row.seed << "," << row.series_id << "," << row.target.t1 << "," << row.target.t2 << ","
        << row.target.target_class << "," << fmt_double(row.target.delta);
    for (const std::string& name : MetricReport::metric_names()) {
      out << ",";
      if (name == "corr") {
        if (row.corr) out << fmt_double(*row.corr);
      } else {
        out << fmt_double(row.metric(name));
      }
    }
    out << "\n";
  }
}

void write_report_json(const MetricReport& report, std::ostream& out) {
  nlohmann::ordered_json obj;
  obj["method"] = report.method;
  obj["K"] = report.K;
  obj["substitution"] = substitution_name(report.substitution);
  obj["display_scale"] = report.display_scale;
  obj["n_rows"] = report.rows.size();
  nlohmann::ordered_json metrics;
  for (const std::string& name : MetricReport::metric_names()) {
    const MetricSummary& s = report.summary.at(name);
    metrics[name] = {{"mean", s.mean}, {"stderr", s.stderr_}, {"n", s.n}};
  }
  obj["metrics"] = std::move(metrics);
  out << obj.dump(2) << "\n";
}

MetricReport read_report_json(std::istream& in) {
  nlohmann::ordered_json obj;
  in >> obj;
  MetricReport report;
  report.method = obj.at("method").get<std::string>();
  report.K = obj.at("K").get<int>();
  const std::string sub = obj.at("substitution").get<std::string>();
  if (sub == "zero") {
    report.substitution = Substitution::zero;
  } else if (sub == "average") {
    report.substitution = Substitution::average;
  } else {
    report.substitution = Substitution::forward_fill;
  }
  report.display_scale = obj.at("display_scale").get<double>();
  for (const std::string& name : MetricReport::metric_names()) {
    const auto& m = obj.at("metrics").at(name);
    report.summary[name] = MetricSummary{m.at("mean").get<double>(), m.at("stderr").get<double>(),
                                         m.at("n").get<int>()};
  }
  return report;
}

}  // namespace deltattr
