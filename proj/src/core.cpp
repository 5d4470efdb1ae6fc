#include "deltattr/core.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace deltattr {

using ordered_json = nlohmann::ordered_json;

void TimeSeries::validate() const {
  const int L = length();
  const int D = num_features();
  if (L == 0 || D == 0) {
    throw std::invalid_argument("TimeSeries '" + series_id + "': empty values");
  }
  if (static_cast<int>(labels.size()) != L) {
    throw std::invalid_argument("TimeSeries '" + series_id + "': " +
                                std::to_string(labels.size()) + " labels for " +
                                std::to_string(L) + " rows");
  }
  if (!feature_names.empty() && static_cast<int>(feature_names.size()) != D) {
    throw std::invalid_argument("TimeSeries '" + series_id + "': " +
                                std::to_string(feature_names.size()) + " feature names for " +
                                std::to_string(D) + " features");
  }
  if (!values.all_finite()) {
    throw std::invalid_argument("TimeSeries '" + series_id + "': non-finite values");
  }
}

void WindowSpec::validate() const {
  if (window_size < 2) {
    throw std::invalid_argument("WindowSpec: window_size must be >= 2, got " +
                                std::to_string(window_size));
  }
  if (num_classes < 2) {
    throw std::invalid_argument("WindowSpec: num_classes must be >= 2, got " +
                                std::to_string(num_classes));
  }
}

void Classifier::check_window(const Matrix& window) const {
  window.require_shape(window_size(), num_features(), "Classifier window");
}

void Classifier::check_class(int target_class) const {
  if (target_class < 0 || target_class >= num_classes()) {
    throw std::out_of_range("Classifier: class " + std::to_string(target_class) +
                            " outside [0, " + std::to_string(num_classes()) + ")");
  }
}

void validate_target(const ChangeTarget& target, const WindowSpec& spec, int series_length) {
  const int W = spec.window_size;
  if (target.t1 < W || target.t1 >= target.t2 || target.t2 >= series_length) {
    throw std::out_of_range("ChangeTarget: need W <= t1 < t2 < L, got t1=" +
                            std::to_string(target.t1) + " t2=" + std::to_string(target.t2) +
                            " W=" + std::to_string(W) + " L=" + std::to_string(series_length));
  }
  if (target.t2 - target.t1 >= W) {
    throw std::out_of_range("ChangeTarget: t2 - t1 = " + std::to_string(target.t2 - target.t1) +
                            " must be < W = " + std::to_string(W) +
                            " (windows would not overlap)");
  }
}

Matrix extract_window(const TimeSeries& series, const WindowSpec& spec, int end_time) {
  const int W = spec.window_size;
  const int L = series.length();
  if (end_time < W - 1 || end_time >= L) {
    throw std::out_of_range("extract_window: T=" + std::to_string(end_time) +
                            " has no window of size W=" + std::to_string(W) +
                            " in series of length L=" + std::to_string(L));
  }
  Matrix window(W, series.num_features());
  for (int r = 0; r < W; ++r) {
    for (int c = 0; c < series.num_features(); ++c) {
      window(r, c) = series.values(end_time - W + 1 + r, c);
    }
  }
  return window;
}

ChangeTarget select_target_class(const Classifier& f, const TimeSeries& series,
                                 const WindowSpec& spec, int t1, int t2) {
  ChangeTarget target{t1, t2, 0, 0.0};
  validate_target(target, spec, series.length());
  const std::vector<double> diff = wrapper_eval(f, series, spec, t1, t2);
  int best = 0;
  for (int c = 1; c < static_cast<int>(diff.size()); ++c) {
    if (diff[c] > diff[best]) best = c;  // ties keep the lowest index
  }
  target.target_class = best;
  target.delta = diff[best];
  return target;
}

std::vector<double> wrapper_eval(const Classifier& f, const TimeSeries& series,
                                 const WindowSpec& spec, int t1, int t2) {
  return wrapper_eval_perturbed(f, spec, extract_window(series, spec, t1),
                                extract_window(series, spec, t2));
}

std::vector<double> wrapper_eval_perturbed(const Classifier& f, const WindowSpec& spec,
                                           const Matrix& window1, const Matrix& window2) {
  window1.require_shape(spec.window_size, f.num_features(), "wrapper window1");
  window2.require_shape(spec.window_size, f.num_features(), "wrapper window2");
  std::vector<double> p1 = f.predict(window1);
  std::vector<double> p2 = f.predict(window2);
  std::vector<double> diff(p1.size());
  for (size_t c = 0; c < diff.size(); ++c) diff[c] = p2[c] - p1[c];
  return diff;
}

namespace {

ordered_json series_to_json(const TimeSeries& s) {
  ordered_json obj;
  obj["series_id"] = s.series_id;
  obj["features"] = s.feature_names;
  ordered_json rows = ordered_json::array();
  for (int r = 0; r < s.length(); ++r) {
    ordered_json row = ordered_json::array();
    for (int c = 0; c < s.num_features(); ++c) row.push_back(s.values(r, c));
    rows.push_back(std::move(row));
  }
  obj["values"] = std::move(rows);
  obj["labels"] = s.labels;
  return obj;
}

TimeSeries series_from_json(const ordered_json& obj) {
  TimeSeries s;
  s.series_id = obj.at("series_id").get<std::string>();
  s.feature_names = obj.at("features").get<std::vector<std::string>>();
  const auto& rows = obj.at("values");
  const int L = static_cast<int>(rows.size());
  const int D = L > 0 ? static_cast<int>(rows[0].size()) : 0;
  s.values = Matrix(L, D);
  for (int r = 0; r < L; ++r) {
    if (static_cast<int>(rows[r].size()) != D) {
      throw std::invalid_argument("TimeSeries JSON: ragged values in '" + s.series_id + "'");
    }
    for (int c = 0; c < D; ++c) s.values(r, c) = rows[r][c].get<double>();
  }
  s.labels = obj.at("labels").get<std::vector<int>>();
  s.validate();
  return s;
}

}  // namespace

void write_series_jsonl(const std::vector<TimeSeries>& series, std::ostream& out) {
  for (const TimeSeries& s : series) {
    out << series_to_json(s).dump() << "\n";
  }
}

void write_series_jsonl(const std::vector<TimeSeries>& series, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  write_series_jsonl(series, out);
}

std::vector<TimeSeries> read_series_jsonl(std::istream& in) {
  std::vector<TimeSeries> result;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    result.push_back(series_from_json(ordered_json::parse(line)));
  }
  return result;
}

std::vector<TimeSeries> read_series_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  return read_series_jsonl(in);
}

std::string attribution_to_json(const AttributionMap& map) {
  ordered_json obj;
  obj["method"] = map.method_name;
  obj["t1"] = map.target.t1;
  obj["t2"] = map.target.t2;
  obj["class"] = map.target.target_class;
  obj["delta"] = map.target.delta;
  obj["start_time"] = map.start_time;
  ordered_json rows = ordered_json::array();
  for (int r = 0; r < map.values.rows(); ++r) {
    ordered_json row = ordered_json::array();
    for (int c = 0; c < map.values.cols(); ++c) row.push_back(map.values(r, c));
    rows.push_back(std::move(row));
  }
  obj["values"] = std::move(rows);
  ordered_json params = ordered_json::object();
  if (map.params.n_samples) params["n_samples"] = *map.params.n_samples;
  if (map.params.offset) params["offset"] = *map.params.offset;
  if (map.params.seed) params["seed"] = *map.params.seed;
  obj["params"] = std::move(params);
  return obj.dump();
}

AttributionMap attribution_from_json(const std::string& text) {
  const ordered_json obj = ordered_json::parse(text);
  AttributionMap map;
  map.method_name = obj.at("method").get<std::string>();
  map.target.t1 = obj.at("t1").get<int>();
  map.target.t2 = obj.at("t2").get<int>();
  map.target.target_class = obj.at("class").get<int>();
  map.target.delta = obj.at("delta").get<double>();
  map.start_time = obj.at("start_time").get<int>();
  const auto& rows = obj.at("values");
  const int R = static_cast<int>(rows.size());
  const int D = R > 0 ? static_cast<int>(rows[0].size()) : 0;
  map.values = Matrix(R, D);
  for (int r = 0; r < R; ++r) {
    for (int c = 0; c < D; ++c) map.values(r, c) = rows[r][c].get<double>();
  }
  const auto& params = obj.at("params");
  if (params.contains("n_samples")) map.params.n_samples = params["n_samples"].get<int>();
  if (params.contains("offset")) map.params.offset = params["offset"].get<int>();
  if (params.contains("seed")) map.params.seed = params["seed"].get<uint64_t>();
  return map;
}

}  // namespace deltattr
