// Domain types and window arithmetic for prediction-change attribution.
//
// Indexing convention, used everywhere in this codebase: all time indices are
// 0-based, and "the window ending at T" means the half-open row range
// [T - W + 1, T + 1) of the series, i.e. rows T-W+1 .. T inclusive. A window
// ending at T exists iff W - 1 <= T < L.
//
// A prediction change is described by a ChangeTarget (t1, t2, target_class,
// delta): the change of class `target_class`'s probability between the window
// ending at t1 and the window ending at t2. Attribution maps for that change
// cover absolute times t1 - W + 1 .. t2, one row per time step.
//
// All types here are immutable after construction, and Classifier
// implementations are required to be pure (same input, bit-identical output)
// and safe to share read-only across threads.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "deltattr/matrix.hpp"

namespace deltattr {

struct TimeSeries {
  Matrix values;                           // L x D
  std::vector<int> labels;                 // length L, values in {0..C-1}
  std::vector<std::string> feature_names;  // length D
  std::string series_id;

  int length() const { return values.rows(); }
  int num_features() const { return values.cols(); }

  // Checks shape agreement and that values are finite.
  void validate() const;
};

struct WindowSpec {
  int window_size = 2;  // W
  int num_classes = 2;  // C

  void validate() const;
};

// Differentiable-classifier contract. predict() returns class probabilities
// (all entries >= 0, summing to 1) unless probabilistic() is false; grad()
// returns the exact derivative of predict()[target_class] w.r.t. every window
// entry. Both must be pure functions of the input.
class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual int window_size() const = 0;
  virtual int num_features() const = 0;
  virtual int num_classes() const = 0;

  virtual std::vector<double> predict(const Matrix& window) const = 0;
  virtual Matrix grad(const Matrix& window, int target_class) const = 0;

  // False only for score-space oracle models whose outputs are not a simplex.
  virtual bool probabilistic() const { return true; }

 protected:
  void check_window(const Matrix& window) const;
  void check_class(int target_class) const;
};

struct ChangeTarget {
  int t1 = 0;
  int t2 = 0;
  int target_class = 0;
  double delta = 0.0;
};

// Validates the index invariants W <= t1 < t2 < L and t2 - t1 < W.
void validate_target(const ChangeTarget& target, const WindowSpec& spec, int series_length);

struct AttributionParams {
  std::optional<int> n_samples;
  std::optional<int> offset;
  std::optional<uint64_t> seed;
};

// Signed per-(time, feature) attribution of one prediction change. Row r of
// `values` belongs to absolute time start_time + r; the map always spans
// |t2 - t1| + W rows ending at max(t1, t2).
struct AttributionMap {
  int start_time = 0;
  Matrix values;
  ChangeTarget target;
  std::string method_name;
  AttributionParams params;

  int row_of_time(int absolute_t) const { return absolute_t - start_time; }
  int end_time() const { return start_time + values.rows() - 1; }
};

// Rows T-W+1 .. T of the series. Throws std::out_of_range naming T, W, L when
// the window does not exist.
Matrix extract_window(const TimeSeries& series, const WindowSpec& spec, int end_time);

// The class with the largest probability increase between the windows ending
// at t1 and t2; ties go to the lowest class index.
ChangeTarget select_target_class(const Classifier& f, const TimeSeries& series,
                                 const WindowSpec& spec, int t1, int t2);

// g(X_{t1-W+1:t2}) = f(window ending at t2) - f(window ending at t1),
// componentwise over classes. Needs only t1 >= W - 1.
std::vector<double> wrapper_eval(const Classifier& f, const TimeSeries& series,
                                 const WindowSpec& spec, int t1, int t2);

// Same difference on explicit windows; used by metrics, which evaluate g on
// perturbed inputs that no longer live in any series.
std::vector<double> wrapper_eval_perturbed(const Classifier& f, const WindowSpec& spec,
                                           const Matrix& window1, const Matrix& window2);

// JSON-Lines serialization, one object per series with fields in the order
// series_id, features, values, labels.
void write_series_jsonl(const std::vector<TimeSeries>& series, std::ostream& out);
void write_series_jsonl(const std::vector<TimeSeries>& series, const std::string& path);
std::vector<TimeSeries> read_series_jsonl(std::istream& in);
std::vector<TimeSeries> read_series_jsonl(const std::string& path);

// AttributionMap serialization (single JSON object per map).
std::string attribution_to_json(const AttributionMap& map);
AttributionMap attribution_from_json(const std::string& text);

}  // namespace deltattr
