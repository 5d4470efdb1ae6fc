// Faithfulness / sufficiency evaluation of prediction-change attributions.
//
// All metrics operate on the wrapper's concatenated input, the rows from
// min(t1,t2)-W+1 to max(t1,t2) of the series (the same frame attribution maps
// use; row indices below are relative to that frame). Cells are removed
// sequentially in saliency order and each removal is scored by the L1 change
// of the wrapper output:
//
//   CPD(K)  = sum_{k=0}^{K-1} ||g(X_k) - g(X_{k+1})||_1,  top-k removal
//   CPP(K)  = same with the least salient cells removed first
//   AUPD(K) = (1/2K) sum_{k=1}^{K} (CPD(k) + CPD(k-1)),   AUPP analogous
//
// Removed cells are substituted by forward filling: each removed (t, d) takes
// the value of the nearest earlier row on feature d that is itself not
// removed, and keeps its original value when no such row exists. The
// substituted input is a pure function of (original, removed set), so removal
// step k is always reconstructed from scratch. Zero and feature-average
// substitution exist behind the same interface for comparison demos only.
//
// Macro variants (MPD, MPP, AUMPD, AUMPP) rank cells by a centered
// sliding-window average of the per-step attribution maps of the whole
// series instead of the raw map. Corr is the Pearson correlation between the
// top-K / bottom-K attribution magnitudes and the realized per-removal
// wrapper changes of the corresponding removal sequences; it is reported as
// missing when either side has zero variance.
//
// Saliency ties are broken deterministically: magnitude first, then earlier
// time, then lower feature index.
#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "deltattr/core.hpp"

namespace deltattr {

enum class Substitution { forward_fill, zero, average };

std::string substitution_name(Substitution mode);

struct Cell {
  int row = 0;  // relative to the concatenated frame
  int col = 0;
  bool operator==(const Cell&) const = default;
};

// Working state of a sequential-removal run: the original concatenated input
// plus the set (and order) of removed cells. reconstruct() applies the
// substitution rule from scratch, keeping it a pure function of the state.
struct RemovalState {
  Matrix original;
  std::vector<Cell> removed;

  Matrix reconstruct(Substitution mode) const;
};

// Substituted copy of `original` with every cell in `removed` replaced per
// the mode. Throws on out-of-range coordinates.
Matrix substitute_removed(const Matrix& original, const std::vector<Cell>& removed,
                          Substitution mode);
Matrix forward_fill_remove(const Matrix& original, const std::vector<Cell>& removed);

// All cells of `scores` ordered by |score| (descending when most_first),
// ties by earlier row then lower column.
std::vector<Cell> saliency_order(const Matrix& scores, bool most_first);

// The concatenated wrapper input for a target (rows start_time .. max t).
Matrix concatenated_input(const TimeSeries& series, const WindowSpec& spec,
                          const ChangeTarget& target);

struct RemovalCurve {
  std::vector<double> steps;  // per-removal L1 wrapper change, length K

  double total() const;
};

// Removes order[0..K) one cell at a time and records each step's L1 change
// of the wrapper output (all classes).
RemovalCurve removal_curve(const Classifier& f, const TimeSeries& series, const WindowSpec& spec,
                           const ChangeTarget& target, const std::vector<Cell>& order, int K,
                           Substitution mode);

struct CurveResult {
  double value = 0.0;          // CPD(K) or CPP(K)
  std::vector<double> steps;   // the per-step sequence behind it
};

CurveResult cpd(const Classifier& f, const TimeSeries& series, const WindowSpec& spec,
                const ChangeTarget& target, const AttributionMap& attribution, int K,
                Substitution mode = Substitution::forward_fill);
CurveResult cpp(const Classifier& f, const TimeSeries& series, const WindowSpec& spec,
                const ChangeTarget& target, const AttributionMap& attribution, int K,
                Substitution mode = Substitution::forward_fill);

// Prefix-averaged area variants, computed from a removal curve without
// re-removal. steps must hold at least K entries.
double area_under_curve(const std::vector<double>& steps, int K);
double aupd(const Classifier& f, const TimeSeries& series, const WindowSpec& spec,
            const ChangeTarget& target, const AttributionMap& attribution, int K,
            Substitution mode = Substitution::forward_fill);
double aupp(const Classifier& f, const TimeSeries& series, const WindowSpec& spec,
            const ChangeTarget& target, const AttributionMap& attribution, int K,
            Substitution mode = Substitution::forward_fill);

// Sliding-window average of per-step maps (targets with t2 = t1+1) over one
// series: each cell averages the values of every per-step map that covers it
// (references T' from t to t+W, clipped at the series boundaries and at the
// valid reference range). values/counts span the full series; cells nobody
// covers have count 0 and value 0. A single-map series aggregates to that map
// itself, keeping the macro metrics equal to the raw ones in that case.
struct MacroMap {
  Matrix values;  // L x D
  Matrix counts;  // L x D, number of contributing maps per cell
};

MacroMap macro_aggregate(const std::vector<AttributionMap>& per_step_maps, const WindowSpec& spec,
                         int series_length);

// Macro metrics: identical removal machinery, ranking by the macro map.
CurveResult mpd(const Classifier& f, const TimeSeries& series, const WindowSpec& spec,
                const ChangeTarget& target, const MacroMap& macro, int K,
                Substitution mode = Substitution::forward_fill);
CurveResult mpp(const Classifier& f, const TimeSeries& series, const WindowSpec& spec,
                const ChangeTarget& target, const MacroMap& macro, int K,
                Substitution mode = Substitution::forward_fill);

// Pearson correlation between attribution magnitudes and realized removal
// effects: the k-th most salient cell pairs with the k-th top-removal step,
// the k-th least salient cell with the k-th bottom-removal step. Requires
// 2K <= cell count. Missing when either vector has zero variance.
std::optional<double> corr_metric(const Classifier& f, const TimeSeries& series,
                                  const WindowSpec& spec, const ChangeTarget& target,
                                  const AttributionMap& attribution, int K,
                                  Substitution mode = Substitution::forward_fill);

// ---------------------------------------------------------------------------
// Evaluation suite

struct EvalTarget {
  int series_index = 0;
  ChangeTarget target;
};

// An attribution method plugged into the suite. fn must be deterministic
// given (series, target, run_seed); min_t1 is the smallest t1 the method can
// attribute (W-1+d for retrospective-baseline methods).
struct Attributor {
  std::string name;
  int min_t1 = 0;
  std::function<AttributionMap(const TimeSeries& series, int series_index,
                               const ChangeTarget& target, uint64_t run_seed)>
      fn;
};

struct SampleRow {
  uint64_t seed = 0;
  std::string series_id;
  ChangeTarget target;
  double cpd = 0, aupd = 0, mpd = 0, aumpd = 0;
  double cpp = 0, aupp = 0, mpp = 0, aumpp = 0;
  std::optional<double> corr;

  double metric(const std::string& name) const;
};

struct MetricSummary {
  double mean = 0.0;
  double stderr_ = 0.0;
  int n = 0;
};

// Per-sample rows plus pooled mean and standard error per metric. Stored
// values are unscaled; display_scale records the conventional x1000 applied
// to everything but Corr when printing.
struct MetricReport {
  std::string method;
  int K = 0;
  Substitution substitution = Substitution::forward_fill;
  double display_scale = 1000.0;
  std::vector<SampleRow> rows;
  std::map<std::string, MetricSummary> summary;

  static const std::vector<std::string>& metric_names();
  void recompute_summary();
};

// Runs all nine metrics for every (seed, target) pair. Per-step maps needed
// by the macro metrics are computed once per (seed, series) and reused as the
// raw map whenever the target itself is a consecutive-step pair. jobs > 1
// parallelizes across series; results are bit-identical for any job count.
MetricReport evaluate_suite(const Classifier& f, const std::vector<TimeSeries>& dataset,
                            const WindowSpec& spec, const std::vector<EvalTarget>& targets,
                            const Attributor& attributor, int K,
                            const std::vector<uint64_t>& seeds,
                            Substitution mode = Substitution::forward_fill, int jobs = 1);

void write_report_csv(const MetricReport& report, std::ostream& out);
void write_report_json(const MetricReport& report, std::ostream& out);
MetricReport read_report_json(std::istream& in);

}  // namespace deltattr
