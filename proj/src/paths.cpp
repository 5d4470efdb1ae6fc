#include "deltattr/paths.hpp"

#include <cmath>
#include <string>

namespace deltattr {

void IntegratorConfig::validate() const {
  if (n_samples < 1) {
    throw std::invalid_argument("IntegratorConfig: n_samples must be >= 1, got " +
                                std::to_string(n_samples));
  }
}

// ---------------------------------------------------------------------------
// Paths

StraightPath::StraightPath(Matrix baseline, Matrix endpoint)
    : baseline_(std::move(baseline)), endpoint_(std::move(endpoint)) {
  if (!baseline_.same_shape(endpoint_)) {
    throw std::invalid_argument("StraightPath: baseline and endpoint shapes differ");
  }
}

Matrix StraightPath::eval(double alpha) const { return lerp(baseline_, endpoint_, alpha); }

Matrix StraightPath::eval_segment(int k, double ratio) const {
  if (k != 0) throw std::out_of_range("StraightPath: segment index must be 0");
  return lerp(baseline_, endpoint_, ratio);
}

PiecewisePath::PiecewisePath(const TimeSeries& series, const WindowSpec& spec, int anchor_from,
                             int anchor_to)
    : series_(&series),
      window_(spec.window_size),
      anchor_from_(anchor_from),
      anchor_to_(anchor_to),
      segments_(std::abs(anchor_to - anchor_from)),
      sigma_(anchor_to >= anchor_from ? 1 : -1) {
  const int lo = std::min(anchor_from, anchor_to);
  const int hi = std::max(anchor_from, anchor_to);
  if (lo < window_ - 1 || hi >= series.length()) {
    throw std::out_of_range(
        "PiecewisePath: anchors " + std::to_string(anchor_from) + ".." + std::to_string(anchor_to) +
        " need history rows " + std::to_string(lo - window_ + 1) + ".." + std::to_string(hi) +
        " but series has rows 0.." + std::to_string(series.length() - 1));
  }
}

Matrix PiecewisePath::waypoint(int k) const {
  if (k < 0 || k > segments_) {
    throw std::out_of_range("PiecewisePath: waypoint " + std::to_string(k) + " outside 0.." +
                            std::to_string(segments_));
  }
  WindowSpec spec{window_, 2};
  return extract_window(*series_, spec, waypoint_end_time(k));
}

Matrix PiecewisePath::eval(double alpha) const {
  if (alpha < 0.0 || alpha > 1.0) {
    throw std::out_of_range("PiecewisePath: alpha outside [0, 1]");
  }
  if (segments_ == 0) return waypoint(0);
  // floor formula; the closed endpoint alpha = 1 takes k = m - 1, ratio = 1.
  int k = static_cast<int>(std::floor(alpha * segments_));
  if (k >= segments_) k = segments_ - 1;
  const double ratio = alpha * segments_ - k;
  return eval_segment(k, ratio);
}

Matrix PiecewisePath::eval_segment(int k, double ratio) const {
  if (k < 0 || k >= std::max(segments_, 1)) {
    throw std::out_of_range("PiecewisePath: segment " + std::to_string(k) + " outside 0.." +
                            std::to_string(segments_ - 1));
  }
  if (segments_ == 0) return waypoint(0);
  return lerp(waypoint(k), waypoint(k + 1), ratio);
}

PiecewisePath piecewise_path(const TimeSeries& series, const WindowSpec& spec, int anchor_from,
                             int anchor_to) {
  spec.validate();
  return PiecewisePath(series, spec, anchor_from, anchor_to);
}

Matrix retrospective_baseline(const TimeSeries& series, const WindowSpec& spec, int end_time,
                              int offset_d) {
  if (offset_d < 0) {
    throw std::invalid_argument("retrospective_baseline: offset must be >= 0");
  }
  const int base_end = end_time - offset_d;
  if (base_end < spec.window_size - 1) {
    throw std::out_of_range("retrospective_baseline: window ending at T-d=" +
                            std::to_string(base_end) + " needs " +
                            std::to_string(spec.window_size) + " rows of history; series has " +
                            std::to_string(base_end + 1) + " up to that point");
  }
  return extract_window(series, spec, base_end);
}

// ---------------------------------------------------------------------------
// Trapezoid line integrals

std::vector<Matrix> ig_segment_integrals(const Classifier& f, const Path& path, int target_class,
                                         const IntegratorConfig& cfg) {
  cfg.validate();
  const int m = path.segment_count();
  if (m == 0) return {};

  // steps per segment, with n_samples rounded up to a multiple of m
  const int steps = (cfg.n_samples + m - 1) / m;

  std::vector<Matrix> integrals;
  integrals.reserve(m);

  Matrix x_prev = path.eval_segment(0, 0.0);
  x_prev.require_shape(f.window_size(), f.num_features(), "ig path point");
  Matrix g_prev = f.grad(x_prev, target_class);

  for (int k = 0; k < m; ++k) {
    Matrix acc(x_prev.rows(), x_prev.cols());
    for (int j = 1; j <= steps; ++j) {
      const Matrix x = path.eval_segment(k, static_cast<double>(j) / steps);
      const Matrix g = f.grad(x, target_class);
      for (int r = 0; r < acc.rows(); ++r) {
        for (int c = 0; c < acc.cols(); ++c) {
          acc(r, c) += (x(r, c) - x_prev(r, c)) * 0.5 * (g(r, c) + g_prev(r, c));
        }
      }
      x_prev = x;
      g_prev = g;
    }
    integrals.push_back(std::move(acc));
    // the segment's closing point is the next segment's opening point, so
    // x_prev / g_prev carry over
  }
  return integrals;
}

Matrix ig_line_integral(const Classifier& f, const Path& path, int target_class,
                        const IntegratorConfig& cfg) {
  const std::vector<Matrix> segments = ig_segment_integrals(f, path, target_class, cfg);
  Matrix total(path.window_size(), path.num_features());
  for (const Matrix& seg : segments) total.add_scaled(seg, 1.0);
  return total;
}

// ---------------------------------------------------------------------------
// Attributors

namespace {

AttributionMap make_map(const ChangeTarget& target, const WindowSpec& spec, int num_features,
                        std::string method, const IntegratorConfig* cfg, int offset_d) {
  AttributionMap map;
  map.start_time = std::min(target.t1, target.t2) - spec.window_size + 1;
  map.values = Matrix(std::abs(target.t2 - target.t1) + spec.window_size, num_features);
  map.target = target;
  map.method_name = std::move(method);
  if (cfg) map.params.n_samples = cfg->n_samples;
  if (offset_d >= 0) map.params.offset = offset_d;
  return map;
}

// Adds coeff * seg into the map rows of the window ending at end_time. Rows
// before the map's start can only occur for offset_d >= 2 and are dropped
// (see the scatter notes in the header).
void scatter_add(AttributionMap& map, const Matrix& seg, int end_time, double coeff) {
  const int W = seg.rows();
  for (int r = 0; r < W; ++r) {
    const int row = map.row_of_time(end_time - W + 1 + r);
    if (row < 0 || row >= map.values.rows()) continue;
    for (int c = 0; c < seg.cols(); ++c) map.values(row, c) += coeff * seg(r, c);
  }
}

void add_piecewise_integral(AttributionMap& map, const Classifier& f, const TimeSeries& series,
                            const WindowSpec& spec, int anchor_from, int anchor_to,
                            int target_class, const IntegratorConfig& cfg, double coeff) {
  const PiecewisePath path = piecewise_path(series, spec, anchor_from, anchor_to);
  const std::vector<Matrix> segments = ig_segment_integrals(f, path, target_class, cfg);
  for (int k = 0; k < static_cast<int>(segments.size()); ++k) {
    scatter_add(map, segments[k], path.waypoint_end_time(k + 1), coeff);
  }
}

struct Orientation {
  int from;  // time whose prediction the change starts at
  int to;    // time whose prediction the change ends at
};

Orientation orient(const ChangeTarget& target, bool reverse) {
  return reverse ? Orientation{target.t2, target.t1} : Orientation{target.t1, target.t2};
}

ChangeTarget oriented_target(const ChangeTarget& target, bool reverse) {
  if (!reverse) return target;
  return ChangeTarget{target.t2, target.t1, target.target_class, -target.delta};
}

void check_swing_history(const ChangeTarget& target, const WindowSpec& spec, int series_length,
                         int offset_d) {
  validate_target(target, spec, series_length);
  if (offset_d < 0) throw std::invalid_argument("swing: offset must be >= 0");
  const int needed = spec.window_size + offset_d - 1;
  if (target.t1 < needed) {
    throw std::out_of_range("swing: baseline window ending at t1-d=" +
                            std::to_string(target.t1 - offset_d) + " requires t1 >= " +
                            std::to_string(needed) + " (W=" + std::to_string(spec.window_size) +
                            ", d=" + std::to_string(offset_d) + "), got t1=" +
                            std::to_string(target.t1));
  }
}

}  // namespace

AttributionMap swing_attribute(const Classifier& f, const TimeSeries& series,
                               const WindowSpec& spec, const ChangeTarget& target,
                               const IntegratorConfig& cfg, int offset_d, bool reverse) {
  check_swing_history(target, spec, series.length(), offset_d);
  const auto [from, to] = orient(target, reverse);
  AttributionMap map = make_map(oriented_target(target, reverse), spec, series.num_features(),
                                "swing", &cfg, offset_d);
  const int c = target.target_class;
  // all four baseline/endpoint pairs: gamma_{i,j} runs from the baseline
  // anchor of T_i to the window of T_j
  add_piecewise_integral(map, f, series, spec, from - offset_d, to, c, cfg, +0.5);
  add_piecewise_integral(map, f, series, spec, to - offset_d, to, c, cfg, +0.5);
  add_piecewise_integral(map, f, series, spec, from - offset_d, from, c, cfg, -0.5);
  add_piecewise_integral(map, f, series, spec, to - offset_d, from, c, cfg, -0.5);
  return map;
}

AttributionMap rbs_attribute(const Classifier& f, const TimeSeries& series, const WindowSpec& spec,
                             const ChangeTarget& target, const IntegratorConfig& cfg, int offset_d,
                             bool reverse) {
  check_swing_history(target, spec, series.length(), offset_d);
  const auto [from, to] = orient(target, reverse);
  AttributionMap map = make_map(oriented_target(target, reverse), spec, series.num_features(),
                                "rbs", &cfg, offset_d);
  const int c = target.target_class;
  add_piecewise_integral(map, f, series, spec, to - offset_d, to, c, cfg, +1.0);
  add_piecewise_integral(map, f, series, spec, from - offset_d, from, c, cfg, -1.0);
  return map;
}

AttributionMap zero_baseline_ig_change(const Classifier& f, const TimeSeries& series,
                                       const WindowSpec& spec, const ChangeTarget& target,
                                       const IntegratorConfig& cfg, bool reverse) {
  validate_target(target, spec, series.length());
  cfg.validate();
  const auto [from, to] = orient(target, reverse);
  AttributionMap map = make_map(oriented_target(target, reverse), spec, series.num_features(),
                                "ig-zero", &cfg, -1);
  const Matrix zeros(spec.window_size, series.num_features());
  for (const auto& [end_time, coeff] : {std::pair{to, +1.0}, std::pair{from, -1.0}}) {
    const StraightPath path(zeros, extract_window(series, spec, end_time));
    const std::vector<Matrix> segments = ig_segment_integrals(f, path, target.target_class, cfg);
    scatter_add(map, segments[0], end_time, coeff);
  }
  return map;
}

}  // namespace deltattr
