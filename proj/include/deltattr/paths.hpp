// Line-integral attribution engine and the SWING attributor.
//
// Attribution of a prediction change integrates the model gradient along
// paths in window space. A Path is piecewise affine on [0, 1]; the integrator
// applies the trapezoid rule on a uniform alpha grid over the whole path,
// with n_samples rounded UP to the nearest multiple of the segment count so
// every segment boundary is a grid point (the trapezoid rule only converges
// at O(1/n^2) if the kinks are grid points). Refining n_samples by an integer
// factor therefore never moves the boundary samples.
//
// SWING composes three ingredients:
//   - retrospective baselines: the baseline for the window ending at T is the
//     observed window ending at T - d (default d = 1);
//   - piecewise historical paths: instead of a straight line, the path from
//     the window ending at A to the window ending at B walks through every
//     observed window in between, so all sampled points are convex
//     combinations of two consecutive observed windows;
//   - dual-path combination: all four baseline/endpoint pairs are integrated
//     and combined with coefficients +1/2, +1/2, -1/2, -1/2, which makes the
//     attributions sum to the prediction change.
//
// Scatter convention: a path integral lives in W x D window coordinates; the
// global attribution map is indexed by absolute time. Each segment of a path
// runs toward the observed window ending at some time e, and that segment's
// integral is added to the map rows e-W+1 .. e. With d <= 1 every such row
// lies inside the map. With d >= 2 the first baseline-approach segments reach
// windows earlier than the map's range; rows that fall before the map are
// dropped (those segments appear in two paths with opposite signs and cancel
// up to quadrature error, so the completeness property degrades only at the
// quadrature level for d >= 2).
//
// Worked 2-segment example (W=3, d=1, t1=49, t2=50): the path from the window
// ending at 48 to the window ending at 50 has segments 48->49 and 49->50. The
// first segment's W x D integral is added to map rows for times 47, 48, 49;
// the second segment's to times 48, 49, 50. The map spans times 47..50.
#pragma once

#include <vector>

#include "deltattr/core.hpp"

namespace deltattr {

struct IntegratorConfig {
  int n_samples = 50;

  void validate() const;
};

// Piecewise-affine curve in window space. eval(0) is the baseline, eval(1)
// the endpoint; there are exactly segment_count() affine pieces (0 for the
// degenerate single-point path, whose integral is zero).
class Path {
 public:
  virtual ~Path() = default;

  virtual int window_size() const = 0;
  virtual int num_features() const = 0;
  virtual int segment_count() const = 0;
  virtual Matrix eval(double alpha) const = 0;

  // Point within segment k at local ratio in [0, 1]; exact at the ends, so
  // integrators can walk segments without floating-point boundary issues.
  virtual Matrix eval_segment(int k, double ratio) const = 0;
};

class StraightPath final : public Path {
 public:
  StraightPath(Matrix baseline, Matrix endpoint);

  int window_size() const override { return baseline_.rows(); }
  int num_features() const override { return baseline_.cols(); }
  int segment_count() const override { return 1; }
  Matrix eval(double alpha) const override;
  Matrix eval_segment(int k, double ratio) const override;

  const Matrix& baseline() const { return baseline_; }
  const Matrix& endpoint() const { return endpoint_; }

 private:
  Matrix baseline_, endpoint_;
};

// Path through observed history: waypoint k is the series window ending at
// anchor_from + sigma * k, for k = 0 .. m with m = |anchor_to - anchor_from|.
// Every evaluated point is a convex combination of two consecutive observed
// windows. Holds a reference to the series; the series must outlive the path.
class PiecewisePath final : public Path {
 public:
  PiecewisePath(const TimeSeries& series, const WindowSpec& spec, int anchor_from, int anchor_to);

  int window_size() const override { return window_; }
  int num_features() const override { return series_->num_features(); }
  int segment_count() const override { return segments_; }
  Matrix eval(double alpha) const override;
  Matrix eval_segment(int k, double ratio) const override;

  int direction() const { return sigma_; }
  int anchor_from() const { return anchor_from_; }
  int anchor_to() const { return anchor_to_; }
  int waypoint_end_time(int k) const { return anchor_from_ + sigma_ * k; }
  Matrix waypoint(int k) const;

 private:
  const TimeSeries* series_;
  int window_;
  int anchor_from_, anchor_to_;
  int segments_, sigma_;
};

PiecewisePath piecewise_path(const TimeSeries& series, const WindowSpec& spec, int anchor_from,
                             int anchor_to);

// The observed window ending at T - offset_d; offset_d = 0 is the input
// window itself, offset_d = 1 the immediately preceding window.
Matrix retrospective_baseline(const TimeSeries& series, const WindowSpec& spec, int end_time,
                              int offset_d);

// Trapezoid line integral of grad f_c dotted with the path velocity, one
// W x D matrix per segment (empty for degenerate paths). The sum over
// segments approximates f(endpoint)_c - f(baseline)_c.
std::vector<Matrix> ig_segment_integrals(const Classifier& f, const Path& path, int target_class,
                                         const IntegratorConfig& cfg);

// Whole-path integral in window coordinates: the sum of the per-segment
// integrals. Exact for affine models at n_samples = 1 on straight paths.
Matrix ig_line_integral(const Classifier& f, const Path& path, int target_class,
                        const IntegratorConfig& cfg);

// Full SWING: retrospective baselines, piecewise historical paths, all four
// baseline/endpoint pairs with coefficients +1/2, +1/2, -1/2, -1/2.
// With reverse = true the change is attributed in the t2 -> t1 direction
// (the returned map's target has the times swapped and delta negated).
AttributionMap swing_attribute(const Classifier& f, const TimeSeries& series,
                               const WindowSpec& spec, const ChangeTarget& target,
                               const IntegratorConfig& cfg, int offset_d = 1,
                               bool reverse = false);

// Ablation without the dual-path combination: only the two same-index paths
// (baseline of t2 -> window of t2, minus baseline of t1 -> window of t1).
AttributionMap rbs_attribute(const Classifier& f, const TimeSeries& series, const WindowSpec& spec,
                             const ChangeTarget& target, const IntegratorConfig& cfg,
                             int offset_d = 1, bool reverse = false);

// Ablation without retrospective baselines or historical paths: straight-path
// integrated gradients from the all-zeros window to each input window,
// subtracted and scattered by absolute time.
AttributionMap zero_baseline_ig_change(const Classifier& f, const TimeSeries& series,
                                       const WindowSpec& spec, const ChangeTarget& target,
                                       const IntegratorConfig& cfg, bool reverse = false);

}  // namespace deltattr
