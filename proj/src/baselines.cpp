#include "deltattr/baselines.hpp"

#include "deltattr/rng.hpp"

namespace deltattr {

AttributionMap occlusion_attribute(const Classifier& f, const TimeSeries& series,
                                   const WindowSpec& spec, const ChangeTarget& target) {
  validate_target(target, spec, series.length());
  const int W = spec.window_size;
  const int D = series.num_features();

  AttributionMap map;
  map.start_time = target.t1 - W + 1;
  map.values = Matrix(target.t2 - target.t1 + W, D);
  map.target = target;
  map.method_name = "occlusion";

  // concatenated input of the wrapper, rows map.start_time .. t2
  const int rows = map.values.rows();
  Matrix input(rows, D);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < D; ++c) input(r, c) = series.values(map.start_time + r, c);
  }

  const auto eval_g = [&](const Matrix& x) {
    Matrix w1(W, D), w2(W, D);
    for (int r = 0; r < W; ++r) {
      for (int c = 0; c < D; ++c) {
        w1(r, c) = x(r, c);
        w2(r, c) = x(rows - W + r, c);
      }
    }
    return wrapper_eval_perturbed(f, spec, w1, w2)[target.target_class];
  };

  const double g_original = eval_g(input);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < D; ++c) {
      if (r == 0) continue;  // no predecessor in range: zero attribution
      const double kept = input(r, c);
      input(r, c) = input(r - 1, c);
      map.values(r, c) = g_original - eval_g(input);
      input(r, c) = kept;
    }
  }
  return map;
}

AttributionMap random_attribute(const TimeSeries& series, const WindowSpec& spec,
                                const ChangeTarget& target, uint64_t seed) {
  validate_target(target, spec, series.length());
  AttributionMap map;
  map.start_time = target.t1 - spec.window_size + 1;
  map.values = Matrix(target.t2 - target.t1 + spec.window_size, series.num_features());
  map.target = target;
  map.method_name = "random";
  map.params.seed = seed;
  SplitMix64 rng(seed);
  for (int r = 0; r < map.values.rows(); ++r) {
    for (int c = 0; c < map.values.cols(); ++c) map.values(r, c) = rng.uniform(-1.0, 1.0);
  }
  return map;
}

}  // namespace deltattr
