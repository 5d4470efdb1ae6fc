#include "deltattr/datagen.hpp"

#include <cmath>
#include <stdexcept>

namespace deltattr {

namespace {

constexpr double kJitter = 1e-8;

// Lower-triangular Cholesky factor of a dense SPD matrix (row-major n x n).
// Returns false if a pivot goes non-positive.
bool cholesky(std::vector<double>& a, int n) {
  for (int j = 0; j < n; ++j) {
    double diag = a[static_cast<size_t>(j) * n + j];
    for (int k = 0; k < j; ++k) {
      const double v = a[static_cast<size_t>(j) * n + k];
      diag -= v * v;
    }
    if (diag <= 0.0) return false;
    const double root = std::sqrt(diag);
    a[static_cast<size_t>(j) * n + j] = root;
    for (int i = j + 1; i < n; ++i) {
      double v = a[static_cast<size_t>(i) * n + j];
      for (int k = 0; k < j; ++k) {
        v -= a[static_cast<size_t>(i) * n + k] * a[static_cast<size_t>(j) * n + k];
      }
      a[static_cast<size_t>(i) * n + j] = v / root;
    }
    for (int k = j + 1; k < n; ++k) a[static_cast<size_t>(j) * n + k] = 0.0;
  }
  return true;
}

// Cholesky factor of the RBF Gram matrix over the integer time grid, with
// one jitter retry before giving up.
std::vector<double> rbf_cholesky(int n, double gamma, double variance) {
  std::vector<double> gram(static_cast<size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double dt = static_cast<double>(i - j);
      gram[static_cast<size_t>(i) * n + j] = variance * std::exp(-gamma * dt * dt);
    }
  }
  std::vector<double> attempt = gram;
  for (int i = 0; i < n; ++i) attempt[static_cast<size_t>(i) * n + i] += kJitter;
  if (cholesky(attempt, n)) return attempt;
  attempt = gram;
  for (int i = 0; i < n; ++i) attempt[static_cast<size_t>(i) * n + i] += 2.0 * kJitter;
  if (cholesky(attempt, n)) return attempt;
  throw std::runtime_error("gen_switch_feature: RBF Gram matrix not positive definite");
}

int sample_categorical(const double* probs, int n, SplitMix64& rng) {
  const double u = rng.uniform01();
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  return n - 1;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

void SwitchFeatureConfig::validate() const {
  if (num_series < 1 || seq_len < 2) {
    throw std::invalid_argument("SwitchFeatureConfig: need num_series >= 1, seq_len >= 2");
  }
  for (const auto& row : transition) {
    double sum = 0.0;
    for (double p : row) {
      if (p < 0.0) throw std::invalid_argument("SwitchFeatureConfig: negative transition prob");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw std::invalid_argument("SwitchFeatureConfig: transition row sums to " +
                                  std::to_string(sum));
    }
  }
  if (rbf_gamma <= 0.0 || marginal_variance <= 0.0) {
    throw std::invalid_argument("SwitchFeatureConfig: gamma and variance must be > 0");
  }
}

std::vector<int> sample_state_path(const SwitchFeatureConfig& cfg, int length, SplitMix64& rng) {
  std::vector<int> states(length);
  states[0] = sample_categorical(cfg.initial_dist.data(), 3, rng);
  for (int t = 1; t < length; ++t) {
    states[t] = sample_categorical(cfg.transition[states[t - 1]].data(), 3, rng);
  }
  return states;
}

std::vector<TimeSeries> gen_switch_feature(const SwitchFeatureConfig& cfg,
                                           std::vector<std::vector<int>>* states_out) {
  cfg.validate();
  const int L = cfg.seq_len;
  const int D = 3;
  const std::vector<double> chol = rbf_cholesky(L, cfg.rbf_gamma, cfg.marginal_variance);

  std::vector<TimeSeries> out;
  out.reserve(cfg.num_series);
  if (states_out) states_out->clear();
  for (int s = 0; s < cfg.num_series; ++s) {
    SplitMix64 rng(derive_stream(cfg.seed, static_cast<uint64_t>(s)));
    TimeSeries series;
    series.series_id = "switch-" + std::to_string(s);
    series.feature_names = {"f0", "f1", "f2"};
    series.values = Matrix(L, D);
    series.labels.resize(L);

    const std::vector<int> states = sample_state_path(cfg, L, rng);
    if (states_out) states_out->push_back(states);

    // one GP draw per feature: x = Lz with z iid standard normal
    std::vector<double> z(L);
    for (int d = 0; d < D; ++d) {
      for (int t = 0; t < L; ++t) z[t] = rng.normal();
      for (int t = 0; t < L; ++t) {
        double x = 0.0;
        for (int k = 0; k <= t; ++k) x += chol[static_cast<size_t>(t) * L + k] * z[k];
        series.values(t, d) = x + cfg.state_means[states[t]][d];
      }
    }
    for (int t = 0; t < L; ++t) {
      const double p = sigmoid(series.values(t, states[t]));
      series.labels[t] = rng.uniform01() < p ? 1 : 0;
    }
    series.validate();
    out.push_back(std::move(series));
  }
  return out;
}

void DelayedSpikeConfig::validate() const {
  if (num_series < 1 || seq_len < 3 || num_features < 1) {
    throw std::invalid_argument("DelayedSpikeConfig: need num_series >= 1, seq_len >= 3");
  }
  if (spike_probability < 0.0 || spike_probability > 1.0) {
    throw std::invalid_argument("DelayedSpikeConfig: spike_probability outside [0, 1]");
  }
  if (trend_slope_max < trend_slope_min) {
    throw std::invalid_argument("DelayedSpikeConfig: empty trend slope range");
  }
}

std::vector<TimeSeries> gen_delayed_spike(const DelayedSpikeConfig& cfg,
                                          std::vector<int>* first_spikes) {
  cfg.validate();
  const int L = cfg.seq_len;
  const int D = cfg.num_features;
  const auto [a0, a1, a2, a3] = cfg.narma_coeffs;
  if (first_spikes) first_spikes->clear();

  std::vector<TimeSeries> out;
  out.reserve(cfg.num_series);
  for (int s = 0; s < cfg.num_series; ++s) {
    SplitMix64 rng(derive_stream(cfg.seed, static_cast<uint64_t>(s)));
    TimeSeries series;
    series.series_id = "spike-" + std::to_string(s);
    series.values = Matrix(L, D);
    series.labels.assign(L, 0);
    for (int d = 0; d < D; ++d) series.feature_names.push_back("f" + std::to_string(d));

    int first_spike = -1;
    for (int d = 0; d < D; ++d) {
      const double slope = rng.uniform(cfg.trend_slope_min, cfg.trend_slope_max);
      double y_prev = 0.0, y_cur = 0.0, u_prev = rng.uniform(0.0, 0.5);
      for (int t = 0; t < L; ++t) {
        const double u_cur = rng.uniform(0.0, 0.5);
        const double y_next = a0 * y_cur + a1 * y_cur * (y_cur + y_prev) + a2 * u_prev * u_cur + a3;
        y_prev = y_cur;
        y_cur = y_next;
        u_prev = u_cur;

        double x = y_cur + slope * t;
        if (rng.uniform01() < cfg.spike_probability) {
          x += cfg.spike_magnitude;
          if (d == 0 && first_spike < 0) first_spike = t;
        }
        series.values(t, d) = x;
      }
    }
    if (first_spike >= 0) {
      for (int t = first_spike + 2; t < L; ++t) series.labels[t] = 1;
    }
    if (first_spikes) first_spikes->push_back(first_spike);
    series.validate();
    out.push_back(std::move(series));
  }
  return out;
}

std::array<double, 3> stationary_distribution(
    const std::array<std::array<double, 3>, 3>& transition) {
  std::array<double, 3> pi = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  for (int iter = 0; iter < 10000; ++iter) {
    std::array<double, 3> next = {0.0, 0.0, 0.0};
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) next[j] += pi[i] * transition[i][j];
    }
    double diff = 0.0;
    for (int j = 0; j < 3; ++j) diff += std::abs(next[j] - pi[j]);
    pi = next;
    if (diff < 1e-15) break;
  }
  return pi;
}

Splits make_splits(int num_series, double train_ratio, double val_ratio, uint64_t seed) {
  if (num_series < 1) throw std::invalid_argument("make_splits: num_series must be >= 1");
  if (train_ratio < 0.0 || val_ratio < 0.0 || train_ratio + val_ratio > 1.0) {
    throw std::invalid_argument("make_splits: invalid ratios");
  }
  std::vector<int> indices(num_series);
  for (int i = 0; i < num_series; ++i) indices[i] = i;
  SplitMix64 rng(seed);
  shuffle(indices, rng);

  const int n_train = static_cast<int>(std::floor(train_ratio * num_series));
  const int n_val = static_cast<int>(std::floor(val_ratio * num_series));
  Splits splits;
  splits.train.assign(indices.begin(), indices.begin() + n_train);
  splits.val.assign(indices.begin() + n_train, indices.begin() + n_train + n_val);
  splits.test.assign(indices.begin() + n_train + n_val, indices.end());
  return splits;
}

}  // namespace deltattr
