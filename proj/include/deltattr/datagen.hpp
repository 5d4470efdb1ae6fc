// Seeded synthetic benchmark generators.
//
// Switch-Feature: a three-state hidden Markov chain selects which feature
// drives the label. Each feature carries an independent Gaussian-process draw
// (RBF kernel, k(a, b) = variance * exp(-gamma (a-b)^2)) shifted by the
// active state's mean vector, and the label is Bernoulli(sigmoid(x)) of the
// state's designated feature.
//
// Delayed Spike: three NARMA(2) base signals with a per-series linear trend
// and sparse additive spikes; the label switches to 1 exactly two steps after
// the first spike in feature 0 and stays 1. NARMA coefficients, spike
// magnitude and spike rate are fixed defaults here, so absolute scores on
// this benchmark are only comparable within this codebase.
//
// Generation is a pure function of (config, seed): each series draws from its
// own stream derived from (seed, series index), so parallel generation order
// can never change the data.
#pragma once

#include <array>
#include <string>
#include <vector>

#include "deltattr/core.hpp"
#include "deltattr/rng.hpp"

namespace deltattr {

struct SwitchFeatureConfig {
  int num_series = 100;
  int seq_len = 100;
  int window = 50;  // recorded for downstream training; not used in generation
  std::array<double, 3> initial_dist = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  std::array<std::array<double, 3>, 3> transition = {{{0.95, 0.02, 0.03},
                                                      {0.02, 0.95, 0.03},
                                                      {0.03, 0.02, 0.95}}};
  double rbf_gamma = 0.2;
  double marginal_variance = 0.1;
  std::array<std::array<double, 3>, 3> state_means = {{{0.8, 0.5, 0.2},
                                                       {0.0, 1.0, 0.0},
                                                       {0.2, 0.2, 0.8}}};
  uint64_t seed = 7;

  void validate() const;
};

struct DelayedSpikeConfig {
  int num_series = 100;
  int seq_len = 40;
  int num_features = 3;
  double spike_probability = 0.02;  // per step and feature
  double spike_magnitude = 2.0;
  // y_{t+1} = a0 y_t + a1 y_t (y_t + y_{t-1}) + a2 u_{t-1} u_t + a3
  std::array<double, 4> narma_coeffs = {0.3, 0.05, 1.5, 0.1};
  double trend_slope_min = 0.0;
  double trend_slope_max = 0.02;
  uint64_t seed = 7;

  void validate() const;
};

// states_out, when given, receives each series' hidden state path.
std::vector<TimeSeries> gen_switch_feature(const SwitchFeatureConfig& cfg,
                                           std::vector<std::vector<int>>* states_out = nullptr);

// first_spikes, when given, receives the time of the first feature-0 spike
// per series (-1 when the series has none).
std::vector<TimeSeries> gen_delayed_spike(const DelayedSpikeConfig& cfg,
                                          std::vector<int>* first_spikes = nullptr);

// Markov state path of the Switch-Feature chain; exposed so chain statistics
// can be checked without paying for GP draws.
std::vector<int> sample_state_path(const SwitchFeatureConfig& cfg, int length, SplitMix64& rng);

// Left stationary distribution of the 3x3 transition matrix (power method).
std::array<double, 3> stationary_distribution(const std::array<std::array<double, 3>, 3>& transition);

struct Splits {
  std::vector<int> train, val, test;
};

// Seeded disjoint index split; test gets the remainder.
Splits make_splits(int num_series, double train_ratio, double val_ratio, uint64_t seed);

}  // namespace deltattr
