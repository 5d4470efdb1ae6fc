// Built-in differentiable classifiers with hand-written exact gradients, plus
// a minimal deterministic SGD trainer. Nothing here aims for benchmark
// accuracy; the models exist so attribution math can be verified end to end
// without an external ML stack.
//
// Weight initialization: every weight matrix is filled uniformly in
// [-1/sqrt(fan_in), +1/sqrt(fan_in)] by one SplitMix64 stream seeded with the
// constructor seed, drawing parameters in the exact flat order documented at
// each model's parameter layout; biases start at zero. Training is
// single-threaded and bit-reproducible given TrainConfig::seed.
#pragma once

#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "deltattr/core.hpp"

namespace deltattr {

// A classifier whose parameters live in one flat vector, so it can be trained
// generically and checkpointed.
class TrainableClassifier : public Classifier {
 public:
  virtual std::string kind() const = 0;

  virtual std::vector<double>& parameters() = 0;
  virtual const std::vector<double>& parameters() const = 0;

  // Adds d(cross-entropy(predict(window), label))/d(params) into grad_out
  // (same layout as parameters()) and returns the example loss.
  virtual double loss_grad(const Matrix& window, int label, std::span<double> grad_out) const = 0;
};

// Affine scores over the flattened window. With Link::softmax this is a
// probabilistic classifier; with Link::identity_score predict() returns the
// raw affine scores, which makes integrated gradients exact in closed form.
// Identity-score models are excluded from pipelines that need probabilities.
//
// Parameter layout: weights[t][d][c] flattened t-major, then bias[c].
class AffineScorer final : public TrainableClassifier {
 public:
  enum class Link { softmax, identity_score };

  AffineScorer(int window_size, int num_features, int num_classes, Link link, uint64_t seed);

  int window_size() const override { return window_; }
  int num_features() const override { return features_; }
  int num_classes() const override { return classes_; }
  bool probabilistic() const override { return link_ == Link::softmax; }

  std::vector<double> predict(const Matrix& window) const override;
  Matrix grad(const Matrix& window, int target_class) const override;

  std::string kind() const override { return "affine"; }
  std::vector<double>& parameters() override { return params_; }
  const std::vector<double>& parameters() const override { return params_; }
  double loss_grad(const Matrix& window, int label, std::span<double> grad_out) const override;

  Link link() const { return link_; }
  double& weight(int t, int d, int c) { return params_[(t * features_ + d) * classes_ + c]; }
  double weight(int t, int d, int c) const { return params_[(t * features_ + d) * classes_ + c]; }
  double& bias(int c) { return params_[window_ * features_ * classes_ + c]; }
  double bias(int c) const { return params_[window_ * features_ * classes_ + c]; }

 private:
  std::vector<double> scores(const Matrix& window) const;

  int window_, features_, classes_;
  Link link_;
  std::vector<double> params_;
};

// One tanh hidden layer over the flattened window, softmax head.
//
// Parameter layout: input weights (W*D x H, input-major), hidden bias (H),
// output weights (H x C, hidden-major), output bias (C).
class WindowMLP final : public TrainableClassifier {
 public:
  WindowMLP(int window_size, int num_features, int hidden_width, int num_classes, uint64_t seed);

  int window_size() const override { return window_; }
  int num_features() const override { return features_; }
  int num_classes() const override { return classes_; }
  int hidden_width() const { return hidden_; }

  std::vector<double> predict(const Matrix& window) const override;
  Matrix grad(const Matrix& window, int target_class) const override;

  std::string kind() const override { return "mlp"; }
  std::vector<double>& parameters() override { return params_; }
  const std::vector<double>& parameters() const override { return params_; }
  double loss_grad(const Matrix& window, int label, std::span<double> grad_out) const override;

  double& w_in(int i, int h) { return params_[i * hidden_ + h]; }
  double w_in(int i, int h) const { return params_[i * hidden_ + h]; }
  double& b_hidden(int h) { return params_[window_ * features_ * hidden_ + h]; }
  double b_hidden(int h) const { return params_[window_ * features_ * hidden_ + h]; }
  double& w_out(int h, int c) { return params_[window_ * features_ * hidden_ + hidden_ + h * classes_ + c]; }
  double w_out(int h, int c) const { return params_[window_ * features_ * hidden_ + hidden_ + h * classes_ + c]; }
  double& b_out(int c) { return params_[window_ * features_ * hidden_ + hidden_ + hidden_ * classes_ + c]; }
  double b_out(int c) const { return params_[window_ * features_ * hidden_ + hidden_ + hidden_ * classes_ + c]; }

 private:
  std::vector<double> hidden_act(const Matrix& window) const;

  int window_, features_, hidden_, classes_;
  std::vector<double> params_;
};

// Single-gate tanh recurrent cell unrolled over the window, softmax readout
// of the final state. Gradients are exact backpropagation through time, not
// truncated.
//
//   h_0 = 0;  h_t = tanh(x_t W_in + h_{t-1} W_rec + b),  t = 1..W
//   logits = h_W W_out + b_out
//
// Parameter layout: input map (D x H, feature-major), recurrent map (H x H),
// state bias (H), readout (H x C), readout bias (C).
class RecurrentClassifier final : public TrainableClassifier {
 public:
  RecurrentClassifier(int window_size, int num_features, int state_width, int num_classes,
                      uint64_t seed);

  int window_size() const override { return window_; }
  int num_features() const override { return features_; }
  int num_classes() const override { return classes_; }
  int state_width() const { return state_; }

  std::vector<double> predict(const Matrix& window) const override;
  Matrix grad(const Matrix& window, int target_class) const override;

  std::string kind() const override { return "recurrent"; }
  std::vector<double>& parameters() override { return params_; }
  const std::vector<double>& parameters() const override { return params_; }
  double loss_grad(const Matrix& window, int label, std::span<double> grad_out) const override;

 private:
  struct Forward {
    std::vector<double> states;  // (W+1) x H, row 0 is h_0 = 0
    std::vector<double> probs;
  };
  Forward forward(const Matrix& window) const;

  double w_in(int d, int h) const { return params_[d * state_ + h]; }
  double w_rec(int g, int h) const { return params_[features_ * state_ + g * state_ + h]; }
  double b_state(int h) const { return params_[(features_ + state_) * state_ + h]; }
  double w_out(int h, int c) const { return params_[(features_ + state_ + 1) * state_ + h * classes_ + c]; }
  double b_out(int c) const { return params_[(features_ + state_ + 1) * state_ + state_ * classes_ + c]; }

  int window_, features_, state_, classes_;
  std::vector<double> params_;
};

struct TrainConfig {
  double learning_rate = 0.05;
  int epochs = 20;
  int batch_size = 32;
  uint64_t seed = 1;
  double l2 = 0.0;

  void validate() const;
};

struct TrainResult {
  std::vector<double> epoch_loss;  // mean training cross-entropy per epoch
};

using LabeledWindow = std::pair<Matrix, int>;

// Plain minibatch SGD on cross-entropy. Batches follow a seeded permutation
// redrawn each epoch; updates average the batch gradient. Throws on an empty
// dataset and aborts with a diagnostic if the loss goes non-finite.
TrainResult train_sgd(TrainableClassifier& model, const std::vector<LabeledWindow>& dataset,
                      const TrainConfig& cfg);

// Mean cross-entropy and accuracy of `model` on `dataset`.
std::pair<double, double> evaluate_model(const Classifier& model,
                                         const std::vector<LabeledWindow>& dataset);

// Relabels hidden units of an MLP. The returned model computes the same
// function with a permuted parameter layout; used to check implementation
// invariance of attributions.
WindowMLP permute_hidden_units(const WindowMLP& model, const std::vector<int>& permutation);

// All (window, label-at-window-end) pairs of the series, stride 1.
std::vector<LabeledWindow> sliding_windows(const TimeSeries& series, const WindowSpec& spec);
std::vector<LabeledWindow> sliding_windows(const std::vector<TimeSeries>& series,
                                           const WindowSpec& spec);

// Checkpoint: single JSON document {"kind", "shape", "params", "seed"}.
void save_model(const TrainableClassifier& model, const std::string& path, uint64_t seed);
std::unique_ptr<TrainableClassifier> load_model(const std::string& path);

}  // namespace deltattr
