#include "deltattr/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "deltattr/rng.hpp"
#include "json.hpp"

namespace deltattr {

namespace {

std::vector<double> softmax(const std::vector<double>& scores) {
  const double m = *std::max_element(scores.begin(), scores.end());
  std::vector<double> p(scores.size());
  double z = 0.0;
  for (size_t c = 0; c < scores.size(); ++c) {
    p[c] = std::exp(scores[c] - m);
    z += p[c];
  }
  for (double& v : p) v /= z;
  return p;
}

// d p_target / d score_c = p_target * (1[c == target] - p_c)
std::vector<double> softmax_prob_grad(const std::vector<double>& probs, int target) {
  std::vector<double> d(probs.size());
  for (size_t c = 0; c < probs.size(); ++c) {
    d[c] = probs[target] * ((static_cast<int>(c) == target ? 1.0 : 0.0) - probs[c]);
  }
  return d;
}

double cross_entropy(const std::vector<double>& probs, int label) {
  return -std::log(std::max(probs[label], 1e-300));
}

void check_label(int label, int num_classes) {
  if (label < 0 || label >= num_classes) {
    throw std::out_of_range("label " + std::to_string(label) + " outside [0, " +
                            std::to_string(num_classes) + ")");
  }
}

void init_uniform(std::vector<double>& params, size_t begin, size_t count, int fan_in,
                  SplitMix64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (size_t i = begin; i < begin + count; ++i) params[i] = rng.uniform(-bound, bound);
}

}  // namespace

// ---------------------------------------------------------------------------
// AffineScorer

AffineScorer::AffineScorer(int window_size, int num_features, int num_classes, Link link,
                           uint64_t seed)
    : window_(window_size), features_(num_features), classes_(num_classes), link_(link) {
  if (window_ < 1 || features_ < 1 || classes_ < 2) {
    throw std::invalid_argument("AffineScorer: invalid shape");
  }
  params_.assign(static_cast<size_t>(window_) * features_ * classes_ + classes_, 0.0);
  SplitMix64 rng(seed);
  init_uniform(params_, 0, static_cast<size_t>(window_) * features_ * classes_,
               window_ * features_, rng);
}

std::vector<double> AffineScorer::scores(const Matrix& window) const {
  std::vector<double> z(classes_);
  for (int c = 0; c < classes_; ++c) z[c] = bias(c);
  for (int t = 0; t < window_; ++t) {
    for (int d = 0; d < features_; ++d) {
      const double x = window(t, d);
      for (int c = 0; c < classes_; ++c) z[c] += weight(t, d, c) * x;
    }
  }
  return z;
}

std::vector<double> AffineScorer::predict(const Matrix& window) const {
  check_window(window);
  std::vector<double> z = scores(window);
  return link_ == Link::softmax ? softmax(z) : z;
}

Matrix AffineScorer::grad(const Matrix& window, int target_class) const {
  check_window(window);
  check_class(target_class);
  Matrix g(window_, features_);
  if (link_ == Link::identity_score) {
    for (int t = 0; t < window_; ++t) {
      for (int d = 0; d < features_; ++d) g(t, d) = weight(t, d, target_class);
    }
    return g;
  }
  const std::vector<double> p = softmax(scores(window));
  const std::vector<double> dz = softmax_prob_grad(p, target_class);
  for (int t = 0; t < window_; ++t) {
    for (int d = 0; d < features_; ++d) {
      double acc = 0.0;
      for (int c = 0; c < classes_; ++c) acc += dz[c] * weight(t, d, c);
      g(t, d) = acc;
    }
  }
  return g;
}

// Trains the scores as logits under softmax cross-entropy for either link.
double AffineScorer::loss_grad(const Matrix& window, int label, std::span<double> grad_out) const {
  check_window(window);
  check_label(label, classes_);
  const std::vector<double> p = softmax(scores(window));
  for (int c = 0; c < classes_; ++c) {
    const double dz = p[c] - (c == label ? 1.0 : 0.0);
    for (int t = 0; t < window_; ++t) {
      for (int d = 0; d < features_; ++d) {
        grad_out[(t * features_ + d) * classes_ + c] += window(t, d) * dz;
      }
    }
    grad_out[static_cast<size_t>(window_) * features_ * classes_ + c] += dz;
  }
  return cross_entropy(p, label);
}

// ---------------------------------------------------------------------------
// WindowMLP

WindowMLP::WindowMLP(int window_size, int num_features, int hidden_width, int num_classes,
                     uint64_t seed)
    : window_(window_size), features_(num_features), hidden_(hidden_width), classes_(num_classes) {
  if (window_ < 1 || features_ < 1 || hidden_ < 1 || classes_ < 2) {
    throw std::invalid_argument("WindowMLP: invalid shape");
  }
  const size_t n_in = static_cast<size_t>(window_) * features_ * hidden_;
  params_.assign(n_in + hidden_ + static_cast<size_t>(hidden_) * classes_ + classes_, 0.0);
  SplitMix64 rng(seed);
  init_uniform(params_, 0, n_in, window_ * features_, rng);
  init_uniform(params_, n_in + hidden_, static_cast<size_t>(hidden_) * classes_, hidden_, rng);
}

std::vector<double> WindowMLP::hidden_act(const Matrix& window) const {
  std::vector<double> h(hidden_);
  for (int u = 0; u < hidden_; ++u) h[u] = b_hidden(u);
  for (int t = 0; t < window_; ++t) {
    for (int d = 0; d < features_; ++d) {
      const double x = window(t, d);
      const int i = t * features_ + d;
      for (int u = 0; u < hidden_; ++u) h[u] += w_in(i, u) * x;
    }
  }
  for (double& v : h) v = std::tanh(v);
  return h;
}

std::vector<double> WindowMLP::predict(const Matrix& window) const {
  check_window(window);
  const std::vector<double> h = hidden_act(window);
  std::vector<double> z(classes_);
  for (int c = 0; c < classes_; ++c) z[c] = b_out(c);
  for (int u = 0; u < hidden_; ++u) {
    for (int c = 0; c < classes_; ++c) z[c] += w_out(u, c) * h[u];
  }
  return softmax(z);
}

Matrix WindowMLP::grad(const Matrix& window, int target_class) const {
  check_window(window);
  check_class(target_class);
  const std::vector<double> h = hidden_act(window);
  std::vector<double> z(classes_);
  for (int c = 0; c < classes_; ++c) z[c] = b_out(c);
  for (int u = 0; u < hidden_; ++u) {
    for (int c = 0; c < classes_; ++c) z[c] += w_out(u, c) * h[u];
  }
  const std::vector<double> p = softmax(z);
  const std::vector<double> dz = softmax_prob_grad(p, target_class);

  std::vector<double> da(hidden_);
  for (int u = 0; u < hidden_; ++u) {
    double dh = 0.0;
    for (int c = 0; c < classes_; ++c) dh += w_out(u, c) * dz[c];
    da[u] = (1.0 - h[u] * h[u]) * dh;
  }
  Matrix g(window_, features_);
  for (int t = 0; t < window_; ++t) {
    for (int d = 0; d < features_; ++d) {
      const int i = t * features_ + d;
      double acc = 0.0;
      for (int u = 0; u < hidden_; ++u) acc += w_in(i, u) * da[u];
      g(t, d) = acc;
    }
  }
  return g;
}

double WindowMLP::loss_grad(const Matrix& window, int label, std::span<double> grad_out) const {
  check_window(window);
  check_label(label, classes_);
  const std::vector<double> h = hidden_act(window);
  std::vector<double> z(classes_);
  for (int c = 0; c < classes_; ++c) z[c] = b_out(c);
  for (int u = 0; u < hidden_; ++u) {
    for (int c = 0; c < classes_; ++c) z[c] += w_out(u, c) * h[u];
  }
  const std::vector<double> p = softmax(z);

  const size_t off_bh = static_cast<size_t>(window_) * features_ * hidden_;
  const size_t off_wout = off_bh + hidden_;
  const size_t off_bout = off_wout + static_cast<size_t>(hidden_) * classes_;

  std::vector<double> dh(hidden_, 0.0);
  for (int c = 0; c < classes_; ++c) {
    const double dz = p[c] - (c == label ? 1.0 : 0.0);
    grad_out[off_bout + c] += dz;
    for (int u = 0; u < hidden_; ++u) {
      grad_out[off_wout + static_cast<size_t>(u) * classes_ + c] += h[u] * dz;
      dh[u] += w_out(u, c) * dz;
    }
  }
  for (int u = 0; u < hidden_; ++u) {
    const double da = (1.0 - h[u] * h[u]) * dh[u];
    grad_out[off_bh + u] += da;
    for (int t = 0; t < window_; ++t) {
      for (int d = 0; d < features_; ++d) {
        const int i = t * features_ + d;
        grad_out[static_cast<size_t>(i) * hidden_ + u] += window(t, d) * da;
      }
    }
  }
  return cross_entropy(p, label);
}

// ---------------------------------------------------------------------------
// RecurrentClassifier

RecurrentClassifier::RecurrentClassifier(int window_size, int num_features, int state_width,
                                         int num_classes, uint64_t seed)
    : window_(window_size), features_(num_features), state_(state_width), classes_(num_classes) {
  if (window_ < 1 || features_ < 1 || state_ < 1 || classes_ < 2) {
    throw std::invalid_argument("RecurrentClassifier: invalid shape");
  }
  const size_t n_in = static_cast<size_t>(features_) * state_;
  const size_t n_rec = static_cast<size_t>(state_) * state_;
  params_.assign(n_in + n_rec + state_ + static_cast<size_t>(state_) * classes_ + classes_, 0.0);
  SplitMix64 rng(seed);
  init_uniform(params_, 0, n_in, features_, rng);
  init_uniform(params_, n_in, n_rec, state_, rng);
  init_uniform(params_, n_in + n_rec + state_, static_cast<size_t>(state_) * classes_, state_, rng);
}

RecurrentClassifier::Forward RecurrentClassifier::forward(const Matrix& window) const {
  Forward f;
  f.states.assign(static_cast<size_t>(window_ + 1) * state_, 0.0);
  std::vector<double> a(state_);
  for (int t = 0; t < window_; ++t) {
    const double* prev = &f.states[static_cast<size_t>(t) * state_];
    for (int h = 0; h < state_; ++h) a[h] = b_state(h);
    for (int d = 0; d < features_; ++d) {
      const double x = window(t, d);
      for (int h = 0; h < state_; ++h) a[h] += w_in(d, h) * x;
    }
    for (int g = 0; g < state_; ++g) {
      const double hg = prev[g];
      if (hg == 0.0) continue;
      for (int h = 0; h < state_; ++h) a[h] += w_rec(g, h) * hg;
    }
    double* cur = &f.states[static_cast<size_t>(t + 1) * state_];
    for (int h = 0; h < state_; ++h) cur[h] = std::tanh(a[h]);
  }
  std::vector<double> z(classes_);
  const double* last = &f.states[static_cast<size_t>(window_) * state_];
  for (int c = 0; c < classes_; ++c) z[c] = b_out(c);
  for (int h = 0; h < state_; ++h) {
    for (int c = 0; c < classes_; ++c) z[c] += w_out(h, c) * last[h];
  }
  f.probs = softmax(z);
  return f;
}

std::vector<double> RecurrentClassifier::predict(const Matrix& window) const {
  check_window(window);
  return forward(window).probs;
}

Matrix RecurrentClassifier::grad(const Matrix& window, int target_class) const {
  check_window(window);
  check_class(target_class);
  const Forward f = forward(window);
  const std::vector<double> dz = softmax_prob_grad(f.probs, target_class);

  std::vector<double> dh(state_, 0.0);
  for (int h = 0; h < state_; ++h) {
    for (int c = 0; c < classes_; ++c) dh[h] += w_out(h, c) * dz[c];
  }
  Matrix g(window_, features_);
  std::vector<double> da(state_), dh_prev(state_);
  for (int t = window_ - 1; t >= 0; --t) {
    const double* cur = &f.states[static_cast<size_t>(t + 1) * state_];
    for (int h = 0; h < state_; ++h) da[h] = (1.0 - cur[h] * cur[h]) * dh[h];
    for (int d = 0; d < features_; ++d) {
      double acc = 0.0;
      for (int h = 0; h < state_; ++h) acc += w_in(d, h) * da[h];
      g(t, d) = acc;
    }
    for (int p = 0; p < state_; ++p) {
      double acc = 0.0;
      for (int h = 0; h < state_; ++h) acc += w_rec(p, h) * da[h];
      dh_prev[p] = acc;
    }
    dh.swap(dh_prev);
  }
  return g;
}

double RecurrentClassifier::loss_grad(const Matrix& window, int label,
                                      std::span<double> grad_out) const {
  check_window(window);
  check_label(label, classes_);
  const Forward f = forward(window);

  const size_t off_rec = static_cast<size_t>(features_) * state_;
  const size_t off_bstate = off_rec + static_cast<size_t>(state_) * state_;
  const size_t off_wout = off_bstate + state_;
  const size_t off_bout = off_wout + static_cast<size_t>(state_) * classes_;

  const double* last = &f.states[static_cast<size_t>(window_) * state_];
  std::vector<double> dh(state_, 0.0);
  for (int c = 0; c < classes_; ++c) {
    const double dz = f.probs[c] - (c == label ? 1.0 : 0.0);
    grad_out[off_bout + c] += dz;
    for (int h = 0; h < state_; ++h) {
      grad_out[off_wout + static_cast<size_t>(h) * classes_ + c] += last[h] * dz;
      dh[h] += w_out(h, c) * dz;
    }
  }
  std::vector<double> da(state_), dh_prev(state_);
  for (int t = window_ - 1; t >= 0; --t) {
    const double* cur = &f.states[static_cast<size_t>(t + 1) * state_];
    const double* prev = &f.states[static_cast<size_t>(t) * state_];
    for (int h = 0; h < state_; ++h) {
      da[h] = (1.0 - cur[h] * cur[h]) * dh[h];
      grad_out[off_bstate + h] += da[h];
    }
    for (int d = 0; d < features_; ++d) {
      const double x = window(t, d);
      for (int h = 0; h < state_; ++h) {
        grad_out[static_cast<size_t>(d) * state_ + h] += x * da[h];
      }
    }
    for (int p = 0; p < state_; ++p) {
      double acc = 0.0;
      const double hp = prev[p];
      for (int h = 0; h < state_; ++h) {
        grad_out[off_rec + static_cast<size_t>(p) * state_ + h] += hp * da[h];
        acc += w_rec(p, h) * da[h];
      }
      dh_prev[p] = acc;
    }
    dh.swap(dh_prev);
  }
  return cross_entropy(f.probs, label);
}

// ---------------------------------------------------------------------------
// Training

void TrainConfig::validate() const {
  if (learning_rate <= 0.0) throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
  if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (l2 < 0.0) throw std::invalid_argument("TrainConfig: l2 must be >= 0");
}

TrainResult train_sgd(TrainableClassifier& model, const std::vector<LabeledWindow>& dataset,
                      const TrainConfig& cfg) {
  cfg.validate();
  if (dataset.empty()) throw std::invalid_argument("train_sgd: empty dataset");

  std::vector<double>& params = model.parameters();
  std::vector<double> grad(params.size());
  std::vector<size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), size_t{0});
  SplitMix64 rng(cfg.seed);

  TrainResult result;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(order, rng);
    double epoch_loss = 0.0;
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const size_t stop = std::min(order.size(), start + cfg.batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (size_t i = start; i < stop; ++i) {
        const auto& [window, label] = dataset[order[i]];
        epoch_loss += model.loss_grad(window, label, grad);
      }
      const double step = cfg.learning_rate / static_cast<double>(stop - start);
      for (size_t j = 0; j < params.size(); ++j) {
        params[j] -= step * grad[j] + cfg.learning_rate * cfg.l2 * params[j];
      }
    }
    epoch_loss /= static_cast<double>(dataset.size());
    if (!std::isfinite(epoch_loss)) {
      throw std::runtime_error("train_sgd: non-finite loss at epoch " + std::to_string(epoch) +
                               " (lr=" + std::to_string(cfg.learning_rate) + ")");
    }
    result.epoch_loss.push_back(epoch_loss);
  }
  return result;
}

std::pair<double, double> evaluate_model(const Classifier& model,
                                         const std::vector<LabeledWindow>& dataset) {
  if (dataset.empty()) throw std::invalid_argument("evaluate_model: empty dataset");
  double loss = 0.0;
  int correct = 0;
  for (const auto& [window, label] : dataset) {
    const std::vector<double> p = model.predict(window);
    loss += -std::log(std::max(p[label], 1e-300));
    int best = 0;
    for (int c = 1; c < static_cast<int>(p.size()); ++c) {
      if (p[c] > p[best]) best = c;
    }
    if (best == label) ++correct;
  }
  const double n = static_cast<double>(dataset.size());
  return {loss / n, correct / n};
}

WindowMLP permute_hidden_units(const WindowMLP& model, const std::vector<int>& permutation) {
  const int H = model.hidden_width();
  if (static_cast<int>(permutation.size()) != H) {
    throw std::invalid_argument("permute_hidden_units: permutation size != hidden width");
  }
  std::vector<bool> seen(H, false);
  for (int p : permutation) {
    if (p < 0 || p >= H || seen[p]) {
      throw std::invalid_argument("permute_hidden_units: not a bijection on hidden units");
    }
    seen[p] = true;
  }
  WindowMLP out(model.window_size(), model.num_features(), H, model.num_classes(), 0);
  const int n_in = model.window_size() * model.num_features();
  for (int h = 0; h < H; ++h) {
    const int ph = permutation[h];
    for (int i = 0; i < n_in; ++i) out.w_in(i, ph) = model.w_in(i, h);
    out.b_hidden(ph) = model.b_hidden(h);
    for (int c = 0; c < model.num_classes(); ++c) out.w_out(ph, c) = model.w_out(h, c);
  }
  for (int c = 0; c < model.num_classes(); ++c) out.b_out(c) = model.b_out(c);
  return out;
}

std::vector<LabeledWindow> sliding_windows(const TimeSeries& series, const WindowSpec& spec) {
  series.validate();
  spec.validate();
  std::vector<LabeledWindow> out;
  for (int t = spec.window_size - 1; t < series.length(); ++t) {
    out.emplace_back(extract_window(series, spec, t), series.labels[t]);
  }
  return out;
}

std::vector<LabeledWindow> sliding_windows(const std::vector<TimeSeries>& series,
                                           const WindowSpec& spec) {
  std::vector<LabeledWindow> out;
  for (const TimeSeries& s : series) {
    auto w = sliding_windows(s, spec);
    out.insert(out.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_model(const TrainableClassifier& model, const std::string& path, uint64_t seed) {
  nlohmann::ordered_json obj;
  obj["kind"] = model.kind();
  nlohmann::ordered_json shape;
  shape["window"] = model.window_size();
  shape["features"] = model.num_features();
  shape["classes"] = model.num_classes();
  if (const auto* mlp = dynamic_cast<const WindowMLP*>(&model)) {
    shape["hidden"] = mlp->hidden_width();
  } else if (const auto* rec = dynamic_cast<const RecurrentClassifier*>(&model)) {
    shape["state"] = rec->state_width();
  } else if (const auto* aff = dynamic_cast<const AffineScorer*>(&model)) {
    shape["link"] = aff->link() == AffineScorer::Link::softmax ? "softmax" : "identity";
  }
  obj["shape"] = std::move(shape);
  obj["params"] = model.parameters();
  obj["seed"] = seed;

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << obj.dump() << "\n";
}

std::unique_ptr<TrainableClassifier> load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  nlohmann::ordered_json obj;
  in >> obj;

  const std::string kind = obj.at("kind").get<std::string>();
  const auto& shape = obj.at("shape");
  const int W = shape.at("window").get<int>();
  const int D = shape.at("features").get<int>();
  const int C = shape.at("classes").get<int>();

  std::unique_ptr<TrainableClassifier> model;
  if (kind == "affine") {
    const auto link = shape.at("link").get<std::string>() == "softmax"
                          ? AffineScorer::Link::softmax
                          : AffineScorer::Link::identity_score;
    model = std::make_unique<AffineScorer>(W, D, C, link, 0);
  } else if (kind == "mlp") {
    model = std::make_unique<WindowMLP>(W, D, shape.at("hidden").get<int>(), C, 0);
  } else if (kind == "recurrent") {
    model = std::make_unique<RecurrentClassifier>(W, D, shape.at("state").get<int>(), C, 0);
  } else {
    throw std::runtime_error("unknown model kind '" + kind + "' in " + path);
  }
  std::vector<double> params = obj.at("params").get<std::vector<double>>();
  if (params.size() != model->parameters().size()) {
    throw std::runtime_error("checkpoint " + path + ": expected " +
                             std::to_string(model->parameters().size()) + " params, got " +
                             std::to_string(params.size()));
  }
  model->parameters() = std::move(params);
  return model;
}

}  // namespace deltattr
