#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sstream>

#include "deltattr/core.hpp"
#include "deltattr/models.hpp"
#include "test_util.hpp"

using namespace deltattr;
using namespace deltattr::testutil;

namespace {

// Fixed-probability classifier keyed by the first cell of the window; lets
// tests pin exact wrapper outputs.
class TableClassifier final : public Classifier {
 public:
  TableClassifier(int window, int features, std::vector<std::vector<double>> table)
      : window_(window), features_(features), table_(std::move(table)) {}

  int window_size() const override { return window_; }
  int num_features() const override { return features_; }
  int num_classes() const override { return static_cast<int>(table_.front().size()); }

  std::vector<double> predict(const Matrix& window) const override {
    const int key = static_cast<int>(window(0, 0)) % static_cast<int>(table_.size());
    return table_[key];
  }
  Matrix grad(const Matrix&, int) const override { return Matrix(window_, features_); }

 private:
  int window_, features_;
  std::vector<std::vector<double>> table_;
};

}  // namespace

TEST_CASE("extract_window selects the W rows ending at T") {
  const TimeSeries s = ramp_series(5, 2);
  const WindowSpec spec{3, 2};

  const Matrix first = extract_window(s, spec, 2);
  CHECK(first(0, 0) == 0.0);
  CHECK(first(2, 0) == 2.0);

  const Matrix last = extract_window(s, spec, 4);
  CHECK(last(0, 0) == 2.0);
  CHECK(last(2, 0) == 4.0);

  CHECK_THROWS_AS(extract_window(s, spec, 1), std::out_of_range);
  CHECK_THROWS_AS(extract_window(s, spec, 5), std::out_of_range);
  CHECK_THROWS_WITH(extract_window(s, spec, 1), doctest::Contains("W=3"));
}

TEST_CASE("select_target_class picks the largest probability increase") {
  // windows keyed by series value at the window start: rows 0..2 -> key 0+,
  // the ramp series makes key = t - W + 1
  const WindowSpec spec{3, 2};
  TimeSeries s = ramp_series(8, 1);

  SUBCASE("single increasing class") {
    // key 1 (t1=3): (0.9, 0.1); key 2 (t2=4): (0.5, 0.5)
    const TableClassifier f(3, 1, {{0.5, 0.5}, {0.9, 0.1}, {0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}});
    const ChangeTarget t = select_target_class(f, s, spec, 3, 4);
    CHECK(t.target_class == 1);
    CHECK(t.delta == doctest::Approx(0.4).epsilon(1e-12));
  }

  SUBCASE("zero change ties to class 0") {
    const TableClassifier f(3, 1, {{0.3, 0.7}});
    const ChangeTarget t = select_target_class(f, s, spec, 3, 4);
    CHECK(t.target_class == 0);
    CHECK(t.delta == 0.0);
  }

  SUBCASE("three classes, tied increases go to the lowest index") {
    // increases: (0.2, -0.4, 0.2) -> tie between 0 and 2 -> class 0
    const WindowSpec spec3{3, 3};
    const TableClassifier f(3, 1,
                            {{0.5, 0.5, 0.5}, {0.2, 0.5, 0.3}, {0.4, 0.1, 0.5}});
    const ChangeTarget t = select_target_class(f, s, spec3, 3, 4);
    CHECK(t.target_class == 0);
    CHECK(t.delta == doctest::Approx(0.2).epsilon(1e-12));
  }

  SUBCASE("argmax commutes with class permutations") {
    // generic (tie-free) case: permuting class order must permute the choice
    const WindowSpec spec3{3, 3};
    const TableClassifier f(3, 1, {{0.5, 0.2, 0.3}, {0.1, 0.5, 0.4}, {0.2, 0.1, 0.7}});
    const TableClassifier f_perm(3, 1, {{0.3, 0.5, 0.2}, {0.4, 0.1, 0.5}, {0.7, 0.2, 0.1}});
    // permutation: old class c -> new class (c + 1) % 3
    const int perm[3] = {1, 2, 0};
    const ChangeTarget a = select_target_class(f, s, spec3, 3, 4);
    const ChangeTarget b = select_target_class(f_perm, s, spec3, 3, 4);
    CHECK(b.target_class == perm[a.target_class]);
    CHECK(b.delta == doctest::Approx(a.delta).epsilon(1e-12));
  }

  SUBCASE("index preconditions") {
    const TableClassifier f(3, 1, {{0.5, 0.5}});
    CHECK_THROWS_AS(select_target_class(f, s, spec, 2, 4), std::out_of_range);  // t1 < W
    CHECK_THROWS_AS(select_target_class(f, s, spec, 4, 4), std::out_of_range);  // t1 == t2
    CHECK_THROWS_AS(select_target_class(f, s, spec, 3, 7), std::out_of_range);  // gap >= W
  }
}

TEST_CASE("wrapper_eval is the componentwise prediction difference") {
  const WindowSpec spec{4, 2};
  const TimeSeries s = random_series(11, 20, 2);
  const RecurrentClassifier f(4, 2, 5, 2, 99);

  SUBCASE("matches two explicit predict calls bit-exactly") {
    const std::vector<double> diff = wrapper_eval(f, s, spec, 7, 9);
    const std::vector<double> p1 = f.predict(extract_window(s, spec, 7));
    const std::vector<double> p2 = f.predict(extract_window(s, spec, 9));
    REQUIRE(diff.size() == 2);
    CHECK(diff[0] == p2[0] - p1[0]);
    CHECK(diff[1] == p2[1] - p1[1]);
  }

  SUBCASE("identical windows give the zero vector") {
    const std::vector<double> diff = wrapper_eval(f, s, spec, 8, 8);
    for (double v : diff) CHECK(v == 0.0);
  }

  SUBCASE("entries sum to ~0 and L1 norm is at most 2") {
    SplitMix64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
      const Matrix w1 = random_window(rng, 4, 2);
      const Matrix w2 = random_window(rng, 4, 2);
      const std::vector<double> diff = wrapper_eval_perturbed(f, spec, w1, w2);
      double sum = 0.0, l1 = 0.0;
      for (double v : diff) {
        sum += v;
        l1 += std::abs(v);
      }
      CHECK(std::abs(sum) <= 1e-9);
      CHECK(l1 <= 2.0);
    }
  }

  SUBCASE("perturbed form agrees with the series form") {
    const std::vector<double> a = wrapper_eval(f, s, spec, 7, 9);
    const std::vector<double> b =
        wrapper_eval_perturbed(f, spec, extract_window(s, spec, 7), extract_window(s, spec, 9));
    CHECK(a == b);
  }

  SUBCASE("shape mismatch is rejected") {
    CHECK_THROWS_AS(wrapper_eval_perturbed(f, spec, Matrix(3, 2), Matrix(4, 2)),
                    std::invalid_argument);
  }
}

TEST_CASE("classifier contract holds for the built-in models") {
  SplitMix64 rng(21);
  const WindowMLP mlp(5, 3, 7, 3, 1);
  const RecurrentClassifier rec(5, 3, 4, 3, 2);
  const AffineScorer aff(5, 3, 3, AffineScorer::Link::softmax, 3);
  const Classifier* models[] = {&mlp, &rec, &aff};

  for (const Classifier* f : models) {
    for (int trial = 0; trial < 20; ++trial) {
      const Matrix w = random_window(rng, 5, 3);
      const std::vector<double> p = f->predict(w);
      double sum = 0.0;
      for (double v : p) {
        CHECK(v >= 0.0);
        sum += v;
      }
      CHECK(std::abs(sum - 1.0) <= 1e-9);
      // purity: bit-identical on repeated calls
      CHECK(f->predict(w) == p);
      const Matrix g = f->grad(w, 1);
      CHECK(max_abs_diff(f->grad(w, 1), g) == 0.0);
    }
  }
}

TEST_CASE("time series JSONL round-trips with stable field order") {
  std::vector<TimeSeries> series = {random_series(3, 6, 2), random_series(4, 5, 2)};
  std::ostringstream out;
  write_series_jsonl(series, out);

  const std::string text = out.str();
  CHECK(text.find("{\"series_id\"") == 0);
  CHECK(text.find("\"features\"") < text.find("\"values\""));
  CHECK(text.find("\"values\"") < text.find("\"labels\""));

  std::istringstream in(text);
  const std::vector<TimeSeries> back = read_series_jsonl(in);
  REQUIRE(back.size() == series.size());
  for (size_t i = 0; i < series.size(); ++i) {
    CHECK(back[i].series_id == series[i].series_id);
    CHECK(back[i].labels == series[i].labels);
    CHECK(back[i].values == series[i].values);  // exact: JSON doubles round-trip
  }
}

TEST_CASE("attribution map JSON round-trips") {
  AttributionMap map;
  map.start_time = 5;
  map.values = Matrix(3, 2);
  map.values(1, 1) = -0.25;
  map.target = {7, 8, 1, -0.125};
  map.method_name = "swing";
  map.params.n_samples = 50;
  map.params.offset = 1;

  const AttributionMap back = attribution_from_json(attribution_to_json(map));
  CHECK(back.method_name == "swing");
  CHECK(back.start_time == 5);
  CHECK(back.target.t1 == 7);
  CHECK(back.target.delta == -0.125);
  CHECK(back.values == map.values);
  CHECK(back.params.n_samples == 50);
  CHECK(back.params.offset == 1);
  CHECK(!back.params.seed.has_value());
}

TEST_CASE("validate_target enforces the index invariants") {
  const WindowSpec spec{4, 2};
  CHECK_NOTHROW(validate_target({4, 5, 0, 0.0}, spec, 10));
  CHECK_THROWS_AS(validate_target({3, 5, 0, 0.0}, spec, 10), std::out_of_range);   // t1 < W
  CHECK_THROWS_AS(validate_target({4, 10, 0, 0.0}, spec, 10), std::out_of_range);  // t2 >= L
  CHECK_THROWS_AS(validate_target({4, 8, 0, 0.0}, spec, 10), std::out_of_range);   // gap >= W
  CHECK_THROWS_AS(validate_target({5, 5, 0, 0.0}, spec, 10), std::out_of_range);   // t1 == t2
}
