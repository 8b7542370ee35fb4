#include "grafair/errors.hpp"
#include "grafair/metrics.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace grafair;
using grafair::testing::small_graph;

namespace {

struct Instance {
  BinaryVector pred, labels, sensitive, mask;
};

Instance random_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> len(1, 50);
  std::bernoulli_distribution coin(0.5);
  std::bernoulli_distribution mostly(0.8);
  Instance in;
  const int n = len(rng);
  for (int i = 0; i < n; ++i) {
    in.pred.push_back(coin(rng));
    in.labels.push_back(coin(rng));
    in.sensitive.push_back(coin(rng));
    in.mask.push_back(mostly(rng));
  }
  return in;
}

// Node-by-node oracles, written without the contingency table.
std::optional<double> oracle_f1(const Instance& in) {
  double tp = 0, fp = 0, fn = 0, seen = 0;
  for (std::size_t i = 0; i < in.pred.size(); ++i) {
    if (!in.mask[i]) continue;
    seen += 1;
    if (in.pred[i] == 1 && in.labels[i] == 1) tp += 1;
    if (in.pred[i] == 1 && in.labels[i] == 0) fp += 1;
    if (in.pred[i] == 0 && in.labels[i] == 1) fn += 1;
  }
  if (seen == 0) return std::nullopt;
  const double p = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  const double r = tp + fn > 0 ? tp / (tp + fn) : 0.0;
  return p + r == 0 ? 0.0 : 100.0 * 2 * p * r / (p + r);
}

std::optional<double> oracle_sp(const Instance& in) {
  double pos[2] = {0, 0}, size[2] = {0, 0};
  for (std::size_t i = 0; i < in.pred.size(); ++i) {
    if (!in.mask[i]) continue;
    size[in.sensitive[i]] += 1;
    pos[in.sensitive[i]] += in.pred[i];
  }
  if (size[0] == 0 || size[1] == 0) return std::nullopt;
  return 100.0 * std::abs(pos[1] / size[1] - pos[0] / size[0]);
}

std::optional<double> oracle_eo(const Instance& in) {
  double hit[2] = {0, 0}, size[2] = {0, 0};
  for (std::size_t i = 0; i < in.pred.size(); ++i) {
    if (!in.mask[i] || in.labels[i] != 1) continue;
    size[in.sensitive[i]] += 1;
    hit[in.sensitive[i]] += in.pred[i];
  }
  if (size[0] == 0 || size[1] == 0) return std::nullopt;
  return 100.0 * std::abs(hit[1] / size[1] - hit[0] / size[0]);
}

template <typename F>
std::optional<double> guarded(F&& f) {
  try {
    return f();
  } catch (const Error&) {
    return std::nullopt;
  }
}

GrafairModel model_for(const AttributedGraph& g, Variant v, std::uint64_t seed) {
  ModelDims d;
  d.in_features = g.num_features();
  d.hidden_dim = 4;
  return init_weights(d, v, seed);
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("f1 examples") {
    const BinaryVector all = {1, 1, 1, 1};
    CHECK(f1_score({0, 1, 1, 0}, {0, 1, 1, 0}, all) == 100.0);
    CHECK(f1_score({0, 0, 0, 0}, {0, 1, 1, 0}, all) == 0.0);
    CHECK(f1_score({1, 1, 1, 0, 0}, {1, 1, 0, 1, 0}, {1, 1, 1, 1, 1}) == doctest::Approx(66.6667).epsilon(1e-6));
    try {
      f1_score({1}, {1}, {0});
      FAIL("expected EmptyMask");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::EmptyMask);
    }
  }

  TEST_CASE("statistical parity examples") {
    const BinaryVector all = {1, 1, 1, 1};
    CHECK(statistical_parity({1, 0, 1, 0}, {1, 1, 0, 0}, all) == 0.0);
    CHECK(statistical_parity({1, 1, 0, 0}, {1, 1, 0, 0}, all) == 100.0);
    CHECK(statistical_parity({1, 1, 1, 1}, {1, 0, 1, 0}, all) == 0.0);
    try {
      statistical_parity({1, 0}, {1, 1}, {1, 1});
      FAIL("expected DegenerateGroup");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::DegenerateGroup);
    }
  }

  TEST_CASE("equal opportunity examples") {
    const BinaryVector y = {1, 1, 1, 1, 1, 1, 0, 0};
    const BinaryVector s = {1, 1, 1, 1, 0, 0, 1, 0};
    const BinaryVector all(8, 1);
    CHECK(equal_opportunity(y, y, s, all) == 0.0);
    CHECK(equal_opportunity({1, 1, 1, 0, 1, 0, 0, 0}, y, s, all) == 25.0);
    CHECK(equal_opportunity(BinaryVector(8, 1), y, s, all) == 0.0);
    CHECK_THROWS_AS(equal_opportunity({1, 1}, {1, 0}, {1, 0}, {1, 1}), Error);
  }

  TEST_CASE("group metrics equal the counting oracle exactly") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
      const Instance in = random_instance(rng);
      CHECK(guarded([&] { return f1_score(in.pred, in.labels, in.mask); }) == oracle_f1(in));
      CHECK(guarded([&] { return statistical_parity(in.pred, in.sensitive, in.mask); }) == oracle_sp(in));
      CHECK(guarded([&] { return equal_opportunity(in.pred, in.labels, in.sensitive, in.mask); }) ==
            oracle_eo(in));
      const GroupCounts c = contingency(in.pred, in.labels, in.sensitive, in.mask);
      CHECK(c.total() == std::accumulate(in.mask.begin(), in.mask.end(), 0));
    }
  }

  TEST_CASE("group relabeling and node permutation leave metrics unchanged") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 100; ++trial) {
      Instance in = random_instance(rng);
      Instance swapped = in;
      for (auto& s : swapped.sensitive) s = 1 - s;
      CHECK(guarded([&] { return statistical_parity(in.pred, in.sensitive, in.mask); }) ==
            guarded([&] { return statistical_parity(swapped.pred, swapped.sensitive, swapped.mask); }));
      CHECK(guarded([&] { return equal_opportunity(in.pred, in.labels, in.sensitive, in.mask); }) ==
            guarded([&] {
              return equal_opportunity(swapped.pred, swapped.labels, swapped.sensitive, swapped.mask);
            }));

      std::vector<std::size_t> perm(in.pred.size());
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      Instance p = in;
      for (std::size_t i = 0; i < perm.size(); ++i) {
        p.pred[perm[i]] = in.pred[i];
        p.labels[perm[i]] = in.labels[i];
        p.sensitive[perm[i]] = in.sensitive[i];
        p.mask[perm[i]] = in.mask[i];
      }
      CHECK(guarded([&] { return f1_score(in.pred, in.labels, in.mask); }) ==
            guarded([&] { return f1_score(p.pred, p.labels, p.mask); }));
      CHECK(guarded([&] { return statistical_parity(in.pred, in.sensitive, in.mask); }) ==
            guarded([&] { return statistical_parity(p.pred, p.sensitive, p.mask); }));
    }
  }

  TEST_CASE("accuracy") {
    CHECK(accuracy({1, 0, 1, 1}, {1, 1, 1, 0}, {1, 1, 1, 0}) == doctest::Approx(2.0 / 3.0));
    CHECK_THROWS_AS(accuracy({1}, {1}, {0}), Error);
  }

  TEST_CASE("eval mode names") {
    for (EvalMode m : {EvalMode::WithS, EvalMode::MarginalS, EvalMode::RetrainNoS}) {
      CHECK(parse_eval_mode(to_string(m)) == m);
    }
    CHECK_THROWS_AS(parse_eval_mode("oracle"), Error);
  }

  TEST_CASE("counterfactual fairness is zero when interventions are invisible") {
    const auto g = small_graph(30, 3);
    const auto adj = normalize_adjacency(g, AggregationMode::SymmetricGcn);
    auto m = model_for(g, Variant::NoSConcat, 2);
    m.encoder_weights[0].row(g.sensitive_col()).setZero();
    const auto p = make_predictor(m, g, adj, EvalMode::WithS);
    const auto cf = counterfactual_fairness(p, g, adj, g.masks().test);
    CHECK(cf.delta_cf == 0.0);
    CHECK(cf.flip_rate == 0.0);
  }

  TEST_CASE("counterfactual fairness compares the two interventions") {
    const auto g = small_graph(40, 4);
    const auto adj = normalize_adjacency(g, AggregationMode::SymmetricGcn);
    auto m = model_for(g, Variant::Full, 3);
    m.decoder_weights[0].bottomRows(2) << 3.0, -3.0, -3.0, 3.0;
    const auto p = make_predictor(m, g, adj, EvalMode::WithS);
    const auto& mask = g.masks().test;
    const auto pred1 = predict(p, flip_sensitive(g, 1), adj);
    const auto pred0 = predict(p, flip_sensitive(g, 0), adj);
    const double expected = 100.0 * std::abs(accuracy(pred1, g.labels(), mask) - accuracy(pred0, g.labels(), mask));
    const auto cf = counterfactual_fairness(p, g, adj, mask);
    CHECK(cf.delta_cf == expected);
    CHECK(cf.flip_rate > 0.0);
  }

  TEST_CASE("robustness score") {
    const auto g = small_graph(40, 5, 0.05);
    const auto adj = normalize_adjacency(g, AggregationMode::SymmetricGcn);
    const auto m = model_for(g, Variant::Vanilla, 1);
    const auto p = make_predictor(m, g, adj, EvalMode::WithS);
    const auto& mask = g.masks().test;
    CHECK(robustness_score(p, g, adj, mask, 0.0, 3, 0).delta_rs == 0.0);
    const auto a = robustness_score(p, g, adj, mask, 1.0, 5, 9);
    const auto b = robustness_score(p, g, adj, mask, 1.0, 5, 9);
    CHECK(a.delta_rs == b.delta_rs);
    CHECK(a.change_rate == b.change_rate);
    CHECK(a.change_rate > 0.0);

    auto constant = m;
    for (auto& w : constant.decoder_weights) w.setZero();
    constant.decoder_biases[0] << 1.0, 0.0;
    const auto pc = make_predictor(constant, g, adj, EvalMode::WithS);
    const auto rc = robustness_score(pc, g, adj, mask, 5.0, 5, 1);
    CHECK(rc.delta_rs == 0.0);
    CHECK(rc.change_rate == 0.0);

    CHECK_THROWS_AS(robustness_score(p, g, adj, mask, -1.0, 1, 0), Error);
    CHECK_THROWS_AS(robustness_score(p, g, adj, mask, 1.0, 0, 0), Error);
  }

  TEST_CASE("evaluation modes") {
    const auto g = small_graph(60, 6);
    const auto adj = normalize_adjacency(g, AggregationMode::SymmetricGcn);
    const auto m = model_for(g, Variant::Full, 4);
    const auto marginal = make_predictor(m, g, adj, EvalMode::MarginalS);
    double ones = 0, train = 0;
    for (std::size_t i = 0; i < g.sensitive().size(); ++i) {
      ones += g.masks().train[i] * g.sensitive()[i];
      train += g.masks().train[i];
    }
    CHECK(marginal.p_sensitive == ones / train);
    const auto post = encode(m, g, adj, false, 0);
    CHECK(predict_proba(marginal, g, adj) == decode_marginal(m, post, ones / train));

    const auto retrained = make_predictor(m, g, adj, EvalMode::RetrainNoS);
    REQUIRE(retrained.probe_weight.has_value());
    const Matrix prob = predict_proba(retrained, g, adj);
    for (Index r = 0; r < prob.rows(); ++r) CHECK(std::abs(prob.row(r).sum() - 1.0) < 1e-12);
    const auto a = predict(retrained, flip_sensitive(g, 0), adj);
    CHECK(a == predict(make_predictor(m, g, adj, EvalMode::RetrainNoS), flip_sensitive(g, 0), adj));

    const auto vanilla = make_predictor(model_for(g, Variant::Vanilla, 4), g, adj, EvalMode::RetrainNoS);
    CHECK_FALSE(vanilla.probe_weight.has_value());
  }

  TEST_CASE("evaluate and aggregate") {
    const auto g = small_graph(80, 8);
    const auto adj = normalize_adjacency(g, AggregationMode::SymmetricGcn);
    std::vector<MetricsReport> reports;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const auto p = make_predictor(model_for(g, Variant::Full, seed), g, adj, EvalMode::WithS);
      reports.push_back(evaluate(p, g, adj, {}));
      const auto& r = reports.back();
      for (double v : {r.f1, r.delta_sp, r.delta_eo, r.delta_cf, r.delta_rs, r.accuracy}) {
        CHECK(v >= 0.0);
        CHECK(v <= 100.0);
      }
      CHECK(r.group_counts.total() == std::accumulate(g.masks().test.begin(), g.masks().test.end(), 0));
    }
    const auto one = aggregate(std::span(reports).first(1));
    CHECK(one.mean.f1 == reports[0].f1);
    CHECK(one.stddev.f1 == 0.0);
    CHECK(one.stddev.delta_sp == 0.0);

    const std::vector<MetricsReport> same(4, reports[1]);
    const auto flat = aggregate(same);
    CHECK(flat.mean.delta_eo == doctest::Approx(reports[1].delta_eo).epsilon(1e-15));
    CHECK(flat.stddev.delta_eo == 0.0);

    const auto all = aggregate(reports);
    const double mean = (reports[0].f1 + reports[1].f1 + reports[2].f1) / 3.0;
    double var = 0.0;
    for (const auto& r : reports) var += (r.f1 - mean) * (r.f1 - mean);
    CHECK(all.mean.f1 == doctest::Approx(mean).epsilon(1e-14));
    CHECK(all.stddev.f1 == doctest::Approx(std::sqrt(var / 3.0)).epsilon(1e-12));
    CHECK_THROWS_AS(aggregate(std::span<const MetricsReport>{}), Error);
  }
}
