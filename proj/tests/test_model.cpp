#include "grafair/errors.hpp"
#include "grafair/model.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace grafair;
using grafair::testing::dense;
using grafair::testing::small_graph;

namespace {

ModelDims dims_for(const AttributedGraph& g, Index hidden = 5, int enc = 1, int cls = 1) {
  ModelDims d;
  d.in_features = g.num_features();
  d.hidden_dim = hidden;
  d.encoder_layers = enc;
  d.classifier_layers = cls;
  return d;
}

Matrix row_softmax(Matrix m) {
  for (Index r = 0; r < m.rows(); ++r) {
    m.row(r) = (m.row(r).array() - m.row(r).maxCoeff()).exp().matrix();
    m.row(r) /= m.row(r).sum();
  }
  return m;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("grafair-test-" + name)).string();
}

}  // namespace

TEST_SUITE("model") {
  TEST_CASE("variant names round-trip") {
    CHECK(all_variants().size() == 6);
    for (Variant v : all_variants()) CHECK(parse_variant(to_string(v)) == v);
    try {
      parse_variant("gat");
      FAIL("expected UnknownVariant");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::UnknownVariant);
    }
  }

  TEST_CASE("variant flags") {
    CHECK(concatenates_sensitive(Variant::Full));
    CHECK(concatenates_sensitive(Variant::NoKl));
    CHECK(concatenates_sensitive(Variant::Deterministic));
    CHECK_FALSE(concatenates_sensitive(Variant::NoSConcat));
    CHECK_FALSE(concatenates_sensitive(Variant::Vanilla));
    CHECK_FALSE(concatenates_sensitive(Variant::VanillaWoS));
    CHECK_FALSE(samples_latent(Variant::Deterministic));
    CHECK_FALSE(uses_kl(Variant::NoKl));
    CHECK(masks_sensitive_input(Variant::VanillaWoS));
  }

  TEST_CASE("decoder width follows S concatenation") {
    const auto g = small_graph(8, 1);
    for (Variant v : all_variants()) {
      const auto m = init_weights(dims_for(g, 7), v, 0);
      CHECK(m.decoder_weights.front().rows() == (concatenates_sensitive(v) ? 9 : 7));
      CHECK(m.encoder_weights.front().cols() == 14);
    }
  }

  TEST_CASE("init_weights") {
    const auto g = small_graph(8, 1);
    const auto d = dims_for(g, 6, 2, 2);
    const auto a = init_weights(d, Variant::Full, 3);
    const auto b = init_weights(d, Variant::Full, 3);
    const auto c = init_weights(d, Variant::Full, 4);
    bool any_diff = false;
    const auto pa = a.parameters();
    const auto pb = b.parameters();
    const auto pc = c.parameters();
    for (std::size_t k = 0; k < pa.size(); ++k) {
      CHECK(*pa[k] == *pb[k]);
      any_diff = any_diff || *pa[k] != *pc[k];
    }
    CHECK(any_diff);
    for (const auto& w : a.encoder_weights) {
      CHECK(w.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols())));
    }
    for (std::size_t k = 0; k < a.decoder_weights.size(); ++k) {
      const auto& w = a.decoder_weights[k];
      CHECK(w.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols())));
      CHECK(a.decoder_biases[k].isZero());
    }
    ModelDims bad = d;
    bad.encoder_layers = 4;
    CHECK_THROWS_AS(init_weights(bad, Variant::Full, 0), Error);
    bad = d;
    bad.classifier_layers = 3;
    CHECK_THROWS_AS(init_weights(bad, Variant::Full, 0), Error);
  }

  TEST_CASE("encode without sampling returns the mean") {
    const auto g = small_graph(12, 2);
    const auto adj = normalize_adjacency(g, AggregationMode::SymmetricGcn);
    const auto m = init_weights(dims_for(g, 5, 2), Variant::Full, 1);
    const auto p = encode(m, g, adj, false, 9);
    CHECK(p.z == p.mu);
    CHECK(p.epsilon.isZero());
    CHECK((p.log_var.array().exp() > 0.0).all());
  }

  TEST_CASE("sampling is reproducible and reconstructs z") {
    const auto g = small_graph(12, 2);
    const auto adj = normalize_adjacency(g, AggregationMode::SymmetricGcn);
    const auto m = init_weights(dims_for(g, 5), Variant::Full, 1);
    const auto a = encode(m, g, adj, true, 9);
    const auto b = encode(m, g, adj, true, 9);
    CHECK(a.z == b.z);
    CHECK(a.z != a.mu);
    const Matrix rebuilt = a.mu + ((0.5 * a.log_var).array().exp() * a.epsilon.array()).matrix();
    CHECK(rebuilt == a.z);
    CHECK(encode(m, g, adj, true, 10).z != a.z);
  }

  TEST_CASE("deterministic variant never samples") {
    const auto g = small_graph(12, 2);
    const auto adj = normalize_adjacency(g, AggregationMode::SymmetricGcn);
    const auto m = init_weights(dims_for(g, 5, 2), Variant::Deterministic, 1);
    const auto p = encode(m, g, adj, true, 9);
    CHECK(p.z == p.mu);
  }

  TEST_CASE("zero variance pre-activation gives sigma^2 = ln 2") {
    Matrix x(1, 3);
    x << 1.0, 0.5, -2.0;
    const auto g = build_graph(x, std::vector<Edge>{}, 0, BinaryVector{1}, {});
    ModelDims d = dims_for(g, 2);
    auto m = init_weights(d, Variant::Full, 0);
    m.encoder_weights[0].rightCols(2).setZero();
    const auto adj = normalize_adjacency(g, AggregationMode::SymmetricGcn);
    const auto p = encode(m, g, adj, false, 0);
    for (Index j = 0; j < 2; ++j) CHECK(std::exp(p.log_var(0, j)) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  }

  TEST_CASE("reparameterized samples have the posterior moments") {
    const Index n = 100000;
    Matrix x = Matrix::Zero(n, 2);
    x.col(1).setConstant(1.0);
    const auto g = build_graph(x, std::vector<Edge>{}, 0, BinaryVector(n, 0), {});
    ModelDims d;
    d.in_features = 2;
    d.hidden_dim = 1;
    auto m = init_weights(d, Variant::Full, 0);
    m.encoder_weights[0] << 0.0, 0.0, 0.7, 0.9;
    const auto adj = normalize_adjacency(g, AggregationMode::SymmetricGcn);
    const auto p = encode(m, g, adj, true, 5);
    const double mu = 0.7;
    const double var = grafair::ad::softplus(0.9);
    CHECK(p.mu(0, 0) == mu);
    const double mean = p.z.mean();
    const double sample_var = (p.z.array() - mean).square().sum() / static_cast<double>(n - 1);
    CHECK(std::abs(mean - mu) < 4.0 * std::sqrt(var / static_cast<double>(n)));
    CHECK(std::abs(sample_var - var) < 0.05 * var);
  }

  TEST_CASE("decode basics") {
    const auto g = small_graph(6, 3);
    const auto adj = normalize_adjacency(g, AggregationMode::SymmetricGcn);
    for (Variant v : all_variants()) {
      auto m = init_weights(dims_for(g, 4, 1, 2), v, 2);
      const auto post = encode(m, g, adj, false, 0);
      const Matrix prob = decode(m, post, g.sensitive());
      for (Index r = 0; r < prob.rows(); ++r) CHECK(std::abs(prob.row(r).sum() - 1.0) < 1e-12);
      for (auto& w : m.decoder_weights) w.setZero();
      const Matrix flat = decode(m, post, g.sensitive());
      CHECK(flat.isApproxToConstant(0.5, 1e-15));
      CHECK_THROWS_AS(decode(m, post, BinaryVector(5, 0)), Error);
    }
  }

  TEST_CASE("flipping S changes the output exactly for S-concatenating variants") {
    Matrix x(3, 2);
    x << 0, 0.3, 1, -0.4, 0, 1.2;
    const auto g = build_graph(x, std::vector<Edge>{{0, 1}, {1, 2}}, 0, BinaryVector{0, 1, 1}, {});
    const auto adj = normalize_adjacency(g, AggregationMode::SymmetricGcn);
    for (Variant v : all_variants()) {
      auto m = init_weights(dims_for(g, 3), v, 7);
      m.decoder_weights[0].setConstant(0.4);
      if (concatenates_sensitive(v)) m.decoder_weights[0].bottomRows(2) << 1.0, -1.0, -1.0, 1.0;
      const auto post = encode(m, g, adj, false, 0);
      const Matrix p0 = decode(m, post, BinaryVector{0, 0, 0});
      const Matrix p1 = decode(m, post, BinaryVector{1, 1, 1});
      CHECK((p0 != p1) == concatenates_sensitive(v));
    }
  }

  TEST_CASE("marginal decoding mixes the two interventions") {
    const auto g = small_graph(6, 3);
    const auto adj = normalize_adjacency(g, AggregationMode::SymmetricGcn);
    const auto m = init_weights(dims_for(g, 4), Variant::Full, 2);
    const auto post = encode(m, g, adj, false, 0);
    const Matrix p0 = decode(m, post, BinaryVector(6, 0));
    const Matrix p1 = decode(m, post, BinaryVector(6, 1));
    CHECK((decode_marginal(m, post, 0.3) - (0.7 * p0 + 0.3 * p1)).cwiseAbs().maxCoeff() < 1e-15);
  }

  TEST_CASE("predict_labels") {
    Matrix p(3, 2);
    p << 0.9, 0.1, 0.5, 0.5, 0.2, 0.8;
    CHECK(predict_labels(p) == BinaryVector{0, 0, 1});
    std::mt19937_64 rng(0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Matrix r(50, 2);
    for (Index i = 0; i < r.size(); ++i) r.data()[i] = u(rng);
    const Matrix transformed = (3.0 * r.array().log() + 2.0).matrix();
    CHECK(predict_labels(r) == predict_labels(transformed));
  }

  TEST_CASE("vanilla without sampling is a plain GCN classifier") {
    for (int layers = 1; layers <= 3; ++layers) {
      const auto g = small_graph(9, 11, 0.35);
      const auto adj = normalize_adjacency(g, AggregationMode::SymmetricGcn);
      auto m = init_weights(dims_for(g, 4, layers), Variant::Vanilla, 3);
      m.decoder_biases[0] << 0.2, -0.1;
      const Matrix a = dense(adj.matrix);
      Matrix h = g.features();
      for (const auto& w : m.encoder_weights) h = a * h * w.leftCols(4);
      const Matrix expected = row_softmax((h * m.decoder_weights[0]).rowwise() + m.decoder_biases[0].row(0));
      const Matrix got = decode(m, encode(m, g, adj, false, 0), g.sensitive());
      CHECK((got - expected).cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  TEST_CASE("no-s-concat with the sensitive input weights zeroed ignores interventions") {
    const auto g = small_graph(15, 4);
    const auto adj = normalize_adjacency(g, AggregationMode::SymmetricGcn);
    auto m = init_weights(dims_for(g, 5, 2), Variant::NoSConcat, 5);
    m.encoder_weights[0].row(g.sensitive_col()).setZero();
    auto predict = [&](const AttributedGraph& h) {
      return predict_labels(decode(m, encode(m, h, adj, false, 0), h.sensitive()));
    };
    CHECK(predict(flip_sensitive(g, 0)) == predict(flip_sensitive(g, 1)));
  }

  TEST_CASE("vanilla-wo-s zeroes the sensitive input column") {
    const auto g = small_graph(10, 4);
    const auto m = init_weights(dims_for(g), Variant::VanillaWoS, 0);
    const Matrix x = encoder_input(m, g);
    CHECK(x.col(0).isZero());
    CHECK(x.rightCols(3) == g.features().rightCols(3));
    CHECK(encoder_input(init_weights(dims_for(g), Variant::Vanilla, 0), g) == g.features());
  }

  TEST_CASE("checkpoint round trip is exact") {
    const auto g = small_graph(10, 4);
    const auto m = init_weights(dims_for(g, 3, 2, 2), Variant::NoKl, 8);
    const std::string path = temp_path("roundtrip.ckpt");
    save_checkpoint(path, m, {{"seed", "8"}, {"dataset", "synth"}});
    std::map<std::string, std::string> meta;
    const auto back = load_checkpoint(path, &meta);
    CHECK(back.variant == m.variant);
    CHECK(meta.at("seed") == "8");
    const auto pa = m.parameters();
    const auto pb = back.parameters();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t k = 0; k < pa.size(); ++k) CHECK(*pa[k] == *pb[k]);
    std::filesystem::remove(path);
  }

  TEST_CASE("checkpoint errors") {
    try {
      load_checkpoint(temp_path("does-not-exist.ckpt"), nullptr);
      FAIL("expected MissingFile");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MissingFile);
    }
    const auto g = small_graph(10, 4);
    const std::string path = temp_path("broken.ckpt");
    save_checkpoint(path, init_weights(dims_for(g), Variant::Full, 1), {});
    std::ifstream in(path);
    std::string text((std::istreambuf_iterator<char>(in)), {});
    in.close();
    std::ofstream(path) << text.substr(0, text.size() / 2);
    try {
      load_checkpoint(path, nullptr);
      FAIL("expected ParseError");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ParseError);
    }
    std::filesystem::remove(path);
  }
}
