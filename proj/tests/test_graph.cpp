#include "grafair/errors.hpp"
#include "grafair/graph.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>

using namespace grafair;
using grafair::testing::dense;
using grafair::testing::small_graph;

namespace {

AttributedGraph three_nodes(std::vector<Edge> edges) {
  Matrix x(3, 2);
  x << 0, 1.5, 1, -2.0, 0, 0.25;
  const BinaryVector y = {0, 1, 1};
  return build_graph(x, edges, 0, y, {});
}

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::InvalidParameter;
}

double spectral_radius(const Matrix& m) {
  Eigen::VectorXd v = Eigen::VectorXd::Ones(m.rows());
  double lambda = 0.0;
  for (int k = 0; k < 2000; ++k) {
    Eigen::VectorXd w = m * v;
    lambda = w.norm() / v.norm();
    if (w.norm() == 0.0) return 0.0;
    v = w / w.norm();
  }
  return lambda;
}

}  // namespace

TEST_SUITE("graph") {
  TEST_CASE("duplicate and reversed edges collapse") {
    const auto g = three_nodes({{0, 1}, {1, 0}, {1, 2}});
    CHECK(g.edge_list() == std::vector<Edge>{{0, 1}, {1, 2}});
    CHECK(g.topology().degree(0) == 1);
    CHECK(g.topology().degree(1) == 2);
    CHECK(g.topology().degree(2) == 1);
    CHECK(g.num_edges() == 2);
  }

  TEST_CASE("self loops are dropped") {
    const auto g = three_nodes({{0, 0}, {2, 2}, {0, 2}});
    CHECK(g.edge_list() == std::vector<Edge>{{0, 2}});
  }

  TEST_CASE("sensitive vector mirrors the feature column") {
    const auto g = three_nodes({});
    CHECK(g.sensitive() == BinaryVector{0, 1, 0});
    CHECK(g.sensitive_col() == 0);
  }

  TEST_CASE("construction errors") {
    Matrix x(3, 2);
    x << 0, 1, 2, 1, 0, 1;
    const BinaryVector y = {0, 1, 0};
    const std::vector<Edge> none;
    CHECK(code_of([&] { build_graph(x, none, 0, y, {}); }) == ErrorCode::NonBinaryColumn);
    const std::vector<Edge> bad = {{0, 3}};
    CHECK(code_of([&] { three_nodes(bad); }) == ErrorCode::IndexOutOfRange);
    const std::vector<double> labels = {0, 1, 2};
    Matrix ok(3, 1);
    ok << 0, 1, 0;
    CHECK(code_of([&] { build_graph(ok, none, 0, labels, {}); }) == ErrorCode::NonBinaryColumn);
    CHECK(code_of([&] { build_graph(Matrix(0, 2), none, 0, BinaryVector{}, {}); }) == ErrorCode::EmptyGraph);
  }

  TEST_CASE("stratified split is disjoint, covering and per-class proportional") {
    BinaryVector y(200);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = i % 4 == 0;
    const auto m = stratified_split(y, 0.5, 0.25, 3);
    std::array<std::array<int, 3>, 2> per_class{};
    for (std::size_t i = 0; i < y.size(); ++i) {
      CHECK(m.train[i] + m.val[i] + m.test[i] == 1);
      per_class[y[i]][0] += m.train[i];
      per_class[y[i]][1] += m.val[i];
      per_class[y[i]][2] += m.test[i];
    }
    CHECK(per_class[1] == std::array<int, 3>{25, 13, 12});
    CHECK(per_class[0] == std::array<int, 3>{75, 38, 37});
    CHECK(stratified_split(y, 0.5, 0.25, 3).train == m.train);
    CHECK(stratified_split(y, 0.5, 0.25, 4).train != m.train);
  }

  TEST_CASE("explicit masks are validated") {
    Matrix x(2, 1);
    x << 0, 1;
    SplitSpec spec;
    spec.explicit_masks = SplitMasks{{1, 0}, {1, 0}, {0, 1}};
    const std::vector<Edge> none;
    CHECK_THROWS_AS(build_graph(x, none, 0, BinaryVector{0, 1}, spec), Error);
  }

  TEST_CASE("symmetric normalization of a single edge is 0.5 everywhere") {
    Matrix x(2, 1);
    x << 0, 1;
    const std::vector<Edge> e = {{0, 1}};
    const auto g = build_graph(x, e, 0, BinaryVector{0, 1}, {});
    const Matrix a = dense(normalize_adjacency(g, AggregationMode::SymmetricGcn).matrix);
    CHECK(a.isApproxToConstant(0.5, 1e-15));
  }

  TEST_CASE("isolated node keeps a unit self loop") {
    const auto g = three_nodes({{0, 1}});
    const Matrix a = dense(normalize_adjacency(g, AggregationMode::SymmetricGcn).matrix);
    CHECK(a(2, 2) == 1.0);
    CHECK(a.row(2).sum() == 1.0);
  }

  TEST_CASE("row-mean rows sum to one") {
    const auto g = three_nodes({{0, 1}, {1, 2}});
    const Matrix a = dense(normalize_adjacency(g, AggregationMode::RowMean).matrix);
    for (Index i = 0; i < 3; ++i) CHECK(std::abs(a.row(i).sum() - 1.0) < 1e-12);
  }

  TEST_CASE("sum mode is A + I") {
    const auto g = three_nodes({{0, 1}, {1, 2}});
    Matrix expected(3, 3);
    expected << 1, 1, 0, 1, 1, 1, 0, 1, 1;
    CHECK(dense(normalize_adjacency(g, AggregationMode::Sum).matrix) == expected);
  }

  TEST_CASE("symmetric normalization matches the dense formula, is symmetric, radius <= 1") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto g = small_graph(5 + static_cast<Index>(seed) * 4, seed, 0.2);
      const Index n = g.num_nodes();
      Matrix a = Matrix::Identity(n, n);
      for (const auto& [i, j] : g.edge_list()) a(i, j) = a(j, i) = 1.0;
      const Eigen::VectorXd d = a.rowwise().sum().array().rsqrt();
      const Matrix expected = d.asDiagonal() * a * d.asDiagonal();
      const Matrix got = dense(normalize_adjacency(g, AggregationMode::SymmetricGcn).matrix);
      CHECK((got - expected).cwiseAbs().maxCoeff() < 1e-12);
      CHECK((got - got.transpose()).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(spectral_radius(got) <= 1.0 + 1e-9);
      const auto& sp = normalize_adjacency(g, AggregationMode::SymmetricGcn).matrix;
      for (Index r = 0; r < sp.outerSize(); ++r)
        for (SparseMatrix::InnerIterator it(sp, r); it; ++it) CHECK(it.value() > 0.0);
    }
  }

  TEST_CASE("normalization order is deterministic") {
    const auto g = small_graph(30, 5);
    const auto a = normalize_adjacency(g, AggregationMode::SymmetricGcn).matrix;
    const auto b = normalize_adjacency(g, AggregationMode::SymmetricGcn).matrix;
    CHECK(std::equal(a.valuePtr(), a.valuePtr() + a.nonZeros(), b.valuePtr()));
    CHECK(std::equal(a.innerIndexPtr(), a.innerIndexPtr() + a.nonZeros(), b.innerIndexPtr()));
  }

  TEST_CASE("neighbor sampler keeps self plus at most k neighbors") {
    const auto g = small_graph(40, 2, 0.5);
    std::mt19937_64 rng(1);
    const auto s = sample_adjacency(g, 3, rng);
    CHECK(s.mode == AggregationMode::Sum);
    const Matrix a = dense(s.matrix);
    for (Index i = 0; i < g.num_nodes(); ++i) {
      CHECK(a(i, i) == 1.0);
      const Index kept = static_cast<Index>((a.row(i).array() != 0.0).count()) - 1;
      CHECK(kept == std::min<Index>(3, g.topology().degree(i)));
      for (Index j = 0; j < g.num_nodes(); ++j) {
        if (j != i && a(i, j) != 0.0) {
          const auto row = g.topology().row(i);
          CHECK(std::binary_search(row.begin(), row.end(), j));
        }
      }
    }
  }

  TEST_CASE("flip_sensitive") {
    const auto g = three_nodes({{0, 1}});
    const auto one = flip_sensitive(g, 1);
    CHECK(one.sensitive() == BinaryVector{1, 1, 1});
    CHECK(one.features().col(0) == Eigen::Vector3d(1, 1, 1));
    CHECK(one.features().col(1) == g.features().col(1));
    CHECK(g.sensitive() == BinaryVector{0, 1, 0});
    CHECK(flip_sensitive(one, 1) == one);
    CHECK(&one.topology() == &g.topology());

    Matrix restored = one.features();
    restored.col(0) = g.features().col(0);
    CHECK(one.with_features(restored) == g);

    Matrix zeros(3, 1);
    zeros << 0, 0, 0;
    const auto z = build_graph(zeros, std::vector<Edge>{}, 0, BinaryVector{0, 1, 0}, {});
    CHECK(flip_sensitive(z, 0) == z);
  }

  TEST_CASE("perturb_features touches only non-sensitive test rows") {
    const auto g = small_graph(40, 9);
    CHECK(perturb_features(g, 0.0, 4) == g);
    const auto a = perturb_features(g, 1.0, 4);
    const auto b = perturb_features(g, 1.0, 4);
    CHECK(a == b);
    CHECK(a.features().col(0) == g.features().col(0));
    CHECK(a.sensitive() == g.sensitive());
    bool changed = false;
    for (Index i = 0; i < g.num_nodes(); ++i) {
      const bool test = g.masks().test[static_cast<std::size_t>(i)];
      const bool same = a.features().row(i) == g.features().row(i);
      CHECK(same == !test);
      changed = changed || !same;
    }
    CHECK(changed);
    CHECK(!(perturb_features(g, 1.0, 5) == a));
    CHECK_THROWS_AS(perturb_features(g, -1.0, 0), Error);
  }

  TEST_CASE("relabeling nodes yields an isomorphic graph") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto g = small_graph(6 + static_cast<Index>(seed % 15), seed, 0.35);
      const Index n = g.num_nodes();
      std::vector<Index> perm(static_cast<std::size_t>(n));
      std::iota(perm.begin(), perm.end(), 0);
      std::mt19937_64 rng(seed);
      std::shuffle(perm.begin(), perm.end(), rng);

      Matrix x(n, g.num_features());
      BinaryVector y(static_cast<std::size_t>(n));
      for (Index i = 0; i < n; ++i) {
        x.row(perm[i]) = g.features().row(i);
        y[perm[i]] = g.labels()[i];
      }
      std::vector<Edge> edges;
      for (const auto& [i, j] : g.edge_list()) edges.emplace_back(perm[j], perm[i]);
      const auto h = build_graph(x, edges, 0, y, {});

      std::vector<Index> dg, dh;
      for (Index i = 0; i < n; ++i) {
        dg.push_back(g.topology().degree(i));
        dh.push_back(h.topology().degree(i));
      }
      std::sort(dg.begin(), dg.end());
      std::sort(dh.begin(), dh.end());
      CHECK(dg == dh);

      std::vector<Edge> mapped;
      for (const auto& [i, j] : g.edge_list()) mapped.emplace_back(std::min(perm[i], perm[j]), std::max(perm[i], perm[j]));
      std::sort(mapped.begin(), mapped.end());
      CHECK(mapped == h.edge_list());
    }
  }
}
