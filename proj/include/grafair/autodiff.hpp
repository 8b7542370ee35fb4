#pragma once

#include "grafair/graph.hpp"

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace grafair::ad {

class Tape;

/// Handle to one record on a Tape. Cheap to copy; valid as long as the tape.
class Value {
 public:
  Value() = default;

  Index rows() const;
  Index cols() const;
  const Matrix& data() const;
  /// Gradient accumulated by the last backward pass; zeros if none reached this node.
  Matrix grad() const;
  bool requires_grad() const;
  /// Convenience for 1x1 values.
  double scalar() const;

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }

 private:
  friend class Tape;
  Value(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Records one forward pass in evaluation order, so the index order is already
/// a topological order of the provenance graph.
class Tape {
 public:
  using BackwardRule = std::function<void(Tape&, const Matrix& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Value parameter(Matrix data) { return leaf(std::move(data), true); }
  Value constant(Matrix data) { return leaf(std::move(data), false); }
  Value leaf(Matrix data, bool requires_grad);

  /// Appends an op result. `inputs` are used only to decide whether the result
  /// needs a gradient.
  Value record(Matrix data, std::span<const Value> inputs, BackwardRule rule);

  /// Reverse-mode sweep from a 1x1 root. Leaf gradients accumulate across calls;
  /// interior gradients are recomputed each call.
  void backward(Value root);
  void zero_grad();

  void accumulate(const Value& v, const Matrix& g);

  std::size_t size() const { return nodes_.size(); }
  const Matrix& data(std::size_t id) const { return nodes_[id].data; }
  Matrix grad(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

 private:
  struct Node {
    Matrix data;
    Matrix grad;  // empty until materialized
    bool requires_grad = false;
    bool is_leaf = true;
    BackwardRule backward;
  };
  std::vector<Node> nodes_;
};

// Forward ops. Shapes follow linear-algebra rules; the only broadcasts are
// scalar * matrix and adding a 1xC row to every row of an NxC matrix.
Value matmul(const Value& a, const Value& b);
/// `adj` must outlive every backward pass over the result.
Value sparse_matmul(const NormalizedAdjacency& adj, const Value& x);
Value add(const Value& a, const Value& b);
Value sub(const Value& a, const Value& b);
Value add_scalar(const Value& x, double c);
Value concat_cols(const Value& a, const Value& b);
Value slice_cols(const Value& x, Index start, Index count);
Value softplus(const Value& x);
Value relu(const Value& x);
Value elementwise_mul(const Value& a, const Value& b);
Value scalar_mul(double c, const Value& x);
Value row_gather(const Value& x, std::span<const Index> indices);
Value mean_all(const Value& x);
Value sum_all(const Value& x);
Value softmax_rows(const Value& x);
Value log(const Value& x);
Value exp(const Value& x);
Value square(const Value& x);
/// max(x, floor); gradient is passed only where x > floor.
Value clamp_min(const Value& x, double floor);

/// Overflow-safe ln(1 + e^x).
double softplus(double x);

/// Builds the scalar objective on a fresh tape from parameter leaves.
using ScalarGraphFn = std::function<Value(Tape&, std::span<const Value> params)>;

/// Central-difference check of `f`'s reverse-mode gradient with respect to every
/// entry of every parameter. Returns the largest relative error, where the
/// denominator is max(|analytic|, |numeric|, 1e-8).
double finite_diff_check(const ScalarGraphFn& f, std::span<const Matrix> params, double eps);

}  // namespace grafair::ad
