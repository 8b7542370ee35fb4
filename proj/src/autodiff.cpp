#include "grafair/autodiff.hpp"

#include "grafair/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace grafair::ad {
namespace {

std::string shape(const Value& v) {
  return std::to_string(v.rows()) + "x" + std::to_string(v.cols());
}

[[noreturn]] void mismatch(const char* op, const Value& a, const Value& b) {
  throw Error(ErrorCode::ShapeMismatch,
              std::string(op) + ": left is " + shape(a) + ", right is " + shape(b));
}

Tape& same_tape(const Value& a, const Value& b) {
  if (a.tape() == nullptr || a.tape() != b.tape()) {
    throw Error(ErrorCode::InvalidParameter, "operands live on different tapes");
  }
  return *a.tape();
}

Tape& tape_of(const Value& v) {
  if (v.tape() == nullptr) throw Error(ErrorCode::InvalidParameter, "value has no tape");
  return *v.tape();
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Index Value::rows() const { return tape_->data(id_).rows(); }
Index Value::cols() const { return tape_->data(id_).cols(); }
const Matrix& Value::data() const { return tape_->data(id_); }
Matrix Value::grad() const { return tape_->grad(id_); }
bool Value::requires_grad() const { return tape_->requires_grad(id_); }

double Value::scalar() const {
  if (rows() != 1 || cols() != 1) {
    throw Error(ErrorCode::ShapeMismatch, "expected a 1x1 value, got " + shape(*this));
  }
  return data()(0, 0);
}

Value Tape::leaf(Matrix data, bool requires_grad) {
  Node n;
  n.data = std::move(data);
  n.requires_grad = requires_grad;
  n.is_leaf = true;
  nodes_.push_back(std::move(n));
  return Value(this, nodes_.size() - 1);
}

Value Tape::record(Matrix data, std::span<const Value> inputs, BackwardRule rule) {
  Node n;
  n.data = std::move(data);
  n.is_leaf = false;
  n.requires_grad = std::any_of(inputs.begin(), inputs.end(),
                                [](const Value& v) { return v.requires_grad(); });
  if (n.requires_grad) n.backward = std::move(rule);
  nodes_.push_back(std::move(n));
  return Value(this, nodes_.size() - 1);
}

Matrix Tape::grad(std::size_t id) const {
  const Node& n = nodes_[id];
  if (n.grad.size() == 0) return Matrix::Zero(n.data.rows(), n.data.cols());
  return n.grad;
}

void Tape::accumulate(const Value& v, const Matrix& g) {
  Node& n = nodes_[v.id()];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::zero_grad() {
  for (auto& n : nodes_) n.grad.resize(0, 0);
}

void Tape::backward(Value root) {
  if (root.rows() != 1 || root.cols() != 1) {
    throw Error(ErrorCode::NonScalarRoot, "backward needs a 1x1 root, got " + shape(root));
  }
  for (auto& n : nodes_) {
    if (!n.is_leaf) n.grad.resize(0, 0);
  }
  if (!nodes_[root.id()].requires_grad) return;
  accumulate(root, Matrix::Ones(1, 1));
  for (std::size_t k = root.id() + 1; k-- > 0;) {
    Node& n = nodes_[k];
    if (n.is_leaf || !n.requires_grad || n.grad.size() == 0) continue;
    n.backward(*this, n.grad);
  }
}

Value matmul(const Value& a, const Value& b) {
  Tape& t = same_tape(a, b);
  if (a.cols() != b.rows()) mismatch("matmul", a, b);
  Matrix out = a.data() * b.data();
  const Value in[] = {a, b};
  return t.record(std::move(out), in, [a, b](Tape& tp, const Matrix& g) {
    if (a.requires_grad()) tp.accumulate(a, g * b.data().transpose());
    if (b.requires_grad()) tp.accumulate(b, a.data().transpose() * g);
  });
}

Value sparse_matmul(const NormalizedAdjacency& adj, const Value& x) {
  Tape& t = tape_of(x);
  if (adj.matrix.cols() != x.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "sparse_matmul: adjacency is " +
                                              std::to_string(adj.matrix.rows()) + "x" +
                                              std::to_string(adj.matrix.cols()) + ", right is " +
                                              shape(x));
  }
  Matrix out = adj.matrix * x.data();
  const SparseMatrix* m = &adj.matrix;
  const Value in[] = {x};
  return t.record(std::move(out), in, [m, x](Tape& tp, const Matrix& g) {
    tp.accumulate(x, Matrix(m->transpose() * g));
  });
}

Value add(const Value& a, const Value& b) {
  Tape& t = same_tape(a, b);
  const Value in[] = {a, b};
  if (a.rows() == b.rows() && a.cols() == b.cols()) {
    return t.record(a.data() + b.data(), in, [a, b](Tape& tp, const Matrix& g) {
      tp.accumulate(a, g);
      tp.accumulate(b, g);
    });
  }
  if (b.rows() == 1 && b.cols() == a.cols()) {
    Matrix out = a.data().rowwise() + b.data().row(0);
    return t.record(std::move(out), in, [a, b](Tape& tp, const Matrix& g) {
      tp.accumulate(a, g);
      if (b.requires_grad()) tp.accumulate(b, Matrix(g.colwise().sum()));
    });
  }
  mismatch("add", a, b);
}

Value sub(const Value& a, const Value& b) {
  Tape& t = same_tape(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) mismatch("sub", a, b);
  const Value in[] = {a, b};
  return t.record(a.data() - b.data(), in, [a, b](Tape& tp, const Matrix& g) {
    tp.accumulate(a, g);
    if (b.requires_grad()) tp.accumulate(b, Matrix(-g));
  });
}

Value add_scalar(const Value& x, double c) {
  Tape& t = tape_of(x);
  const Value in[] = {x};
  Matrix out = x.data().array() + c;
  return t.record(std::move(out), in, [x](Tape& tp, const Matrix& g) { tp.accumulate(x, g); });
}

Value concat_cols(const Value& a, const Value& b) {
  Tape& t = same_tape(a, b);
  if (a.rows() != b.rows()) mismatch("concat_cols", a, b);
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a.data(), b.data();
  const Value in[] = {a, b};
  const Index ac = a.cols();
  const Index bc = b.cols();
  return t.record(std::move(out), in, [a, b, ac, bc](Tape& tp, const Matrix& g) {
    if (a.requires_grad()) tp.accumulate(a, Matrix(g.leftCols(ac)));
    if (b.requires_grad()) tp.accumulate(b, Matrix(g.rightCols(bc)));
  });
}

Value slice_cols(const Value& x, Index start, Index count) {
  Tape& t = tape_of(x);
  if (start < 0 || count < 0 || start + count > x.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "slice_cols [" + std::to_string(start) + ", " +
                                              std::to_string(start + count) + ") of " + shape(x));
  }
  Matrix out = x.data().middleCols(start, count);
  const Value in[] = {x};
  return t.record(std::move(out), in, [x, start, count](Tape& tp, const Matrix& g) {
    Matrix full = Matrix::Zero(x.rows(), x.cols());
    full.middleCols(start, count) = g;
    tp.accumulate(x, full);
  });
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

Value softplus(const Value& x) {
  Tape& t = tape_of(x);
  Matrix out = x.data().unaryExpr([](double v) { return softplus(v); });
  const Value in[] = {x};
  return t.record(std::move(out), in, [x](Tape& tp, const Matrix& g) {
    Matrix d = x.data().unaryExpr([](double v) { return sigmoid(v); });
    tp.accumulate(x, Matrix(g.cwiseProduct(d)));
  });
}

Value relu(const Value& x) {
  Tape& t = tape_of(x);
  Matrix out = x.data().cwiseMax(0.0);
  const Value in[] = {x};
  return t.record(std::move(out), in, [x](Tape& tp, const Matrix& g) {
    Matrix d = (x.data().array() > 0.0).cast<double>().matrix();
    tp.accumulate(x, Matrix(g.cwiseProduct(d)));
  });
}

Value elementwise_mul(const Value& a, const Value& b) {
  Tape& t = same_tape(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) mismatch("elementwise_mul", a, b);
  const Value in[] = {a, b};
  return t.record(a.data().cwiseProduct(b.data()), in, [a, b](Tape& tp, const Matrix& g) {
    if (a.requires_grad()) tp.accumulate(a, Matrix(g.cwiseProduct(b.data())));
    if (b.requires_grad()) tp.accumulate(b, Matrix(g.cwiseProduct(a.data())));
  });
}

Value scalar_mul(double c, const Value& x) {
  Tape& t = tape_of(x);
  const Value in[] = {x};
  return t.record(c * x.data(), in,
                  [c, x](Tape& tp, const Matrix& g) { tp.accumulate(x, Matrix(c * g)); });
}

Value row_gather(const Value& x, std::span<const Index> indices) {
  Tape& t = tape_of(x);
  Matrix out(static_cast<Index>(indices.size()), x.cols());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const Index src = indices[r];
    if (src < 0 || src >= x.rows()) {
      throw Error(ErrorCode::IndexOutOfRange,
                  "row_gather index " + std::to_string(src) + " of " + shape(x));
    }
    out.row(static_cast<Index>(r)) = x.data().row(src);
  }
  std::vector<Index> idx(indices.begin(), indices.end());
  const Value in[] = {x};
  return t.record(std::move(out), in, [x, idx = std::move(idx)](Tape& tp, const Matrix& g) {
    Matrix full = Matrix::Zero(x.rows(), x.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) full.row(idx[r]) += g.row(static_cast<Index>(r));
    tp.accumulate(x, full);
  });
}

Value sum_all(const Value& x) {
  Tape& t = tape_of(x);
  Matrix out(1, 1);
  out(0, 0) = x.data().sum();
  const Value in[] = {x};
  return t.record(std::move(out), in, [x](Tape& tp, const Matrix& g) {
    tp.accumulate(x, Matrix::Constant(x.rows(), x.cols(), g(0, 0)));
  });
}

Value mean_all(const Value& x) {
  Tape& t = tape_of(x);
  const double count = static_cast<double>(x.data().size());
  if (count == 0) throw Error(ErrorCode::ShapeMismatch, "mean_all of an empty value");
  Matrix out(1, 1);
  out(0, 0) = x.data().sum() / count;
  const Value in[] = {x};
  return t.record(std::move(out), in, [x, count](Tape& tp, const Matrix& g) {
    tp.accumulate(x, Matrix::Constant(x.rows(), x.cols(), g(0, 0) / count));
  });
}

Value softmax_rows(const Value& x) {
  Tape& t = tape_of(x);
  Matrix out(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    const double m = x.data().row(r).maxCoeff();
    out.row(r) = (x.data().row(r).array() - m).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  Matrix probs = out;
  const Value in[] = {x};
  return t.record(std::move(out), in, [x, probs = std::move(probs)](Tape& tp, const Matrix& g) {
    const Eigen::VectorXd dot = g.cwiseProduct(probs).rowwise().sum();
    Matrix gx = probs.cwiseProduct(Matrix(g.colwise() - dot));
    tp.accumulate(x, gx);
  });
}

Value log(const Value& x) {
  Tape& t = tape_of(x);
  Matrix out = x.data().array().log().matrix();
  const Value in[] = {x};
  return t.record(std::move(out), in, [x](Tape& tp, const Matrix& g) {
    tp.accumulate(x, Matrix(g.cwiseQuotient(x.data())));
  });
}

Value exp(const Value& x) {
  Tape& t = tape_of(x);
  Matrix out = x.data().array().exp().matrix();
  Matrix cached = out;
  const Value in[] = {x};
  return t.record(std::move(out), in, [x, cached = std::move(cached)](Tape& tp, const Matrix& g) {
    tp.accumulate(x, Matrix(g.cwiseProduct(cached)));
  });
}

Value square(const Value& x) {
  Tape& t = tape_of(x);
  const Value in[] = {x};
  return t.record(x.data().cwiseAbs2(), in, [x](Tape& tp, const Matrix& g) {
    tp.accumulate(x, Matrix(2.0 * g.cwiseProduct(x.data())));
  });
}

Value clamp_min(const Value& x, double floor) {
  Tape& t = tape_of(x);
  Matrix out = x.data().cwiseMax(floor);
  const Value in[] = {x};
  return t.record(std::move(out), in, [x, floor](Tape& tp, const Matrix& g) {
    Matrix d = (x.data().array() > floor).cast<double>().matrix();
    tp.accumulate(x, Matrix(g.cwiseProduct(d)));
  });
}

double finite_diff_check(const ScalarGraphFn& f, std::span<const Matrix> params, double eps) {
  if (!(eps > 0)) throw Error(ErrorCode::InvalidParameter, "finite difference step must be > 0");

  std::vector<Matrix> analytic;
  {
    Tape tape;
    std::vector<Value> leaves;
    for (const auto& p : params) leaves.push_back(tape.parameter(p));
    Value root = f(tape, leaves);
    tape.backward(root);
    for (const auto& v : leaves) analytic.push_back(v.grad());
  }

  auto evaluate = [&](const std::vector<Matrix>& ps) {
    Tape tape;
    std::vector<Value> leaves;
    for (const auto& p : ps) leaves.push_back(tape.constant(p));
    return f(tape, leaves).scalar();
  };

  std::vector<Matrix> work(params.begin(), params.end());
  double worst = 0.0;
  for (std::size_t k = 0; k < work.size(); ++k) {
    for (Index e = 0; e < work[k].size(); ++e) {
      double& entry = work[k].data()[e];
      const double saved = entry;
      entry = saved + eps;
      const double up = evaluate(work);
      entry = saved - eps;
      const double down = evaluate(work);
      entry = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double exact = analytic[k].data()[e];
      const double denom = std::max({std::abs(exact), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(exact - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace grafair::ad
