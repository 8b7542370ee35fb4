#include "grafair/optimizer.hpp"

#include "grafair/errors.hpp"

#include <cmath>
#include <string>

namespace grafair {

void adam_step(std::span<Matrix* const> params, std::span<const Matrix> grads, AdamState& state,
               const AdamOptions& options) {
  if (params.size() != grads.size()) {
    throw Error(ErrorCode::ShapeMismatch, std::to_string(params.size()) + " parameters but " +
                                              std::to_string(grads.size()) + " gradients");
  }
  if (state.m.empty()) {
    for (const Matrix* p : params) {
      state.m.push_back(Matrix::Zero(p->rows(), p->cols()));
      state.v.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }
  if (state.m.size() != params.size()) {
    throw Error(ErrorCode::ShapeMismatch, "optimizer state was built for a different parameter list");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Matrix& p = *params[k];
    if (grads[k].rows() != p.rows() || grads[k].cols() != p.cols() ||
        state.m[k].rows() != p.rows() || state.m[k].cols() != p.cols()) {
      throw Error(ErrorCode::ShapeMismatch, "gradient " + std::to_string(k) + " is " +
                                                std::to_string(grads[k].rows()) + "x" +
                                                std::to_string(grads[k].cols()) + ", parameter is " +
                                                std::to_string(p.rows()) + "x" +
                                                std::to_string(p.cols()));
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(options.beta1, t);
  const double c2 = 1.0 - std::pow(options.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto m = state.m[k].array();
    auto v = state.v[k].array();
    const auto g = grads[k].array();
    m = options.beta1 * m + (1.0 - options.beta1) * g;
    v = options.beta2 * v + (1.0 - options.beta2) * g.square();
    params[k]->array() -= options.lr * (m / c1) / ((v / c2).sqrt() + options.eps);
  }
}

}  // namespace grafair
