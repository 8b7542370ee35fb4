#pragma once

#include "grafair/model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace grafair {

/// Random instance for gradient checks: Erdos-Renyi edges with p = 0.3,
/// standard normal features, sensitive attribute in column 0.
AttributedGraph random_check_graph(Index nodes, Index features, std::uint64_t seed);

struct GradientCheckSpec {
  Index nodes = 10;
  Index features = 4;
  Index hidden_dim = 5;
  int encoder_layers = 1;
  int classifier_layers = 1;
  double beta = 1000.0;
  double eps = 1e-5;
  std::uint64_t seed = 0;
};

/// Largest relative error between reverse-mode and central-difference gradients
/// of the training loss (fixed noise draw) over every model parameter.
double loss_gradient_error(Variant variant, const GradientCheckSpec& spec);

/// KL(N(mu, e^log_var) || N(0, 1)) by the trapezoid rule over mu +- 12 sigma.
double kl_by_quadrature(double mu, double log_var, int points = 100000);

struct CheckOutcome {
  std::string name;
  bool passed = false;
  std::string detail;
};

std::vector<CheckOutcome> run_self_checks(std::uint64_t seed);

}  // namespace grafair
