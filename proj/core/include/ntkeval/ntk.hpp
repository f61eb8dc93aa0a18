#pragma once

#include <functional>
#include <span>

#include "ntkeval/toy_lm.hpp"

namespace ntkeval::est {

// A probe point for the tangent kernel. The model output f(point; theta) is
// the exact probability of answering `truth` given `prompt`, computed by
// completion enumeration at the given temperature.
struct NtkPoint {
    std::string prompt;
    Numeral truth;
    int max_len = 4;
    double temperature = 1.0;
};

// [f(x; theta + eta * grad f(x'; theta)) - f(x; theta)] / eta.
// Throws std::invalid_argument for eta <= 0.
double ntk_finite_step(const lm::ToyLm& model, const NtkPoint& x, const NtkPoint& x_train,
                       double eta);

// <grad f(x; theta), grad f(x'; theta)>. Converges to the finite-step form
// as eta -> 0; equal for every eta when f is linear in theta.
double ntk_gradient_form(const lm::ToyLm& model, const NtkPoint& x, const NtkPoint& x_train);

// Shared arithmetic, also usable with synthetic functionals in tests.
double finite_step_quotient(const std::function<double(std::span<const double>)>& f,
                            std::span<const double> theta, std::span<const double> direction,
                            double eta);
double dot(std::span<const double> a, std::span<const double> b);

}  // namespace ntkeval::est
