#include "ntkeval/ntk.hpp"

#include <stdexcept>
#include <vector>

namespace ntkeval::est {

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: size mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double finite_step_quotient(const std::function<double(std::span<const double>)>& f,
                            std::span<const double> theta, std::span<const double> direction,
                            double eta) {
    if (!(eta > 0)) throw std::invalid_argument("eta must be > 0");
    if (theta.size() != direction.size()) {
        throw std::invalid_argument("finite_step_quotient: size mismatch");
    }
    std::vector<double> moved(theta.begin(), theta.end());
    for (size_t i = 0; i < moved.size(); ++i) moved[i] += eta * direction[i];
    const double f0 = f(theta);
    const double f1 = f(moved);
    return (f1 - f0) / eta;
}

double ntk_finite_step(const lm::ToyLm& model, const NtkPoint& x, const NtkPoint& x_train,
                       double eta) {
    if (!(eta > 0)) throw std::invalid_argument("eta must be > 0");
    std::vector<double> direction =
        model.correct_probability_grad(x_train.prompt, x_train.truth, x_train.max_len,
                                       x_train.temperature);
    const double f0 = model.exact_correct_probability(x.prompt, x.truth, x.max_len, x.temperature);
    lm::ToyLm moved = model;
    moved.axpy_params(eta, direction);
    const double f1 = moved.exact_correct_probability(x.prompt, x.truth, x.max_len, x.temperature);
    return (f1 - f0) / eta;
}

double ntk_gradient_form(const lm::ToyLm& model, const NtkPoint& x, const NtkPoint& x_train) {
    std::vector<double> gx =
        model.correct_probability_grad(x.prompt, x.truth, x.max_len, x.temperature);
    std::vector<double> gt =
        model.correct_probability_grad(x_train.prompt, x_train.truth, x_train.max_len,
                                       x_train.temperature);
    return dot(gx, gt);
}

}  // namespace ntkeval::est
