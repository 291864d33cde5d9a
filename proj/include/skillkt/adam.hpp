#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>

#include "skillkt/parameters.hpp"

namespace skillkt {

struct AdamConfig
{
    double learning_rate = 2e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

template <class Scalar>
struct AdamState
{
    AdamConfig config;
    std::int64_t step = 0;
    std::map<std::string, Matrix<Scalar>> first_moment;
    std::map<std::string, Matrix<Scalar>> second_moment;
};

/**
 * One bias-corrected Adam update over every parameter in `params`.
 *
 * A parameter without an entry in `grads` is treated as having zero gradient.
 * Gradients are checked before anything is touched, so a NaN/Inf leaves
 * parameters and state unchanged and throws NumericalError.
 */
template <class Scalar>
void adam_step(ParameterMap<Scalar>& params, const ParameterMap<Scalar>& grads, AdamState<Scalar>& state)
{
    for (const auto& [name, g] : grads) {
        auto it = params.find(name);
        if (it == params.end()) throw ConfigError("adam_step: gradient for unknown parameter '" + name + "'");
        if (g.shape() != it->second.shape()) {
            throw ShapeError("adam_step: gradient for '" + name + "' has shape " + shape_str(g.shape())
                             + ", parameter has " + shape_str(it->second.shape()));
        }
        if (!g.all_finite()) throw NumericalError("adam_step: non-finite gradient for '" + name + "'");
    }

    const auto& c = state.config;
    ++state.step;
    const double t = static_cast<double>(state.step);
    const Scalar correction1 = Scalar(1.0 - std::pow(c.beta1, t));
    const Scalar correction2 = Scalar(1.0 - std::pow(c.beta2, t));
    const Scalar b1 = Scalar(c.beta1), b2 = Scalar(c.beta2);
    const Scalar lr = Scalar(c.learning_rate), eps = Scalar(c.epsilon);

    for (auto& [name, p] : params) {
        auto& m = state.first_moment[name];
        auto& v = state.second_moment[name];
        if (m.size() == 0) {
            m = Matrix<Scalar>::Zero(p.rows(), p.cols());
            v = Matrix<Scalar>::Zero(p.rows(), p.cols());
        }
        auto g = grads.find(name);
        if (g == grads.end()) {
            m *= b1;
            v *= b2;
        } else {
            const auto& gm = g->second.matrix();
            m = b1 * m + (Scalar(1) - b1) * gm;
            v = b2 * v + (Scalar(1) - b2) * gm.cwiseAbs2();
        }
        p.matrix().array() -= lr * (m.array() / correction1)
                              / ((v.array() / correction2).sqrt() + eps);
    }
}

} // namespace skillkt
