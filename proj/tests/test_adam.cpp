#include <doctest.h>

#include <cmath>

#include "skillkt/adam.hpp"

using namespace skillkt;

TEST_CASE("first step moves each coordinate by about lr")
{
    ParameterMap<double> params{{"w", Tensor<double>({4}, {0.5, -1.0, 2.0, 0.0})}};
    const ParameterMap<double> grads{{"w", Tensor<double>({4}, {3.0, -0.2, 1e-3, 50.0})}};
    const auto before = params.at("w");
    AdamState<double> state;
    state.config.learning_rate = 0.01;
    adam_step(params, grads, state);
    CHECK(state.step == 1);
    for (Index i = 0; i < 4; ++i) {
        const double g = grads.at("w")[i];
        const double moved = params.at("w")[i] - before[i];
        CHECK(moved == doctest::Approx(-0.01 * g / std::abs(g)).epsilon(1e-4));
    }
}

TEST_CASE("zero gradients leave parameters unchanged")
{
    ParameterMap<float> params{{"a", Tensor<float>({2, 2}, {1, 2, 3, 4})}, {"b", Tensor<float>({3})}};
    const auto before = params;
    AdamState<float> state;
    adam_step(params, {{"a", Tensor<float>({2, 2})}}, state);  // "b" has no gradient at all
    CHECK(params.at("a").matrix() == before.at("a").matrix());
    CHECK(params.at("b").matrix() == before.at("b").matrix());
    CHECK(state.first_moment.at("a").isZero());
    CHECK(state.step == 1);
}

TEST_CASE("state starts at zero")
{
    AdamState<double> state;
    CHECK(state.step == 0);
    CHECK(state.config.beta1 == 0.9);
    CHECK(state.config.beta2 == 0.999);
    CHECK(state.config.epsilon == 1e-8);
    CHECK(state.config.learning_rate == 2e-4);
    CHECK(state.first_moment.empty());
}

TEST_CASE("quadratic bowl converges and matches the scalar recurrence")
{
    const double c[3] = {0.5, -0.3, 0.8};
    ParameterMap<double> params{{"w", Tensor<double>({3})}};
    AdamState<double> state;
    state.config.learning_rate = 0.01;

    // independent per-coordinate recurrence
    double w[3] = {0, 0, 0}, m[3] = {0, 0, 0}, v[3] = {0, 0, 0};
    const double initial = std::sqrt(c[0] * c[0] + c[1] * c[1] + c[2] * c[2]);
    double previous = initial;
    bool monotone = true;
    for (int t = 1; t <= 200; ++t) {
        Tensor<double> g({3});
        for (int i = 0; i < 3; ++i) g[i] = 2.0 * (params.at("w")[i] - c[i]);
        adam_step(params, {{"w", g}}, state);

        double dist = 0.0;
        for (int i = 0; i < 3; ++i) {
            const double gi = 2.0 * (w[i] - c[i]);
            m[i] = 0.9 * m[i] + 0.1 * gi;
            v[i] = 0.999 * v[i] + 0.001 * gi * gi;
            w[i] -= 0.01 * (m[i] / (1 - std::pow(0.9, t))) / (std::sqrt(v[i] / (1 - std::pow(0.999, t))) + 1e-8);
            CHECK(params.at("w")[i] == doctest::Approx(w[i]).epsilon(1e-12));
            dist += (params.at("w")[i] - c[i]) * (params.at("w")[i] - c[i]);
        }
        dist = std::sqrt(dist);
        monotone = monotone && dist < previous;
        previous = dist;
    }
    CHECK(monotone);
    CHECK(previous < 0.1 * initial);
}

TEST_CASE("non-finite gradients are rejected before any update")
{
    ParameterMap<double> params{{"a", Tensor<double>({2}, {1, 2})}, {"b", Tensor<double>({1}, {3})}};
    const auto before = params;
    AdamState<double> state;
    const ParameterMap<double> grads{{"a", Tensor<double>({2}, {0.1, 0.2})},
                                     {"b", Tensor<double>({1}, {std::nan("")})}};
    CHECK_THROWS_AS(adam_step(params, grads, state), NumericalError);
    CHECK(state.step == 0);
    CHECK(params.at("a").matrix() == before.at("a").matrix());

    const ParameterMap<double> inf{{"a", Tensor<double>({2}, {INFINITY, 0})}};
    CHECK_THROWS_AS(adam_step(params, inf, state), NumericalError);
}

TEST_CASE("mismatched gradients are rejected")
{
    ParameterMap<double> params{{"a", Tensor<double>({2})}};
    AdamState<double> state;
    CHECK_THROWS_AS(adam_step(params, {{"zzz", Tensor<double>({2})}}, state), ConfigError);
    CHECK_THROWS_AS(adam_step(params, {{"a", Tensor<double>({3})}}, state), ShapeError);
}
