#pragma once

#include <algorithm>
#include <cmath>

#include "skillkt/tensor.hpp"

namespace skillkt {

/// Central-difference gradient (f(x + h·eᵢ) − f(x − h·eᵢ)) / 2h for every coordinate of x.
template <class Scalar, class F>
Tensor<Scalar> finite_difference_grad(F&& f, const Tensor<Scalar>& x, Scalar h)
{
    if (!(h > Scalar(0))) throw ConfigError("finite_difference_grad: step must be positive");
    Tensor<Scalar> probe = x;
    Tensor<Scalar> out(x.shape());
    for (Index i = 0; i < x.size(); ++i) {
        const Scalar orig = probe[i];
        probe[i] = orig + h;
        const Scalar up = static_cast<Scalar>(f(static_cast<const Tensor<Scalar>&>(probe)));
        probe[i] = orig - h;
        const Scalar down = static_cast<Scalar>(f(static_cast<const Tensor<Scalar>&>(probe)));
        probe[i] = orig;
        out[i] = (up - down) / (Scalar(2) * h);
    }
    return out;
}

/// |a − b| / max(|a|, |b|), with 0/0 taken as 0.
inline double relative_error(double a, double b)
{
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

} // namespace skillkt
