#pragma once

#include <map>
#include <string>

#include "skillkt/tensor.hpp"

namespace skillkt {

/// Named tensors in a stable (lexicographic) order.
template <class Scalar>
using ParameterMap = std::map<std::string, Tensor<Scalar>>;

template <class Scalar>
Index parameter_count(const ParameterMap<Scalar>& params)
{
    Index n = 0;
    for (const auto& [name, t] : params) n += t.size();
    return n;
}

template <class Scalar>
bool all_finite(const ParameterMap<Scalar>& params)
{
    for (const auto& [name, t] : params) {
        if (!t.all_finite()) return false;
    }
    return true;
}

} // namespace skillkt
