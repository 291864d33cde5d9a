#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "skillkt/errors.hpp"

namespace skillkt {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

template <class Scalar_>
using Matrix = Eigen::Matrix<Scalar_, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class Scalar_>
using Vector = Eigen::Matrix<Scalar_, Eigen::Dynamic, 1>;

inline Index shape_size(const Shape& shape)
{
    return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape)
{
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << ']';
    return os.str();
}

/**
 * Dense row-major tensor.
 *
 * Storage is a matrix whose column count is the last extent and whose row
 * count is the product of the leading extents, so every op that works on
 * "rows of the last axis" is a plain Eigen expression.
 */
template <class Scalar_>
class Tensor
{
public:
    using Scalar = Scalar_;

    Tensor() = default;

    explicit Tensor(Shape shape)
        : shape_(std::move(shape))
    {
        check_shape();
        data_ = Matrix<Scalar>::Zero(leading(), shape_.back());
    }

    Tensor(Shape shape, Matrix<Scalar> data)
        : shape_(std::move(shape))
        , data_(std::move(data))
    {
        check_shape();
        if (data_.rows() != leading() || data_.cols() != shape_.back()) {
            throw ShapeError("tensor data " + std::to_string(data_.rows()) + "x"
                             + std::to_string(data_.cols()) + " does not fit shape "
                             + shape_str(shape_));
        }
    }

    Tensor(Shape shape, std::initializer_list<Scalar> values)
        : Tensor(std::move(shape))
    {
        if (static_cast<Index>(values.size()) != size()) {
            throw ShapeError("initializer of " + std::to_string(values.size())
                             + " values for shape " + shape_str(shape_));
        }
        std::copy(values.begin(), values.end(), data_.data());
    }

    static Tensor scalar(Scalar value) { return Tensor({1}, {value}); }

    const Shape& shape() const noexcept { return shape_; }
    Index rank() const noexcept { return static_cast<Index>(shape_.size()); }
    Index size() const noexcept { return data_.size(); }
    Index rows() const noexcept { return data_.rows(); }
    Index cols() const noexcept { return data_.cols(); }

    Matrix<Scalar>& matrix() noexcept { return data_; }
    const Matrix<Scalar>& matrix() const noexcept { return data_; }
    Scalar* data() noexcept { return data_.data(); }
    const Scalar* data() const noexcept { return data_.data(); }

    Scalar& operator[](Index i) { return data_.data()[i]; }
    Scalar operator[](Index i) const { return data_.data()[i]; }

    Scalar item() const
    {
        if (size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape_));
        return data_(0, 0);
    }

    bool all_finite() const { return data_.allFinite(); }

    template <class Other>
    Tensor<Other> cast() const
    {
        return Tensor<Other>(shape_, data_.template cast<Other>());
    }

private:
    Index leading() const
    {
        return shape_size(shape_) / shape_.back();
    }

    void check_shape() const
    {
        if (shape_.empty()) throw ShapeError("tensor shape must have rank >= 1");
        for (auto e : shape_) {
            if (e <= 0) throw ShapeError("non-positive extent in shape " + shape_str(shape_));
        }
    }

    Shape shape_{1};
    Matrix<Scalar> data_ = Matrix<Scalar>::Zero(1, 1);
};

} // namespace skillkt
