#include "banditseq/tensor.hpp"

#include "banditseq/errors.hpp"

#include <algorithm>
#include <cmath>

namespace banditseq {

std::size_t element_count(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) {
        require(d > 0, "tensor dimensions must be positive");
        n *= d;
    }
    return n;
}

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), values_(element_count(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
    require(values_.size() == element_count(shape_),
            "tensor value count " + std::to_string(values_.size()) + " does not match shape " +
                shape_string());
}

Tensor Tensor::scalar(double value) { return Tensor({}, std::vector<double>{value}); }

Tensor Tensor::vector(std::vector<double> values) {
    const std::size_t n = values.size();
    return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
    return Tensor({rows, cols}, std::move(values));
}

double Tensor::item() const {
    require(values_.size() == 1, "item() needs a single-element tensor, got " + shape_string());
    return values_[0];
}

void Tensor::fill(double value) { std::fill(values_.begin(), values_.end(), value); }

bool Tensor::all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

std::string Tensor::shape_string() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i > 0) {
            s += ",";
        }
        s += std::to_string(shape_[i]);
    }
    return s + "]";
}

} // namespace banditseq
