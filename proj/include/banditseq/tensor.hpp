#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace banditseq {

// Dense row-major tensor of doubles. Rank 0 is a scalar with one value.
class Tensor {
  public:
    Tensor() : values_(1, 0.0) {}
    explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
    Tensor(std::vector<std::size_t> shape, std::vector<double> values);

    static Tensor scalar(double value);
    static Tensor vector(std::vector<double> values);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return values_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }
    double* data() { return values_.data(); }
    const double* data() const { return values_.data(); }

    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }
    double& at(std::size_t row, std::size_t col) { return values_[row * shape_[1] + col]; }
    double at(std::size_t row, std::size_t col) const { return values_[row * shape_[1] + col]; }

    // Value of a rank-0 or single-element tensor.
    double item() const;

    void fill(double value);
    bool all_finite() const;
    std::string shape_string() const;

    bool operator==(const Tensor&) const = default;

  private:
    std::vector<std::size_t> shape_;
    std::vector<double> values_;
};

std::size_t element_count(const std::vector<std::size_t>& shape);

} // namespace banditseq
