#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "sysid/errors.hpp"

namespace sysid {

/// Dense row-major array of doubles with a runtime shape.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
    std::size_t n = 1;
    for (std::size_t d : shape_) n *= d;
    v_.assign(n, 0.0);
  }

  static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const noexcept { return v_.size(); }

  double* data() noexcept { return v_.data(); }
  const double* data() const noexcept { return v_.data(); }

  double& operator[](std::size_t i) { return v_[i]; }
  double operator[](std::size_t i) const { return v_[i]; }

  double& at(std::size_t i, std::size_t j) { return v_[i * shape_[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return v_[i * shape_[1] + j]; }

  double& at(std::size_t i, std::size_t j, std::size_t k) {
    return v_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double at(std::size_t i, std::size_t j, std::size_t k) const {
    return v_[(i * shape_[1] + j) * shape_[2] + k];
  }

  bool same_shape(const Tensor& o) const noexcept { return shape_ == o.shape_; }

  bool operator==(const Tensor& o) const noexcept { return shape_ == o.shape_ && v_ == o.v_; }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> v_;
};

/// Neumaier compensated accumulator. Keeps long sums order-stable enough
/// that batch permutations move means by less than 1e-12.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }

  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace sysid
