#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lf {

// Error taxonomy. The CLI maps InputError/ConfigError to exit code 2 and
// DomainError/NumericalError to exit code 3.
struct InputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A set of points in R^d stored contiguously (row-major, one row per point).
class Points {
 public:
  Points() = default;
  Points(std::size_t count, std::size_t dim) : dim_(dim), data_(count * dim, 0.0) {}
  Points(std::size_t dim, std::vector<double> flat) : dim_(dim), data_(std::move(flat)) {
    if (dim_ == 0 ? !data_.empty() : data_.size() % dim_ != 0) {
      throw InputError("Points: flat buffer size is not a multiple of the dimension");
    }
  }

  std::size_t size() const { return dim_ == 0 ? 0 : data_.size() / dim_; }
  std::size_t dim() const { return dim_; }
  bool empty() const { return data_.empty(); }

  std::span<double> operator[](std::size_t i) { return {data_.data() + i * dim_, dim_}; }
  std::span<const double> operator[](std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }

  std::vector<double>& flat() { return data_; }
  const std::vector<double>& flat() const { return data_; }

  void push_back(std::span<const double> p) {
    if (p.size() != dim_) throw InputError("Points::push_back: dimension mismatch");
    data_.insert(data_.end(), p.begin(), p.end());
  }

  /// First `count` points (nested subsampling).
  Points head(std::size_t count) const {
    if (count > size()) throw InputError("Points::head: count exceeds size");
    return Points(dim_, std::vector<double>(data_.begin(), data_.begin() + count * dim_));
  }

  bool operator==(const Points&) const = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

inline double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = a[i] - b[i];
    s += t * t;
  }
  return std::sqrt(s);
}

inline bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace lf
