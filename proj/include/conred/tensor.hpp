#pragma once

#include <stdexcept>
#include <vector>

namespace conred {

/// Dense rank-3 tensor over a single dimension, zero-based indices.
template <class T>
class Tensor3 {
 public:
  Tensor3() : dim_(0) {}
  explicit Tensor3(int dim) : dim_(dim), data_(static_cast<std::size_t>(dim) * dim * dim) {}
  Tensor3(int dim, const T& fill)
      : dim_(dim), data_(static_cast<std::size_t>(dim) * dim * dim, fill) {}

  int dim() const { return dim_; }

  T& at(int a, int b, int c) { return data_[index(a, b, c)]; }
  const T& at(int a, int b, int c) const { return data_[index(a, b, c)]; }

  // Ref-qualified so that iterating over `make_tensor().flat()` cannot
  // dangle: rvalues hand the storage out by value.
  const std::vector<T>& flat() const& { return data_; }
  std::vector<T>& flat() & { return data_; }
  std::vector<T> flat() && { return std::move(data_); }

 private:
  std::size_t index(int a, int b, int c) const {
    if (a < 0 || a >= dim_ || b < 0 || b >= dim_ || c < 0 || c >= dim_)
      throw std::out_of_range("Tensor3 index");
    return (static_cast<std::size_t>(a) * dim_ + b) * dim_ + c;
  }

  int dim_;
  std::vector<T> data_;
};

/// Dense rank-4 tensor over a single dimension, zero-based indices.
template <class T>
class Tensor4 {
 public:
  Tensor4() : dim_(0) {}
  explicit Tensor4(int dim)
      : dim_(dim), data_(static_cast<std::size_t>(dim) * dim * dim * dim) {}

  int dim() const { return dim_; }

  T& at(int a, int b, int c, int d) { return data_[index(a, b, c, d)]; }
  const T& at(int a, int b, int c, int d) const { return data_[index(a, b, c, d)]; }

  const std::vector<T>& flat() const& { return data_; }
  std::vector<T> flat() && { return std::move(data_); }

 private:
  std::size_t index(int a, int b, int c, int d) const {
    if (a < 0 || a >= dim_ || b < 0 || b >= dim_ || c < 0 || c >= dim_ || d < 0 || d >= dim_)
      throw std::out_of_range("Tensor4 index");
    return ((static_cast<std::size_t>(a) * dim_ + b) * dim_ + c) * dim_ + d;
  }

  int dim_;
  std::vector<T> data_;
};

}  // namespace conred
