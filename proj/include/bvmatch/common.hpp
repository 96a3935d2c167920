// Copyright 2026 The bvmatch Authors
// SPDX-License-Identifier: Apache-2.0
//
// Shared error type and a small dense 2D container used by every stage of
// the pipeline.

#ifndef BVMATCH_COMMON_HPP_
#define BVMATCH_COMMON_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace bvmatch {

/// Runtime failure raised by library operations (bad input, I/O, degenerate data).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Row-major grid addressed as (u, v): u is the column, v is the row.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, T fill = T{})
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  bool contains(int u, int v) const { return u >= 0 && v >= 0 && u < width_ && v < height_; }

  T& operator()(int u, int v) { return data_[index(u, v)]; }
  const T& operator()(int u, int v) const { return data_[index(u, v)]; }

  std::size_t index(int u, int v) const {
    return static_cast<std::size_t>(v) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(u);
  }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool operator==(const Grid&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

}  // namespace bvmatch

#endif  // BVMATCH_COMMON_HPP_
