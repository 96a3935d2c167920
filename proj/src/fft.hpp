// Copyright 2026 The bvmatch Authors
// SPDX-License-Identifier: Apache-2.0
//
// Thin RAII layer over FFTW for out-of-place 2D complex transforms.

#ifndef BVMATCH_SRC_FFT_HPP_
#define BVMATCH_SRC_FFT_HPP_

#include <fftw3.h>

#include <cstddef>

namespace bvmatch {

/// SIMD-aligned complex array, as FFTW expects for plans reused on new arrays.
class FftBuffer {
 public:
  explicit FftBuffer(std::size_t n);
  ~FftBuffer();
  FftBuffer(const FftBuffer&) = delete;
  FftBuffer& operator=(const FftBuffer&) = delete;
  FftBuffer(FftBuffer&& other) noexcept : data_(other.data_), size_(other.size_) {
    other.data_ = nullptr;
    other.size_ = 0;
  }
  FftBuffer& operator=(FftBuffer&&) = delete;

  fftw_complex* data() { return data_; }
  const fftw_complex* data() const { return data_; }
  std::size_t size() const { return size_; }

 private:
  fftw_complex* data_;
  std::size_t size_;
};

/// Forward and unnormalized inverse plans for a width x height grid stored
/// row-major. Execution is thread-safe; only planning is serialized.
class FftPlan {
 public:
  FftPlan(int width, int height);
  ~FftPlan();
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;

  void forward(const FftBuffer& in, FftBuffer& out) const;
  void inverse(const FftBuffer& in, FftBuffer& out) const;

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_); }

 private:
  int width_;
  int height_;
  fftw_plan forward_;
  fftw_plan inverse_;
};

}  // namespace bvmatch

#endif  // BVMATCH_SRC_FFT_HPP_
