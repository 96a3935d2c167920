// Copyright 2026 The bvmatch Authors
// SPDX-License-Identifier: Apache-2.0

#include "fft.hpp"

#include <mutex>
#include <new>

#include "bvmatch/common.hpp"

namespace bvmatch {
namespace {

// The FFTW planner is not re-entrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

FftBuffer::FftBuffer(std::size_t n)
    : data_(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n))), size_(n) {
  if (data_ == nullptr) throw std::bad_alloc();
}

FftBuffer::~FftBuffer() { fftw_free(data_); }

FftPlan::FftPlan(int width, int height) : width_(width), height_(height) {
  if (width <= 0 || height <= 0) throw Error("FFT size must be positive");
  FftBuffer a(size());
  FftBuffer b(size());
  std::lock_guard lock(planner_mutex());
  // FFTW_ESTIMATE leaves the arrays untouched while planning.
  forward_ = fftw_plan_dft_2d(height, width, a.data(), b.data(), FFTW_FORWARD, FFTW_ESTIMATE);
  inverse_ = fftw_plan_dft_2d(height, width, a.data(), b.data(), FFTW_BACKWARD, FFTW_ESTIMATE);
  if (forward_ == nullptr || inverse_ == nullptr) throw Error("FFTW planning failed");
}

FftPlan::~FftPlan() {
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(forward_);
  fftw_destroy_plan(inverse_);
}

void FftPlan::forward(const FftBuffer& in, FftBuffer& out) const {
  fftw_execute_dft(forward_, const_cast<fftw_complex*>(in.data()), out.data());
}

void FftPlan::inverse(const FftBuffer& in, FftBuffer& out) const {
  fftw_execute_dft(inverse_, const_cast<fftw_complex*>(in.data()), out.data());
}

}  // namespace bvmatch
