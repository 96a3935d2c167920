// Copyright 2026 The bvmatch Authors
// SPDX-License-Identifier: Apache-2.0
//
// Log-Gabor filter bank, amplitude responses and the maximum index map (MIM).
//
// Filters are defined on the DFT grid. Frequencies are in cycles per pixel and
// the frequency angle is measured in image axes, atan2(f_v, f_u), so it grows
// from +u towards +v. Each transfer function is one-sided (it keeps the half
// plane facing its orientation), which makes the inverse transform a
// quadrature pair whose modulus is the local amplitude.
//
// Images are zero-padded before the transform so the circular convolution
// computed by the FFT does not wrap content across opposite borders.

#ifndef BVMATCH_LOGGABOR_HPP_
#define BVMATCH_LOGGABOR_HPP_

#include <cstdint>
#include <memory>
#include <numbers>
#include <vector>

#include "bvmatch/bvimage.hpp"
#include "bvmatch/common.hpp"

namespace bvmatch {

struct LogGaborParams {
  int scales = 4;
  int orientations = 6;
  double min_wavelength = 6.0;    // pixels, wavelength of the finest scale
  double scale_multiplier = 1.6;  // wavelength ratio between successive scales
  double sigma_f_ratio = 0.75;    // sigma_f / f_s
  double sigma_omega = std::numbers::pi / 6.0 / 1.2;
  // Butterworth low-pass applied to every filter so the bank stays inside the
  // circle |f| < cutoff and is unaffected by the square Nyquist boundary.
  // A cutoff >= 1 disables it.
  double lowpass_cutoff = 0.45;
  int lowpass_order = 15;
  // Minimum zero padding per side, in pixels.
  int padding = 32;

  /// Default parameters for the given orientation count; sigma_omega follows it.
  static LogGaborParams with_orientations(int orientations);

  /// Throws Error when a field is outside its valid range.
  void validate() const;

  double center_frequency(int scale) const;
  double center_angle(int orientation) const;
};

/// Single transfer-function sample, without the low-pass factor. Equals 1 at
/// (center_frequency(s), center_angle(o)). The angular distance is taken on
/// doubled angles (period pi); the half plane opposite the orientation is 0.
double log_gabor_transfer(const LogGaborParams& params, int scale, int orientation,
                          double frequency, double angle);

/// Butterworth factor 1 / (1 + (f / cutoff)^(2 n)).
double lowpass_factor(const LogGaborParams& params, double frequency);

class FftPlan;

/// Immutable bank of Ns x No frequency-domain filters for one image size.
class FilterBank {
 public:
  FilterBank(int width, int height, const LogGaborParams& params);

  /// Image size the bank accepts.
  int width() const { return width_; }
  int height() const { return height_; }
  /// Padded transform size and the image placement inside it.
  int fft_width() const { return fft_width_; }
  int fft_height() const { return fft_height_; }
  int offset_u() const { return (fft_width_ - width_) / 2; }
  int offset_v() const { return (fft_height_ - height_) / 2; }

  const LogGaborParams& params() const { return params_; }

  /// Transfer function over the padded DFT grid, indexed (k_u, k_v) in FFT order.
  const Grid<double>& transfer(int scale, int orientation) const;

  const FftPlan& plan() const { return *plan_; }

 private:
  int width_;
  int height_;
  int fft_width_;
  int fft_height_;
  LogGaborParams params_;
  std::vector<Grid<double>> filters_;
  std::shared_ptr<const FftPlan> plan_;
};

inline FilterBank build_bank(int width, int height, const LogGaborParams& params) {
  return FilterBank(width, height, params);
}

/// Signed frequency (cycles per pixel) of DFT bin k on an axis of length n.
double dft_frequency(int k, int n);

/// Smallest n' >= n whose prime factors are all in {2, 3, 5, 7}.
int smooth_fft_size(int n);

/// Amplitudes for every (scale, orientation) channel.
struct ChannelResponses {
  int scales = 0;
  int orientations = 0;
  std::vector<Grid<double>> amplitude;  // index scale * orientations + orientation

  const Grid<double>& at(int scale, int orientation) const {
    return amplitude[static_cast<std::size_t>(scale * orientations + orientation)];
  }
  Grid<double>& at(int scale, int orientation) {
    return amplitude[static_cast<std::size_t>(scale * orientations + orientation)];
  }
};

/// Per-orientation amplitude summed over scales.
struct OrientationAmplitudes {
  std::vector<Grid<double>> amplitude;

  int orientations() const { return static_cast<int>(amplitude.size()); }
};

struct Mim {
  Grid<std::uint8_t> index;
  Grid<double> amp_max;
  Grid<std::uint8_t> valid;
  int orientations = 0;

  int width() const { return index.width(); }
  int height() const { return index.height(); }
};

/// Channel amplitudes via FFT, channels computed in parallel.
ChannelResponses filter_responses(const Grid<double>& image, const FilterBank& bank);
inline ChannelResponses filter_responses(const BvImage& image, const FilterBank& bank) {
  return filter_responses(image.intensity, bank);
}

OrientationAmplitudes orientation_amplitude(const ChannelResponses& responses);

/// argmax over orientations (ties to the smallest index); valid where the
/// winning amplitude exceeds noise_floor.
Mim compute_mim(const OrientationAmplitudes& amps, double noise_floor);

/// Noise floor = factor * mean of the per-pixel maximum amplitude.
double relative_noise_floor(const OrientationAmplitudes& amps, double factor);

inline constexpr double kDefaultNoiseFloorFactor = 1e-4;

/// Image -> responses -> orientation sums -> MIM with a relative noise floor.
Mim image_mim(const Grid<double>& image, const FilterBank& bank,
              double noise_floor_factor = kDefaultNoiseFloorFactor);

namespace serial {

/// Single-threaded reference for filter_responses.
ChannelResponses filter_responses(const Grid<double>& image, const FilterBank& bank);

}  // namespace serial

}  // namespace bvmatch

#endif  // BVMATCH_LOGGABOR_HPP_
