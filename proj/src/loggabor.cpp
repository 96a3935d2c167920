// Copyright 2026 The bvmatch Authors
// SPDX-License-Identifier: Apache-2.0

#include "bvmatch/loggabor.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>

#include "fft.hpp"

namespace bvmatch {

LogGaborParams LogGaborParams::with_orientations(int orientations) {
  LogGaborParams p;
  p.orientations = orientations;
  p.sigma_omega = orientations > 0 ? std::numbers::pi / orientations / 1.2 : 0.0;
  return p;
}

void LogGaborParams::validate() const {
  if (scales < 1) throw Error("Log-Gabor: scale count must be >= 1");
  if (orientations < 2) throw Error("Log-Gabor: orientation count must be >= 2");
  if (orientations > 255) throw Error("Log-Gabor: at most 255 orientations");
  if (!(min_wavelength >= 2.0)) throw Error("Log-Gabor: min wavelength must be >= 2 pixels");
  if (!(scale_multiplier > 1.0)) throw Error("Log-Gabor: scale multiplier must be > 1");
  if (!(sigma_f_ratio > 0.0 && sigma_f_ratio < 1.0)) {
    throw Error("Log-Gabor: sigma_f ratio must lie in (0, 1)");
  }
  if (!(sigma_omega > 0.0)) throw Error("Log-Gabor: sigma_omega must be positive");
  if (!(lowpass_cutoff > 0.0) || lowpass_order < 1) throw Error("Log-Gabor: bad low-pass settings");
  if (padding < 0) throw Error("Log-Gabor: padding must be non-negative");
}

double LogGaborParams::center_frequency(int scale) const {
  return 1.0 / (min_wavelength * std::pow(scale_multiplier, scale));
}

double LogGaborParams::center_angle(int orientation) const {
  return std::numbers::pi * orientation / orientations;
}

double log_gabor_transfer(const LogGaborParams& params, int scale, int orientation,
                          double frequency, double angle) {
  if (!(frequency > 0.0)) return 0.0;

  const double log_ratio = std::log(frequency / params.center_frequency(scale));
  const double log_sigma = std::log(params.sigma_f_ratio);
  const double radial = std::exp(-(log_ratio * log_ratio) / (2.0 * log_sigma * log_sigma));

  const double d = angle - params.center_angle(orientation);
  const double facing = std::cos(d);
  constexpr double kEdge = 1e-12;
  if (facing < -kEdge) return 0.0;
  const double half_plane = facing > kEdge ? 1.0 : 0.5;

  // Doubled-angle difference, mapped back into (-pi/2, pi/2].
  const double dd = 0.5 * std::atan2(std::sin(2.0 * d), std::cos(2.0 * d));
  const double so = params.sigma_omega;
  const double angular = std::exp(-(dd * dd) / (2.0 * so * so));
  return radial * angular * half_plane;
}

double lowpass_factor(const LogGaborParams& params, double frequency) {
  if (params.lowpass_cutoff >= 1.0) return 1.0;
  return 1.0 / (1.0 + std::pow(frequency / params.lowpass_cutoff, 2.0 * params.lowpass_order));
}

double dft_frequency(int k, int n) {
  const int signed_k = k <= n / 2 ? k : k - n;
  return static_cast<double>(signed_k) / static_cast<double>(n);
}

int smooth_fft_size(int n) {
  for (int m = std::max(n, 1);; ++m) {
    int r = m;
    for (int p : {2, 3, 5, 7}) {
      while (r % p == 0) r /= p;
    }
    if (r == 1) return m;
  }
}

FilterBank::FilterBank(int width, int height, const LogGaborParams& params)
    : width_(width), height_(height), params_(params) {
  if (width < 8 || height < 8) throw Error("filter bank needs at least 8x8 pixels");
  params.validate();
  fft_width_ = smooth_fft_size(width + 2 * params.padding);
  fft_height_ = smooth_fft_size(height + 2 * params.padding);
  width = fft_width_;
  height = fft_height_;

  filters_.reserve(static_cast<std::size_t>(params.scales * params.orientations));
  for (int s = 0; s < params.scales; ++s) {
    for (int o = 0; o < params.orientations; ++o) {
      Grid<double> h(width, height, 0.0);
      for (int kv = 0; kv < height; ++kv) {
        const double fv = dft_frequency(kv, height);
        for (int ku = 0; ku < width; ++ku) {
          const double fu = dft_frequency(ku, width);
          const double f = std::hypot(fu, fv);
          if (f == 0.0) continue;
          h(ku, kv) = log_gabor_transfer(params, s, o, f, std::atan2(fv, fu)) * lowpass_factor(params, f);
        }
      }
      filters_.push_back(std::move(h));
    }
  }
  plan_ = std::make_shared<const FftPlan>(fft_width_, fft_height_);
}

const Grid<double>& FilterBank::transfer(int scale, int orientation) const {
  if (scale < 0 || scale >= params_.scales || orientation < 0 || orientation >= params_.orientations) {
    throw Error("filter index out of range");
  }
  return filters_[static_cast<std::size_t>(scale * params_.orientations + orientation)];
}

namespace {

void check_dims(const Grid<double>& image, const FilterBank& bank) {
  if (image.width() != bank.width() || image.height() != bank.height()) {
    throw Error("image is " + std::to_string(image.width()) + "x" + std::to_string(image.height()) +
                " but the filter bank is " + std::to_string(bank.width()) + "x" +
                std::to_string(bank.height()));
  }
}

FftBuffer image_spectrum(const Grid<double>& image, const FilterBank& bank) {
  const std::size_t n = bank.plan().size();
  FftBuffer in(n);
  for (std::size_t i = 0; i < n; ++i) {
    in.data()[i][0] = 0.0;
    in.data()[i][1] = 0.0;
  }
  const auto fw = static_cast<std::size_t>(bank.fft_width());
  for (int v = 0; v < image.height(); ++v) {
    const std::size_t row = static_cast<std::size_t>(v + bank.offset_v()) * fw;
    for (int u = 0; u < image.width(); ++u) {
      in.data()[row + static_cast<std::size_t>(u + bank.offset_u())][0] = image(u, v);
    }
  }
  FftBuffer spectrum(n);
  bank.plan().forward(in, spectrum);
  return spectrum;
}

// One channel: multiply by the transfer function, invert, crop, take the modulus.
void channel_amplitude(const FftBuffer& spectrum, const Grid<double>& transfer,
                       const FilterBank& bank, FftBuffer& product, FftBuffer& spatial,
                       Grid<double>& out) {
  const std::size_t n = spectrum.size();
  const auto& h = transfer.data();
  for (std::size_t i = 0; i < n; ++i) {
    product.data()[i][0] = spectrum.data()[i][0] * h[i];
    product.data()[i][1] = spectrum.data()[i][1] * h[i];
  }
  bank.plan().inverse(product, spatial);
  const double scale = 1.0 / static_cast<double>(n);
  const auto fw = static_cast<std::size_t>(bank.fft_width());
  for (int v = 0; v < out.height(); ++v) {
    const std::size_t row = static_cast<std::size_t>(v + bank.offset_v()) * fw;
    for (int u = 0; u < out.width(); ++u) {
      const auto& z = spatial.data()[row + static_cast<std::size_t>(u + bank.offset_u())];
      out(u, v) = std::hypot(z[0], z[1]) * scale;
    }
  }
}

ChannelResponses empty_responses(const Grid<double>& image, const FilterBank& bank) {
  ChannelResponses r;
  r.scales = bank.params().scales;
  r.orientations = bank.params().orientations;
  r.amplitude.assign(static_cast<std::size_t>(r.scales * r.orientations),
                     Grid<double>(image.width(), image.height(), 0.0));
  return r;
}

}  // namespace

ChannelResponses filter_responses(const Grid<double>& image, const FilterBank& bank) {
  check_dims(image, bank);
  const FftBuffer spectrum = image_spectrum(image, bank);
  ChannelResponses r = empty_responses(image, bank);
  const int channels = r.scales * r.orientations;

#pragma omp parallel
  {
    FftBuffer product(spectrum.size());
    FftBuffer spatial(spectrum.size());
#pragma omp for schedule(static)
    for (int c = 0; c < channels; ++c) {
      const int s = c / r.orientations;
      const int o = c % r.orientations;
      channel_amplitude(spectrum, bank.transfer(s, o), bank, product, spatial, r.at(s, o));
    }
  }
  return r;
}

namespace serial {

ChannelResponses filter_responses(const Grid<double>& image, const FilterBank& bank) {
  check_dims(image, bank);
  const FftBuffer spectrum = image_spectrum(image, bank);
  ChannelResponses r = empty_responses(image, bank);
  FftBuffer product(spectrum.size());
  FftBuffer spatial(spectrum.size());
  for (int s = 0; s < r.scales; ++s) {
    for (int o = 0; o < r.orientations; ++o) {
      channel_amplitude(spectrum, bank.transfer(s, o), bank, product, spatial, r.at(s, o));
    }
  }
  return r;
}

}  // namespace serial

OrientationAmplitudes orientation_amplitude(const ChannelResponses& responses) {
  if (responses.scales < 1 || responses.orientations < 1 ||
      responses.amplitude.size() != static_cast<std::size_t>(responses.scales * responses.orientations)) {
    throw Error("incomplete scale/orientation response set");
  }
  OrientationAmplitudes out;
  for (int o = 0; o < responses.orientations; ++o) {
    Grid<double> sum = responses.at(0, o);
    for (int s = 1; s < responses.scales; ++s) {
      const auto& a = responses.at(s, o);
      if (a.width() != sum.width() || a.height() != sum.height()) {
        throw Error("response size mismatch between scales");
      }
      for (std::size_t i = 0; i < sum.size(); ++i) sum.data()[i] += a.data()[i];
    }
    out.amplitude.push_back(std::move(sum));
  }
  return out;
}

Mim compute_mim(const OrientationAmplitudes& amps, double noise_floor) {
  if (amps.orientations() < 2) throw Error("MIM needs at least two orientations");
  const auto& first = amps.amplitude.front();
  Mim mim;
  mim.orientations = amps.orientations();
  mim.index = Grid<std::uint8_t>(first.width(), first.height(), 0);
  mim.amp_max = Grid<double>(first.width(), first.height(), 0.0);
  mim.valid = Grid<std::uint8_t>(first.width(), first.height(), 0);
  for (std::size_t i = 0; i < first.size(); ++i) {
    double best = first.data()[i];
    int arg = 0;
    for (int o = 1; o < mim.orientations; ++o) {
      const double a = amps.amplitude[static_cast<std::size_t>(o)].data()[i];
      if (a > best) {
        best = a;
        arg = o;
      }
    }
    mim.index.data()[i] = static_cast<std::uint8_t>(arg);
    mim.amp_max.data()[i] = best;
    mim.valid.data()[i] = best > noise_floor ? 1 : 0;
  }
  return mim;
}

double relative_noise_floor(const OrientationAmplitudes& amps, double factor) {
  if (amps.amplitude.empty() || amps.amplitude.front().empty()) return 0.0;
  const std::size_t n = amps.amplitude.front().size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double best = 0.0;
    for (const auto& a : amps.amplitude) best = std::max(best, a.data()[i]);
    total += best;
  }
  return factor * total / static_cast<double>(n);
}

Mim image_mim(const Grid<double>& image, const FilterBank& bank, double noise_floor_factor) {
  const OrientationAmplitudes amps = orientation_amplitude(filter_responses(image, bank));
  return compute_mim(amps, relative_noise_floor(amps, noise_floor_factor));
}

}  // namespace bvmatch
