#pragma once

#include <fftw3.h>

#include <algorithm>
#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "rfclt/errors.hpp"
#include "rfclt/lattice.hpp"

namespace rfclt {

enum class ConvolutionPath { automatic, direct, fft };

namespace detail {

// The FFTW planner is not reentrant; execution of distinct plans is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

template <typename T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

template <typename T>
FftwBuffer<T> fftw_buffer(std::size_t n) {
  auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * n));
  if (p == nullptr) throw CapacityError("fftw_malloc failed");
  return FftwBuffer<T>(p);
}

// Smallest 7-smooth integer >= n.
inline int fft_friendly_size(int n) {
  for (int m = n;; ++m) {
    int r = m;
    for (int p : {2, 3, 5, 7}) {
      while (r % p == 0) r /= p;
    }
    if (r == 1) return m;
  }
}

inline void check_valid_convolution(const FieldArray& input, int radius,
                                    std::span<const double> kernel) {
  if (radius < 0) throw ParameterError("convolution radius must be nonnegative");
  const auto side = static_cast<std::size_t>(radius) + 1;
  if (kernel.size() != side * side) throw ParameterError("kernel size does not match radius");
  if (input.rows() <= radius || input.cols() <= radius) {
    throw PreconditionError("innovation margin too small for truncation radius " +
                            std::to_string(radius));
  }
}

}  // namespace detail

/// Causal convolution out(i,j) = sum_{0 <= r,s <= B} k[r][s] in(i-r, j-s),
/// evaluated on every cell whose full history lies inside `input`. The
/// result starts at lattice point input.origin() + (B, B).
inline FieldArray convolve_direct(const FieldArray& input, std::span<const double> kernel,
                                  int radius) {
  detail::check_valid_convolution(input, radius, kernel);
  const int side = radius + 1;
  FieldArray out(input.rows() - radius, input.cols() - radius,
                 {input.first_row() + radius, input.first_col() + radius});
  for (int r = 0; r < out.rows(); ++r) {
    for (int c = 0; c < out.cols(); ++c) {
      // Output (r, c) corresponds to input local (r + B, c + B).
      double acc = 0.0;
      for (int dr = 0; dr < side; ++dr) {
        const double* krow = kernel.data() + static_cast<std::size_t>(dr) * side;
        for (int dc = 0; dc < side; ++dc) {
          acc += krow[dc] * input.local(r + radius - dr, c + radius - dc);
        }
      }
      out.local(r, c) = acc;
    }
  }
  return out;
}

/// Same result as convolve_direct via a circular FFT convolution. The
/// padded period is at least the input size, so the valid region never
/// wraps around.
inline FieldArray convolve_fft(const FieldArray& input, std::span<const double> kernel, int radius) {
  detail::check_valid_convolution(input, radius, kernel);
  const int side = radius + 1;
  const int n1 = detail::fft_friendly_size(input.rows());
  const int n2 = detail::fft_friendly_size(input.cols());
  const int half = n2 / 2 + 1;
  const std::size_t real_size = static_cast<std::size_t>(n1) * n2;
  const std::size_t spec_size = static_cast<std::size_t>(n1) * half;

  auto signal = detail::fftw_buffer<double>(real_size);
  auto filter = detail::fftw_buffer<double>(real_size);
  auto signal_hat = detail::fftw_buffer<fftw_complex>(spec_size);
  auto filter_hat = detail::fftw_buffer<fftw_complex>(spec_size);

  fftw_plan forward_signal = nullptr;
  fftw_plan forward_filter = nullptr;
  fftw_plan backward = nullptr;
  {
    std::lock_guard lock(detail::fftw_planner_mutex());
    forward_signal = fftw_plan_dft_r2c_2d(n1, n2, signal.get(), signal_hat.get(), FFTW_ESTIMATE);
    forward_filter = fftw_plan_dft_r2c_2d(n1, n2, filter.get(), filter_hat.get(), FFTW_ESTIMATE);
    backward = fftw_plan_dft_c2r_2d(n1, n2, signal_hat.get(), signal.get(), FFTW_ESTIMATE);
  }

  std::fill(signal.get(), signal.get() + real_size, 0.0);
  std::fill(filter.get(), filter.get() + real_size, 0.0);
  for (int r = 0; r < input.rows(); ++r) {
    for (int c = 0; c < input.cols(); ++c) signal[static_cast<std::size_t>(r) * n2 + c] = input.local(r, c);
  }
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      filter[static_cast<std::size_t>(r) * n2 + c] = kernel[static_cast<std::size_t>(r) * side + c];
    }
  }
  fftw_execute(forward_signal);
  fftw_execute(forward_filter);
  for (std::size_t k = 0; k < spec_size; ++k) {
    const std::complex<double> a(signal_hat[k][0], signal_hat[k][1]);
    const std::complex<double> b(filter_hat[k][0], filter_hat[k][1]);
    const auto p = a * b;
    signal_hat[k][0] = p.real();
    signal_hat[k][1] = p.imag();
  }
  fftw_execute(backward);

  {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(forward_signal);
    fftw_destroy_plan(forward_filter);
    fftw_destroy_plan(backward);
  }

  const double scale = 1.0 / static_cast<double>(real_size);
  FieldArray out(input.rows() - radius, input.cols() - radius,
                 {input.first_row() + radius, input.first_col() + radius});
  for (int r = 0; r < out.rows(); ++r) {
    for (int c = 0; c < out.cols(); ++c) {
      out.local(r, c) = signal[static_cast<std::size_t>(r + radius) * n2 + (c + radius)] * scale;
    }
  }
  return out;
}

/// Kernels up to 16x16 go through the direct loop; larger ones through FFT.
inline FieldArray convolve(const FieldArray& input, std::span<const double> kernel, int radius,
                           ConvolutionPath path = ConvolutionPath::automatic) {
  if (path == ConvolutionPath::automatic) {
    path = radius <= 15 ? ConvolutionPath::direct : ConvolutionPath::fft;
  }
  return path == ConvolutionPath::direct ? convolve_direct(input, kernel, radius)
                                         : convolve_fft(input, kernel, radius);
}

}  // namespace rfclt
