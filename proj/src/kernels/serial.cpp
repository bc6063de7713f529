#include "deepalloc/kernels.hpp"

namespace deepalloc::kernels::serial {

void conv_forward(const ConvDims& d, std::span<const double> x, std::span<const double> w,
                  std::span<const double> bias, std::span<double> y) {
  const auto oh = d.out_h();
  const auto ow = d.out_w();
  for (std::size_t n = 0; n < d.batch; ++n)
    for (std::size_t o = 0; o < d.out_ch; ++o)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          double acc = bias.empty() ? 0.0 : bias[o];
          for (std::size_t c = 0; c < d.in_ch; ++c)
            for (std::size_t p = 0; p < d.kernel_h; ++p)
              for (std::size_t q = 0; q < d.kernel_w; ++q)
                acc += w[((o * d.in_ch + c) * d.kernel_h + p) * d.kernel_w + q] *
                       x[((n * d.in_ch + c) * d.height + i + p) * d.width + j + q];
          y[((n * d.out_ch + o) * oh + i) * ow + j] = acc;
        }
}

void conv_backward_input(const ConvDims& d, std::span<const double> w, std::span<const double> dy,
                         std::span<double> dx) {
  const auto oh = d.out_h();
  const auto ow = d.out_w();
  for (std::size_t n = 0; n < d.batch; ++n)
    for (std::size_t o = 0; o < d.out_ch; ++o)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          const double g = dy[((n * d.out_ch + o) * oh + i) * ow + j];
          for (std::size_t c = 0; c < d.in_ch; ++c)
            for (std::size_t p = 0; p < d.kernel_h; ++p)
              for (std::size_t q = 0; q < d.kernel_w; ++q)
                dx[((n * d.in_ch + c) * d.height + i + p) * d.width + j + q] +=
                    g * w[((o * d.in_ch + c) * d.kernel_h + p) * d.kernel_w + q];
        }
}

void conv_backward_weight(const ConvDims& d, std::span<const double> x, std::span<const double> dy,
                          std::span<double> dw, std::span<double> dbias) {
  const auto oh = d.out_h();
  const auto ow = d.out_w();
  for (std::size_t n = 0; n < d.batch; ++n)
    for (std::size_t o = 0; o < d.out_ch; ++o)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          const double g = dy[((n * d.out_ch + o) * oh + i) * ow + j];
          if (!dbias.empty()) dbias[o] += g;
          for (std::size_t c = 0; c < d.in_ch; ++c)
            for (std::size_t p = 0; p < d.kernel_h; ++p)
              for (std::size_t q = 0; q < d.kernel_w; ++q)
                dw[((o * d.in_ch + c) * d.kernel_h + p) * d.kernel_w + q] +=
                    g * x[((n * d.in_ch + c) * d.height + i + p) * d.width + j + q];
        }
}

void dense_forward(const DenseDims& d, std::span<const double> x, std::span<const double> w,
                   std::span<const double> bias, std::span<double> y) {
  for (std::size_t n = 0; n < d.batch; ++n)
    for (std::size_t o = 0; o < d.out; ++o) {
      double acc = bias.empty() ? 0.0 : bias[o];
      for (std::size_t i = 0; i < d.in; ++i) acc += w[o * d.in + i] * x[n * d.in + i];
      y[n * d.out + o] = acc;
    }
}

void dense_backward_input(const DenseDims& d, std::span<const double> w, std::span<const double> dy,
                          std::span<double> dx) {
  for (std::size_t n = 0; n < d.batch; ++n)
    for (std::size_t o = 0; o < d.out; ++o)
      for (std::size_t i = 0; i < d.in; ++i) dx[n * d.in + i] += w[o * d.in + i] * dy[n * d.out + o];
}

void dense_backward_weight(const DenseDims& d, std::span<const double> x, std::span<const double> dy,
                           std::span<double> dw, std::span<double> dbias) {
  for (std::size_t n = 0; n < d.batch; ++n)
    for (std::size_t o = 0; o < d.out; ++o) {
      const double g = dy[n * d.out + o];
      if (!dbias.empty()) dbias[o] += g;
      for (std::size_t i = 0; i < d.in; ++i) dw[o * d.in + i] += g * x[n * d.in + i];
    }
}

}  // namespace deepalloc::kernels::serial
