#pragma once

#include <cstddef>
#include <span>

// Batched convolution and dense kernels behind the autodiff tape.
//
// Two implementations share one interface: `serial` is the plain loop-nest
// reference kept for testing, `omp` is what the tape calls. The OpenMP version
// parallelizes only over independent output elements, so its results do not
// depend on the thread count.
//
// Layouts are row-major:
//   conv input  x  [batch, in_ch, height, width]
//   conv kernel w  [out_ch, in_ch, kernel_h, kernel_w]
//   conv output y  [batch, out_ch, height - kernel_h + 1, width - kernel_w + 1]
//   dense x [batch, in], W [out, in], y [batch, out]
// Convolutions are valid (no padding), stride 1, cross-correlation.
// Backward kernels accumulate (+=) into their outputs.

namespace deepalloc::kernels {

struct ConvDims {
  std::size_t batch = 1;
  std::size_t in_ch = 1;
  std::size_t height = 1;
  std::size_t width = 1;
  std::size_t out_ch = 1;
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 1;

  std::size_t out_h() const { return height - kernel_h + 1; }
  std::size_t out_w() const { return width - kernel_w + 1; }
  std::size_t input_size() const { return batch * in_ch * height * width; }
  std::size_t weight_size() const { return out_ch * in_ch * kernel_h * kernel_w; }
  std::size_t output_size() const { return batch * out_ch * out_h() * out_w(); }
};

struct DenseDims {
  std::size_t batch = 1;
  std::size_t in = 1;
  std::size_t out = 1;
};

#define DEEPALLOC_KERNEL_DECLS                                                              \
  void conv_forward(const ConvDims& d, std::span<const double> x, std::span<const double> w, \
                    std::span<const double> bias, std::span<double> y);                       \
  void conv_backward_input(const ConvDims& d, std::span<const double> w,                      \
                           std::span<const double> dy, std::span<double> dx);                 \
  void conv_backward_weight(const ConvDims& d, std::span<const double> x,                     \
                            std::span<const double> dy, std::span<double> dw,                 \
                            std::span<double> dbias);                                         \
  void dense_forward(const DenseDims& d, std::span<const double> x, std::span<const double> w, \
                     std::span<const double> bias, std::span<double> y);                      \
  void dense_backward_input(const DenseDims& d, std::span<const double> w,                    \
                            std::span<const double> dy, std::span<double> dx);                \
  void dense_backward_weight(const DenseDims& d, std::span<const double> x,                   \
                             std::span<const double> dy, std::span<double> dw,                \
                             std::span<double> dbias);

namespace serial {
DEEPALLOC_KERNEL_DECLS
}  // namespace serial

namespace omp {
DEEPALLOC_KERNEL_DECLS
}  // namespace omp

#undef DEEPALLOC_KERNEL_DECLS

}  // namespace deepalloc::kernels
