#include "deepalloc/kernels.hpp"

namespace deepalloc::kernels::omp {

namespace {
// Below this many multiply-adds the fork/join costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 14;
}  // namespace

void conv_forward(const ConvDims& d, std::span<const double> x, std::span<const double> w,
                  std::span<const double> bias, std::span<double> y) {
  const auto oh = d.out_h();
  const auto ow = d.out_w();
  const auto taps = d.in_ch * d.kernel_h * d.kernel_w;
  const long outer = static_cast<long>(d.batch * d.out_ch);
  const bool parallel = d.output_size() * taps > kParallelWork;
#pragma omp parallel for schedule(static) if (parallel)
  for (long no = 0; no < outer; ++no) {
    const auto n = static_cast<std::size_t>(no) / d.out_ch;
    const auto o = static_cast<std::size_t>(no) % d.out_ch;
    const double* wo = w.data() + o * taps;
    const double* xn = x.data() + n * d.in_ch * d.height * d.width;
    double* yo = y.data() + (n * d.out_ch + o) * oh * ow;
    const double b = bias.empty() ? 0.0 : bias[o];
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j) {
        double acc = b;
        for (std::size_t c = 0; c < d.in_ch; ++c) {
          const double* xc = xn + c * d.height * d.width;
          const double* wc = wo + c * d.kernel_h * d.kernel_w;
          for (std::size_t p = 0; p < d.kernel_h; ++p) {
            const double* xr = xc + (i + p) * d.width + j;
            const double* wr = wc + p * d.kernel_w;
            for (std::size_t q = 0; q < d.kernel_w; ++q) acc += wr[q] * xr[q];
          }
        }
        yo[i * ow + j] = acc;
      }
  }
}

void conv_backward_input(const ConvDims& d, std::span<const double> w, std::span<const double> dy,
                         std::span<double> dx) {
  const auto oh = d.out_h();
  const auto ow = d.out_w();
  const long outer = static_cast<long>(d.batch * d.in_ch);
  const bool parallel = d.output_size() * d.in_ch * d.kernel_h * d.kernel_w > kParallelWork;
#pragma omp parallel for schedule(static) if (parallel)
  for (long nc = 0; nc < outer; ++nc) {
    const auto n = static_cast<std::size_t>(nc) / d.in_ch;
    const auto c = static_cast<std::size_t>(nc) % d.in_ch;
    double* dxc = dx.data() + (n * d.in_ch + c) * d.height * d.width;
    for (std::size_t o = 0; o < d.out_ch; ++o) {
      const double* dyo = dy.data() + (n * d.out_ch + o) * oh * ow;
      const double* wc = w.data() + (o * d.in_ch + c) * d.kernel_h * d.kernel_w;
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          const double g = dyo[i * ow + j];
          for (std::size_t p = 0; p < d.kernel_h; ++p) {
            double* dxr = dxc + (i + p) * d.width + j;
            const double* wr = wc + p * d.kernel_w;
            for (std::size_t q = 0; q < d.kernel_w; ++q) dxr[q] += g * wr[q];
          }
        }
    }
  }
}

void conv_backward_weight(const ConvDims& d, std::span<const double> x, std::span<const double> dy,
                          std::span<double> dw, std::span<double> dbias) {
  const auto oh = d.out_h();
  const auto ow = d.out_w();
  const long outer = static_cast<long>(d.out_ch * d.in_ch);
  const bool parallel = d.output_size() * d.in_ch * d.kernel_h * d.kernel_w > kParallelWork;
#pragma omp parallel for schedule(static) if (parallel)
  for (long oc = 0; oc < outer; ++oc) {
    const auto o = static_cast<std::size_t>(oc) / d.in_ch;
    const auto c = static_cast<std::size_t>(oc) % d.in_ch;
    double* dwc = dw.data() + (o * d.in_ch + c) * d.kernel_h * d.kernel_w;
    for (std::size_t p = 0; p < d.kernel_h; ++p)
      for (std::size_t q = 0; q < d.kernel_w; ++q) {
        double acc = 0.0;
        for (std::size_t n = 0; n < d.batch; ++n) {
          const double* dyo = dy.data() + (n * d.out_ch + o) * oh * ow;
          const double* xc = x.data() + (n * d.in_ch + c) * d.height * d.width;
          for (std::size_t i = 0; i < oh; ++i) {
            const double* xr = xc + (i + p) * d.width + q;
            const double* gr = dyo + i * ow;
            for (std::size_t j = 0; j < ow; ++j) acc += gr[j] * xr[j];
          }
        }
        dwc[p * d.kernel_w + q] += acc;
      }
  }
  if (dbias.empty()) return;
  const long outs = static_cast<long>(d.out_ch);
#pragma omp parallel for schedule(static) if (parallel)
  for (long ol = 0; ol < outs; ++ol) {
    const auto o = static_cast<std::size_t>(ol);
    double acc = 0.0;
    for (std::size_t n = 0; n < d.batch; ++n) {
      const double* dyo = dy.data() + (n * d.out_ch + o) * oh * ow;
      for (std::size_t k = 0; k < oh * ow; ++k) acc += dyo[k];
    }
    dbias[o] += acc;
  }
}

void dense_forward(const DenseDims& d, std::span<const double> x, std::span<const double> w,
                   std::span<const double> bias, std::span<double> y) {
  const long batch = static_cast<long>(d.batch);
  const bool parallel = d.batch * d.in * d.out > kParallelWork;
#pragma omp parallel for schedule(static) if (parallel)
  for (long nl = 0; nl < batch; ++nl) {
    const auto n = static_cast<std::size_t>(nl);
    const double* xn = x.data() + n * d.in;
    for (std::size_t o = 0; o < d.out; ++o) {
      const double* wo = w.data() + o * d.in;
      double acc = bias.empty() ? 0.0 : bias[o];
      for (std::size_t i = 0; i < d.in; ++i) acc += wo[i] * xn[i];
      y[n * d.out + o] = acc;
    }
  }
}

void dense_backward_input(const DenseDims& d, std::span<const double> w, std::span<const double> dy,
                          std::span<double> dx) {
  const long batch = static_cast<long>(d.batch);
  const bool parallel = d.batch * d.in * d.out > kParallelWork;
#pragma omp parallel for schedule(static) if (parallel)
  for (long nl = 0; nl < batch; ++nl) {
    const auto n = static_cast<std::size_t>(nl);
    double* dxn = dx.data() + n * d.in;
    for (std::size_t o = 0; o < d.out; ++o) {
      const double g = dy[n * d.out + o];
      const double* wo = w.data() + o * d.in;
      for (std::size_t i = 0; i < d.in; ++i) dxn[i] += g * wo[i];
    }
  }
}

void dense_backward_weight(const DenseDims& d, std::span<const double> x, std::span<const double> dy,
                           std::span<double> dw, std::span<double> dbias) {
  const long outs = static_cast<long>(d.out);
  const bool parallel = d.batch * d.in * d.out > kParallelWork;
#pragma omp parallel for schedule(static) if (parallel)
  for (long ol = 0; ol < outs; ++ol) {
    const auto o = static_cast<std::size_t>(ol);
    double* dwo = dw.data() + o * d.in;
    double bias_acc = 0.0;
    for (std::size_t n = 0; n < d.batch; ++n) {
      const double g = dy[n * d.out + o];
      bias_acc += g;
      const double* xn = x.data() + n * d.in;
      for (std::size_t i = 0; i < d.in; ++i) dwo[i] += g * xn[i];
    }
    if (!dbias.empty()) dbias[o] += bias_acc;
  }
}

}  // namespace deepalloc::kernels::omp
