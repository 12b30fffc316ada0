// Compares the OpenMP kernels against the serial reference implementations
// and reports per-kernel speedups, plus whole-network forward/backward
// timings. Build and run:
//   cmake --build build --target bench_kernels && ./build/bench/bench_kernels

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include <omp.h>

#include "unigest/kernels.hpp"
#include "unigest/model.hpp"
#include "unigest/rng.hpp"
#include "unigest/tensor.hpp"

using namespace unigest;

namespace {

using clock_type = std::chrono::steady_clock;

double time_ms(const std::function<void()>& fn, int repeats) {
  fn();  // warm up
  const auto t0 = clock_type::now();
  for (int i = 0; i < repeats; ++i) fn();
  const auto t1 = clock_type::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / repeats;
}

void fill_random(double* data, int64_t n, Rng& rng) {
  for (int64_t i = 0; i < n; ++i) data[i] = rng.uniform(-1.0, 1.0);
}

void report(const std::string& name, double serial_ms, double parallel_ms) {
  std::printf("%-28s serial %9.3f ms   parallel %9.3f ms   speedup %5.2fx\n", name.c_str(),
              serial_ms, parallel_ms, serial_ms / parallel_ms);
}

}  // namespace

int main() {
  std::printf("OpenMP threads: %d\n\n", omp_get_max_threads());
  Rng rng(42);

  {  // conv2d forward, VGG-like middle layer
    const int n = 4, c_in = 64, h = 32, w = 32, c_out = 64, k = 3, pad = 1;
    Tensor in({n, c_in, h, w}), weight({c_out, c_in, k, k}), bias({c_out});
    Tensor out({n, c_out, h, w}), out_ref({n, c_out, h, w});
    fill_random(in.data(), in.size(), rng);
    fill_random(weight.data(), weight.size(), rng);
    fill_random(bias.data(), bias.size(), rng);
    const double s = time_ms(
        [&] {
          kernels::serial::conv2d_forward(in.data(), n, c_in, h, w, weight.data(), bias.data(),
                                          c_out, k, pad, out_ref.data());
        },
        3);
    const double p = time_ms(
        [&] {
          kernels::conv2d_forward(in.data(), n, c_in, h, w, weight.data(), bias.data(), c_out, k,
                                  pad, out.data());
        },
        3);
    report("conv2d_forward 64x32x32", s, p);
  }

  {  // conv2d backward (params + input)
    const int n = 4, c_in = 32, h = 16, w = 16, c_out = 32, k = 3, pad = 1;
    Tensor in({n, c_in, h, w}), weight({c_out, c_in, k, k}), gout({n, c_out, h, w});
    Tensor gw({c_out, c_in, k, k}), gb({c_out}), gin({n, c_in, h, w});
    fill_random(in.data(), in.size(), rng);
    fill_random(weight.data(), weight.size(), rng);
    fill_random(gout.data(), gout.size(), rng);
    const double s = time_ms(
        [&] {
          kernels::serial::conv2d_backward_params(gout.data(), in.data(), n, c_in, h, w, c_out, k,
                                                  pad, gw.data(), gb.data());
          kernels::serial::conv2d_backward_input(gout.data(), n, c_in, h, w, weight.data(), c_out,
                                                 k, pad, gin.data());
        },
        3);
    const double p = time_ms(
        [&] {
          kernels::conv2d_backward_params(gout.data(), in.data(), n, c_in, h, w, c_out, k, pad,
                                          gw.data(), gb.data());
          kernels::conv2d_backward_input(gout.data(), n, c_in, h, w, weight.data(), c_out, k, pad,
                                         gin.data());
        },
        3);
    report("conv2d_backward 32x16x16", s, p);
  }

  {  // fully connected forward
    const int n = 32, in_dim = 8192, out_dim = 1024;
    Tensor in({n, in_dim}), weight({out_dim, in_dim}), bias({out_dim}), out({n, out_dim});
    fill_random(in.data(), in.size(), rng);
    fill_random(weight.data(), weight.size(), rng);
    fill_random(bias.data(), bias.size(), rng);
    const double s = time_ms(
        [&] {
          kernels::serial::fc_forward(in.data(), n, in_dim, weight.data(), bias.data(), out_dim,
                                      out.data());
        },
        3);
    const double p = time_ms(
        [&] {
          kernels::fc_forward(in.data(), n, in_dim, weight.data(), bias.data(), out_dim,
                              out.data());
        },
        3);
    report("fc_forward 8192->1024 B32", s, p);
  }

  {  // maxpool + upsample
    const int n = 8, c = 64, h = 32, w = 32;
    Tensor in({n, c, h, w}), out({n, c, h / 2, w / 2});
    std::vector<int32_t> argmax(static_cast<size_t>(out.size()));
    Tensor ups({n, c, h * 3, w * 3});
    fill_random(in.data(), in.size(), rng);
    const double s = time_ms(
        [&] {
          kernels::serial::maxpool2_forward(in.data(), n, c, h, w, out.data(), argmax.data());
          kernels::serial::upsample_nearest_forward(in.data(), n, c, h, w, 3, ups.data());
        },
        5);
    const double p = time_ms(
        [&] {
          kernels::maxpool2_forward(in.data(), n, c, h, w, out.data(), argmax.data());
          kernels::upsample_nearest_forward(in.data(), n, c, h, w, 3, ups.data());
        },
        5);
    report("maxpool2 + upsample x3", s, p);
  }

  {  // whole compact network, forward + backward
    const NetworkConfig cfg = NetworkConfig::compact();
    const NetworkWeights weights = build(cfg, 7);
    Tensor batch({8, 3, cfg.input_size, cfg.input_size});
    fill_random(batch.data(), batch.size(), rng);
    for (int64_t i = 0; i < batch.size(); ++i) batch[i] = std::abs(batch[i]);
    const double fwd = time_ms([&] { forward(weights, batch, false); }, 3);
    ForwardTrace trace;
    ForwardResult out = forward_traced(weights, batch, false, nullptr, trace);
    Tensor dprob(out.probabilities.shape());
    Tensor dpos(out.positions.shape());
    fill_random(dprob.data(), dprob.size(), rng);
    fill_random(dpos.data(), dpos.size(), rng);
    const double bwd = time_ms([&] { backward(weights, trace, dprob, dpos); }, 3);
    std::printf("\ncompact network, batch 8:   forward %.3f ms   backward %.3f ms\n", fwd, bwd);
  }

  return 0;
}
