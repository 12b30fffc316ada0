#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "unigest/kernels.hpp"
#include "unigest/rng.hpp"
#include "unigest/tensor.hpp"

using namespace unigest;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) return false;
  for (int64_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

}  // namespace

// The OpenMP kernels must match the serial reference bitwise: every output
// element is owned by one thread and accumulated in the same order.

TEST_CASE("conv2d forward matches the serial reference bitwise") {
  Rng rng(1);
  for (const int pad : {0, 1}) {
    const int n = 2, c_in = 3, h = 9, w = 7, c_out = 4, k = 3;
    const int ho = h + 2 * pad - k + 1;
    const int wo = w + 2 * pad - k + 1;
    const Tensor in = random_tensor({n, c_in, h, w}, rng);
    const Tensor weight = random_tensor({c_out, c_in, k, k}, rng);
    const Tensor bias = random_tensor({c_out}, rng);
    Tensor out({n, c_out, ho, wo}), ref({n, c_out, ho, wo});
    kernels::conv2d_forward(in.data(), n, c_in, h, w, weight.data(), bias.data(), c_out, k, pad,
                            out.data());
    kernels::serial::conv2d_forward(in.data(), n, c_in, h, w, weight.data(), bias.data(), c_out,
                                    k, pad, ref.data());
    CHECK(bitwise_equal(out, ref));
  }
}

TEST_CASE("conv2d backward matches the serial reference bitwise") {
  Rng rng(2);
  const int n = 2, c_in = 4, h = 8, w = 6, c_out = 3, k = 3, pad = 1;
  const Tensor in = random_tensor({n, c_in, h, w}, rng);
  const Tensor weight = random_tensor({c_out, c_in, k, k}, rng);
  const Tensor gout = random_tensor({n, c_out, h, w}, rng);

  Tensor gin({n, c_in, h, w}), gin_ref({n, c_in, h, w});
  kernels::conv2d_backward_input(gout.data(), n, c_in, h, w, weight.data(), c_out, k, pad,
                                 gin.data());
  kernels::serial::conv2d_backward_input(gout.data(), n, c_in, h, w, weight.data(), c_out, k, pad,
                                         gin_ref.data());
  CHECK(bitwise_equal(gin, gin_ref));

  Tensor gw({c_out, c_in, k, k}), gw_ref({c_out, c_in, k, k});
  Tensor gb({c_out}), gb_ref({c_out});
  kernels::conv2d_backward_params(gout.data(), in.data(), n, c_in, h, w, c_out, k, pad, gw.data(),
                                  gb.data());
  kernels::serial::conv2d_backward_params(gout.data(), in.data(), n, c_in, h, w, c_out, k, pad,
                                          gw_ref.data(), gb_ref.data());
  CHECK(bitwise_equal(gw, gw_ref));
  CHECK(bitwise_equal(gb, gb_ref));
}

TEST_CASE("conv2d gradients agree with finite differences") {
  Rng rng(3);
  const int n = 1, c_in = 2, h = 5, w = 5, c_out = 2, k = 3, pad = 1;
  Tensor in = random_tensor({n, c_in, h, w}, rng);
  Tensor weight = random_tensor({c_out, c_in, k, k}, rng);
  Tensor bias = random_tensor({c_out}, rng);
  const Tensor gout = random_tensor({n, c_out, h, w}, rng);

  // Scalar objective: sum(gout * conv(in)).
  auto objective = [&]() {
    Tensor out({n, c_out, h, w});
    kernels::serial::conv2d_forward(in.data(), n, c_in, h, w, weight.data(), bias.data(), c_out,
                                    k, pad, out.data());
    double s = 0.0;
    for (int64_t i = 0; i < out.size(); ++i) s += gout[i] * out[i];
    return s;
  };

  Tensor gw({c_out, c_in, k, k}), gb({c_out}), gin({n, c_in, h, w});
  kernels::conv2d_backward_params(gout.data(), in.data(), n, c_in, h, w, c_out, k, pad, gw.data(),
                                  gb.data());
  kernels::conv2d_backward_input(gout.data(), n, c_in, h, w, weight.data(), c_out, k, pad,
                                 gin.data());

  const double eps = 1e-6;
  for (int trial = 0; trial < 5; ++trial) {
    const int64_t wi = rng.uniform_int(static_cast<int>(weight.size()));
    const double saved = weight[wi];
    weight[wi] = saved + eps;
    const double up = objective();
    weight[wi] = saved - eps;
    const double down = objective();
    weight[wi] = saved;
    CHECK(gw[wi] == doctest::Approx((up - down) / (2 * eps)).epsilon(1e-5));

    const int64_t ii = rng.uniform_int(static_cast<int>(in.size()));
    const double saved_in = in[ii];
    in[ii] = saved_in + eps;
    const double up_in = objective();
    in[ii] = saved_in - eps;
    const double down_in = objective();
    in[ii] = saved_in;
    CHECK(gin[ii] == doctest::Approx((up_in - down_in) / (2 * eps)).epsilon(1e-5));
  }
}

TEST_CASE("fc kernels match the serial reference bitwise") {
  Rng rng(4);
  const int n = 5, in_dim = 37, out_dim = 11;
  const Tensor in = random_tensor({n, in_dim}, rng);
  const Tensor weight = random_tensor({out_dim, in_dim}, rng);
  const Tensor bias = random_tensor({out_dim}, rng);
  const Tensor gout = random_tensor({n, out_dim}, rng);

  Tensor out({n, out_dim}), out_ref({n, out_dim});
  kernels::fc_forward(in.data(), n, in_dim, weight.data(), bias.data(), out_dim, out.data());
  kernels::serial::fc_forward(in.data(), n, in_dim, weight.data(), bias.data(), out_dim,
                              out_ref.data());
  CHECK(bitwise_equal(out, out_ref));

  Tensor gin({n, in_dim}), gin_ref({n, in_dim});
  kernels::fc_backward_input(gout.data(), n, in_dim, weight.data(), out_dim, gin.data());
  kernels::serial::fc_backward_input(gout.data(), n, in_dim, weight.data(), out_dim,
                                     gin_ref.data());
  CHECK(bitwise_equal(gin, gin_ref));

  Tensor gw({out_dim, in_dim}), gw_ref({out_dim, in_dim}), gb({out_dim}), gb_ref({out_dim});
  kernels::fc_backward_params(gout.data(), in.data(), n, in_dim, out_dim, gw.data(), gb.data());
  kernels::serial::fc_backward_params(gout.data(), in.data(), n, in_dim, out_dim, gw_ref.data(),
                                      gb_ref.data());
  CHECK(bitwise_equal(gw, gw_ref));
  CHECK(bitwise_equal(gb, gb_ref));
}

TEST_CASE("maxpool forward/backward match the serial reference") {
  Rng rng(5);
  const int n = 3, c = 4, h = 8, w = 10;
  const Tensor in = random_tensor({n, c, h, w}, rng);
  Tensor out({n, c, h / 2, w / 2}), out_ref({n, c, h / 2, w / 2});
  std::vector<int32_t> arg(static_cast<size_t>(out.size())), arg_ref(arg.size());
  kernels::maxpool2_forward(in.data(), n, c, h, w, out.data(), arg.data());
  kernels::serial::maxpool2_forward(in.data(), n, c, h, w, out_ref.data(), arg_ref.data());
  CHECK(bitwise_equal(out, out_ref));
  CHECK(arg == arg_ref);

  const Tensor gout = random_tensor({n, c, h / 2, w / 2}, rng);
  Tensor gin({n, c, h, w}), gin_ref({n, c, h, w});
  kernels::maxpool2_backward(gout.data(), arg.data(), n, c, h, w, gin.data());
  kernels::serial::maxpool2_backward(gout.data(), arg_ref.data(), n, c, h, w, gin_ref.data());
  CHECK(bitwise_equal(gin, gin_ref));
}

TEST_CASE("nearest upsampling replicates blocks and its backward sums them") {
  Rng rng(6);
  const int n = 2, c = 3, h = 4, w = 4, factor = 3;
  const Tensor in = random_tensor({n, c, h, w}, rng);
  Tensor out({n, c, h * factor, w * factor}), out_ref(out.shape());
  kernels::upsample_nearest_forward(in.data(), n, c, h, w, factor, out.data());
  kernels::serial::upsample_nearest_forward(in.data(), n, c, h, w, factor, out_ref.data());
  CHECK(bitwise_equal(out, out_ref));
  // spot-check replication
  CHECK(out[0] == in[0]);
  CHECK(out[1] == in[0]);
  CHECK(out[factor] == in[1]);

  const Tensor gout = random_tensor(out.shape(), rng);
  Tensor gin({n, c, h, w}), gin_ref({n, c, h, w});
  kernels::upsample_nearest_backward(gout.data(), n, c, h, w, factor, gin.data());
  kernels::serial::upsample_nearest_backward(gout.data(), n, c, h, w, factor, gin_ref.data());
  CHECK(bitwise_equal(gin, gin_ref));
}

TEST_CASE("bilinear upsampling matches serially and its adjoint is consistent") {
  Rng rng(7);
  const int n = 1, c = 2, h = 4, w = 4, factor = 3;
  const Tensor in = random_tensor({n, c, h, w}, rng);
  Tensor out({n, c, h * factor, w * factor}), out_ref(out.shape());
  kernels::upsample_bilinear_forward(in.data(), n, c, h, w, factor, out.data());
  kernels::serial::upsample_bilinear_forward(in.data(), n, c, h, w, factor, out_ref.data());
  CHECK(bitwise_equal(out, out_ref));

  // Adjoint identity: <gout, F(in)> == <F'(gout), in> for the linear map F.
  const Tensor gout = random_tensor(out.shape(), rng);
  Tensor gin({n, c, h, w});
  kernels::upsample_bilinear_backward(gout.data(), n, c, h, w, factor, gin.data());
  double lhs = 0.0, rhs = 0.0;
  for (int64_t i = 0; i < out.size(); ++i) lhs += gout[i] * out[i];
  for (int64_t i = 0; i < in.size(); ++i) rhs += gin[i] * in[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));

  Tensor gin_ref({n, c, h, w});
  kernels::serial::upsample_bilinear_backward(gout.data(), n, c, h, w, factor, gin_ref.data());
  CHECK(bitwise_equal(gin, gin_ref));
}

TEST_CASE("activations match the serial reference") {
  Rng rng(8);
  const Tensor in = random_tensor({1000}, rng, -5.0, 5.0);
  Tensor out({1000}), ref({1000});
  kernels::relu_forward(in.data(), in.size(), out.data());
  kernels::serial::relu_forward(in.data(), in.size(), ref.data());
  CHECK(bitwise_equal(out, ref));

  kernels::sigmoid_forward(in.data(), in.size(), out.data());
  kernels::serial::sigmoid_forward(in.data(), in.size(), ref.data());
  CHECK(bitwise_equal(out, ref));
  for (int64_t i = 0; i < out.size(); ++i) {
    CHECK(out[i] > 0.0);
    CHECK(out[i] < 1.0);
  }

  const Tensor gout = random_tensor({1000}, rng);
  Tensor gin({1000}), gin_ref({1000});
  kernels::relu_backward(gout.data(), in.data(), in.size(), gin.data());
  kernels::serial::relu_backward(gout.data(), in.data(), in.size(), gin_ref.data());
  CHECK(bitwise_equal(gin, gin_ref));

  Tensor sig({1000});
  kernels::sigmoid_forward(in.data(), in.size(), sig.data());
  kernels::sigmoid_backward(gout.data(), sig.data(), in.size(), gin.data());
  kernels::serial::sigmoid_backward(gout.data(), sig.data(), in.size(), gin_ref.data());
  CHECK(bitwise_equal(gin, gin_ref));
}
