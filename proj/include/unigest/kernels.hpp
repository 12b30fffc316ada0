#pragma once

#include <cstdint>

namespace unigest::kernels {

// Dense layer arithmetic on raw NCHW buffers, double precision.
//
// Every parallel kernel assigns each output element to exactly one thread
// and accumulates in a fixed order, so results are bitwise identical to
// the serial reference for any OMP thread count. The serial twins live in
// kernels::serial and are kept as the ground truth the parallel versions
// are tested and benchmarked against.

// Square-kernel convolution, stride 1, symmetric zero padding.
// out: n x c_out x (h + 2 pad - k + 1) x (w + 2 pad - k + 1)
void conv2d_forward(const double* in, int n, int c_in, int h, int w, const double* weight,
                    const double* bias, int c_out, int k, int pad, double* out);
void conv2d_backward_input(const double* gout, int n, int c_in, int h, int w,
                           const double* weight, int c_out, int k, int pad, double* gin);
void conv2d_backward_params(const double* gout, const double* in, int n, int c_in, int h, int w,
                            int c_out, int k, int pad, double* gweight, double* gbias);

// 2x2 max pooling, stride 2; h and w must be even. argmax records the
// flat in-plane index of each selected element for the backward pass.
void maxpool2_forward(const double* in, int n, int c, int h, int w, double* out,
                      int32_t* argmax);
void maxpool2_backward(const double* gout, const int32_t* argmax, int n, int c, int h, int w,
                       double* gin);

// Fully connected: out[b][o] = bias[o] + sum_i in[b][i] * weight[o][i].
void fc_forward(const double* in, int n, int in_dim, const double* weight, const double* bias,
                int out_dim, double* out);
void fc_backward_input(const double* gout, int n, int in_dim, const double* weight, int out_dim,
                       double* gin);
void fc_backward_params(const double* gout, const double* in, int n, int in_dim, int out_dim,
                        double* gweight, double* gbias);

// Integer-factor upsampling. Nearest replicates factor x factor blocks;
// bilinear uses half-pixel sample mapping with border clamping.
void upsample_nearest_forward(const double* in, int n, int c, int h, int w, int factor,
                              double* out);
void upsample_nearest_backward(const double* gout, int n, int c, int h, int w, int factor,
                               double* gin);
void upsample_bilinear_forward(const double* in, int n, int c, int h, int w, int factor,
                               double* out);
void upsample_bilinear_backward(const double* gout, int n, int c, int h, int w, int factor,
                                double* gin);

void relu_forward(const double* in, int64_t size, double* out);
void relu_backward(const double* gout, const double* in, int64_t size, double* gin);
void sigmoid_forward(const double* in, int64_t size, double* out);
// gin = gout * s * (1 - s), with s the saved forward output.
void sigmoid_backward(const double* gout, const double* out, int64_t size, double* gin);

namespace serial {

void conv2d_forward(const double* in, int n, int c_in, int h, int w, const double* weight,
                    const double* bias, int c_out, int k, int pad, double* out);
void conv2d_backward_input(const double* gout, int n, int c_in, int h, int w,
                           const double* weight, int c_out, int k, int pad, double* gin);
void conv2d_backward_params(const double* gout, const double* in, int n, int c_in, int h, int w,
                            int c_out, int k, int pad, double* gweight, double* gbias);
void maxpool2_forward(const double* in, int n, int c, int h, int w, double* out,
                      int32_t* argmax);
void maxpool2_backward(const double* gout, const int32_t* argmax, int n, int c, int h, int w,
                       double* gin);
void fc_forward(const double* in, int n, int in_dim, const double* weight, const double* bias,
                int out_dim, double* out);
void fc_backward_input(const double* gout, int n, int in_dim, const double* weight, int out_dim,
                       double* gin);
void fc_backward_params(const double* gout, const double* in, int n, int in_dim, int out_dim,
                        double* gweight, double* gbias);
void upsample_nearest_forward(const double* in, int n, int c, int h, int w, int factor,
                              double* out);
void upsample_nearest_backward(const double* gout, int n, int c, int h, int w, int factor,
                               double* gin);
void upsample_bilinear_forward(const double* in, int n, int c, int h, int w, int factor,
                               double* out);
void upsample_bilinear_backward(const double* gout, int n, int c, int h, int w, int factor,
                                double* gin);
void relu_forward(const double* in, int64_t size, double* out);
void relu_backward(const double* gout, const double* in, int64_t size, double* gin);
void sigmoid_forward(const double* in, int64_t size, double* out);
void sigmoid_backward(const double* gout, const double* out, int64_t size, double* gin);

}  // namespace serial

}  // namespace unigest::kernels
