#include "unigest/kernels.hpp"

#include <algorithm>
#include <cmath>

// Plain single-threaded reference kernels. These stay deliberately naive:
// the parallel versions in kernels.cpp must match them bitwise, and the
// bench target reports the speedup between the two.

namespace unigest::kernels::serial {

void conv2d_forward(const double* in, int n, int c_in, int h, int w, const double* weight,
                    const double* bias, int c_out, int k, int pad, double* out) {
  const int ho = h + 2 * pad - k + 1;
  const int wo = w + 2 * pad - k + 1;
  for (int b = 0; b < n; ++b) {
    for (int oc = 0; oc < c_out; ++oc) {
      for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox) {
          double acc = bias[oc];
          for (int ic = 0; ic < c_in; ++ic) {
            for (int ky = 0; ky < k; ++ky) {
              for (int kx = 0; kx < k; ++kx) {
                const int iy = oy + ky - pad;
                const int ix = ox + kx - pad;
                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                acc += in[((static_cast<int64_t>(b) * c_in + ic) * h + iy) * w + ix] *
                       weight[((static_cast<int64_t>(oc) * c_in + ic) * k + ky) * k + kx];
              }
            }
          }
          out[((static_cast<int64_t>(b) * c_out + oc) * ho + oy) * wo + ox] = acc;
        }
      }
    }
  }
}

void conv2d_backward_input(const double* gout, int n, int c_in, int h, int w,
                           const double* weight, int c_out, int k, int pad, double* gin) {
  const int ho = h + 2 * pad - k + 1;
  const int wo = w + 2 * pad - k + 1;
  for (int b = 0; b < n; ++b) {
    for (int ic = 0; ic < c_in; ++ic) {
      for (int iy = 0; iy < h; ++iy) {
        for (int ix = 0; ix < w; ++ix) {
          double acc = 0.0;
          for (int oc = 0; oc < c_out; ++oc) {
            for (int ky = 0; ky < k; ++ky) {
              for (int kx = 0; kx < k; ++kx) {
                const int oy = iy - ky + pad;
                const int ox = ix - kx + pad;
                if (oy < 0 || oy >= ho || ox < 0 || ox >= wo) continue;
                acc += gout[((static_cast<int64_t>(b) * c_out + oc) * ho + oy) * wo + ox] *
                       weight[((static_cast<int64_t>(oc) * c_in + ic) * k + ky) * k + kx];
              }
            }
          }
          gin[((static_cast<int64_t>(b) * c_in + ic) * h + iy) * w + ix] = acc;
        }
      }
    }
  }
}

void conv2d_backward_params(const double* gout, const double* in, int n, int c_in, int h, int w,
                            int c_out, int k, int pad, double* gweight, double* gbias) {
  const int ho = h + 2 * pad - k + 1;
  const int wo = w + 2 * pad - k + 1;
  for (int oc = 0; oc < c_out; ++oc) {
    for (int ic = 0; ic < c_in; ++ic) {
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          double acc = 0.0;
          for (int b = 0; b < n; ++b) {
            for (int oy = 0; oy < ho; ++oy) {
              for (int ox = 0; ox < wo; ++ox) {
                const int iy = oy + ky - pad;
                const int ix = ox + kx - pad;
                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                acc += gout[((static_cast<int64_t>(b) * c_out + oc) * ho + oy) * wo + ox] *
                       in[((static_cast<int64_t>(b) * c_in + ic) * h + iy) * w + ix];
              }
            }
          }
          gweight[((static_cast<int64_t>(oc) * c_in + ic) * k + ky) * k + kx] = acc;
        }
      }
    }
  }
  for (int oc = 0; oc < c_out; ++oc) {
    double acc = 0.0;
    for (int b = 0; b < n; ++b)
      for (int64_t i = 0; i < static_cast<int64_t>(ho) * wo; ++i)
        acc += gout[(static_cast<int64_t>(b) * c_out + oc) * ho * wo + i];
    gbias[oc] = acc;
  }
}

void maxpool2_forward(const double* in, int n, int c, int h, int w, double* out,
                      int32_t* argmax) {
  const int ho = h / 2;
  const int wo = w / 2;
  for (int b = 0; b < n; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      const double* in_c = in + (static_cast<int64_t>(b) * c + ch) * h * w;
      double* out_c = out + (static_cast<int64_t>(b) * c + ch) * ho * wo;
      int32_t* arg_c = argmax + (static_cast<int64_t>(b) * c + ch) * ho * wo;
      for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox) {
          int best = (2 * oy) * w + 2 * ox;
          double best_v = in_c[best];
          const int candidates[3] = {(2 * oy) * w + 2 * ox + 1, (2 * oy + 1) * w + 2 * ox,
                                     (2 * oy + 1) * w + 2 * ox + 1};
          for (int idx : candidates) {
            if (in_c[idx] > best_v) {
              best_v = in_c[idx];
              best = idx;
            }
          }
          out_c[static_cast<int64_t>(oy) * wo + ox] = best_v;
          arg_c[static_cast<int64_t>(oy) * wo + ox] = best;
        }
      }
    }
  }
}

void maxpool2_backward(const double* gout, const int32_t* argmax, int n, int c, int h, int w,
                       double* gin) {
  const int ho = h / 2;
  const int wo = w / 2;
  for (int b = 0; b < n; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      const double* gout_c = gout + (static_cast<int64_t>(b) * c + ch) * ho * wo;
      const int32_t* arg_c = argmax + (static_cast<int64_t>(b) * c + ch) * ho * wo;
      double* gin_c = gin + (static_cast<int64_t>(b) * c + ch) * h * w;
      for (int64_t i = 0; i < static_cast<int64_t>(h) * w; ++i) gin_c[i] = 0.0;
      for (int64_t o = 0; o < static_cast<int64_t>(ho) * wo; ++o) gin_c[arg_c[o]] += gout_c[o];
    }
  }
}

void fc_forward(const double* in, int n, int in_dim, const double* weight, const double* bias,
                int out_dim, double* out) {
  for (int b = 0; b < n; ++b) {
    for (int o = 0; o < out_dim; ++o) {
      double acc = bias[o];
      for (int i = 0; i < in_dim; ++i)
        acc += in[static_cast<int64_t>(b) * in_dim + i] *
               weight[static_cast<int64_t>(o) * in_dim + i];
      out[static_cast<int64_t>(b) * out_dim + o] = acc;
    }
  }
}

void fc_backward_input(const double* gout, int n, int in_dim, const double* weight, int out_dim,
                       double* gin) {
  for (int b = 0; b < n; ++b) {
    for (int i = 0; i < in_dim; ++i) {
      double acc = 0.0;
      for (int o = 0; o < out_dim; ++o)
        acc += gout[static_cast<int64_t>(b) * out_dim + o] *
               weight[static_cast<int64_t>(o) * in_dim + i];
      gin[static_cast<int64_t>(b) * in_dim + i] = acc;
    }
  }
}

void fc_backward_params(const double* gout, const double* in, int n, int in_dim, int out_dim,
                        double* gweight, double* gbias) {
  for (int o = 0; o < out_dim; ++o) {
    for (int i = 0; i < in_dim; ++i) {
      double acc = 0.0;
      for (int b = 0; b < n; ++b)
        acc += gout[static_cast<int64_t>(b) * out_dim + o] *
               in[static_cast<int64_t>(b) * in_dim + i];
      gweight[static_cast<int64_t>(o) * in_dim + i] = acc;
    }
  }
  for (int o = 0; o < out_dim; ++o) {
    double acc = 0.0;
    for (int b = 0; b < n; ++b) acc += gout[static_cast<int64_t>(b) * out_dim + o];
    gbias[o] = acc;
  }
}

void upsample_nearest_forward(const double* in, int n, int c, int h, int w, int factor,
                              double* out) {
  const int ho = h * factor;
  const int wo = w * factor;
  for (int b = 0; b < n; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      const double* in_c = in + (static_cast<int64_t>(b) * c + ch) * h * w;
      double* out_c = out + (static_cast<int64_t>(b) * c + ch) * ho * wo;
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox)
          out_c[static_cast<int64_t>(oy) * wo + ox] =
              in_c[static_cast<int64_t>(oy / factor) * w + ox / factor];
    }
  }
}

void upsample_nearest_backward(const double* gout, int n, int c, int h, int w, int factor,
                               double* gin) {
  const int ho = h * factor;
  const int wo = w * factor;
  for (int b = 0; b < n; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      const double* gout_c = gout + (static_cast<int64_t>(b) * c + ch) * ho * wo;
      double* gin_c = gin + (static_cast<int64_t>(b) * c + ch) * h * w;
      for (int iy = 0; iy < h; ++iy) {
        for (int ix = 0; ix < w; ++ix) {
          double acc = 0.0;
          for (int fy = 0; fy < factor; ++fy)
            for (int fx = 0; fx < factor; ++fx)
              acc += gout_c[static_cast<int64_t>(iy * factor + fy) * wo + ix * factor + fx];
          gin_c[static_cast<int64_t>(iy) * w + ix] = acc;
        }
      }
    }
  }
}

void upsample_bilinear_forward(const double* in, int n, int c, int h, int w, int factor,
                               double* out) {
  const int ho = h * factor;
  const int wo = w * factor;
  for (int b = 0; b < n; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      const double* in_c = in + (static_cast<int64_t>(b) * c + ch) * h * w;
      double* out_c = out + (static_cast<int64_t>(b) * c + ch) * ho * wo;
      for (int oy = 0; oy < ho; ++oy) {
        const double sy =
            std::clamp((oy + 0.5) / factor - 0.5, 0.0, static_cast<double>(h - 1));
        const int y0 = static_cast<int>(sy);
        const int y1 = std::min(y0 + 1, h - 1);
        const double ay = sy - y0;
        for (int ox = 0; ox < wo; ++ox) {
          const double sx =
              std::clamp((ox + 0.5) / factor - 0.5, 0.0, static_cast<double>(w - 1));
          const int x0 = static_cast<int>(sx);
          const int x1 = std::min(x0 + 1, w - 1);
          const double ax = sx - x0;
          const double top = in_c[static_cast<int64_t>(y0) * w + x0] * (1.0 - ax) +
                             in_c[static_cast<int64_t>(y0) * w + x1] * ax;
          const double bot = in_c[static_cast<int64_t>(y1) * w + x0] * (1.0 - ax) +
                             in_c[static_cast<int64_t>(y1) * w + x1] * ax;
          out_c[static_cast<int64_t>(oy) * wo + ox] = top * (1.0 - ay) + bot * ay;
        }
      }
    }
  }
}

void upsample_bilinear_backward(const double* gout, int n, int c, int h, int w, int factor,
                                double* gin) {
  const int ho = h * factor;
  const int wo = w * factor;
  for (int b = 0; b < n; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      const double* gout_c = gout + (static_cast<int64_t>(b) * c + ch) * ho * wo;
      double* gin_c = gin + (static_cast<int64_t>(b) * c + ch) * h * w;
      for (int64_t i = 0; i < static_cast<int64_t>(h) * w; ++i) gin_c[i] = 0.0;
      for (int oy = 0; oy < ho; ++oy) {
        const double sy =
            std::clamp((oy + 0.5) / factor - 0.5, 0.0, static_cast<double>(h - 1));
        const int y0 = static_cast<int>(sy);
        const int y1 = std::min(y0 + 1, h - 1);
        const double ay = sy - y0;
        for (int ox = 0; ox < wo; ++ox) {
          const double sx =
              std::clamp((ox + 0.5) / factor - 0.5, 0.0, static_cast<double>(w - 1));
          const int x0 = static_cast<int>(sx);
          const int x1 = std::min(x0 + 1, w - 1);
          const double ax = sx - x0;
          const double g = gout_c[static_cast<int64_t>(oy) * wo + ox];
          gin_c[static_cast<int64_t>(y0) * w + x0] += g * (1.0 - ax) * (1.0 - ay);
          gin_c[static_cast<int64_t>(y0) * w + x1] += g * ax * (1.0 - ay);
          gin_c[static_cast<int64_t>(y1) * w + x0] += g * (1.0 - ax) * ay;
          gin_c[static_cast<int64_t>(y1) * w + x1] += g * ax * ay;
        }
      }
    }
  }
}

void relu_forward(const double* in, int64_t size, double* out) {
  for (int64_t i = 0; i < size; ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
}

void relu_backward(const double* gout, const double* in, int64_t size, double* gin) {
  for (int64_t i = 0; i < size; ++i) gin[i] = in[i] > 0.0 ? gout[i] : 0.0;
}

void sigmoid_forward(const double* in, int64_t size, double* out) {
  for (int64_t i = 0; i < size; ++i) out[i] = 1.0 / (1.0 + std::exp(-in[i]));
}

void sigmoid_backward(const double* gout, const double* out, int64_t size, double* gin) {
  for (int64_t i = 0; i < size; ++i) gin[i] = gout[i] * out[i] * (1.0 - out[i]);
}

}  // namespace unigest::kernels::serial
