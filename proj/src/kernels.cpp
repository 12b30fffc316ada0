#include "unigest/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace unigest::kernels {

namespace {

inline int64_t plane(int h, int w) { return static_cast<int64_t>(h) * w; }

// Half-pixel source coordinate for integer-factor bilinear upsampling.
inline double src_coord(int dst, int factor) {
  return (dst + 0.5) / factor - 0.5;
}

}  // namespace

void conv2d_forward(const double* in, int n, int c_in, int h, int w, const double* weight,
                    const double* bias, int c_out, int k, int pad, double* out) {
  const int ho = h + 2 * pad - k + 1;
  const int wo = w + 2 * pad - k + 1;
  const int64_t in_plane = plane(h, w);
  const int64_t out_plane = plane(ho, wo);
#pragma omp parallel for collapse(3) schedule(static)
  for (int b = 0; b < n; ++b) {
    for (int oc = 0; oc < c_out; ++oc) {
      for (int oy = 0; oy < ho; ++oy) {
        const double* in_b = in + static_cast<int64_t>(b) * c_in * in_plane;
        const double* w_oc = weight + static_cast<int64_t>(oc) * c_in * k * k;
        double* out_row = out + (static_cast<int64_t>(b) * c_out + oc) * out_plane +
                          static_cast<int64_t>(oy) * wo;
        for (int ox = 0; ox < wo; ++ox) {
          double acc = bias[oc];
          for (int ic = 0; ic < c_in; ++ic) {
            const double* in_c = in_b + static_cast<int64_t>(ic) * in_plane;
            const double* w_ic = w_oc + static_cast<int64_t>(ic) * k * k;
            for (int ky = 0; ky < k; ++ky) {
              const int iy = oy + ky - pad;
              if (iy < 0 || iy >= h) continue;
              const double* in_row = in_c + static_cast<int64_t>(iy) * w;
              const double* w_row = w_ic + static_cast<int64_t>(ky) * k;
              for (int kx = 0; kx < k; ++kx) {
                const int ix = ox + kx - pad;
                if (ix < 0 || ix >= w) continue;
                acc += in_row[ix] * w_row[kx];
              }
            }
          }
          out_row[ox] = acc;
        }
      }
    }
  }
}

void conv2d_backward_input(const double* gout, int n, int c_in, int h, int w,
                           const double* weight, int c_out, int k, int pad, double* gin) {
  const int ho = h + 2 * pad - k + 1;
  const int wo = w + 2 * pad - k + 1;
  const int64_t in_plane = plane(h, w);
  const int64_t out_plane = plane(ho, wo);
#pragma omp parallel for collapse(3) schedule(static)
  for (int b = 0; b < n; ++b) {
    for (int ic = 0; ic < c_in; ++ic) {
      for (int iy = 0; iy < h; ++iy) {
        double* gin_row = gin + (static_cast<int64_t>(b) * c_in + ic) * in_plane +
                          static_cast<int64_t>(iy) * w;
        for (int ix = 0; ix < w; ++ix) {
          double acc = 0.0;
          for (int oc = 0; oc < c_out; ++oc) {
            const double* gout_c = gout + (static_cast<int64_t>(b) * c_out + oc) * out_plane;
            const double* w_c =
                weight + (static_cast<int64_t>(oc) * c_in + ic) * k * k;
            for (int ky = 0; ky < k; ++ky) {
              const int oy = iy - ky + pad;
              if (oy < 0 || oy >= ho) continue;
              for (int kx = 0; kx < k; ++kx) {
                const int ox = ix - kx + pad;
                if (ox < 0 || ox >= wo) continue;
                acc += gout_c[static_cast<int64_t>(oy) * wo + ox] * w_c[ky * k + kx];
              }
            }
          }
          gin_row[ix] = acc;
        }
      }
    }
  }
}

void conv2d_backward_params(const double* gout, const double* in, int n, int c_in, int h, int w,
                            int c_out, int k, int pad, double* gweight, double* gbias) {
  const int ho = h + 2 * pad - k + 1;
  const int wo = w + 2 * pad - k + 1;
  const int64_t in_plane = plane(h, w);
  const int64_t out_plane = plane(ho, wo);
#pragma omp parallel for collapse(2) schedule(static)
  for (int oc = 0; oc < c_out; ++oc) {
    for (int ic = 0; ic < c_in; ++ic) {
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          double acc = 0.0;
          for (int b = 0; b < n; ++b) {
            const double* gout_c = gout + (static_cast<int64_t>(b) * c_out + oc) * out_plane;
            const double* in_c = in + (static_cast<int64_t>(b) * c_in + ic) * in_plane;
            for (int oy = 0; oy < ho; ++oy) {
              const int iy = oy + ky - pad;
              if (iy < 0 || iy >= h) continue;
              const double* gout_row = gout_c + static_cast<int64_t>(oy) * wo;
              const double* in_row = in_c + static_cast<int64_t>(iy) * w;
              for (int ox = 0; ox < wo; ++ox) {
                const int ix = ox + kx - pad;
                if (ix < 0 || ix >= w) continue;
                acc += gout_row[ox] * in_row[ix];
              }
            }
          }
          gweight[((static_cast<int64_t>(oc) * c_in + ic) * k + ky) * k + kx] = acc;
        }
      }
    }
  }
#pragma omp parallel for schedule(static)
  for (int oc = 0; oc < c_out; ++oc) {
    double acc = 0.0;
    for (int b = 0; b < n; ++b) {
      const double* gout_c = gout + (static_cast<int64_t>(b) * c_out + oc) * out_plane;
      for (int64_t i = 0; i < out_plane; ++i) acc += gout_c[i];
    }
    gbias[oc] = acc;
  }
}

void maxpool2_forward(const double* in, int n, int c, int h, int w, double* out,
                      int32_t* argmax) {
  const int ho = h / 2;
  const int wo = w / 2;
  const int64_t in_plane = plane(h, w);
  const int64_t out_plane = plane(ho, wo);
#pragma omp parallel for collapse(2) schedule(static)
  for (int b = 0; b < n; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      const double* in_c = in + (static_cast<int64_t>(b) * c + ch) * in_plane;
      double* out_c = out + (static_cast<int64_t>(b) * c + ch) * out_plane;
      int32_t* arg_c = argmax + (static_cast<int64_t>(b) * c + ch) * out_plane;
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
  const int64_t in_plane = plane(h, w);
  const int64_t out_plane = plane(ho, wo);
#pragma omp parallel for collapse(2) schedule(static)
  for (int b = 0; b < n; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      const double* gout_c = gout + (static_cast<int64_t>(b) * c + ch) * out_plane;
      const int32_t* arg_c = argmax + (static_cast<int64_t>(b) * c + ch) * out_plane;
      double* gin_c = gin + (static_cast<int64_t>(b) * c + ch) * in_plane;
      for (int64_t i = 0; i < in_plane; ++i) gin_c[i] = 0.0;
      for (int64_t o = 0; o < out_plane; ++o) gin_c[arg_c[o]] += gout_c[o];
    }
  }
}

void fc_forward(const double* in, int n, int in_dim, const double* weight, const double* bias,
                int out_dim, double* out) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int b = 0; b < n; ++b) {
    for (int o = 0; o < out_dim; ++o) {
      const double* in_b = in + static_cast<int64_t>(b) * in_dim;
      const double* w_o = weight + static_cast<int64_t>(o) * in_dim;
      double acc = bias[o];
      for (int i = 0; i < in_dim; ++i) acc += in_b[i] * w_o[i];
      out[static_cast<int64_t>(b) * out_dim + o] = acc;
    }
  }
}

void fc_backward_input(const double* gout, int n, int in_dim, const double* weight, int out_dim,
                       double* gin) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int b = 0; b < n; ++b) {
    for (int i = 0; i < in_dim; ++i) {
      const double* gout_b = gout + static_cast<int64_t>(b) * out_dim;
      double acc = 0.0;
      for (int o = 0; o < out_dim; ++o)
        acc += gout_b[o] * weight[static_cast<int64_t>(o) * in_dim + i];
      gin[static_cast<int64_t>(b) * in_dim + i] = acc;
    }
  }
}

void fc_backward_params(const double* gout, const double* in, int n, int in_dim, int out_dim,
                        double* gweight, double* gbias) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int o = 0; o < out_dim; ++o) {
    for (int i = 0; i < in_dim; ++i) {
      double acc = 0.0;
      for (int b = 0; b < n; ++b)
        acc += gout[static_cast<int64_t>(b) * out_dim + o] * in[static_cast<int64_t>(b) * in_dim + i];
      gweight[static_cast<int64_t>(o) * in_dim + i] = acc;
    }
  }
#pragma omp parallel for schedule(static)
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
  const int64_t in_plane = plane(h, w);
  const int64_t out_plane = plane(ho, wo);
#pragma omp parallel for collapse(2) schedule(static)
  for (int b = 0; b < n; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      const double* in_c = in + (static_cast<int64_t>(b) * c + ch) * in_plane;
      double* out_c = out + (static_cast<int64_t>(b) * c + ch) * out_plane;
      for (int oy = 0; oy < ho; ++oy) {
        const double* in_row = in_c + static_cast<int64_t>(oy / factor) * w;
        double* out_row = out_c + static_cast<int64_t>(oy) * wo;
        for (int ox = 0; ox < wo; ++ox) out_row[ox] = in_row[ox / factor];
      }
    }
  }
}

void upsample_nearest_backward(const double* gout, int n, int c, int h, int w, int factor,
                               double* gin) {
  const int ho = h * factor;
  const int wo = w * factor;
  const int64_t in_plane = plane(h, w);
  const int64_t out_plane = plane(ho, wo);
#pragma omp parallel for collapse(2) schedule(static)
  for (int b = 0; b < n; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      const double* gout_c = gout + (static_cast<int64_t>(b) * c + ch) * out_plane;
      double* gin_c = gin + (static_cast<int64_t>(b) * c + ch) * in_plane;
      for (int iy = 0; iy < h; ++iy) {
        for (int ix = 0; ix < w; ++ix) {
          double acc = 0.0;
          for (int fy = 0; fy < factor; ++fy) {
            const double* gout_row = gout_c + static_cast<int64_t>(iy * factor + fy) * wo;
            for (int fx = 0; fx < factor; ++fx) acc += gout_row[ix * factor + fx];
          }
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
  const int64_t in_plane = plane(h, w);
  const int64_t out_plane = plane(ho, wo);
#pragma omp parallel for collapse(2) schedule(static)
  for (int b = 0; b < n; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      const double* in_c = in + (static_cast<int64_t>(b) * c + ch) * in_plane;
      double* out_c = out + (static_cast<int64_t>(b) * c + ch) * out_plane;
      for (int oy = 0; oy < ho; ++oy) {
        const double sy = std::clamp(src_coord(oy, factor), 0.0, static_cast<double>(h - 1));
        const int y0 = static_cast<int>(sy);
        const int y1 = std::min(y0 + 1, h - 1);
        const double ay = sy - y0;
        double* out_row = out_c + static_cast<int64_t>(oy) * wo;
        for (int ox = 0; ox < wo; ++ox) {
          const double sx = std::clamp(src_coord(ox, factor), 0.0, static_cast<double>(w - 1));
          const int x0 = static_cast<int>(sx);
          const int x1 = std::min(x0 + 1, w - 1);
          const double ax = sx - x0;
          const double top = in_c[static_cast<int64_t>(y0) * w + x0] * (1.0 - ax) +
                             in_c[static_cast<int64_t>(y0) * w + x1] * ax;
          const double bot = in_c[static_cast<int64_t>(y1) * w + x0] * (1.0 - ax) +
                             in_c[static_cast<int64_t>(y1) * w + x1] * ax;
          out_row[ox] = top * (1.0 - ay) + bot * ay;
        }
      }
    }
  }
}

void upsample_bilinear_backward(const double* gout, int n, int c, int h, int w, int factor,
                                double* gin) {
  const int ho = h * factor;
  const int wo = w * factor;
  const int64_t in_plane = plane(h, w);
  const int64_t out_plane = plane(ho, wo);
  // One thread owns a full (b, ch) plane, so the scatter adds stay ordered.
#pragma omp parallel for collapse(2) schedule(static)
  for (int b = 0; b < n; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      const double* gout_c = gout + (static_cast<int64_t>(b) * c + ch) * out_plane;
      double* gin_c = gin + (static_cast<int64_t>(b) * c + ch) * in_plane;
      for (int64_t i = 0; i < in_plane; ++i) gin_c[i] = 0.0;
      for (int oy = 0; oy < ho; ++oy) {
        const double sy = std::clamp(src_coord(oy, factor), 0.0, static_cast<double>(h - 1));
        const int y0 = static_cast<int>(sy);
        const int y1 = std::min(y0 + 1, h - 1);
        const double ay = sy - y0;
        for (int ox = 0; ox < wo; ++ox) {
          const double sx = std::clamp(src_coord(ox, factor), 0.0, static_cast<double>(w - 1));
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
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < size; ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
}

void relu_backward(const double* gout, const double* in, int64_t size, double* gin) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < size; ++i) gin[i] = in[i] > 0.0 ? gout[i] : 0.0;
}

void sigmoid_forward(const double* in, int64_t size, double* out) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < size; ++i) out[i] = 1.0 / (1.0 + std::exp(-in[i]));
}

void sigmoid_backward(const double* gout, const double* out, int64_t size, double* gin) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < size; ++i) gin[i] = gout[i] * out[i] * (1.0 - out[i]);
}

}  // namespace unigest::kernels
