#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace unigest {

// Interleaved 8-bit RGB raster, row-major, origin at the top-left,
// x rightward and y downward.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> pixels;

  Image() = default;
  Image(int w, int h) : width(w), height(h), pixels(static_cast<size_t>(w) * h * 3, 0) {}

  static Image solid(int w, int h, uint8_t r, uint8_t g, uint8_t b);

  uint8_t* px(int x, int y) { return pixels.data() + (static_cast<size_t>(y) * width + x) * 3; }
  const uint8_t* px(int x, int y) const {
    return pixels.data() + (static_cast<size_t>(y) * width + x) * 3;
  }

  bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }

  void set(int x, int y, uint8_t r, uint8_t g, uint8_t b) {
    uint8_t* p = px(x, y);
    p[0] = r;
    p[1] = g;
    p[2] = b;
  }

  bool operator==(const Image&) const = default;
};

// Binary PPM (P6) I/O. PPM keeps the dataset free of external codecs and
// round-trips byte-exactly.
Image read_ppm(const std::filesystem::path& path);
void write_ppm(const Image& img, const std::filesystem::path& path);

// Reads only width/height from the PPM header.
std::array<int, 2> read_ppm_size(const std::filesystem::path& path);

// Bilinear sample of one channel at real-valued coordinates; source
// coordinates are clamped to the image border.
double sample_bilinear(const Image& img, double x, double y, int channel);

// Drawing primitives used by the synthetic generator and the plot renderer.
void fill_rect(Image& img, int x0, int y0, int x1, int y1, uint8_t r, uint8_t g, uint8_t b);
void fill_circle(Image& img, double cx, double cy, double radius, uint8_t r, uint8_t g, uint8_t b);
void draw_line(Image& img, double x0, double y0, double x1, double y1, double thickness,
               uint8_t r, uint8_t g, uint8_t b);

// 5x7 bitmap text, scaled by `scale`; supports digits, uppercase letters
// and a few punctuation marks. Unknown characters render as blanks.
void draw_text(Image& img, int x, int y, const std::string& text, int scale,
               uint8_t r, uint8_t g, uint8_t b);
int text_width(const std::string& text, int scale);

}  // namespace unigest
