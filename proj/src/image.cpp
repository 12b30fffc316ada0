#include "unigest/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "unigest/errors.hpp"

namespace unigest {

Image Image::solid(int w, int h, uint8_t r, uint8_t g, uint8_t b) {
  Image img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img.set(x, y, r, g, b);
  return img;
}

namespace {

// Skips whitespace and '#' comments between PPM header tokens.
int next_header_int(std::istream& in, const std::string& path) {
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (!std::isspace(c)) {
      break;
    }
    c = in.get();
  }
  if (c == EOF || !std::isdigit(c)) throw DataError(path + ": malformed PPM header");
  int value = 0;
  while (c != EOF && std::isdigit(c)) {
    value = value * 10 + (c - '0');
    c = in.get();
  }
  return value;
}

}  // namespace

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image: " + path.string());
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (magic[0] != 'P' || magic[1] != '6') throw DataError(path.string() + ": not a P6 PPM file");
  int w = next_header_int(in, path.string());
  int h = next_header_int(in, path.string());
  int maxval = next_header_int(in, path.string());
  if (maxval != 255) throw DataError(path.string() + ": unsupported PPM maxval");
  if (w <= 0 || h <= 0) throw DataError(path.string() + ": bad PPM dimensions");
  Image img(w, h);
  in.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size()))
    throw DataError(path.string() + ": truncated PPM payload");
  return img;
}

std::array<int, 2> read_ppm_size(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image: " + path.string());
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (magic[0] != 'P' || magic[1] != '6') throw DataError(path.string() + ": not a P6 PPM file");
  int w = next_header_int(in, path.string());
  int h = next_header_int(in, path.string());
  return {w, h};
}

void write_ppm(const Image& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write image: " + path.string());
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
  if (!out) throw DataError("short write: " + path.string());
}

double sample_bilinear(const Image& img, double x, double y, int channel) {
  double fx = std::clamp(x, 0.0, static_cast<double>(img.width - 1));
  double fy = std::clamp(y, 0.0, static_cast<double>(img.height - 1));
  int x0 = static_cast<int>(std::floor(fx));
  int y0 = static_cast<int>(std::floor(fy));
  int x1 = std::min(x0 + 1, img.width - 1);
  int y1 = std::min(y0 + 1, img.height - 1);
  double ax = fx - x0;
  double ay = fy - y0;
  double v00 = img.px(x0, y0)[channel];
  double v10 = img.px(x1, y0)[channel];
  double v01 = img.px(x0, y1)[channel];
  double v11 = img.px(x1, y1)[channel];
  double top = v00 + (v10 - v00) * ax;
  double bot = v01 + (v11 - v01) * ax;
  return top + (bot - top) * ay;
}

void fill_rect(Image& img, int x0, int y0, int x1, int y1, uint8_t r, uint8_t g, uint8_t b) {
  x0 = std::max(x0, 0);
  y0 = std::max(y0, 0);
  x1 = std::min(x1, img.width);
  y1 = std::min(y1, img.height);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) img.set(x, y, r, g, b);
}

void fill_circle(Image& img, double cx, double cy, double radius, uint8_t r, uint8_t g,
                 uint8_t b) {
  int x0 = std::max(0, static_cast<int>(std::floor(cx - radius)));
  int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(cx + radius)));
  int y0 = std::max(0, static_cast<int>(std::floor(cy - radius)));
  int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(cy + radius)));
  double r2 = radius * radius;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      double dx = x - cx;
      double dy = y - cy;
      if (dx * dx + dy * dy <= r2) img.set(x, y, r, g, b);
    }
  }
}

void draw_line(Image& img, double x0, double y0, double x1, double y1, double thickness,
               uint8_t r, uint8_t g, uint8_t b) {
  double dx = x1 - x0;
  double dy = y1 - y0;
  double len2 = dx * dx + dy * dy;
  double half = thickness * 0.5;
  int bx0 = std::max(0, static_cast<int>(std::floor(std::min(x0, x1) - half)));
  int bx1 = std::min(img.width - 1, static_cast<int>(std::ceil(std::max(x0, x1) + half)));
  int by0 = std::max(0, static_cast<int>(std::floor(std::min(y0, y1) - half)));
  int by1 = std::min(img.height - 1, static_cast<int>(std::ceil(std::max(y0, y1) + half)));
  for (int y = by0; y <= by1; ++y) {
    for (int x = bx0; x <= bx1; ++x) {
      double t = len2 > 0.0 ? ((x - x0) * dx + (y - y0) * dy) / len2 : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      double px = x0 + t * dx;
      double py = y0 + t * dy;
      double ddx = x - px;
      double ddy = y - py;
      if (ddx * ddx + ddy * ddy <= half * half) img.set(x, y, r, g, b);
    }
  }
}

namespace {

// 5x7 glyphs, one row per byte, low 5 bits used.
struct Glyph {
  char ch;
  uint8_t rows[7];
};

constexpr Glyph kFont[] = {
    {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
    {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
    {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
    {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
    {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
    {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
    {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
    {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
    {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
    {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}},
    {'D', {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C}},
    {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}},
    {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
    {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}},
    {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
    {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
    {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
    {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}},
    {'N', {0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11}},
    {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
    {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}},
    {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
    {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}},
    {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
    {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
    {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x1B, 0x11}},
    {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
    {'Y', {0x11, 0x11, 0x0A, 0x04, 0x04, 0x04, 0x04}},
    {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
    {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}},
    {',', {0x00, 0x00, 0x00, 0x00, 0x0C, 0x04, 0x08}},
    {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}},
    {'+', {0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00}},
    {'/', {0x01, 0x01, 0x02, 0x04, 0x08, 0x10, 0x10}},
    {':', {0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00}},
    {'%', {0x18, 0x19, 0x02, 0x04, 0x08, 0x13, 0x03}},
    {'(', {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}},
    {')', {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}},
    {'e', {0x00, 0x00, 0x0E, 0x11, 0x1F, 0x10, 0x0E}},
};

const uint8_t* find_glyph(char ch) {
  if (ch >= 'a' && ch <= 'z' && ch != 'e') ch = static_cast<char>(ch - 'a' + 'A');
  for (const Glyph& g : kFont)
    if (g.ch == ch) return g.rows;
  return nullptr;
}

}  // namespace

void draw_text(Image& img, int x, int y, const std::string& text, int scale, uint8_t r, uint8_t g,
               uint8_t b) {
  int cx = x;
  for (char ch : text) {
    const uint8_t* rows = find_glyph(ch);
    if (rows != nullptr) {
      for (int gy = 0; gy < 7; ++gy) {
        for (int gx = 0; gx < 5; ++gx) {
          if ((rows[gy] >> (4 - gx)) & 1) {
            fill_rect(img, cx + gx * scale, y + gy * scale, cx + (gx + 1) * scale,
                      y + (gy + 1) * scale, r, g, b);
          }
        }
      }
    }
    cx += 6 * scale;
  }
}

int text_width(const std::string& text, int scale) {
  return static_cast<int>(text.size()) * 6 * scale;
}

}  // namespace unigest
