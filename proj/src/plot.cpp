#include "unigest/plot.hpp"

#include <algorithm>
#include <cmath>

#include "unigest/errors.hpp"

namespace unigest {

namespace {

double pick_loss(const EpochStats& stats, LossColumn column) {
  switch (column) {
    case LossColumn::probabilistic: return stats.probabilistic;
    case LossColumn::positional: return stats.positional;
    case LossColumn::total: return stats.total;
  }
  return 0.0;
}

std::string short_number(double v) {
  char buf[32];
  if (v != 0.0 && (std::abs(v) < 0.01 || std::abs(v) >= 10000.0))
    std::snprintf(buf, sizeof(buf), "%.1e", v);
  else
    std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

}  // namespace

Image render_curve(const History& history, LossColumn column, const std::string& title) {
  if (history.empty()) throw InputError("render_curve: empty history");
  const int width = 640;
  const int height = 480;
  const int left = 70;
  const int right = width - 20;
  const int top = 40;
  const int bottom = height - 50;

  Image img = Image::solid(width, height, 255, 255, 255);

  double max_loss = 0.0;
  for (const HistoryRow& row : history) {
    max_loss = std::max(max_loss, pick_loss(row.train, column));
    max_loss = std::max(max_loss, pick_loss(row.val, column));
  }
  if (max_loss <= 0.0) max_loss = 1.0;

  // Axes.
  draw_line(img, left, top, left, bottom, 1.2, 0, 0, 0);
  draw_line(img, left, bottom, right, bottom, 1.2, 0, 0, 0);
  draw_text(img, left, 12, title, 2, 0, 0, 0);
  draw_text(img, left - 60, top - 4, short_number(max_loss), 1, 0, 0, 0);
  draw_text(img, left - 60, bottom - 4, "0", 1, 0, 0, 0);
  draw_text(img, left, bottom + 10, "1", 1, 0, 0, 0);
  draw_text(img, right - 30, bottom + 10, std::to_string(history.back().epoch), 1, 0, 0, 0);
  draw_text(img, left, bottom + 25, "EPOCH", 1, 0, 0, 0);

  const int n = static_cast<int>(history.size());
  auto x_at = [&](int i) {
    if (n == 1) return static_cast<double>((left + right) / 2);
    return left + (right - left) * static_cast<double>(i) / (n - 1);
  };
  auto y_at = [&](double loss) { return bottom - (bottom - top) * (loss / max_loss); };

  auto draw_series = [&](bool validation, uint8_t r, uint8_t g, uint8_t b) {
    for (int i = 0; i + 1 < n; ++i) {
      const double a = pick_loss(validation ? history[static_cast<size_t>(i)].val
                                            : history[static_cast<size_t>(i)].train,
                                 column);
      const double c = pick_loss(validation ? history[static_cast<size_t>(i + 1)].val
                                            : history[static_cast<size_t>(i + 1)].train,
                                 column);
      draw_line(img, x_at(i), y_at(a), x_at(i + 1), y_at(c), 1.6, r, g, b);
    }
    if (n == 1) {
      const double a = pick_loss(validation ? history[0].val : history[0].train, column);
      fill_circle(img, x_at(0), y_at(a), 2.5, r, g, b);
    }
  };
  draw_series(false, 30, 60, 200);  // train
  draw_series(true, 210, 60, 40);   // validation

  draw_text(img, right - 150, top, "TRAIN", 1, 30, 60, 200);
  draw_text(img, right - 80, top, "VAL", 1, 210, 60, 40);
  return img;
}

void render_learning_curves(const History& history, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_ppm(render_curve(history, LossColumn::probabilistic, "PROBABILISTIC LOSS"),
            out_dir / "loss_probabilistic.ppm");
  write_ppm(render_curve(history, LossColumn::positional, "POSITIONAL LOSS"),
            out_dir / "loss_positional.ppm");
  write_ppm(render_curve(history, LossColumn::total, "TOTAL LOSS"), out_dir / "loss_total.ppm");
}

Image render_confusion_image(const ConfusionMatrix& matrix) {
  const int n_rows = static_cast<int>(matrix.classes.size());
  const int n_cols = n_rows + 1;
  const int cell = 48;
  const int left = 60;
  const int top = 60;
  const int width = left + n_cols * cell + 20;
  const int height = top + n_rows * cell + 20;
  Image img = Image::solid(width, height, 255, 255, 255);

  int64_t max_count = 1;
  for (const auto& row : matrix.counts)
    for (int64_t v : row) max_count = std::max(max_count, v);

  for (int r = 0; r < n_rows; ++r) {
    for (int c = 0; c < n_cols; ++c) {
      const int64_t v = matrix.counts[static_cast<size_t>(r)][static_cast<size_t>(c)];
      const double heat = static_cast<double>(v) / static_cast<double>(max_count);
      const uint8_t rr = static_cast<uint8_t>(255 - 200 * heat);
      const uint8_t gg = static_cast<uint8_t>(255 - 160 * heat);
      const int x0 = left + c * cell;
      const int y0 = top + r * cell;
      fill_rect(img, x0, y0, x0 + cell, y0 + cell, rr, gg, 255);
      draw_line(img, x0, y0, x0 + cell, y0, 1.0, 120, 120, 120);
      draw_line(img, x0, y0, x0, y0 + cell, 1.0, 120, 120, 120);
      const std::string text = std::to_string(v);
      const uint8_t ink = heat > 0.6 ? 255 : 0;
      draw_text(img, x0 + (cell - text_width(text, 1)) / 2, y0 + cell / 2 - 4, text, 1, ink, ink,
                ink);
    }
  }
  for (int r = 0; r < n_rows; ++r) {
    const std::string label = "(" + std::to_string(r + 1) + ")";
    draw_text(img, 10, top + r * cell + cell / 2 - 4, label, 1, 0, 0, 0);
  }
  for (int c = 0; c < n_cols; ++c) {
    const std::string label = c < n_rows ? "(" + std::to_string(c + 1) + ")" : "U";
    draw_text(img, left + c * cell + cell / 2 - text_width(label, 1) / 2, top - 20, label, 1, 0, 0,
              0);
  }
  draw_line(img, left, top, left + n_cols * cell, top, 1.0, 0, 0, 0);
  draw_line(img, left, top, left, top + n_rows * cell, 1.0, 0, 0, 0);
  draw_line(img, left + n_cols * cell, top, left + n_cols * cell, top + n_rows * cell, 1.0, 0, 0,
            0);
  draw_line(img, left, top + n_rows * cell, left + n_cols * cell, top + n_rows * cell, 1.0, 0, 0,
            0);
  return img;
}

}  // namespace unigest
