#pragma once

#include <filesystem>
#include <string>

#include "unigest/evaluation.hpp"
#include "unigest/image.hpp"
#include "unigest/training.hpp"

namespace unigest {

enum class LossColumn { probabilistic, positional, total };

// Train/validation curves for one loss column on a white canvas.
Image render_curve(const History& history, LossColumn column, const std::string& title);

// Writes loss_probabilistic.ppm, loss_positional.ppm and loss_total.ppm.
void render_learning_curves(const History& history, const std::filesystem::path& out_dir);

// Heat grid with per-cell counts; rows actual, columns predicted plus a
// trailing unknown column.
Image render_confusion_image(const ConfusionMatrix& matrix);

}  // namespace unigest
