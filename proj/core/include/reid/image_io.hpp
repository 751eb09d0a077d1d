#pragma once

#include <string>
#include <vector>

#include "reid/tensor.hpp"

namespace reid {

// Min-max scales an h x w map to 8-bit grayscale, resized to out_h x out_w.
void save_grayscale_map(const Tensor& map_hw, int out_h, int out_w, const std::string& path);

// Jet-colormap overlay of the map on the source image (at the image's size).
void save_overlay(const std::string& image_path, const Tensor& map_hw, const std::string& path);

// Simple multi-series line plot.
void render_line_plot(const std::string& title, const std::vector<std::string>& names,
                      const std::vector<std::vector<double>>& series, const std::string& path);

void save_profiles_text(const std::string& path, const std::vector<double>& v1,
                        const std::vector<double>& v2);

}  // namespace reid
