#pragma once

// Learning-curve rendering: a minimal PNG encoder (zlib deflate, 8-bit RGB)
// and a line-plot painter with axes, tick labels and a legend.

#include <cstdint>
#include <string>
#include <vector>

namespace rainbowq {

void write_png(const std::string& path, int width, int height,
               const std::vector<uint8_t>& rgb);

struct Curve {
  std::vector<double> x;
  std::vector<double> y;
  std::string label;
};

void render_curves_png(const std::string& path, const std::vector<Curve>& curves,
                       const std::string& x_label, const std::string& y_label,
                       int width = 960, int height = 600);

}  // namespace rainbowq
