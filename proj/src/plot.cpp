#include "rainbowq/plot.h"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>

#include "rainbowq/errors.h"

namespace rainbowq {

namespace {

void put_u32be(std::vector<uint8_t>& out, uint32_t x) {
  out.push_back(static_cast<uint8_t>(x >> 24));
  out.push_back(static_cast<uint8_t>(x >> 16));
  out.push_back(static_cast<uint8_t>(x >> 8));
  out.push_back(static_cast<uint8_t>(x));
}

void put_chunk(std::vector<uint8_t>& out, const char type[4],
               const std::vector<uint8_t>& payload) {
  put_u32be(out, static_cast<uint32_t>(payload.size()));
  const size_t start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), payload.begin(), payload.end());
  const uint32_t crc = static_cast<uint32_t>(
      crc32(0L, out.data() + start, static_cast<uInt>(out.size() - start)));
  put_u32be(out, crc);
}

}  // namespace

void write_png(const std::string& path, int width, int height,
               const std::vector<uint8_t>& rgb) {
  if (width < 1 || height < 1) throw InputError("png dimensions must be positive");
  if (rgb.size() != static_cast<size_t>(width) * height * 3)
    throw InputError("png payload size does not match dimensions");

  // filter byte 0 in front of every scanline
  std::vector<uint8_t> raw;
  raw.reserve(static_cast<size_t>(height) * (1 + static_cast<size_t>(width) * 3));
  for (int y = 0; y < height; ++y) {
    raw.push_back(0);
    const uint8_t* row = rgb.data() + static_cast<size_t>(y) * width * 3;
    raw.insert(raw.end(), row, row + static_cast<size_t>(width) * 3);
  }
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<uint8_t> deflated(bound);
  if (compress2(deflated.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw IoError("png deflate failed for " + path);
  deflated.resize(bound);

  std::vector<uint8_t> png = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  std::vector<uint8_t> ihdr;
  put_u32be(ihdr, static_cast<uint32_t>(width));
  put_u32be(ihdr, static_cast<uint32_t>(height));
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(2);  // color type: truecolor
  ihdr.push_back(0);  // compression
  ihdr.push_back(0);  // filter
  ihdr.push_back(0);  // no interlace
  put_chunk(png, "IHDR", ihdr);
  put_chunk(png, "IDAT", deflated);
  put_chunk(png, "IEND", {});

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write image: " + path);
  out.write(reinterpret_cast<const char*>(png.data()), static_cast<std::streamsize>(png.size()));
  if (!out) throw IoError("failed writing image: " + path);
}

namespace {

// 5x7 glyphs for axis labels: digits, sign, separators and the few letters
// the fixed label strings use.  Rows are 5-bit masks, MSB left.
struct Glyph {
  char ch;
  uint8_t rows[7];
};

const Glyph kFont[] = {
    {'0', {0x0e, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0e}},
    {'1', {0x04, 0x0c, 0x04, 0x04, 0x04, 0x04, 0x0e}},
    {'2', {0x0e, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1f}},
    {'3', {0x1f, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0e}},
    {'4', {0x02, 0x06, 0x0a, 0x12, 0x1f, 0x02, 0x02}},
    {'5', {0x1f, 0x10, 0x1e, 0x01, 0x01, 0x11, 0x0e}},
    {'6', {0x06, 0x08, 0x10, 0x1e, 0x11, 0x11, 0x0e}},
    {'7', {0x1f, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0e, 0x11, 0x11, 0x0e, 0x11, 0x11, 0x0e}},
    {'9', {0x0e, 0x11, 0x11, 0x0f, 0x01, 0x02, 0x0c}},
    {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0c, 0x0c}},
    {'-', {0x00, 0x00, 0x00, 0x1f, 0x00, 0x00, 0x00}},
    {'+', {0x00, 0x04, 0x04, 0x1f, 0x04, 0x04, 0x00}},
    {'e', {0x00, 0x00, 0x0e, 0x11, 0x1f, 0x10, 0x0e}},
    {'k', {0x10, 0x10, 0x12, 0x14, 0x18, 0x14, 0x12}},
    {'M', {0x11, 0x1b, 0x15, 0x15, 0x11, 0x11, 0x11}},
    {'f', {0x06, 0x08, 0x08, 0x1c, 0x08, 0x08, 0x08}},
    {'r', {0x00, 0x00, 0x16, 0x19, 0x10, 0x10, 0x10}},
    {'a', {0x00, 0x00, 0x0e, 0x01, 0x0f, 0x11, 0x0f}},
    {'m', {0x00, 0x00, 0x1a, 0x15, 0x15, 0x15, 0x15}},
    {'s', {0x00, 0x00, 0x0f, 0x10, 0x0e, 0x01, 0x1e}},
    {'t', {0x08, 0x08, 0x1c, 0x08, 0x08, 0x09, 0x06}},
    {'u', {0x00, 0x00, 0x11, 0x11, 0x11, 0x13, 0x0d}},
    {'n', {0x00, 0x00, 0x16, 0x19, 0x11, 0x11, 0x11}},
    {'g', {0x00, 0x00, 0x0f, 0x11, 0x0f, 0x01, 0x0e}},
    {'v', {0x00, 0x00, 0x11, 0x11, 0x11, 0x0a, 0x04}},
    {'o', {0x00, 0x00, 0x0e, 0x11, 0x11, 0x11, 0x0e}},
    {'i', {0x04, 0x00, 0x0c, 0x04, 0x04, 0x04, 0x0e}},
    {'d', {0x01, 0x01, 0x0d, 0x13, 0x11, 0x13, 0x0d}},
    {'p', {0x00, 0x00, 0x1e, 0x11, 0x1e, 0x10, 0x10}},
    {'l', {0x0c, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0e}},
    {'c', {0x00, 0x00, 0x0e, 0x11, 0x10, 0x11, 0x0e}},
    {'x', {0x00, 0x00, 0x11, 0x0a, 0x04, 0x0a, 0x11}},
    {'=', {0x00, 0x00, 0x1f, 0x00, 0x1f, 0x00, 0x00}},
    {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1f}},
    {' ', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
};

const uint8_t* glyph_rows(char c) {
  for (const Glyph& g : kFont)
    if (g.ch == c) return g.rows;
  return nullptr;
}

struct Canvas {
  int w, h;
  std::vector<uint8_t> rgb;
  Canvas(int width, int height) : w(width), h(height), rgb(static_cast<size_t>(w) * h * 3, 255) {}

  void set(int x, int y, uint8_t r, uint8_t g, uint8_t b) {
    if (x < 0 || y < 0 || x >= w || y >= h) return;
    uint8_t* p = rgb.data() + (static_cast<size_t>(y) * w + x) * 3;
    p[0] = r;
    p[1] = g;
    p[2] = b;
  }

  void line(int x0, int y0, int x1, int y1, uint8_t r, uint8_t g, uint8_t b) {
    const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
      set(x0, y0, r, g, b);
      if (x0 == x1 && y0 == y1) break;
      const int e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }

  void text(int x, int y, const std::string& s, uint8_t r, uint8_t g, uint8_t b) {
    for (char c : s) {
      if (const uint8_t* rows = glyph_rows(c)) {
        for (int ry = 0; ry < 7; ++ry)
          for (int rx = 0; rx < 5; ++rx)
            if (rows[ry] & (1 << (4 - rx))) set(x + rx, y + ry, r, g, b);
      }
      x += 6;
    }
  }
};

std::string tick_label(double v) {
  char buf[48];
  const double a = std::fabs(v);
  if (a >= 1e6)
    std::snprintf(buf, sizeof(buf), "%gM", v / 1e6);
  else if (a >= 1e3)
    std::snprintf(buf, sizeof(buf), "%gk", v / 1e3);
  else
    std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

const uint8_t kPalette[][3] = {
    {31, 119, 180}, {255, 127, 14}, {44, 160, 44},  {214, 39, 40},
    {148, 103, 189}, {140, 86, 75},  {227, 119, 194}, {127, 127, 127},
    {188, 189, 34}, {23, 190, 207},
};

}  // namespace

void render_curves_png(const std::string& path, const std::vector<Curve>& curves,
                       const std::string& x_label, const std::string& y_label, int width,
                       int height) {
  if (curves.empty()) throw InputError("nothing to plot");
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const Curve& c : curves) {
    if (c.x.size() != c.y.size()) throw InputError("curve x/y length mismatch");
    for (double v : c.x) {
      xmin = std::min(xmin, v);
      xmax = std::max(xmax, v);
    }
    for (double v : c.y) {
      ymin = std::min(ymin, v);
      ymax = std::max(ymax, v);
    }
  }
  if (!(xmin <= xmax) || !(ymin <= ymax)) throw InputError("plot data is empty");
  if (xmax == xmin) xmax = xmin + 1.0;
  if (ymax == ymin) {
    ymax += 1.0;
    ymin -= 1.0;
  }
  const double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;

  Canvas cv(width, height);
  const int ml = 70, mr = 20, mt = 20, mb = 50;  // margins
  const int px0 = ml, px1 = width - mr, py0 = height - mb, py1 = mt;
  auto sx = [&](double x) {
    return px0 + static_cast<int>(std::lround((x - xmin) / (xmax - xmin) * (px1 - px0)));
  };
  auto sy = [&](double y) {
    return py0 - static_cast<int>(std::lround((y - ymin) / (ymax - ymin) * (py0 - py1)));
  };

  // frame and ticks
  cv.line(px0, py0, px1, py0, 0, 0, 0);
  cv.line(px0, py0, px0, py1, 0, 0, 0);
  const int nticks = 5;
  for (int i = 0; i <= nticks; ++i) {
    const double tx = xmin + (xmax - xmin) * i / nticks;
    const int x = sx(tx);
    cv.line(x, py0, x, py0 + 4, 0, 0, 0);
    const std::string lab = tick_label(tx);
    cv.text(x - static_cast<int>(lab.size()) * 3, py0 + 8, lab, 0, 0, 0);
    const double ty = ymin + (ymax - ymin) * i / nticks;
    const int y = sy(ty);
    cv.line(px0 - 4, y, px0, y, 0, 0, 0);
    const std::string laby = tick_label(ty);
    cv.text(px0 - 8 - static_cast<int>(laby.size()) * 6, y - 3, laby, 0, 0, 0);
  }
  cv.text((px0 + px1) / 2 - static_cast<int>(x_label.size()) * 3, height - 14, x_label, 0, 0,
          0);
  cv.text(6, py1, y_label, 0, 0, 0);

  for (size_t ci = 0; ci < curves.size(); ++ci) {
    const Curve& c = curves[ci];
    const uint8_t* col = kPalette[ci % (sizeof(kPalette) / sizeof(kPalette[0]))];
    for (size_t i = 1; i < c.x.size(); ++i)
      cv.line(sx(c.x[i - 1]), sy(c.y[i - 1]), sx(c.x[i]), sy(c.y[i]), col[0], col[1], col[2]);
    // legend swatch + label
    const int ly = py1 + 12 * static_cast<int>(ci);
    cv.line(px1 - 90, ly + 3, px1 - 76, ly + 3, col[0], col[1], col[2]);
    cv.line(px1 - 90, ly + 4, px1 - 76, ly + 4, col[0], col[1], col[2]);
    cv.text(px1 - 72, ly, c.label, 0, 0, 0);
  }

  write_png(path, width, height, cv.rgb);
}

}  // namespace rainbowq
