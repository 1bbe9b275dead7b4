#pragma once

// RGB raster images, a perceptual colormap, bitmap text, PNG output and two
// small chart renderers (line series, grouped bars).

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "nowcast/detail/glyphs.hpp"
#include "nowcast/errors.hpp"

namespace nowcast {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

inline constexpr Rgb kWhite{255, 255, 255};
inline constexpr Rgb kBlack{0, 0, 0};
inline constexpr Rgb kGrey{200, 200, 200};

class Image {
 public:
  Image() = default;
  Image(int width, int height, Rgb fill = kWhite)
      : w_(width), h_(height), px_(static_cast<std::size_t>(width) * height, fill) {
    if (width < 0 || height < 0) throw ArgumentError("Image: negative size");
  }

  int width() const { return w_; }
  int height() const { return h_; }
  Rgb at(int x, int y) const { return px_[static_cast<std::size_t>(y) * w_ + x]; }
  void set(int x, int y, Rgb c) {
    if (x >= 0 && y >= 0 && x < w_ && y < h_) px_[static_cast<std::size_t>(y) * w_ + x] = c;
  }
  const std::vector<Rgb>& pixels() const { return px_; }

  void fill_rect(int x0, int y0, int w, int h, Rgb c) {
    for (int y = y0; y < y0 + h; ++y)
      for (int x = x0; x < x0 + w; ++x) set(x, y, c);
  }

  void blit(const Image& src, int x0, int y0) {
    for (int y = 0; y < src.height(); ++y)
      for (int x = 0; x < src.width(); ++x) set(x0 + x, y0 + y, src.at(x, y));
  }

  void line(int x0, int y0, int x1, int y1, Rgb c, int thickness = 1) {
    const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    const int r = thickness / 2;
    while (true) {
      fill_rect(x0 - r, y0 - r, thickness, thickness, c);
      if (x0 == x1 && y0 == y1) break;
      const int e2 = 2 * err;
      if (e2 >= dy) { err += dy; x0 += sx; }
      if (e2 <= dx) { err += dx; y0 += sy; }
    }
  }

  void text(int x, int y, const std::string& s, Rgb c = kBlack, int scale = 1) {
    for (char ch : s) {
      const auto& g = glyph(ch);
      for (int row = 0; row < detail::kGlyphHeight; ++row)
        for (int col = 0; col < detail::kGlyphWidth; ++col)
          if (g.rows[static_cast<std::size_t>(row)] & (1u << (detail::kGlyphWidth - 1 - col)))
            fill_rect(x + col * scale, y + row * scale, scale, scale, c);
      x += g.advance * scale;
    }
  }

  static int text_width(const std::string& s, int scale = 1) {
    int w = 0;
    for (char ch : s) w += glyph(ch).advance;
    return w * scale;
  }
  static int text_height(int scale = 1) { return detail::kGlyphHeight * scale; }

 private:
  static const detail::Glyph& glyph(char ch) {
    const int code = static_cast<unsigned char>(ch);
    return detail::kGlyphs[static_cast<std::size_t>(code >= 32 && code < 127 ? code - 32 : '?' - 32)];
  }

  int w_ = 0, h_ = 0;
  std::vector<Rgb> px_;
};

/// Viridis-like ramp; v is clamped to [0,1].
inline Rgb colormap(double v) {
  static constexpr double anchors[][3] = {
      {68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}};
  if (!std::isfinite(v)) v = 0;
  v = std::clamp(v, 0.0, 1.0) * 4.0;
  const int i = std::min(3, static_cast<int>(v));
  const double t = v - i;
  auto mix = [&](int k) { return static_cast<std::uint8_t>(std::lround(anchors[i][k] + t * (anchors[i + 1][k] - anchors[i][k]))); };
  return {mix(0), mix(1), mix(2)};
}

/// Renders a row-major h*w field, mapping [vmin,vmax] through the colormap; each cell becomes scale^2 pixels.
inline Image render_field(const std::vector<double>& values, int h, int w, double vmin, double vmax, int scale = 1) {
  if (static_cast<std::size_t>(h) * w != values.size()) throw ShapeError("render_field: size does not match h*w");
  Image img(w * scale, h * scale);
  const double span = vmax > vmin ? vmax - vmin : 1.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img.fill_rect(x * scale, y * scale, scale, scale, colormap((values[std::size_t(y) * w + x] - vmin) / span));
  return img;
}

inline void write_png(const std::filesystem::path& path, const Image& img) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) throw Error("write_png: cannot open " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, nullptr);
    std::fclose(fp);
    throw Error("write_png: libpng initialisation failed");
  }
  std::vector<std::uint8_t> row(static_cast<std::size_t>(img.width()) * 3);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw Error("write_png: encoding failed for " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()), static_cast<png_uint_32>(img.height()), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const Rgb c = img.at(x, y);
      row[std::size_t(x) * 3] = c.r;
      row[std::size_t(x) * 3 + 1] = c.g;
      row[std::size_t(x) * 3 + 2] = c.b;
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

/// Reads back an 8-bit RGB PNG; used by tests and the report command.
inline Image read_png(const std::filesystem::path& path) {
  png_image im{};
  im.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&im, path.string().c_str())) throw Error("read_png: cannot read " + path.string());
  im.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(im));
  if (!png_image_finish_read(&im, nullptr, buf.data(), 0, nullptr)) throw Error("read_png: decoding failed for " + path.string());
  Image img(static_cast<int>(im.width), static_cast<int>(im.height));
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      const std::size_t o = (std::size_t(y) * img.width() + x) * 3;
      img.set(x, y, {buf[o], buf[o + 1], buf[o + 2]});
    }
  return img;
}

inline std::string format_number(double v, int precision = 3) {
  std::ostringstream os;
  if (v != 0 && (std::abs(v) < 1e-3 || std::abs(v) >= 1e5))
    os << std::scientific << std::setprecision(precision > 0 ? precision - 1 : 0) << v;
  else
    os << std::setprecision(precision) << v;
  return os.str();
}

// Series palette for charts.
inline Rgb series_colour(std::size_t i) {
  static const Rgb palette[] = {{31, 119, 180}, {255, 127, 14}, {44, 160, 44}, {214, 39, 40},
                                {148, 103, 189}, {140, 86, 75}, {227, 119, 194}, {127, 127, 127}};
  return palette[i % std::size(palette)];
}

struct Series {
  std::string label;
  std::vector<double> values;
};

struct ChartStyle {
  int width = 720;
  int height = 420;
  std::string title;
  std::string x_label;
  std::string y_label;
};

namespace detail {

struct Frame {
  int left, top, right, bottom;
  double lo, hi;
  int y_of(double v) const { return bottom - static_cast<int>(std::lround((v - lo) / (hi - lo) * (bottom - top))); }
};

inline Frame chart_frame(Image& img, const ChartStyle& st, double lo, double hi) {
  if (!(hi > lo)) hi = lo + (lo == 0 ? 1.0 : std::abs(lo) * 0.1);
  Frame f{80, 36, st.width - 170, st.height - 48, lo, hi};
  img.text((st.width - Image::text_width(st.title)) / 2, 10, st.title);
  img.line(f.left, f.top, f.left, f.bottom, kBlack);
  img.line(f.left, f.bottom, f.right, f.bottom, kBlack);
  for (int t = 0; t <= 4; ++t) {
    const double v = lo + (hi - lo) * t / 4.0;
    const int y = f.y_of(v);
    img.line(f.left - 4, y, f.left, y, kBlack);
    if (t) img.line(f.left + 1, y, f.right, y, kGrey);
    const auto label = format_number(v);
    img.text(f.left - 8 - Image::text_width(label), y - Image::text_height() / 2, label);
  }
  img.text(4, f.top - 28, st.y_label);
  img.text((f.left + f.right - Image::text_width(st.x_label)) / 2, st.height - 18, st.x_label);
  return f;
}

inline void legend(Image& img, const Frame& f, const std::vector<std::string>& labels) {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = f.top + int(i) * 18;
    img.fill_rect(f.right + 12, y + 3, 14, 6, series_colour(i));
    img.text(f.right + 32, y, labels[i]);
  }
}

inline std::pair<double, double> value_range(const std::vector<Series>& series, bool from_zero) {
  double lo = from_zero ? 0.0 : INFINITY, hi = from_zero ? 0.0 : -INFINITY;
  for (const auto& s : series)
    for (double v : s.values)
      if (std::isfinite(v)) lo = std::min(lo, v), hi = std::max(hi, v);
  if (!std::isfinite(lo)) lo = 0, hi = 1;
  return {lo, hi};
}

}  // namespace detail

/// Line chart; every series is plotted against the shared category labels.
inline Image line_chart(const std::vector<Series>& series, const std::vector<std::string>& x_ticks, const ChartStyle& st) {
  Image img(st.width, st.height);
  auto [lo, hi] = detail::value_range(series, false);
  const double pad = (hi - lo) * 0.05;
  const auto f = detail::chart_frame(img, st, lo - pad, hi + pad);
  const std::size_t n = x_ticks.size();
  auto x_of = [&](std::size_t i) { return n <= 1 ? (f.left + f.right) / 2 : f.left + 10 + int(i * (f.right - f.left - 20) / (n - 1)); };
  for (std::size_t i = 0; i < n; ++i) {
    img.line(x_of(i), f.bottom, x_of(i), f.bottom + 4, kBlack);
    img.text(x_of(i) - Image::text_width(x_ticks[i]) / 2, f.bottom + 6, x_ticks[i]);
  }
  std::vector<std::string> labels;
  for (std::size_t s = 0; s < series.size(); ++s) {
    labels.push_back(series[s].label);
    const auto& v = series[s].values;
    for (std::size_t i = 0; i < v.size() && i < n; ++i) {
      if (!std::isfinite(v[i])) continue;
      img.fill_rect(x_of(i) - 2, f.y_of(v[i]) - 2, 5, 5, series_colour(s));
      if (i && std::isfinite(v[i - 1])) img.line(x_of(i - 1), f.y_of(v[i - 1]), x_of(i), f.y_of(v[i]), series_colour(s), 2);
    }
  }
  detail::legend(img, f, labels);
  return img;
}

/// Grouped bar chart: one group per category, one bar per series.
inline Image bar_chart(const std::vector<Series>& series, const std::vector<std::string>& groups, const ChartStyle& st) {
  Image img(st.width, st.height);
  auto [lo, hi] = detail::value_range(series, true);
  const auto f = detail::chart_frame(img, st, lo, hi * 1.05);
  const int n = std::max<int>(1, int(groups.size()));
  const int group_w = (f.right - f.left) / n;
  const int bar_w = std::max(2, (group_w - 12) / std::max<int>(1, int(series.size())));
  std::vector<std::string> labels;
  for (std::size_t s = 0; s < series.size(); ++s) labels.push_back(series[s].label);
  for (int g = 0; g < int(groups.size()); ++g) {
    const int gx = f.left + g * group_w + 6;
    img.text(gx + (group_w - 12 - Image::text_width(groups[std::size_t(g)])) / 2, f.bottom + 6, groups[std::size_t(g)]);
    for (std::size_t s = 0; s < series.size(); ++s) {
      if (std::size_t(g) >= series[s].values.size() || !std::isfinite(series[s].values[std::size_t(g)])) continue;
      const int y = f.y_of(series[s].values[std::size_t(g)]);
      const int y0 = f.y_of(0.0);
      img.fill_rect(gx + int(s) * bar_w, std::min(y, y0), bar_w - 1, std::abs(y0 - y) + 1, series_colour(s));
    }
  }
  detail::legend(img, f, labels);
  return img;
}

/// Lays out tiles on a grid with captions above each tile; empty tiles leave blank cells.
inline Image tile_grid(const std::vector<std::vector<Image>>& rows, const std::vector<std::vector<std::string>>& captions,
                       int pad = 6) {
  int tile_w = 0, tile_h = 0;
  std::size_t cols = 0;
  for (const auto& r : rows) {
    cols = std::max(cols, r.size());
    for (const auto& t : r) tile_w = std::max(tile_w, t.width()), tile_h = std::max(tile_h, t.height());
  }
  const int cap_h = Image::text_height() + 2;
  const int cell_w = std::max(tile_w, 8) + pad, cell_h = tile_h + cap_h + pad;
  Image img(int(cols) * cell_w + pad, int(rows.size()) * cell_h + pad);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      const int x = pad + int(c) * cell_w, y = pad + int(r) * cell_h;
      if (r < captions.size() && c < captions[r].size()) img.text(x, y, captions[r][c]);
      img.blit(rows[r][c], x, y + cap_h);
    }
  return img;
}

}  // namespace nowcast
