#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <Eigen/Core>

namespace posefuse {

using Rgb = std::array<std::uint8_t, 3>;

// 8-bit RGB raster, row-major. Pixel (x, y) covers [x, x+1) x [y, y+1).
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int w, int h, Rgb fill);

  Rgb at(int x, int y) const {
    const auto* p = &pixels[(static_cast<std::size_t>(y) * width + x) * 3];
    return {p[0], p[1], p[2]};
  }
  void set(int x, int y, Rgb c) {
    auto* p = &pixels[(static_cast<std::size_t>(y) * width + x) * 3];
    p[0] = c[0];
    p[1] = c[1];
    p[2] = c[2];
  }
  // Coverage-weighted blend; coverage >= 1 writes the exact colour.
  void blend(int x, int y, Rgb c, double coverage);
};

// Fast zlib level: frames are rewritten often and compared by hash only.
void write_png(const std::filesystem::path& path, const Image& image);
Image read_png(const std::filesystem::path& path);
// nullopt when the file is missing or not a decodable PNG.
std::optional<Image> try_read_png(const std::filesystem::path& path);

// Nearest-neighbour resample.
Image resize_nearest(const Image& src, int width, int height);

void draw_line(Image& image, const Eigen::Vector2d& a, const Eigen::Vector2d& b, double width,
               Rgb color);
void draw_disc(Image& image, const Eigen::Vector2d& center, double radius, Rgb color);

}  // namespace posefuse
