#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace hpgm {

/// 8-bit RGB raster, row-major, 3 bytes per pixel.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  Image() = default;
  Image(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0) {}

  std::uint8_t* at(int x, int y) { return &rgb[(static_cast<std::size_t>(y) * width + x) * 3]; }
  const std::uint8_t* at(int x, int y) const { return &rgb[(static_cast<std::size_t>(y) * width + x) * 3]; }
  bool operator==(const Image&) const = default;
};

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<std::uint8_t> encode_png(const Image& img);
Image decode_png(const std::vector<std::uint8_t>& bytes);
void write_png(const std::filesystem::path& path, const Image& img);
Image read_png(const std::filesystem::path& path);

/// Hue in degrees [0, 360), saturation and value in [0, 1].
struct Hsv {
  double h = 0, s = 0, v = 0;
};
Hsv rgb_to_hsv(double r, double g, double b);  // channels in [0, 1]
void hsv_to_rgb(const Hsv& hsv, double& r, double& g, double& b);

}  // namespace hpgm
