#pragma once

#include <cstddef>
#include <string_view>
#include <utility>
#include <vector>

#include "hpgm/numcore/tensor.hpp"

namespace hpgm {

/// Canvas convention: 512 x 512 pixels cover an 18 m x 18 m footprint.
inline constexpr double kCanvasPixels = 512.0;
inline constexpr double kCanvasMeters = 18.0;
inline constexpr double kCanvasArea = kCanvasMeters * kCanvasMeters;  // 324 m^2
inline constexpr double kMetersPerPixel = kCanvasMeters / kCanvasPixels;

/// Room features, one row per room: one-hot type | size / 324 | one-hot position.
struct FeatureMatrix {
  nc::Tensor values;  // (N, D)

  std::size_t rooms() const { return values.dim(0); }
  std::size_t width() const { return values.dim(1); }
};

/// Symmetric 0/1 room adjacency with a zero diagonal.
struct AdjacencyMatrix {
  nc::Tensor values;  // (N, N)

  std::size_t rooms() const { return values.dim(0); }
  bool is_valid() const;
};

/// Axis-aligned box in canvas-normalised coordinates.
struct BBox {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() * height(); }
  double cx() const { return 0.5 * (x0 + x1); }
  double cy() const { return 0.5 * (y0 + y1); }
  bool operator==(const BBox&) const = default;
};

/// Material / colour condition of one texture: p is one-hot over materials,
/// q one-hot over colours. Interpolation inference relaxes both to convex
/// combinations.
struct TextureCondition {
  std::vector<double> p;
  std::vector<double> q;

  bool operator==(const TextureCondition&) const = default;
  int material() const;
  int colour() const;
};

/// Canvas anchor (x, y) of a position word: centres of the 3 x 3 grid, with
/// north towards y = 0. Throws std::invalid_argument for unknown words.
std::pair<double, double> position_anchor(std::string_view name);

}  // namespace hpgm
