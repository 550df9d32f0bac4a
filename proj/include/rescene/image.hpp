#pragma once

#include "rescene/types.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace rescene {

using Rgb = std::array<std::uint8_t, 3>;

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // row-major, 3 bytes per pixel

  RgbImage() = default;
  RgbImage(int w, int h, Rgb fill = {0, 0, 0});

  bool empty() const { return width == 0 || height == 0; }
  std::size_t index(int x, int y) const { return 3 * (static_cast<std::size_t>(y) * width + x); }
  Rgb at(int x, int y) const {
    const std::size_t i = index(x, y);
    return {data[i], data[i + 1], data[i + 2]};
  }
  void set(int x, int y, Rgb c) {
    const std::size_t i = index(x, y);
    data[i] = c[0];
    data[i + 1] = c[1];
    data[i + 2] = c[2];
  }
  void validate() const;

  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

}  // namespace rescene
