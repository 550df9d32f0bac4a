#include "rescene/image.hpp"

#include "rescene/error.hpp"

namespace rescene {

RgbImage::RgbImage(int w, int h, Rgb fill) : width(w), height(h) {
  if (w < 0 || h < 0) throw Error(ErrorCode::InvalidArgument, "image size must be non-negative");
  data.resize(static_cast<std::size_t>(w) * h * 3);
  for (std::size_t i = 0; i < data.size(); i += 3) {
    data[i] = fill[0];
    data[i + 1] = fill[1];
    data[i + 2] = fill[2];
  }
}

void RgbImage::validate() const {
  if (width < 0 || height < 0 || data.size() != static_cast<std::size_t>(width) * height * 3) {
    throw Error(ErrorCode::ShapeMismatch, "image buffer does not match its size");
  }
}

}  // namespace rescene
