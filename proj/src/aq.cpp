#include "rescene/aq.hpp"

#include "rescene/error.hpp"
#include "rescene/scene_geometry.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>

namespace rescene {

void AqLayout::validate() const {
  const PixelRect canvas{0, 0, canvas_width, canvas_height};
  for (const PixelRect* r : {&context, &task}) {
    if (r->width < 1 || r->height < 1) throw Error(ErrorCode::LayoutOverflow, "panel has no pixels");
    if (r->x < 0 || r->y < 0 || r->x + r->width > canvas.width || r->y + r->height > canvas.height) {
      throw Error(ErrorCode::LayoutOverflow, "panel lies outside the canvas");
    }
  }
  if (context.overlaps(task)) throw Error(ErrorCode::LayoutOverflow, "panels overlap");
  if (outline_thickness < 1) throw Error(ErrorCode::InvalidArgument, "outline thickness must be >= 1");
}

namespace {

// 5x7 glyphs, one byte per row, bit 4 is the leftmost column.
using Glyph = std::array<std::uint8_t, 7>;

Glyph glyph(char c) {
  static constexpr Glyph kLetters[26] = {
      {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}, {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E},
      {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}, {0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E},
      {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}, {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10},
      {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}, {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11},
      {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}, {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C},
      {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}, {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F},
      {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}, {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11},
      {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}, {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10},
      {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}, {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11},
      {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}, {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04},
      {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}, {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04},
      {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}, {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11},
      {0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04}, {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F},
  };
  static constexpr Glyph kDigits[10] = {
      {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}, {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E},
      {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}, {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E},
      {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}, {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E},
      {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}, {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08},
      {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}, {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C},
  };
  const char u = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (u >= 'A' && u <= 'Z') return kLetters[u - 'A'];
  if (u >= '0' && u <= '9') return kDigits[u - '0'];
  if (u == '-') return {0, 0, 0, 0x1F, 0, 0, 0};
  return {};
}

constexpr int kFontScale = 2;

void draw_label(RgbImage& canvas, const AqLabel& label, Rgb color) {
  int pen = label.x;
  for (char c : label.text) {
    const Glyph g = glyph(c);
    for (int row = 0; row < 7; ++row) {
      for (int col = 0; col < 5; ++col) {
        if (((g[row] >> (4 - col)) & 1) == 0) continue;
        for (int dy = 0; dy < kFontScale; ++dy) {
          for (int dx = 0; dx < kFontScale; ++dx) {
            const int x = pen + col * kFontScale + dx;
            const int y = label.y + row * kFontScale + dy;
            if (x >= 0 && y >= 0 && x < canvas.width && y < canvas.height) canvas.set(x, y, color);
          }
        }
      }
    }
    pen += 6 * kFontScale;
  }
}

// Nearest-neighbor resampling shared by both panels: scaled pixel d maps to
// source floor((2d + 1) * src / (2 * dst)).
struct Scaling {
  int src_w = 0, src_h = 0;
  int dst_w = 0, dst_h = 0;

  int src_x(int dx) const { return static_cast<int>((2LL * dx + 1) * src_w / (2LL * dst_w)); }
  int src_y(int dy) const { return static_cast<int>((2LL * dy + 1) * src_h / (2LL * dst_h)); }
};

Scaling fit_scaling(int w, int h, const PixelRect& panel) {
  // Largest size with aspect preserved: compare w * panel.h against h * panel.w exactly.
  Scaling s{w, h, 0, 0};
  if (static_cast<long long>(w) * panel.height >= static_cast<long long>(h) * panel.width) {
    s.dst_w = panel.width;
    s.dst_h = static_cast<int>(static_cast<long long>(h) * panel.width / w);
  } else {
    s.dst_h = panel.height;
    s.dst_w = static_cast<int>(static_cast<long long>(w) * panel.height / h);
  }
  if (s.dst_w < 1 || s.dst_h < 1) throw Error(ErrorCode::LayoutOverflow, "image does not fit the panel");
  return s;
}

void check_inputs(const RgbImage& image, const BinaryMask& mask, const AqLayout& layout) {
  layout.validate();
  image.validate();
  if (image.empty()) throw Error(ErrorCode::InvalidArgument, "input image is empty");
  if (image.width != mask.width || image.height != mask.height) {
    throw Error(ErrorCode::ShapeMismatch, "image and mask sizes differ");
  }
  if (mask.count() == 0) throw Error(ErrorCode::EmptyMask, "mask has no pixels");
}

void fill_rect(RgbImage& img, const PixelRect& r, Rgb c) {
  for (int y = r.y; y < r.y + r.height; ++y) {
    for (int x = r.x; x < r.x + r.width; ++x) img.set(x, y, c);
  }
}

constexpr Rgb kWhite{255, 255, 255};

}  // namespace

RgbImage build_task_panel(const RgbImage& image, const BinaryMask& mask, const AqLayout& layout) {
  check_inputs(image, mask, layout);
  const PixelRect& panel = layout.task;
  // Same scale as panel A so the object keeps its apparent size.
  const Scaling s = fit_scaling(image.width, image.height, layout.context);

  int x0 = s.dst_w, y0 = s.dst_h, x1 = -1, y1 = -1;
  for (int dy = 0; dy < s.dst_h; ++dy) {
    for (int dx = 0; dx < s.dst_w; ++dx) {
      if (!mask.at(s.src_x(dx), s.src_y(dy))) continue;
      x0 = std::min(x0, dx);
      y0 = std::min(y0, dy);
      x1 = std::max(x1, dx);
      y1 = std::max(y1, dy);
    }
  }
  RgbImage out(panel.width, panel.height, kWhite);
  if (x1 < 0) return out;  // mask vanished under downscaling
  const int off_x = (panel.width - (x1 - x0 + 1)) / 2 - x0;
  const int off_y = (panel.height - (y1 - y0 + 1)) / 2 - y0;
  for (int py = 0; py < panel.height; ++py) {
    const int dy = py - off_y;
    if (dy < 0 || dy >= s.dst_h) continue;
    const int sy = s.src_y(dy);
    for (int px = 0; px < panel.width; ++px) {
      const int dx = px - off_x;
      if (dx < 0 || dx >= s.dst_w) continue;
      const int sx = s.src_x(dx);
      if (mask.at(sx, sy)) out.set(px, py, image.at(sx, sy));
    }
  }
  return out;
}

RgbImage build_aq_query(const RgbImage& image, const BinaryMask& mask, const AqLayout& layout) {
  check_inputs(image, mask, layout);
  RgbImage canvas(layout.canvas_width, layout.canvas_height, layout.canvas_color);
  fill_rect(canvas, layout.context, kWhite);

  const Scaling s = fit_scaling(image.width, image.height, layout.context);
  const int ox = layout.context.x + (layout.context.width - s.dst_w) / 2;
  const int oy = layout.context.y + (layout.context.height - s.dst_h) / 2;
  BinaryMask scaled(s.dst_w, s.dst_h);
  for (int dy = 0; dy < s.dst_h; ++dy) {
    for (int dx = 0; dx < s.dst_w; ++dx) {
      const int sx = s.src_x(dx);
      const int sy = s.src_y(dy);
      canvas.set(ox + dx, oy + dy, image.at(sx, sy));
      scaled.set(dx, dy, mask.at(sx, sy));
    }
  }

  // Inner boundary: mask pixels within `t` (Chebyshev) of a non-mask pixel,
  // where everything outside the scaled image counts as non-mask.
  const int t = layout.outline_thickness;
  BinaryMask outside(s.dst_w + 2 * t, s.dst_h + 2 * t, true);
  for (int dy = 0; dy < s.dst_h; ++dy) {
    for (int dx = 0; dx < s.dst_w; ++dx) outside.set(dx + t, dy + t, !scaled.at(dx, dy));
  }
  const BinaryMask near = dilate(outside, t);
  for (int dy = 0; dy < s.dst_h; ++dy) {
    for (int dx = 0; dx < s.dst_w; ++dx) {
      if (scaled.at(dx, dy) && near.at(dx + t, dy + t)) canvas.set(ox + dx, oy + dy, layout.outline_color);
    }
  }

  const RgbImage panel = build_task_panel(image, mask, layout);
  for (int y = 0; y < panel.height; ++y) {
    for (int x = 0; x < panel.width; ++x) canvas.set(layout.task.x + x, layout.task.y + y, panel.at(x, y));
  }
  const Rgb ink{0, 0, 0};
  draw_label(canvas, layout.context_label, ink);
  draw_label(canvas, layout.task_label, ink);
  return canvas;
}

AqParseResult parse_aq_response(const RgbImage& response, const AqLayout& layout, bool cleanup) {
  layout.validate();
  response.validate();
  if (response.width != layout.canvas_width || response.height != layout.canvas_height) {
    throw Error(ErrorCode::SizeMismatch, "response is " + std::to_string(response.width) + "x" +
                                             std::to_string(response.height) + ", layout expects " +
                                             std::to_string(layout.canvas_width) + "x" +
                                             std::to_string(layout.canvas_height));
  }
  const PixelRect& r = layout.task;
  AqParseResult out;
  out.object = RgbImage(r.width, r.height);
  for (int y = 0; y < r.height; ++y) {
    for (int x = 0; x < r.width; ++x) out.object.set(x, y, response.at(r.x + x, r.y + y));
  }
  auto near_white = [](Rgb c) { return c[0] >= 250 && c[1] >= 250 && c[2] >= 250; };

  if (cleanup) {
    std::vector<std::uint8_t> seen(static_cast<std::size_t>(r.width) * r.height, 0);
    std::vector<std::pair<int, int>> stack;
    auto push = [&](int x, int y) {
      if (x < 0 || y < 0 || x >= r.width || y >= r.height) return;
      const std::size_t i = static_cast<std::size_t>(y) * r.width + x;
      if (seen[i] || !near_white(out.object.at(x, y))) return;
      seen[i] = 1;
      stack.emplace_back(x, y);
    };
    for (int x = 0; x < r.width; ++x) {
      push(x, 0);
      push(x, r.height - 1);
    }
    for (int y = 0; y < r.height; ++y) {
      push(0, y);
      push(r.width - 1, y);
    }
    while (!stack.empty()) {
      const auto [x, y] = stack.back();
      stack.pop_back();
      out.object.set(x, y, kWhite);
      push(x + 1, y);
      push(x - 1, y);
      push(x, y + 1);
      push(x, y - 1);
    }
  }

  std::size_t white = 0;
  for (int y = 0; y < r.height; ++y) {
    for (int x = 0; x < r.width; ++x) white += near_white(out.object.at(x, y)) ? 1 : 0;
  }
  out.white_fraction = static_cast<double>(white) / (static_cast<double>(r.width) * r.height);
  out.empty_content = out.white_fraction > kAqEmptyWhiteFraction;
  return out;
}

std::string_view to_string(PromptKind kind) {
  switch (kind) {
    case PromptKind::ObjectExtraction: return "object_extraction";
    case PromptKind::BackgroundRemoval: return "background_removal";
    case PromptKind::SegmentationLabels: return "segmentation_labels";
  }
  return "unknown";
}

void PromptTemplate::validate() const {
  if (text.empty()) throw Error(ErrorCode::InvalidArgument, "prompt text is empty");
  if (kind == PromptKind::ObjectExtraction && text.rfind("[OBJECT EXTRACTION APPLICATION]", 0) != 0) {
    throw Error(ErrorCode::InvalidArgument, "object extraction prompt must begin with [OBJECT EXTRACTION APPLICATION]");
  }
}

PromptTemplate default_prompt(PromptKind kind) {
  switch (kind) {
    case PromptKind::ObjectExtraction:
      return {kind,
              "[OBJECT EXTRACTION APPLICATION]: extract a single 3D object out of a scene. The extracted object "
              "should appear in the white box without background from a frontal view. Only the single selected "
              "object with border should be extracted and repaired if parts are missing. No object occluding the "
              "selected object should be reconstructed. No accidental background leaking should be included. Use "
              "the scene as a reference and extract the object."};
    case PromptKind::BackgroundRemoval:
      return {kind,
              "Remove ALL objects and furniture. I want a single empty room. No chairs, tables, lamps, dresser, "
              "kitchen parts etc.\nJust give me back the same room but EMPTY. Keep only canvas and rugs. Same "
              "light, same perspective, same walls, floor and ceiling."};
    case PromptKind::SegmentationLabels:
      return {kind,
              "furniture\ntable with decorations\nchair\nsideboard with decorations\nshelf\nbookshelf\n"
              "dresser with decorations\ncabinet with decorations\ncouch\nbed with pillows\nlamp\nfloor\n"
              "kitchen counter"};
  }
  throw Error(ErrorCode::InvalidArgument, "unknown prompt kind");
}

std::vector<std::string> segmentation_labels(const PromptTemplate& prompt) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  const std::string& t = prompt.text;
  while (pos <= t.size()) {
    std::size_t end = t.find('\n', pos);
    if (end == std::string::npos) end = t.size();
    std::string line = t.substr(pos, end - pos);
    pos = end + 1;
    const auto first = line.find_first_not_of(" \t\r-");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    out.push_back(line.substr(first, last - first + 1));
  }
  return out;
}

}  // namespace rescene
