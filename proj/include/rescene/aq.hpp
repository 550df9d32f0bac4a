#pragma once

// Application-Querying: a two-panel composite image asking an image editor
// to complete an occluded object. Panel A shows the scene with the target
// outlined; panel B shows the masked pixels on white at the same scale.

#include "rescene/image.hpp"
#include "rescene/types.hpp"

#include <string>
#include <vector>

namespace rescene {

struct PixelRect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;

  bool contains(int px, int py) const { return px >= x && py >= y && px < x + width && py < y + height; }
  bool overlaps(const PixelRect& o) const {
    return x < o.x + o.width && o.x < x + width && y < o.y + o.height && o.y < y + height;
  }
};

struct AqLabel {
  std::string text;
  int x = 0;
  int y = 0;
};

struct AqLayout {
  int canvas_width = 1536;
  int canvas_height = 768;
  PixelRect context{32, 32, 704, 704};
  PixelRect task{800, 32, 704, 704};
  Rgb outline_color{255, 0, 0};
  int outline_thickness = 3;
  Rgb canvas_color{200, 200, 200};
  AqLabel context_label{"SCENE", 32, 9};
  AqLabel task_label{"EXTRACTED OBJECT", 800, 9};

  void validate() const;
};

// Throws EmptyMask, ShapeMismatch, LayoutOverflow.
RgbImage build_aq_query(const RgbImage& image, const BinaryMask& mask, const AqLayout& layout);

// Panel B alone, as it appears inside the query.
RgbImage build_task_panel(const RgbImage& image, const BinaryMask& mask, const AqLayout& layout);

struct AqParseResult {
  RgbImage object;
  double white_fraction = 0.0;  // share of pixels with every channel >= 250
  bool empty_content = false;   // white_fraction > 0.98
};

// Crops panel B. With `cleanup`, near-white (>= 250) pixels connected to the
// crop border become pure white. Throws SizeMismatch.
AqParseResult parse_aq_response(const RgbImage& response, const AqLayout& layout, bool cleanup = false);

inline constexpr double kAqEmptyWhiteFraction = 0.98;
inline constexpr int kAqMaxAttempts = 3;

enum class PromptKind { ObjectExtraction, BackgroundRemoval, SegmentationLabels };

std::string_view to_string(PromptKind kind);

struct PromptTemplate {
  PromptKind kind = PromptKind::ObjectExtraction;
  std::string text;

  void validate() const;
};

PromptTemplate default_prompt(PromptKind kind);

// One label per non-empty line, surrounding whitespace and a leading '-' removed.
std::vector<std::string> segmentation_labels(const PromptTemplate& prompt);

struct PromptSet {
  PromptTemplate object_extraction = default_prompt(PromptKind::ObjectExtraction);
  PromptTemplate background_removal = default_prompt(PromptKind::BackgroundRemoval);
  PromptTemplate segmentation_labels = default_prompt(PromptKind::SegmentationLabels);
};

}  // namespace rescene
