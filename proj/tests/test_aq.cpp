#include "rescene/aq.hpp"
#include "rescene/config.hpp"
#include "rescene/error.hpp"
#include "rescene/io.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

using namespace rescene;

namespace {

const fs::path kGoldenDir = fs::path(RESCENE_SOURCE_DIR) / "fixtures" / "aq";
constexpr Rgb kWhite{255, 255, 255};

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no rescene::Error thrown";
  return ErrorCode::InvalidArgument;
}

RgbImage crop(const RgbImage& img, const PixelRect& r) {
  RgbImage out(r.width, r.height);
  for (int y = 0; y < r.height; ++y) {
    for (int x = 0; x < r.width; ++x) out.set(x, y, img.at(r.x + x, r.y + y));
  }
  return out;
}

}  // namespace

TEST(AqRoundTrip, ParseReturnsPanelBitIdentical) {
  const AqLayout layout;
  for (const auto& p : test::aq_fixture_pairs()) {
    const RgbImage query = build_aq_query(p.image, p.mask, layout);
    ASSERT_EQ(query.width, layout.canvas_width);
    const RgbImage panel = build_task_panel(p.image, p.mask, layout);
    EXPECT_EQ(parse_aq_response(query, layout).object, panel) << p.name;
    EXPECT_EQ(crop(query, layout.task), panel) << p.name;
  }
}

TEST(AqQuery, FullMaskAtPanelResolution) {
  // 704x704 input fits panel A at scale 1, so both panels are pixel copies.
  const AqLayout layout;
  const RgbImage img = test::procedural_image(704, 704, 5);
  const RgbImage query = build_aq_query(img, BinaryMask(704, 704, true), layout);
  EXPECT_EQ(crop(query, layout.task), img);
  const int t = layout.outline_thickness;
  for (int y = 0; y < 704; ++y) {
    for (int x = 0; x < 704; ++x) {
      const bool border = x < t || y < t || x >= 704 - t || y >= 704 - t;
      const Rgb expect = border ? layout.outline_color : img.at(x, y);
      ASSERT_EQ(query.at(layout.context.x + x, layout.context.y + y), expect) << x << "," << y;
    }
  }
}

TEST(AqQuery, SinglePixelMaskIsCenteredBlock) {
  const AqLayout layout;
  // 352x352 scales by 2: the pixel becomes a 2x2 block.
  const RgbImage img = test::procedural_image(352, 352, 6);
  BinaryMask m(352, 352);
  m.set(10, 300, true);
  const RgbImage panel = build_task_panel(img, m, layout);
  const int lo = (layout.task.width - 2) / 2;
  for (int y = 0; y < panel.height; ++y) {
    for (int x = 0; x < panel.width; ++x) {
      const bool inside = x >= lo && x < lo + 2 && y >= lo && y < lo + 2;
      ASSERT_EQ(panel.at(x, y), inside ? img.at(10, 300) : kWhite) << x << "," << y;
    }
  }
}

TEST(AqQuery, OutlineIsInnerBoundary) {
  const AqLayout layout;
  const RgbImage img = test::procedural_image(704, 704, 7);
  const BinaryMask m = test::ellipse_mask(704, 704, 300, 400, 120, 80);
  const RgbImage query = build_aq_query(img, m, layout);
  const int t = layout.outline_thickness;
  auto inside = [&](int x, int y) { return x >= 0 && y >= 0 && x < 704 && y < 704 && m.at(x, y); };
  for (int y = 250; y < 550; ++y) {
    for (int x = 150; x < 450; ++x) {
      bool edge = false;
      for (int dy = -t; dy <= t && !edge; ++dy) {
        for (int dx = -t; dx <= t && !edge; ++dx) edge = !inside(x + dx, y + dy);
      }
      const Rgb expect = inside(x, y) && edge ? layout.outline_color : img.at(x, y);
      ASSERT_EQ(query.at(layout.context.x + x, layout.context.y + y), expect) << x << "," << y;
    }
  }
}

TEST(AqQuery, Errors) {
  const AqLayout layout;
  const RgbImage img = test::procedural_image(8, 8, 0);
  EXPECT_EQ(code_of([&] { build_aq_query(img, BinaryMask(8, 8), layout); }), ErrorCode::EmptyMask);
  EXPECT_EQ(code_of([&] { build_aq_query(img, BinaryMask(8, 9, true), layout); }), ErrorCode::ShapeMismatch);
  AqLayout overflow;
  overflow.task.x = 1000;
  EXPECT_EQ(code_of([&] { build_aq_query(img, BinaryMask(8, 8, true), overflow); }), ErrorCode::LayoutOverflow);
  AqLayout overlap;
  overlap.task.x = 500;
  EXPECT_EQ(code_of([&] { overlap.validate(); }), ErrorCode::LayoutOverflow);
  // 10000x1 cannot keep its aspect in a 704-pixel panel.
  const RgbImage strip = test::procedural_image(10000, 1, 0);
  EXPECT_EQ(code_of([&] { build_aq_query(strip, BinaryMask(10000, 1, true), layout); }), ErrorCode::LayoutOverflow);
}

TEST(AqParse, SizeMismatch) {
  const AqLayout layout;
  EXPECT_EQ(code_of([&] { parse_aq_response(RgbImage(1024, 1024), layout); }), ErrorCode::SizeMismatch);
}

TEST(AqParse, AllWhitePanelFlagsEmpty) {
  const AqLayout layout;
  const auto r = parse_aq_response(RgbImage(layout.canvas_width, layout.canvas_height, kWhite), layout);
  EXPECT_EQ(r.white_fraction, 1.0);
  EXPECT_TRUE(r.empty_content);
  const auto p = test::aq_fixture_pairs()[0];
  const auto q = parse_aq_response(build_aq_query(p.image, p.mask, layout), layout);
  EXPECT_FALSE(q.empty_content);
  EXPECT_LT(q.white_fraction, kAqEmptyWhiteFraction);
}

TEST(AqParse, CleanupWhitensBorderConnectedOnly) {
  const AqLayout layout;
  RgbImage response(layout.canvas_width, layout.canvas_height, {251, 252, 253});
  const PixelRect& t = layout.task;
  // Dark ring with a near-white hole: the hole is not border-connected.
  for (int y = 300; y < 400; ++y) {
    for (int x = 300; x < 400; ++x) {
      const bool hole = x >= 340 && x < 360 && y >= 340 && y < 360;
      response.set(t.x + x, t.y + y, hole ? Rgb{250, 250, 250} : Rgb{10, 20, 30});
    }
  }
  const auto raw = parse_aq_response(response, layout, false);
  EXPECT_EQ(raw.object.at(0, 0), (Rgb{251, 252, 253}));
  const auto clean = parse_aq_response(response, layout, true);
  EXPECT_EQ(clean.object.at(0, 0), kWhite);
  EXPECT_EQ(clean.object.at(350, 350), (Rgb{250, 250, 250}));
  EXPECT_EQ(clean.object.at(320, 320), (Rgb{10, 20, 30}));
  EXPECT_EQ(clean.white_fraction, raw.white_fraction);
}

TEST(AqGolden, QueryAndPanelDigests) {
  const Json golden = parse_json(read_file(kGoldenDir / "golden.json"), "golden.json");
  const AqLayout layout;
  const auto pairs = test::aq_fixture_pairs();
  ASSERT_EQ(golden.size(), pairs.size());
  for (const auto& p : pairs) {
    ASSERT_TRUE(golden.contains(p.name)) << p.name;
    EXPECT_EQ(test::image_digest(build_aq_query(p.image, p.mask, layout)), golden[p.name]["query"].get<std::string>())
        << p.name;
    EXPECT_EQ(test::image_digest(build_task_panel(p.image, p.mask, layout)), golden[p.name]["panel"].get<std::string>())
        << p.name;
  }
}

TEST(AqGolden, ResponseToCrop) {
  const RgbImage response = decode_png(read_file(kGoldenDir / "response.png"));
  const RgbImage expected = decode_png(read_file(kGoldenDir / "crop.png"));
  EXPECT_EQ(parse_aq_response(response, AqLayout{}, true).object, expected);
}

TEST(Prompts, Verbatim) {
  const auto obj = default_prompt(PromptKind::ObjectExtraction);
  EXPECT_EQ(obj.text.rfind("[OBJECT EXTRACTION APPLICATION]", 0), 0u);
  EXPECT_NE(obj.text.find("No object occluding the selected object should be reconstructed."), std::string::npos);
  const auto bg = default_prompt(PromptKind::BackgroundRemoval);
  EXPECT_EQ(bg.text.rfind("Remove ALL objects and furniture.", 0), 0u);
  EXPECT_NE(bg.text.find("Keep only canvas and rugs."), std::string::npos);
  for (auto k : {PromptKind::ObjectExtraction, PromptKind::BackgroundRemoval, PromptKind::SegmentationLabels}) {
    EXPECT_NO_THROW(default_prompt(k).validate());
  }
  PromptTemplate bad{PromptKind::ObjectExtraction, "extract the object"};
  EXPECT_THROW(bad.validate(), Error);
}

TEST(Prompts, SegmentationLabels) {
  const auto labels = segmentation_labels(default_prompt(PromptKind::SegmentationLabels));
  ASSERT_EQ(labels.size(), 13u);
  EXPECT_EQ(labels.front(), "furniture");
  EXPECT_EQ(labels[11], "floor");
  EXPECT_EQ(labels.back(), "kitchen counter");
  const auto custom = segmentation_labels({PromptKind::SegmentationLabels, "  - chair \n\n-lamp\r\n"});
  EXPECT_EQ(custom, (std::vector<std::string>{"chair", "lamp"}));
}
