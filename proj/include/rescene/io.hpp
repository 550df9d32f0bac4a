#pragma once

// File formats: OBJ meshes, PLY clouds, PNG images and masks, PMAP point maps,
// loss-history CSV. Every save goes through atomic_write.

#include "rescene/image.hpp"
#include "rescene/losses.hpp"
#include "rescene/rasterizer.hpp"
#include "rescene/types.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace rescene {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path);
// Writes to a sibling temp file, then renames over `path`. Creates parent
// directories.
void atomic_write(const fs::path& path, std::string_view bytes);

// OBJ. Polygons are fan-triangulated; unknown directives are ignored.
// Optional "v x y z r g b" vertex colors are kept when every vertex has them.
TriMesh parse_obj(std::string_view text);
std::string format_obj(const TriMesh& mesh);
TriMesh load_obj(const fs::path& path);
void save_obj(const fs::path& path, const TriMesh& mesh);

// PLY vertex element with x, y, z and an optional `confidence` property.
enum class PlyEncoding { Ascii, BinaryLittleEndian };
PointCloud parse_ply(std::string_view bytes);
std::string format_ply(const PointCloud& cloud, PlyEncoding encoding);
PointCloud load_ply(const fs::path& path);
void save_ply(const fs::path& path, const PointCloud& cloud, PlyEncoding encoding);

// PNG. Grayscale, palette and alpha inputs are converted to RGB.
RgbImage decode_png(std::string_view bytes);
std::string encode_png(const RgbImage& image);
std::string encode_png_gray(int width, int height, std::span<const std::uint8_t> pixels);
RgbImage load_png(const fs::path& path);
void save_png(const fs::path& path, const RgbImage& image);

// A pixel is set iff any channel is nonzero. Saved as 0/255 grayscale.
BinaryMask mask_from_image(const RgbImage& image);
BinaryMask load_mask(const fs::path& path);
void save_mask(const fs::path& path, const BinaryMask& mask);
void save_prob_map(const fs::path& path, const ProbMap& map);

// PMAP: "PMAP", u32 version (1), u32 width, u32 height, then width*height
// records of little-endian float32 (x, y, z, confidence). NaN coordinates
// mark invalid pixels.
std::string encode_pmap(const OrganizedPointMap& map);
OrganizedPointMap decode_pmap(std::string_view bytes);
OrganizedPointMap load_pmap(const fs::path& path);
void save_pmap(const fs::path& path, const OrganizedPointMap& map);

std::string format_loss_csv(std::span<const LossBreakdown> history);

}  // namespace rescene
