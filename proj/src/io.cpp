#include "rescene/io.hpp"

#include "rescene/error.hpp"

#include <png.h>

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <unistd.h>

namespace rescene {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

void atomic_write(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." +
         std::to_string(std::hash<std::string>{}(path.string()) & 0xffff);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::IoError, "short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error(ErrorCode::IoError, "cannot rename into " + path.string() + ": " + ec.message());
  }
}

// ---------------------------------------------------------------- OBJ

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

double to_double(std::string_view s, const std::string& where) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::ParseError, where + ": bad number '" + std::string(s) + "'");
  }
  return v;
}

long to_long(std::string_view s, const std::string& where) {
  long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::ParseError, where + ": bad integer '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

TriMesh parse_obj(std::string_view text) {
  TriMesh mesh;
  std::vector<Vec3> colors;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    const std::string where = "line " + std::to_string(line_no);
    const auto tok = split_ws(line);
    if (tok.empty() || tok[0][0] == '#') continue;
    if (tok[0] == "v") {
      if (tok.size() < 4) throw Error(ErrorCode::ParseError, where + ": vertex needs 3 coordinates");
      mesh.vertices.emplace_back(to_double(tok[1], where), to_double(tok[2], where), to_double(tok[3], where));
      if (tok.size() >= 7) {
        colors.emplace_back(to_double(tok[4], where), to_double(tok[5], where), to_double(tok[6], where));
      }
    } else if (tok[0] == "f") {
      std::vector<int> idx;
      for (std::size_t k = 1; k < tok.size(); ++k) {
        const std::string_view ref = tok[k].substr(0, tok[k].find('/'));
        long i = to_long(ref, where);
        if (i < 0) i += static_cast<long>(mesh.vertices.size()) + 1;
        if (i < 1 || i > static_cast<long>(mesh.vertices.size())) {
          throw Error(ErrorCode::ParseError, where + ": face index out of range");
        }
        idx.push_back(static_cast<int>(i - 1));
      }
      if (idx.size() < 3) throw Error(ErrorCode::UnsupportedVariant, where + ": face with fewer than 3 vertices");
      for (std::size_t k = 1; k + 1 < idx.size(); ++k) mesh.faces.push_back({idx[0], idx[k], idx[k + 1]});
    }
  }
  if (!colors.empty() && colors.size() == mesh.vertices.size()) mesh.colors = std::move(colors);
  mesh.validate();
  mesh.drop_degenerate_faces();
  return mesh;
}

std::string format_obj(const TriMesh& mesh) {
  std::ostringstream out;
  out << std::setprecision(17);
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Vec3& v = mesh.vertices[i];
    out << "v " << v.x() << ' ' << v.y() << ' ' << v.z();
    if (mesh.has_colors()) {
      const Vec3& c = mesh.colors[i];
      out << ' ' << c.x() << ' ' << c.y() << ' ' << c.z();
    }
    out << '\n';
  }
  for (const auto& f : mesh.faces) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  return std::move(out).str();
}

TriMesh load_obj(const fs::path& path) {
  try {
    return parse_obj(read_file(path));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void save_obj(const fs::path& path, const TriMesh& mesh) { atomic_write(path, format_obj(mesh)); }

// ---------------------------------------------------------------- PLY

namespace {

struct PlyProperty {
  std::string name;
  std::string type;
  bool is_list = false;
  std::string count_type;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> props;
};

std::size_t ply_type_size(const std::string& t, const std::string& where) {
  if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
  if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
  if (t == "int" || t == "uint" || t == "int32" || t == "uint32" || t == "float" || t == "float32") return 4;
  if (t == "double" || t == "float64") return 8;
  throw Error(ErrorCode::ParseError, where + ": unknown PLY type '" + t + "'");
}

template <class T>
T load_le(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

double read_binary(const std::string& t, const char* p) {
  if (t == "char" || t == "int8") return load_le<std::int8_t>(p);
  if (t == "uchar" || t == "uint8") return load_le<std::uint8_t>(p);
  if (t == "short" || t == "int16") return load_le<std::int16_t>(p);
  if (t == "ushort" || t == "uint16") return load_le<std::uint16_t>(p);
  if (t == "int" || t == "int32") return load_le<std::int32_t>(p);
  if (t == "uint" || t == "uint32") return load_le<std::uint32_t>(p);
  if (t == "float" || t == "float32") return load_le<float>(p);
  return load_le<double>(p);
}

}  // namespace

PointCloud parse_ply(std::string_view bytes) {
  std::size_t pos = 0;
  std::size_t line_no = 0;
  auto next_line = [&]() -> std::string_view {
    if (pos >= bytes.size()) throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no + 1) + ": unexpected end of header");
    std::size_t end = bytes.find('\n', pos);
    if (end == std::string_view::npos) end = bytes.size();
    std::string_view line = bytes.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    return line;
  };

  if (split_ws(next_line()) != std::vector<std::string_view>{"ply"}) {
    throw Error(ErrorCode::ParseError, "line 1: missing 'ply' magic");
  }
  bool binary = false;
  std::vector<PlyElement> elements;
  for (;;) {
    const auto tok = split_ws(next_line());
    const std::string where = "line " + std::to_string(line_no);
    if (tok.empty() || tok[0] == "comment" || tok[0] == "obj_info") continue;
    if (tok[0] == "end_header") break;
    if (tok[0] == "format") {
      if (tok.size() < 2) throw Error(ErrorCode::ParseError, where + ": bad format line");
      if (tok[1] == "ascii") {
        binary = false;
      } else if (tok[1] == "binary_little_endian") {
        binary = true;
      } else {
        throw Error(ErrorCode::UnsupportedVariant, where + ": unsupported PLY format '" + std::string(tok[1]) + "'");
      }
    } else if (tok[0] == "element") {
      if (tok.size() != 3) throw Error(ErrorCode::ParseError, where + ": bad element line");
      elements.push_back({std::string(tok[1]), static_cast<std::size_t>(to_long(tok[2], where)), {}});
    } else if (tok[0] == "property") {
      if (elements.empty()) throw Error(ErrorCode::ParseError, where + ": property before element");
      if (tok.size() == 5 && tok[1] == "list") {
        ply_type_size(std::string(tok[2]), where);
        ply_type_size(std::string(tok[3]), where);
        elements.back().props.push_back({std::string(tok[4]), std::string(tok[3]), true, std::string(tok[2])});
      } else if (tok.size() == 3) {
        ply_type_size(std::string(tok[1]), where);
        elements.back().props.push_back({std::string(tok[2]), std::string(tok[1]), false, {}});
      } else {
        throw Error(ErrorCode::ParseError, where + ": bad property line");
      }
    } else {
      throw Error(ErrorCode::ParseError, where + ": unknown header keyword '" + std::string(tok[0]) + "'");
    }
  }

  PointCloud cloud;
  bool have_confidence = false;
  for (const auto& el : elements) {
    const bool is_vertex = el.name == "vertex";
    int ix = -1, iy = -1, iz = -1, ic = -1;
    for (std::size_t k = 0; k < el.props.size(); ++k) {
      const auto& n = el.props[k].name;
      if (el.props[k].is_list) continue;
      if (n == "x") ix = static_cast<int>(k);
      if (n == "y") iy = static_cast<int>(k);
      if (n == "z") iz = static_cast<int>(k);
      if (n == "confidence") ic = static_cast<int>(k);
    }
    if (is_vertex && (ix < 0 || iy < 0 || iz < 0)) {
      throw Error(ErrorCode::ParseError, "vertex element lacks x/y/z");
    }
    if (is_vertex) have_confidence = ic >= 0;
    std::vector<double> values(el.props.size());
    for (std::size_t r = 0; r < el.count; ++r) {
      if (binary) {
        for (std::size_t k = 0; k < el.props.size(); ++k) {
          const auto& p = el.props[k];
          const std::string where = "byte " + std::to_string(pos);
          if (p.is_list) {
            const std::size_t cs = ply_type_size(p.count_type, where);
            if (pos + cs > bytes.size()) throw Error(ErrorCode::ParseError, where + ": truncated PLY payload");
            const auto n = static_cast<std::size_t>(read_binary(p.count_type, bytes.data() + pos));
            pos += cs + n * ply_type_size(p.type, where);
            if (pos > bytes.size()) throw Error(ErrorCode::ParseError, where + ": truncated PLY payload");
            continue;
          }
          const std::size_t sz = ply_type_size(p.type, where);
          if (pos + sz > bytes.size()) throw Error(ErrorCode::ParseError, where + ": truncated PLY payload");
          values[k] = read_binary(p.type, bytes.data() + pos);
          pos += sz;
        }
      } else {
        const auto tok = split_ws(next_line());
        const std::string where = "line " + std::to_string(line_no);
        std::size_t t = 0;
        for (std::size_t k = 0; k < el.props.size(); ++k) {
          if (t >= tok.size()) throw Error(ErrorCode::ParseError, where + ": too few values");
          if (el.props[k].is_list) {
            t += 1 + static_cast<std::size_t>(to_long(tok[t], where));
            continue;
          }
          values[k] = to_double(tok[t++], where);
        }
      }
      if (is_vertex) {
        cloud.points.emplace_back(values[ix], values[iy], values[iz]);
        if (ic >= 0) cloud.confidence.push_back(values[ic]);
      }
    }
  }
  if (!have_confidence) cloud.confidence.clear();
  cloud.validate();
  return cloud;
}

std::string format_ply(const PointCloud& cloud, PlyEncoding encoding) {
  std::ostringstream out;
  out << "ply\nformat " << (encoding == PlyEncoding::Ascii ? "ascii" : "binary_little_endian") << " 1.0\n";
  out << "element vertex " << cloud.size() << "\n";
  const char* type = encoding == PlyEncoding::Ascii ? "double" : "float";
  out << "property " << type << " x\nproperty " << type << " y\nproperty " << type << " z\n";
  if (cloud.has_confidence()) out << "property " << type << " confidence\n";
  out << "end_header\n";
  if (encoding == PlyEncoding::Ascii) {
    out << std::setprecision(17);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const Vec3& p = cloud.points[i];
      out << p.x() << ' ' << p.y() << ' ' << p.z();
      if (cloud.has_confidence()) out << ' ' << cloud.confidence[i];
      out << '\n';
    }
  } else {
    auto put = [&out](double v) {
      const auto f = static_cast<float>(v);
      out.write(reinterpret_cast<const char*>(&f), sizeof f);
    };
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      put(cloud.points[i].x());
      put(cloud.points[i].y());
      put(cloud.points[i].z());
      if (cloud.has_confidence()) put(cloud.confidence[i]);
    }
  }
  return std::move(out).str();
}

PointCloud load_ply(const fs::path& path) {
  try {
    return parse_ply(read_file(path));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void save_ply(const fs::path& path, const PointCloud& cloud, PlyEncoding encoding) {
  atomic_write(path, format_ply(cloud, encoding));
}

// ---------------------------------------------------------------- PNG

namespace {

struct PngReadState {
  std::string_view bytes;
  std::size_t pos = 0;
};

void png_error_fn(png_structp png, png_const_charp msg) {
  auto* err = static_cast<std::string*>(png_get_error_ptr(png));
  *err = msg;
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

void png_read_fn(png_structp png, png_bytep out, png_size_t n) {
  auto* st = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (st->pos + n > st->bytes.size()) png_error(png, "truncated PNG data");
  std::memcpy(out, st->bytes.data() + st->pos, n);
  st->pos += n;
}

void png_write_fn(png_structp png, png_bytep data, png_size_t n) {
  static_cast<std::string*>(png_get_io_ptr(png))->append(reinterpret_cast<const char*>(data), n);
}

void png_flush_fn(png_structp) {}

std::string encode_png_raw(int width, int height, int color_type, int channels, const std::uint8_t* pixels) {
  if (width <= 0 || height <= 0) throw Error(ErrorCode::InvalidArgument, "cannot encode an empty image");
  std::string err;
  std::string out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
  if (png == nullptr) throw Error(ErrorCode::IoError, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::IoError, "PNG encode failed: " + err);
  }
  png_set_write_fn(png, &out, png_write_fn, png_flush_fn);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(width) * channels;
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(pixels + y * stride));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

}  // namespace

RgbImage decode_png(std::string_view bytes) {
  if (bytes.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) != 0) {
    throw Error(ErrorCode::ParseError, "byte 0: not a PNG file");
  }
  std::string err;
  PngReadState st{bytes, 0};
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
  if (png == nullptr) throw Error(ErrorCode::IoError, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  RgbImage img;
  if (info == nullptr || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::ParseError, "byte " + std::to_string(st.pos) + ": PNG decode failed: " + err);
  }
  png_set_read_fn(png, &st, png_read_fn);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  img = RgbImage(w, h);
  std::vector<png_bytep> rows(static_cast<std::size_t>(h));
  for (int y = 0; y < h; ++y) rows[y] = img.data.data() + img.index(0, y);
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

std::string encode_png(const RgbImage& image) {
  image.validate();
  return encode_png_raw(image.width, image.height, PNG_COLOR_TYPE_RGB, 3, image.data.data());
}

std::string encode_png_gray(int width, int height, std::span<const std::uint8_t> pixels) {
  if (pixels.size() != static_cast<std::size_t>(width) * height) {
    throw Error(ErrorCode::ShapeMismatch, "gray buffer does not match its size");
  }
  return encode_png_raw(width, height, PNG_COLOR_TYPE_GRAY, 1, pixels.data());
}

RgbImage load_png(const fs::path& path) {
  try {
    return decode_png(read_file(path));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void save_png(const fs::path& path, const RgbImage& image) { atomic_write(path, encode_png(image)); }

BinaryMask mask_from_image(const RgbImage& image) {
  BinaryMask mask(image.width, image.height);
  for (std::size_t i = 0; i < mask.bits.size(); ++i) {
    mask.bits[i] = (image.data[3 * i] | image.data[3 * i + 1] | image.data[3 * i + 2]) != 0 ? 1 : 0;
  }
  return mask;
}

BinaryMask load_mask(const fs::path& path) { return mask_from_image(load_png(path)); }

void save_mask(const fs::path& path, const BinaryMask& mask) {
  std::vector<std::uint8_t> px(mask.bits.size());
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = mask.bits[i] ? 255 : 0;
  atomic_write(path, encode_png_gray(mask.width, mask.height, px));
}

void save_prob_map(const fs::path& path, const ProbMap& map) {
  std::vector<std::uint8_t> px(map.values.size());
  for (std::size_t i = 0; i < px.size(); ++i) {
    px[i] = static_cast<std::uint8_t>(std::lround(std::clamp(map.values[i], 0.0, 1.0) * 255.0));
  }
  atomic_write(path, encode_png_gray(map.width, map.height, px));
}

// ---------------------------------------------------------------- PMAP

namespace {

constexpr char kPmapMagic[4] = {'P', 'M', 'A', 'P'};
constexpr std::uint32_t kPmapVersion = 1;
constexpr std::size_t kPmapHeader = 16;

void put_u32(std::string& out, std::uint32_t v) { out.append(reinterpret_cast<const char*>(&v), 4); }
void put_f32(std::string& out, float v) { out.append(reinterpret_cast<const char*>(&v), 4); }

}  // namespace

std::string encode_pmap(const OrganizedPointMap& map) {
  std::string out;
  out.reserve(kPmapHeader + map.points.size() * 16);
  out.append(kPmapMagic, 4);
  put_u32(out, kPmapVersion);
  put_u32(out, static_cast<std::uint32_t>(map.width));
  put_u32(out, static_cast<std::uint32_t>(map.height));
  const float nan = std::numeric_limits<float>::quiet_NaN();
  for (std::size_t i = 0; i < map.points.size(); ++i) {
    if (map.valid[i]) {
      put_f32(out, static_cast<float>(map.points[i].x()));
      put_f32(out, static_cast<float>(map.points[i].y()));
      put_f32(out, static_cast<float>(map.points[i].z()));
      put_f32(out, static_cast<float>(map.confidence[i]));
    } else {
      put_f32(out, nan);
      put_f32(out, nan);
      put_f32(out, nan);
      put_f32(out, 0.0f);
    }
  }
  return out;
}

OrganizedPointMap decode_pmap(std::string_view bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kPmapMagic, 4) != 0) {
    throw Error(ErrorCode::BadMagic, "byte 0: missing PMAP magic");
  }
  if (bytes.size() < kPmapHeader) throw Error(ErrorCode::TruncatedPayload, "PMAP header is incomplete");
  const auto version = load_le<std::uint32_t>(bytes.data() + 4);
  if (version != kPmapVersion) throw Error(ErrorCode::BadVersion, "unsupported PMAP version " + std::to_string(version));
  const auto w = load_le<std::uint32_t>(bytes.data() + 8);
  const auto h = load_le<std::uint32_t>(bytes.data() + 12);
  if (w > (1u << 16) || h > (1u << 16)) throw Error(ErrorCode::ParseError, "byte 8: implausible PMAP size");
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (bytes.size() < kPmapHeader + 16 * n) {
    throw Error(ErrorCode::TruncatedPayload, "PMAP payload has " + std::to_string(bytes.size() - kPmapHeader) +
                                                 " bytes, expected " + std::to_string(16 * n));
  }
  OrganizedPointMap map(static_cast<int>(w), static_cast<int>(h));
  const char* p = bytes.data() + kPmapHeader;
  for (std::size_t i = 0; i < n; ++i, p += 16) {
    const float x = load_le<float>(p);
    const float y = load_le<float>(p + 4);
    const float z = load_le<float>(p + 8);
    const float c = load_le<float>(p + 12);
    if (std::isnan(x) || std::isnan(y) || std::isnan(z)) continue;
    map.points[i] = Vec3(x, y, z);
    map.confidence[i] = c;
    map.valid[i] = 1;
  }
  return map;
}

OrganizedPointMap load_pmap(const fs::path& path) {
  try {
    return decode_pmap(read_file(path));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void save_pmap(const fs::path& path, const OrganizedPointMap& map) { atomic_write(path, encode_pmap(map)); }

std::string format_loss_csv(std::span<const LossBreakdown> history) {
  std::ostringstream out;
  out << std::setprecision(17) << "iteration,silhouette,geometric,bbox,total\n";
  for (std::size_t i = 0; i < history.size(); ++i) {
    const auto& l = history[i];
    out << i << ',' << l.silhouette << ',' << l.geometric << ',' << l.bbox << ',' << l.total << '\n';
  }
  return std::move(out).str();
}

}  // namespace rescene
