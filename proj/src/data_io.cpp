#include "radvote/data_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cctype>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include "radvote/error.hpp"

namespace radvote {

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

std::string read_text_file(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return {bytes.begin(), bytes.end()};
}

namespace {

void write_bytes(const std::filesystem::path& path, const void* data, std::size_t n) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  f.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!f) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  write_bytes(path, text.data(), text.size());
}

// ---------------------------------------------------------------- PLY

namespace {

static_assert(std::endian::native == std::endian::little, "binary PLY support assumes a little-endian host");

enum class PlyType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

std::optional<PlyType> ply_type(std::string_view s) {
  if (s == "char" || s == "int8") return PlyType::Int8;
  if (s == "uchar" || s == "uint8") return PlyType::UInt8;
  if (s == "short" || s == "int16") return PlyType::Int16;
  if (s == "ushort" || s == "uint16") return PlyType::UInt16;
  if (s == "int" || s == "int32") return PlyType::Int32;
  if (s == "uint" || s == "uint32") return PlyType::UInt32;
  if (s == "float" || s == "float32") return PlyType::Float32;
  if (s == "double" || s == "float64") return PlyType::Float64;
  return std::nullopt;
}

std::size_t ply_size(PlyType t) {
  switch (t) {
    case PlyType::Int8:
    case PlyType::UInt8:
      return 1;
    case PlyType::Int16:
    case PlyType::UInt16:
      return 2;
    case PlyType::Int32:
    case PlyType::UInt32:
    case PlyType::Float32:
      return 4;
    case PlyType::Float64:
      return 8;
  }
  return 0;
}

double read_binary(const std::uint8_t* p, PlyType t) {
  auto get = [p]<typename T>(T) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    return static_cast<double>(v);
  };
  switch (t) {
    case PlyType::Int8:
      return get(std::int8_t{});
    case PlyType::UInt8:
      return get(std::uint8_t{});
    case PlyType::Int16:
      return get(std::int16_t{});
    case PlyType::UInt16:
      return get(std::uint16_t{});
    case PlyType::Int32:
      return get(std::int32_t{});
    case PlyType::UInt32:
      return get(std::uint32_t{});
    case PlyType::Float32:
      return get(float{});
    case PlyType::Float64:
      return get(double{});
  }
  return 0.0;
}

struct PlyProperty {
  std::string name;
  PlyType type = PlyType::Float32;
};

struct PlyHeader {
  PlyFormat format = PlyFormat::Ascii;
  std::size_t vertex_count = 0;
  std::vector<PlyProperty> vertex_props;
  std::size_t body_offset = 0;
};

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t b = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > b) out.push_back(line.substr(b, i - b));
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

PlyHeader parse_ply_header(std::span<const std::uint8_t> bytes) {
  const std::string_view text(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  std::size_t pos = 0;
  auto next_line = [&]() -> std::optional<std::string_view> {
    if (pos >= text.size()) return std::nullopt;
    const std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) {
      pos = text.size();
      return std::nullopt;  // a header line must be newline-terminated
    }
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    return line;
  };

  const auto magic = next_line();
  if (!magic || *magic != "ply") throw PlyHeaderError("ply: missing 'ply' magic line");

  PlyHeader h;
  bool have_format = false;
  bool in_vertex = false;
  bool vertex_seen = false;
  int element_index = -1;
  while (true) {
    const auto line = next_line();
    if (!line) throw PlyHeaderError("ply: header ends without 'end_header'");
    const auto tok = split_ws(*line);
    if (tok.empty()) continue;
    const std::string_view kw = tok[0];
    if (kw == "comment" || kw == "obj_info") continue;
    if (kw == "end_header") break;
    if (kw == "format") {
      if (tok.size() != 3) throw PlyHeaderError("ply: malformed format line");
      if (tok[1] == "ascii") {
        h.format = PlyFormat::Ascii;
      } else if (tok[1] == "binary_little_endian") {
        h.format = PlyFormat::BinaryLittleEndian;
      } else if (tok[1] == "binary_big_endian") {
        throw PlyLayoutError("ply: big-endian payloads are not supported");
      } else {
        throw PlyHeaderError("ply: unknown format '" + std::string(tok[1]) + "'");
      }
      if (tok[2] != "1.0") throw PlyHeaderError("ply: unsupported version");
      have_format = true;
    } else if (kw == "element") {
      if (tok.size() != 3) throw PlyHeaderError("ply: malformed element line");
      std::size_t count = 0;
      if (!parse_number(tok[2], count)) throw PlyHeaderError("ply: bad element count");
      ++element_index;
      in_vertex = tok[1] == "vertex";
      if (in_vertex) {
        if (element_index != 0) throw PlyLayoutError("ply: the vertex element must come first");
        h.vertex_count = count;
        vertex_seen = true;
      }
    } else if (kw == "property") {
      if (element_index < 0) throw PlyHeaderError("ply: property before any element");
      if (tok.size() >= 2 && tok[1] == "list") {
        if (tok.size() != 5) throw PlyHeaderError("ply: malformed list property");
        if (in_vertex) throw PlyLayoutError("ply: list properties on vertices are not supported");
        continue;
      }
      if (tok.size() != 3) throw PlyHeaderError("ply: malformed property line");
      const auto t = ply_type(tok[1]);
      if (!t) throw PlyHeaderError("ply: unknown property type '" + std::string(tok[1]) + "'");
      if (in_vertex) h.vertex_props.push_back({std::string(tok[2]), *t});
    } else {
      throw PlyHeaderError("ply: unexpected header keyword '" + std::string(kw) + "'");
    }
  }
  if (!have_format) throw PlyHeaderError("ply: missing format line");
  if (!vertex_seen) throw PlyLayoutError("ply: no vertex element");
  h.body_offset = pos;
  return h;
}

}  // namespace

PointCloud parse_ply(std::span<const std::uint8_t> bytes, double units_to_mm) {
  if (!(units_to_mm > 0.0) || !std::isfinite(units_to_mm)) throw ParameterError("ply: units_to_mm must be positive");
  const PlyHeader h = parse_ply_header(bytes);

  auto find = [&](std::string_view name) -> int {
    for (std::size_t i = 0; i < h.vertex_props.size(); ++i)
      if (h.vertex_props[i].name == name) return static_cast<int>(i);
    return -1;
  };
  const int ix = find("x"), iy = find("y"), iz = find("z");
  if (ix < 0 || iy < 0 || iz < 0) throw PlyLayoutError("ply: vertex element lacks x, y or z");
  const int inx = find("nx"), iny = find("ny"), inz = find("nz");
  const int normal_props = (inx >= 0) + (iny >= 0) + (inz >= 0);
  if (normal_props != 0 && normal_props != 3) throw PlyLayoutError("ply: partial normal properties");
  const bool normals = normal_props == 3;
  for (int i : {ix, iy, iz, inx, iny, inz}) {
    if (i < 0) continue;
    const PlyType t = h.vertex_props[static_cast<std::size_t>(i)].type;
    if (t != PlyType::Float32 && t != PlyType::Float64) {
      throw PlyLayoutError("ply: coordinates and normals must be float or double");
    }
  }
  if (h.vertex_count == 0) throw PlyLayoutError("ply: vertex element is empty");

  const std::size_t nprops = h.vertex_props.size();
  std::vector<double> row(nprops);
  PointCloud cloud;
  auto emit = [&]() {
    const Point3 p(row[static_cast<std::size_t>(ix)], row[static_cast<std::size_t>(iy)], row[static_cast<std::size_t>(iz)]);
    if (!p.allFinite()) throw PlyLayoutError("ply: non-finite vertex coordinate");
    cloud.points.push_back(p * units_to_mm);
    if (normals) {
      cloud.normals.emplace_back(row[static_cast<std::size_t>(inx)], row[static_cast<std::size_t>(iny)],
                                 row[static_cast<std::size_t>(inz)]);
    }
  };

  const std::span<const std::uint8_t> body = bytes.subspan(h.body_offset);
  if (h.format == PlyFormat::BinaryLittleEndian) {
    std::size_t stride = 0;
    for (const auto& p : h.vertex_props) stride += ply_size(p.type);
    if (stride == 0 || body.size() / stride < h.vertex_count) throw PlyTruncatedError("ply: binary payload truncated");
    cloud.points.reserve(h.vertex_count);
    const std::uint8_t* p = body.data();
    for (std::size_t v = 0; v < h.vertex_count; ++v) {
      for (std::size_t k = 0; k < nprops; ++k) {
        row[k] = read_binary(p, h.vertex_props[k].type);
        p += ply_size(h.vertex_props[k].type);
      }
      emit();
    }
  } else {
    const std::string_view text(reinterpret_cast<const char*>(body.data()), body.size());
    std::size_t pos = 0;
    auto next_token = [&]() -> std::optional<std::string_view> {
      while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
      if (pos >= text.size()) return std::nullopt;
      const std::size_t b = pos;
      while (pos < text.size() && !std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
      return text.substr(b, pos - b);
    };
    cloud.points.reserve(std::min<std::size_t>(h.vertex_count, 1u << 20));
    for (std::size_t v = 0; v < h.vertex_count; ++v) {
      for (std::size_t k = 0; k < nprops; ++k) {
        const auto tok = next_token();
        if (!tok) throw PlyTruncatedError("ply: ascii payload ends early");
        if (!parse_number(*tok, row[k])) throw PlyLayoutError("ply: bad number '" + std::string(*tok) + "'");
      }
      emit();
    }
  }
  return cloud;
}

PointCloud load_ply(const std::filesystem::path& path, double units_to_mm) {
  return parse_ply(read_file_bytes(path), units_to_mm);
}

std::vector<std::uint8_t> serialize_ply(const PointCloud& cloud, PlyFormat format) {
  const bool normals = cloud.has_normals();
  std::ostringstream hdr;
  hdr << "ply\nformat " << (format == PlyFormat::Ascii ? "ascii" : "binary_little_endian") << " 1.0\n"
      << "element vertex " << cloud.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n";
  if (normals) hdr << "property double nx\nproperty double ny\nproperty double nz\n";
  hdr << "end_header\n";
  const std::string h = hdr.str();
  std::vector<std::uint8_t> out(h.begin(), h.end());

  if (format == PlyFormat::BinaryLittleEndian) {
    auto put = [&](double d) {
      const auto* b = reinterpret_cast<const std::uint8_t*>(&d);
      out.insert(out.end(), b, b + sizeof d);
    };
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      for (int a = 0; a < 3; ++a) put(cloud.points[i](a));
      if (normals)
        for (int a = 0; a < 3; ++a) put(cloud.normals[i](a));
    }
  } else {
    std::string line;
    char buf[64];
    auto put = [&](double d) {
      // Shortest representation that parses back to the same double.
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, d);
      line.append(buf, ptr);
    };
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      line.clear();
      for (int a = 0; a < 3; ++a) {
        if (a) line += ' ';
        put(cloud.points[i](a));
      }
      if (normals)
        for (int a = 0; a < 3; ++a) {
          line += ' ';
          put(cloud.normals[i](a));
        }
      line += '\n';
      out.insert(out.end(), line.begin(), line.end());
    }
  }
  return out;
}

void save_ply(const std::filesystem::path& path, const PointCloud& cloud, PlyFormat format) {
  const auto bytes = serialize_ply(cloud, format);
  write_bytes(path, bytes.data(), bytes.size());
}

// ---------------------------------------------------------------- PNG

namespace {

struct PngReadState {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;
  char message[160] = {};
};

void png_read_cb(png_structp png, png_bytep out, png_size_t n) {
  auto* s = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (s->bytes.size() - s->pos < n) png_error(png, "unexpected end of PNG data");
  std::memcpy(out, s->bytes.data() + s->pos, n);
  s->pos += n;
}

void png_error_cb(png_structp png, png_const_charp msg) {
  auto* s = static_cast<PngReadState*>(png_get_error_ptr(png));
  if (s) std::snprintf(s->message, sizeof s->message, "%s", msg);
  png_longjmp(png, 1);
}

void png_warning_cb(png_structp, png_const_charp) {}

struct PngWriteState {
  std::vector<std::uint8_t> out;
  char message[160] = {};
};

void png_write_cb(png_structp png, png_bytep data, png_size_t n) {
  auto* s = static_cast<PngWriteState*>(png_get_io_ptr(png));
  s->out.insert(s->out.end(), data, data + n);
}

void png_flush_cb(png_structp) {}

void png_write_error_cb(png_structp png, png_const_charp msg) {
  auto* s = static_cast<PngWriteState*>(png_get_error_ptr(png));
  if (s) std::snprintf(s->message, sizeof s->message, "%s", msg);
  png_longjmp(png, 1);
}

// Raw 16-bit samples. Every C++ object written after setjmp is owned by the
// caller so a longjmp leaves nothing to unwind.
bool decode_png16_raw(PngReadState& st, std::vector<std::uint16_t>& pixels, std::vector<png_bytep>& rows,
                      png_uint_32& w, png_uint_32& h, int& bit_depth, int& color_type) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &st, png_error_cb, png_warning_cb);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_set_read_fn(png, &st, png_read_cb);
  png_set_user_limits(png, 1u << 15, 1u << 15);
  png_read_info(png, info);
  w = png_get_image_width(png, info);
  h = png_get_image_height(png, info);
  bit_depth = png_get_bit_depth(png, info);
  color_type = png_get_color_type(png, info);
  if (bit_depth != 16 || color_type != PNG_COLOR_TYPE_GRAY || png_get_interlace_type(png, info) != PNG_INTERLACE_NONE) {
    png_destroy_read_struct(&png, &info, nullptr);
    return true;  // caller reports the format mismatch
  }
  if (static_cast<std::uint64_t>(w) * h > (std::uint64_t{1} << 26)) png_error(png, "image too large");
  png_set_swap(png);  // PNG stores big-endian samples
  pixels.assign(static_cast<std::size_t>(w) * h, 0);
  rows.assign(h, nullptr);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = reinterpret_cast<png_bytep>(pixels.data() + static_cast<std::size_t>(y) * w);
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

bool encode_png16_raw(PngWriteState& st, const std::vector<std::uint16_t>& pixels, std::vector<png_bytep>& rows,
                      png_uint_32 w, png_uint_32 h) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &st, png_write_error_cb, png_warning_cb);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_set_write_fn(png, &st, png_write_cb, png_flush_cb);
  png_set_IHDR(png, info, w, h, 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_set_swap(png);
  rows.assign(h, nullptr);
  for (png_uint_32 y = 0; y < h; ++y) {
    rows[y] = const_cast<png_bytep>(reinterpret_cast<const png_byte*>(pixels.data() + static_cast<std::size_t>(y) * w));
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

}  // namespace

Image<double> decode_depth_png16(std::span<const std::uint8_t> bytes, double depth_scale) {
  if (!(depth_scale > 0.0) || !std::isfinite(depth_scale)) throw ParameterError("depth png: depth_scale must be positive");
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw ImageFormatError("depth png: not a PNG file");
  PngReadState st{bytes};
  std::vector<std::uint16_t> pixels;
  std::vector<png_bytep> rows;
  png_uint_32 w = 0, h = 0;
  int bit_depth = 0, color_type = 0;
  if (!decode_png16_raw(st, pixels, rows, w, h, bit_depth, color_type)) {
    throw ImageFormatError(std::string("depth png: ") + (st.message[0] ? st.message : "decoder failure"));
  }
  if (bit_depth != 16) throw ImageFormatError("depth png: expected 16-bit samples, got " + std::to_string(bit_depth));
  if (color_type != PNG_COLOR_TYPE_GRAY) throw ImageFormatError("depth png: expected a single gray channel");
  if (pixels.empty()) throw ImageFormatError("depth png: interlaced images are not supported");
  Image<double> out(static_cast<int>(w), static_cast<int>(h), 0.0);
  for (std::size_t i = 0; i < pixels.size(); ++i) out.data[i] = pixels[i] * depth_scale;
  return out;
}

Image<double> load_depth_png16(const std::filesystem::path& path, double depth_scale) {
  return decode_depth_png16(read_file_bytes(path), depth_scale);
}

std::vector<std::uint8_t> encode_depth_png16(const Image<double>& depth, double depth_scale) {
  if (!(depth_scale > 0.0) || !std::isfinite(depth_scale)) throw ParameterError("depth png: depth_scale must be positive");
  if (depth.width <= 0 || depth.height <= 0) throw SizeError("depth png: empty image");
  std::vector<std::uint16_t> pixels(depth.data.size(), 0);
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const double d = depth.data[i];
    if (!(d > 0.0) || !std::isfinite(d)) continue;
    const double units = std::round(d / depth_scale);
    if (units > 65535.0) throw ParameterError("depth png: depth exceeds the 16-bit range");
    pixels[i] = static_cast<std::uint16_t>(units);
  }
  PngWriteState st;
  std::vector<png_bytep> rows;
  if (!encode_png16_raw(st, pixels, rows, static_cast<png_uint_32>(depth.width), static_cast<png_uint_32>(depth.height))) {
    throw IoError(std::string("depth png: ") + (st.message[0] ? st.message : "encoder failure"));
  }
  return std::move(st.out);
}

void save_depth_png16(const std::filesystem::path& path, const Image<double>& depth, double depth_scale) {
  const auto bytes = encode_depth_png16(depth, depth_scale);
  write_bytes(path, bytes.data(), bytes.size());
}

// ---------------------------------------------------------------- poses

std::vector<PoseRecord> parse_poses(std::string_view text) {
  std::vector<PoseRecord> out;
  std::size_t pos = 0;
  int line_no = 0;
  while (pos <= text.size()) {
    const std::size_t nl = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    const std::string where = "pose file line " + std::to_string(line_no) + ": ";
    if (tok.size() != 13) throw IoError(where + "expected an id and 12 numbers");
    double v[12];
    for (int i = 0; i < 12; ++i) {
      if (!parse_number(tok[static_cast<std::size_t>(i) + 1], v[i]) || !std::isfinite(v[i])) {
        throw IoError(where + "bad number '" + std::string(tok[static_cast<std::size_t>(i) + 1]) + "'");
      }
    }
    PoseRecord r;
    r.object_id = std::string(tok[0]);
    for (int row = 0; row < 3; ++row) {
      for (int c = 0; c < 3; ++c) r.pose.rotation(row, c) = v[row * 4 + c];
      r.pose.translation(row) = v[row * 4 + 3];
    }
    if (!r.pose.is_valid(1e-6)) throw IoError(where + "rotation is not orthonormal");
    out.push_back(std::move(r));
    if (nl == text.size()) break;
  }
  return out;
}

std::vector<PoseRecord> load_poses(const std::filesystem::path& path) { return parse_poses(read_text_file(path)); }

std::string format_poses(std::span<const PoseRecord> records) {
  std::string out;
  char buf[64];
  for (const auto& r : records) {
    if (r.object_id.empty() || r.object_id.find_first_of(" \t\r\n#") != std::string::npos) {
      throw ParameterError("pose file: object id must be a non-empty token");
    }
    out += r.object_id;
    for (int row = 0; row < 3; ++row) {
      for (int c = 0; c < 4; ++c) {
        const double d = c < 3 ? r.pose.rotation(row, c) : r.pose.translation(row);
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, d);
        out += ' ';
        out.append(buf, ptr);
      }
    }
    out += '\n';
  }
  return out;
}

void save_poses(const std::filesystem::path& path, std::span<const PoseRecord> records) {
  write_text_file(path, format_poses(records));
}

}  // namespace radvote
