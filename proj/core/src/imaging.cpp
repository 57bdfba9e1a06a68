#include "refcut/imaging.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <random>
#include <sstream>

#include "refcut/error.hpp"

namespace refcut {

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open '" + path.string() + "' for reading");
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) {
    throw IoError("read failure on '" + path.string() + "'");
  }
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open '" + path.string() + "' for writing");
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw IoError("write failure on '" + path.string() + "'");
  }
}

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

// ---- PGM -------------------------------------------------------------------

class PgmCursor {
 public:
  PgmCursor(std::span<const std::uint8_t> bytes, std::size_t pos) : bytes_(bytes), pos_(pos) {}

  std::size_t offset() const { return pos_; }

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const auto c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(c)) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t read_uint(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    std::size_t value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + static_cast<std::size_t>(bytes_[pos_] - '0');
      if (value > (1u << 30)) throw FormatError(std::string("PGM ") + what + " too large", start);
      ++pos_;
    }
    if (pos_ == start) {
      throw FormatError(std::string("PGM header: expected ") + what, start);
    }
    return value;
  }

  void expect_single_whitespace() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
      throw FormatError("PGM header: expected whitespace before raster", pos_);
    }
    ++pos_;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

// ---- PNG -------------------------------------------------------------------

struct PngReadState {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;
};

void png_read_from_span(png_structp png, png_bytep out, png_size_t length) {
  auto* state = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (state->pos + length > state->bytes.size()) {
    png_error(png, "truncated PNG stream");
  }
  std::memcpy(out, state->bytes.data() + state->pos, length);
  state->pos += length;
}

void png_write_to_vector(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void png_flush_noop(png_structp) {}

// ---- MHD -------------------------------------------------------------------

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
std::vector<T> parse_list(const std::string& value, std::size_t offset, const char* key) {
  std::vector<T> out;
  std::istringstream in(value);
  std::string token;
  while (in >> token) {
    T parsed{};
    const auto* first = token.data();
    const auto* last = token.data() + token.size();
    const auto res = std::from_chars(first, last, parsed);
    if (res.ec != std::errc() || res.ptr != last) {
      throw FormatError(std::string("MHD header: bad value for ") + key + ": '" + token + "'", offset);
    }
    out.push_back(parsed);
  }
  return out;
}

enum class ElementType { u8, u16, f32 };

std::size_t element_size(ElementType t) {
  switch (t) {
    case ElementType::u8: return 1;
    case ElementType::u16: return 2;
    case ElementType::f32: return 4;
  }
  return 1;
}

}  // namespace

// ---- geometry --------------------------------------------------------------

void GridGeometry::validate() const {
  if (ndim != 2 && ndim != 3) {
    throw ValidationError("grid must have 2 or 3 axes, got " + std::to_string(ndim));
  }
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 1) throw ValidationError("grid extent must be >= 1 on every axis");
    if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a])) {
      throw ValidationError("grid spacing must be positive and finite");
    }
    if (!std::isfinite(origin[a])) throw ValidationError("grid origin must be finite");
  }
  if (ndim == 2 && dims[2] != 1) throw ValidationError("2D grid must have unit third extent");
}

GridGeometry GridGeometry::make(std::vector<std::size_t> dims, std::vector<double> spacing,
                                std::vector<double> origin) {
  if (dims.size() != 2 && dims.size() != 3) {
    throw ValidationError("grid must have 2 or 3 axes, got " + std::to_string(dims.size()));
  }
  if ((!spacing.empty() && spacing.size() != dims.size()) ||
      (!origin.empty() && origin.size() != dims.size())) {
    throw ValidationError("spacing/origin arity must match the number of axes");
  }
  GridGeometry g;
  g.ndim = static_cast<int>(dims.size());
  for (std::size_t a = 0; a < dims.size(); ++a) {
    g.dims[a] = dims[a];
    if (!spacing.empty()) g.spacing[a] = spacing[a];
    if (!origin.empty()) g.origin[a] = origin[a];
  }
  g.validate();
  return g;
}

ScalarGrid::ScalarGrid(GridGeometry geometry, std::vector<double> values)
    : geometry_(geometry), values_(std::move(values)) {
  geometry_.validate();
  if (values_.size() != geometry_.voxel_count()) {
    throw ValidationError("grid value count " + std::to_string(values_.size()) +
                          " does not match product of dims " + std::to_string(geometry_.voxel_count()));
  }
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](auto v) { return v != 0; }));
}

// ---- formats ---------------------------------------------------------------

ImageFormat parse_image_format(std::string_view name) {
  const auto n = lowercase(name);
  if (n == "pgm") return ImageFormat::pgm;
  if (n == "png" || n == "png-gray") return ImageFormat::png;
  if (n == "mhd" || n == "mhd-raw") return ImageFormat::mhd;
  throw ValidationError("unknown image format '" + std::string(name) + "' (expected pgm, png, mhd)");
}

std::string_view to_string(ImageFormat format) {
  switch (format) {
    case ImageFormat::pgm: return "pgm";
    case ImageFormat::png: return "png";
    case ImageFormat::mhd: return "mhd";
  }
  return "?";
}

ImageFormat format_from_path(const std::filesystem::path& path) {
  const auto ext = lowercase(path.extension().string());
  if (ext == ".pgm") return ImageFormat::pgm;
  if (ext == ".png") return ImageFormat::png;
  if (ext == ".mhd") return ImageFormat::mhd;
  throw ValidationError("cannot infer image format from '" + path.string() + "'");
}

ScalarGrid decode_pgm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    throw FormatError("not a binary PGM (missing P5 magic)", 0);
  }
  PgmCursor cur(bytes, 2);
  const auto width = cur.read_uint("width");
  const auto height = cur.read_uint("height");
  const auto maxval = cur.read_uint("maxval");
  if (width == 0 || height == 0) throw FormatError("PGM header: zero extent", cur.offset());
  if (maxval == 0 || maxval > 65535) throw FormatError("PGM header: maxval out of range", cur.offset());
  cur.expect_single_whitespace();
  const std::size_t data_start = cur.offset();
  const std::size_t bytes_per_sample = maxval < 256 ? 1 : 2;
  const std::size_t need = width * height * bytes_per_sample;
  if (bytes.size() - data_start < need) {
    throw FormatError("PGM raster truncated: need " + std::to_string(need) + " bytes", bytes.size());
  }
  std::vector<double> values(width * height);
  const auto* p = bytes.data() + data_start;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (bytes_per_sample == 1) {
      values[i] = p[i];
    } else {
      values[i] = static_cast<double>((static_cast<unsigned>(p[2 * i]) << 8) | p[2 * i + 1]);
    }
  }
  return ScalarGrid(GridGeometry::make({width, height}), std::move(values));
}

ScalarGrid decode_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    throw FormatError("not a PNG (bad signature)", 0);
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) throw IoError("libpng: cannot allocate read struct");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("libpng: cannot allocate info struct");
  }
  PngReadState state{bytes, 0};
  std::vector<double> values;
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<png_byte> row;
  bool unsupported = false;
  // No C++ objects with nontrivial destructors may be created between setjmp and longjmp.
  if (setjmp(png_jmpbuf(png))) {
    const std::size_t at = state.pos;
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("malformed PNG stream", at);
  }
  png_set_read_fn(png, &state, png_read_from_span);
  png_read_info(png, info);
  width = png_get_image_width(png, info);
  height = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color != PNG_COLOR_TYPE_GRAY && color != PNG_COLOR_TYPE_GRAY_ALPHA) {
    unsupported = true;
  } else {
    if (depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    const bool wide = depth == 16;
    values.resize(width * height);
    row.resize(rowbytes);
    for (std::size_t y = 0; y < height; ++y) {
      png_read_row(png, row.data(), nullptr);
      for (std::size_t x = 0; x < width; ++x) {
        values[y * width + x] =
            wide ? static_cast<double>((static_cast<unsigned>(row[2 * x]) << 8) | row[2 * x + 1]) : row[x];
      }
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  if (unsupported) throw FormatError("PNG is not single-channel grayscale", 25);
  return ScalarGrid(GridGeometry::make({width, height}), std::move(values));
}

ScalarGrid decode_mhd(std::string_view header,
                      const std::function<std::vector<std::uint8_t>(const std::string&)>& resolve_data) {
  int ndims = 0;
  std::vector<std::size_t> dims;
  std::vector<double> spacing;
  std::vector<double> origin;
  std::optional<ElementType> type;
  std::string data_file;
  std::size_t line_start = 0;
  while (line_start < header.size()) {
    auto line_end = header.find('\n', line_start);
    if (line_end == std::string_view::npos) line_end = header.size();
    const auto line = header.substr(line_start, line_end - line_start);
    const std::size_t offset = line_start;
    line_start = line_end + 1;
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw FormatError("MHD header: line without '='", offset);
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key == "NDims") {
      const auto v = parse_list<int>(value, offset, "NDims");
      if (v.size() != 1 || (v[0] != 2 && v[0] != 3)) throw FormatError("MHD header: NDims must be 2 or 3", offset);
      ndims = v[0];
    } else if (key == "DimSize") {
      dims = parse_list<std::size_t>(value, offset, "DimSize");
    } else if (key == "ElementSpacing" || key == "ElementSize") {
      spacing = parse_list<double>(value, offset, "ElementSpacing");
    } else if (key == "Offset" || key == "Origin" || key == "Position") {
      origin = parse_list<double>(value, offset, "Offset");
    } else if (key == "ElementType") {
      if (value == "MET_UCHAR") {
        type = ElementType::u8;
      } else if (value == "MET_USHORT") {
        type = ElementType::u16;
      } else if (value == "MET_FLOAT") {
        type = ElementType::f32;
      } else {
        throw FormatError("MHD header: unsupported ElementType '" + value + "'", offset);
      }
    } else if (key == "ElementDataFile") {
      data_file = value;
      if (data_file == "LOCAL") throw FormatError("MHD header: inline (LOCAL) payload not supported", offset);
    } else if (key == "BinaryDataByteOrderMSB" || key == "ElementByteOrderMSB") {
      if (lowercase(value) == "true") throw FormatError("MHD header: big-endian payload not supported", offset);
    }
  }
  if (ndims == 0) throw FormatError("MHD header: missing NDims", header.size());
  if (dims.size() != static_cast<std::size_t>(ndims)) {
    throw FormatError("MHD header: DimSize arity does not match NDims", header.size());
  }
  if (!type) throw FormatError("MHD header: missing ElementType", header.size());
  if (data_file.empty()) throw FormatError("MHD header: missing ElementDataFile", header.size());
  if (spacing.empty()) spacing.assign(dims.size(), 1.0);
  if (spacing.size() != dims.size()) throw FormatError("MHD header: ElementSpacing arity mismatch", header.size());
  if (!origin.empty() && origin.size() != dims.size()) {
    throw FormatError("MHD header: Offset arity mismatch", header.size());
  }

  GridGeometry geometry;
  try {
    geometry = GridGeometry::make(dims, spacing, origin);
  } catch (const ValidationError& e) {
    throw FormatError(std::string("MHD header: ") + e.what(), header.size());
  }
  const auto raw = resolve_data(data_file);
  const std::size_t count = geometry.voxel_count();
  const std::size_t esize = element_size(*type);
  if (raw.size() < count * esize) {
    throw FormatError("MHD payload truncated: " + std::to_string(raw.size() / esize) + " of " +
                          std::to_string(count) + " voxels",
                      raw.size());
  }
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto* p = raw.data() + i * esize;
    switch (*type) {
      case ElementType::u8:
        values[i] = p[0];
        break;
      case ElementType::u16:
        values[i] = static_cast<double>(static_cast<unsigned>(p[0]) | (static_cast<unsigned>(p[1]) << 8));
        break;
      case ElementType::f32: {
        std::uint32_t bits = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                             (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
        values[i] = std::bit_cast<float>(bits);
        break;
      }
    }
  }
  return ScalarGrid(geometry, std::move(values));
}

ScalarGrid load_grid(const std::filesystem::path& path, ImageFormat format) {
  switch (format) {
    case ImageFormat::pgm: return decode_pgm(read_file(path));
    case ImageFormat::png: return decode_png(read_file(path));
    case ImageFormat::mhd: {
      const auto header_bytes = read_file(path);
      const std::string header(header_bytes.begin(), header_bytes.end());
      const auto dir = path.parent_path();
      return decode_mhd(header, [&](const std::string& name) { return read_file(dir / name); });
    }
  }
  throw ValidationError("unknown image format");
}

ScalarGrid load_grid(const std::filesystem::path& path) { return load_grid(path, format_from_path(path)); }

Mask load_mask(const std::filesystem::path& path) {
  const auto grid = load_grid(path);
  Mask mask(grid.geometry());
  const auto values = grid.values();
  for (std::size_t i = 0; i < values.size(); ++i) mask.labels[i] = values[i] > 0.0 ? 1 : 0;
  return mask;
}

namespace {

std::vector<std::uint8_t> pgm_header(std::size_t w, std::size_t h, unsigned maxval) {
  const std::string head = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n" + std::to_string(maxval) + "\n";
  return {head.begin(), head.end()};
}

void require_2d_for_pgm(const GridGeometry& g) {
  if (g.ndim != 2) throw ValidationError("PGM output requires a 2D grid");
}

std::string mhd_header(const GridGeometry& g, const char* element_type, const std::string& raw_name) {
  std::ostringstream out;
  out.precision(17);
  out << "ObjectType = Image\nNDims = " << g.ndim << "\nBinaryData = True\nBinaryDataByteOrderMSB = False\n";
  out << "DimSize =";
  for (int a = 0; a < g.ndim; ++a) out << ' ' << g.dims[a];
  out << "\nElementSpacing =";
  for (int a = 0; a < g.ndim; ++a) out << ' ' << g.spacing[a];
  out << "\nOffset =";
  for (int a = 0; a < g.ndim; ++a) out << ' ' << g.origin[a];
  out << "\nElementType = " << element_type << "\nElementDataFile = " << raw_name << "\n";
  return out.str();
}

void write_mhd(const GridGeometry& g, const std::filesystem::path& path, const char* element_type,
               std::span<const std::uint8_t> payload) {
  auto raw_path = path;
  raw_path.replace_extension(".raw");
  const auto header = mhd_header(g, element_type, raw_path.filename().string());
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(header.data()), header.size()));
  write_file(raw_path, payload);
}

}  // namespace

void save_mask(const Mask& mask, const std::filesystem::path& path, ImageFormat format) {
  mask.geometry.validate();
  if (mask.labels.size() != mask.geometry.voxel_count()) {
    throw ValidationError("mask label count does not match its dims");
  }
  switch (format) {
    case ImageFormat::pgm: {
      require_2d_for_pgm(mask.geometry);
      auto bytes = pgm_header(mask.geometry.dims[0], mask.geometry.dims[1], 255);
      for (auto v : mask.labels) bytes.push_back(v ? 255 : 0);
      write_file(path, bytes);
      return;
    }
    case ImageFormat::mhd: {
      std::vector<std::uint8_t> payload(mask.labels.size());
      std::transform(mask.labels.begin(), mask.labels.end(), payload.begin(), [](auto v) { return v ? 1 : 0; });
      write_mhd(mask.geometry, path, "MET_UCHAR", payload);
      return;
    }
    case ImageFormat::png:
      throw ValidationError("masks are written as pgm or mhd");
  }
}

void save_grid(const ScalarGrid& grid, const std::filesystem::path& path, ImageFormat format) {
  const auto& g = grid.geometry();
  const auto values = grid.values();
  switch (format) {
    case ImageFormat::pgm: {
      require_2d_for_pgm(g);
      const bool fits8 = std::all_of(values.begin(), values.end(),
                                     [](double v) { return v >= 0.0 && v <= 255.0 && v == std::floor(v); });
      auto bytes = pgm_header(g.dims[0], g.dims[1], fits8 ? 255 : 65535);
      for (double v : values) {
        if (fits8) {
          bytes.push_back(static_cast<std::uint8_t>(v));
        } else {
          const auto s = static_cast<unsigned>(std::clamp(std::lround(v), 0L, 65535L));
          bytes.push_back(static_cast<std::uint8_t>(s >> 8));
          bytes.push_back(static_cast<std::uint8_t>(s & 0xff));
        }
      }
      write_file(path, bytes);
      return;
    }
    case ImageFormat::mhd: {
      std::vector<std::uint8_t> payload;
      payload.reserve(values.size() * 4);
      for (double v : values) {
        const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
        for (int b = 0; b < 4; ++b) payload.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
      }
      write_mhd(g, path, "MET_FLOAT", payload);
      return;
    }
    case ImageFormat::png: {
      require_2d_for_pgm(g);
      std::vector<std::uint8_t> pixels(values.size());
      std::transform(values.begin(), values.end(), pixels.begin(),
                     [](double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); });
      write_file(path, encode_png_gray8(pixels, g.dims[0], g.dims[1]));
      return;
    }
  }
}

std::vector<std::uint8_t> encode_png_gray8(std::span<const std::uint8_t> pixels, std::size_t width,
                                           std::size_t height) {
  if (pixels.size() != width * height || width == 0 || height == 0) {
    throw ValidationError("png encode: pixel buffer does not match extents");
  }
  std::vector<std::uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) throw IoError("libpng: cannot allocate write struct");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng: cannot allocate info struct");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng: encoding failed");
  }
  png_set_write_fn(png, &out, png_write_to_vector, png_flush_noop);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(pixels.data() + y * width));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

// ---- interpolation ---------------------------------------------------------

double sample_at(const ScalarGrid& grid, const Vec3& p) {
  const auto& g = grid.geometry();
  std::array<std::size_t, 3> lo{0, 0, 0};
  std::array<std::size_t, 3> hi{0, 0, 0};
  std::array<double, 3> frac{0.0, 0.0, 0.0};
  for (int a = 0; a < g.ndim; ++a) {
    const double last = static_cast<double>(g.dims[a] - 1);
    const double u = std::clamp((p[a] - g.origin[a]) / g.spacing[a], 0.0, last);
    const double f = std::floor(u);
    lo[a] = static_cast<std::size_t>(f);
    hi[a] = std::min(lo[a] + 1, g.dims[a] - 1);
    frac[a] = u - f;
  }
  const auto lerp = [](double a, double b, double t) { return t == 0.0 ? a : a + t * (b - a); };
  const auto v = [&](std::size_t i, std::size_t j, std::size_t k) { return grid.at(i, j, k); };
  const auto plane = [&](std::size_t k) {
    return lerp(lerp(v(lo[0], lo[1], k), v(hi[0], lo[1], k), frac[0]),
                lerp(v(lo[0], hi[1], k), v(hi[0], hi[1], k), frac[0]), frac[1]);
  };
  if (g.ndim == 2) return plane(0);
  return lerp(plane(lo[2]), plane(hi[2]), frac[2]);
}

// ---- phantoms --------------------------------------------------------------

PhantomKind parse_phantom_kind(std::string_view name) {
  const auto n = lowercase(name);
  if (n == "disc" || n == "disk") return PhantomKind::disc;
  if (n == "sphere") return PhantomKind::sphere;
  if (n == "rectangle") return PhantomKind::rectangle;
  if (n == "box") return PhantomKind::box;
  throw ValidationError("unknown phantom kind '" + std::string(name) + "' (expected disc, sphere, rectangle, box)");
}

Phantom make_phantom(const PhantomSpec& spec, std::uint64_t rng_seed) {
  const auto g = GridGeometry::make(spec.dims, spec.spacing);
  const bool round = spec.kind == PhantomKind::disc || spec.kind == PhantomKind::sphere;
  const int want_dim = (spec.kind == PhantomKind::disc || spec.kind == PhantomKind::rectangle) ? 2 : 3;
  if (g.ndim != want_dim) {
    throw ValidationError("phantom kind requires a " + std::to_string(want_dim) + "D grid");
  }
  if (spec.fg_intensity == spec.bg_intensity) {
    throw ValidationError("phantom foreground and background intensities must differ");
  }
  if (!(spec.noise_sigma >= 0.0)) throw ValidationError("noise sigma must be >= 0");
  if (spec.radius_or_halfextent.empty()) throw ValidationError("phantom size missing");

  std::array<double, 3> half{};
  for (int a = 0; a < g.ndim; ++a) {
    half[a] = round ? spec.radius_or_halfextent[0]
                    : spec.radius_or_halfextent[std::min<std::size_t>(a, spec.radius_or_halfextent.size() - 1)];
    if (!(half[a] > 0.0)) throw ValidationError("phantom size must be positive");
    const double lo = g.origin[a];
    const double hi = g.origin[a] + static_cast<double>(g.dims[a] - 1) * g.spacing[a];
    if (spec.center[a] - half[a] < lo || spec.center[a] + half[a] > hi) {
      throw ValidationError("phantom shape extends outside the grid bounds");
    }
  }

  Mask truth(g);
  std::vector<double> values(g.voxel_count());
  std::mt19937_64 rng(rng_seed);
  std::normal_distribution<double> noise(0.0, spec.noise_sigma > 0.0 ? spec.noise_sigma : 1.0);
  const double r2 = half[0] * half[0];
  for (std::size_t k = 0; k < g.dims[2]; ++k) {
    for (std::size_t j = 0; j < g.dims[1]; ++j) {
      for (std::size_t i = 0; i < g.dims[0]; ++i) {
        const auto d = g.voxel_center(i, j, k) - spec.center;
        bool inside = false;
        if (round) {
          const double dz = g.ndim == 3 ? d.z : 0.0;
          inside = d.x * d.x + d.y * d.y + dz * dz <= r2;
        } else {
          inside = std::abs(d.x) <= half[0] && std::abs(d.y) <= half[1] && (g.ndim == 2 || std::abs(d.z) <= half[2]);
        }
        const auto idx = g.index(i, j, k);
        truth.labels[idx] = inside ? 1 : 0;
        double v = inside ? spec.fg_intensity : spec.bg_intensity;
        if (spec.noise_sigma > 0.0) v += noise(rng);
        values[idx] = std::max(v, 0.0);
      }
    }
  }
  return {ScalarGrid(g, std::move(values)), std::move(truth)};
}

}  // namespace refcut
