#include "hpgm/image.hpp"

#include <png.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace hpgm {

namespace {

void write_to_vector(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + len);
}

void flush_noop(png_structp) {}

struct ReadCursor {
  const std::vector<std::uint8_t>* bytes;
  std::size_t pos;
};

void read_from_vector(png_structp png, png_bytep data, png_size_t len) {
  auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cur->pos + len > cur->bytes->size()) png_error(png, "truncated PNG");
  std::memcpy(data, cur->bytes->data() + cur->pos, len);
  cur->pos += len;
}

[[noreturn]] void on_error(png_structp, png_const_charp msg) { throw ImageError(std::string("png: ") + msg); }
void on_warning(png_structp, png_const_charp) {}

}  // namespace

std::vector<std::uint8_t> encode_png(const Image& img) {
  if (img.width <= 0 || img.height <= 0 || img.rgb.size() != static_cast<std::size_t>(img.width) * img.height * 3)
    throw ImageError("encode_png: inconsistent image");
  std::vector<std::uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, on_error, on_warning);
  png_infop info = png_create_info_struct(png);
  try {
    png_set_write_fn(png, &out, write_to_vector, flush_noop);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < img.height; ++y) png_write_row(png, const_cast<png_bytep>(img.at(0, y)));
    png_write_end(png, nullptr);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
  return out;
}

Image decode_png(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw ImageError("not a PNG file");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, on_error, on_warning);
  png_infop info = png_create_info_struct(png);
  ReadCursor cur{&bytes, 0};
  Image img;
  try {
    png_set_read_fn(png, &cur, read_from_vector);
    png_read_info(png, info);
    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);
    img = Image(static_cast<int>(png_get_image_width(png, info)), static_cast<int>(png_get_image_height(png, info)));
    if (png_get_rowbytes(png, info) != static_cast<std::size_t>(img.width) * 3) png_error(png, "unexpected row size");
    std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
    for (int y = 0; y < img.height; ++y) rows[static_cast<std::size_t>(y)] = img.at(0, y);
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
  } catch (...) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void write_png(const std::filesystem::path& path, const Image& img) {
  const auto bytes = encode_png(img);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ImageError("cannot write " + path.string());
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Image read_png(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ImageError("cannot read " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return decode_png(bytes);
}

Hsv rgb_to_hsv(double r, double g, double b) {
  const double mx = std::max({r, g, b}), mn = std::min({r, g, b}), d = mx - mn;
  Hsv out;
  out.v = mx;
  out.s = mx > 0 ? d / mx : 0;
  if (d > 0) {
    double h;
    if (mx == r) h = std::fmod((g - b) / d, 6.0);
    else if (mx == g) h = (b - r) / d + 2.0;
    else h = (r - g) / d + 4.0;
    h *= 60.0;
    if (h < 0) h += 360.0;
    out.h = h;
  }
  return out;
}

void hsv_to_rgb(const Hsv& hsv, double& r, double& g, double& b) {
  const double c = hsv.v * hsv.s;
  const double hp = std::fmod(hsv.h, 360.0) / 60.0;
  const double x = c * (1 - std::fabs(std::fmod(hp, 2.0) - 1));
  double r1 = 0, g1 = 0, b1 = 0;
  if (hp < 1) r1 = c, g1 = x;
  else if (hp < 2) r1 = x, g1 = c;
  else if (hp < 3) g1 = c, b1 = x;
  else if (hp < 4) g1 = x, b1 = c;
  else if (hp < 5) r1 = x, b1 = c;
  else r1 = c, b1 = x;
  const double m = hsv.v - c;
  r = r1 + m, g = g1 + m, b = b1 + m;
}

}  // namespace hpgm
