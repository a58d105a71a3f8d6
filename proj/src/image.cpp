#include "pairsift/image.hpp"

#include <jpeglib.h>
#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace pairsift {

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open image: " + path.string());
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

bool is_pnm_space(std::uint8_t c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

// Reads the next decimal token, skipping whitespace and '#' comments.
long pnm_token(const std::vector<std::uint8_t>& bytes, std::size_t& pos,
               const std::string& what) {
  while (pos < bytes.size()) {
    if (is_pnm_space(bytes[pos])) {
      ++pos;
    } else if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else {
      break;
    }
  }
  if (pos >= bytes.size() || bytes[pos] < '0' || bytes[pos] > '9') {
    throw std::runtime_error("PNM header: expected " + what);
  }
  long value = 0;
  while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
    value = value * 10 + (bytes[pos] - '0');
    if (value > 1'000'000'000L) {
      throw std::runtime_error("PNM header: " + what + " out of range");
    }
    ++pos;
  }
  return value;
}

ImageBuffer decode_pnm(const std::vector<std::uint8_t>& bytes, int channels) {
  std::size_t pos = 2;  // past magic
  const long width = pnm_token(bytes, pos, "width");
  const long height = pnm_token(bytes, pos, "height");
  const long maxval = pnm_token(bytes, pos, "maxval");
  if (width < 1 || height < 1) {
    throw std::runtime_error("PNM: dimensions must be >= 1");
  }
  if (maxval < 1 || maxval > 255) {
    throw std::runtime_error("PNM: unsupported maxval " + std::to_string(maxval) +
                             " (only 8-bit supported)");
  }
  if (pos >= bytes.size() || !is_pnm_space(bytes[pos])) {
    throw std::runtime_error("PNM: expected single whitespace before payload");
  }
  ++pos;
  const std::size_t need =
      static_cast<std::size_t>(width) * static_cast<std::size_t>(height) *
      static_cast<std::size_t>(channels);
  const std::size_t have = bytes.size() - pos;
  if (have < need) {
    throw std::runtime_error("PNM: truncated payload (need " +
                             std::to_string(need) + " bytes, have " +
                             std::to_string(have) + ")");
  }
  if (have > need) {
    throw std::runtime_error("PNM: payload size mismatch (need " +
                             std::to_string(need) + " bytes, have " +
                             std::to_string(have) + ")");
  }
  ImageBuffer image;
  image.width = static_cast<int>(width);
  image.height = static_cast<int>(height);
  image.channels = channels;
  image.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end());
  return image;
}

ImageBuffer decode_png_bytes(const std::vector<std::uint8_t>& bytes,
                             const std::string& name) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
    throw std::runtime_error("PNG decode failed for " + name + ": " + img.message);
  }
  const bool color = (img.format & PNG_FORMAT_FLAG_COLOR) != 0;
  img.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  ImageBuffer image;
  image.width = static_cast<int>(img.width);
  image.height = static_cast<int>(img.height);
  image.channels = color ? 3 : 1;
  image.pixels.resize(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, image.pixels.data(), 0, nullptr)) {
    png_image_free(&img);
    throw std::runtime_error("PNG decode failed for " + name + ": " + img.message);
  }
  return image;
}

struct JpegErrorMgr {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

ImageBuffer decode_jpeg_bytes(const std::vector<std::uint8_t>& bytes,
                              const std::string& name) {
  jpeg_decompress_struct cinfo;
  JpegErrorMgr err;
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw std::runtime_error("JPEG decode failed for " + name + ": " + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = cinfo.num_components == 1 ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_start_decompress(&cinfo);

  ImageBuffer image;
  image.width = static_cast<int>(cinfo.output_width);
  image.height = static_cast<int>(cinfo.output_height);
  image.channels = cinfo.output_components;
  image.pixels.resize(static_cast<std::size_t>(image.width) * image.height *
                      image.channels);
  const std::size_t stride =
      static_cast<std::size_t>(image.width) * image.channels;
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = image.pixels.data() + cinfo.output_scanline * stride;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return image;
}

}  // namespace

ImageBuffer decode_image(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = read_file(path);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') {
    return decode_pnm(bytes, 1);
  }
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') {
    return decode_pnm(bytes, 3);
  }
  if (bytes.size() >= 8 && bytes[0] == 0x89 && bytes[1] == 'P' && bytes[2] == 'N' &&
      bytes[3] == 'G') {
    return decode_png_bytes(bytes, path.string());
  }
  if (bytes.size() >= 2 && bytes[0] == 0xFF && bytes[1] == 0xD8) {
    return decode_jpeg_bytes(bytes, path.string());
  }
  throw std::runtime_error("unsupported image format: " + path.string());
}

namespace {

void write_pnm(const ImageBuffer& image, const std::filesystem::path& path,
               const char* magic, int channels) {
  if (image.channels != channels) {
    throw std::runtime_error(std::string(magic) + " writer requires " +
                             std::to_string(channels) + "-channel image");
  }
  if (image.width < 1 || image.height < 1 ||
      image.pixels.size() != static_cast<std::size_t>(image.width) *
                                 image.height * channels) {
    throw std::runtime_error("image buffer is inconsistent");
  }
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write image: " + path.string());
  }
  out << magic << '\n' << image.width << ' ' << image.height << '\n' << 255 << '\n';
  out.write(reinterpret_cast<const char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
}

}  // namespace

void write_pgm(const ImageBuffer& image, const std::filesystem::path& path) {
  write_pnm(image, path, "P5", 1);
}

void write_ppm(const ImageBuffer& image, const std::filesystem::path& path) {
  write_pnm(image, path, "P6", 3);
}

Matrix luminance_plane(const ImageBuffer& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw std::runtime_error("luminance_plane: channels must be 1 or 3");
  }
  if (image.width < 1 || image.height < 1 ||
      image.pixels.size() != static_cast<std::size_t>(image.width) *
                                 image.height * image.channels) {
    throw std::runtime_error("luminance_plane: inconsistent image buffer");
  }
  Matrix plane(image.height, image.width);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      if (image.channels == 1) {
        plane(y, x) = static_cast<double>(image.at(y, x));
      } else {
        const double lum = 0.299 * image.at(y, x, 0) + 0.587 * image.at(y, x, 1) +
                           0.114 * image.at(y, x, 2);
        plane(y, x) = static_cast<double>(std::lround(lum));
      }
    }
  }
  return plane;
}

}  // namespace pairsift
