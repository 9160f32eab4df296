#include "fite/png_io.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <vector>

#include "fite/errors.hpp"

namespace fite {

namespace {

void write_chunk(std::ofstream& f, const char type[4], const uint8_t* data, uint32_t len) {
  auto write_be = [&](uint32_t v) {
    uint8_t b[4] = {uint8_t(v >> 24), uint8_t(v >> 16), uint8_t(v >> 8), uint8_t(v)};
    f.write(reinterpret_cast<const char*>(b), 4);
  };
  write_be(len);
  f.write(type, 4);
  if (len) f.write(reinterpret_cast<const char*>(data), len);
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(type), 4);
  if (len) crc = crc32(crc, data, len);
  write_be(uint32_t(crc));
}

void write_png(const std::string& path, int width, int height, const uint8_t* pixels,
               int channels) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write PNG: " + path);
  static const uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  f.write(reinterpret_cast<const char*>(sig), 8);

  uint8_t ihdr[13];
  auto put_be = [](uint8_t* p, uint32_t v) {
    p[0] = uint8_t(v >> 24);
    p[1] = uint8_t(v >> 16);
    p[2] = uint8_t(v >> 8);
    p[3] = uint8_t(v);
  };
  put_be(ihdr, uint32_t(width));
  put_be(ihdr + 4, uint32_t(height));
  ihdr[8] = 8;                              // bit depth
  ihdr[9] = channels == 3 ? 2 : 0;          // color type: rgb or gray
  ihdr[10] = ihdr[11] = ihdr[12] = 0;
  write_chunk(f, "IHDR", ihdr, 13);

  // raw scanlines with filter byte 0
  std::vector<uint8_t> raw(size_t(height) * (size_t(width) * channels + 1));
  for (int y = 0; y < height; ++y) {
    uint8_t* row = raw.data() + size_t(y) * (size_t(width) * channels + 1);
    row[0] = 0;
    std::memcpy(row + 1, pixels + size_t(y) * width * channels, size_t(width) * channels);
  }
  uLongf bound = compressBound(uLong(raw.size()));
  std::vector<uint8_t> compressed(bound);
  if (compress2(compressed.data(), &bound, raw.data(), uLong(raw.size()), 6) != Z_OK)
    throw IoError("PNG: zlib compression failed");
  write_chunk(f, "IDAT", compressed.data(), uint32_t(bound));
  write_chunk(f, "IEND", nullptr, 0);
}

}  // namespace

void write_png_rgb(const std::string& path, int width, int height, const uint8_t* rgb) {
  write_png(path, width, height, rgb, 3);
}

void write_png_gray(const std::string& path, int width, int height, const uint8_t* gray) {
  write_png(path, width, height, gray, 1);
}

}  // namespace fite
