#include "sgs/png_io.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace sgs {

namespace {

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v >> 24));
  out.push_back(static_cast<uint8_t>(v >> 16));
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

uint32_t get_u32(const uint8_t* p) {
  return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
         (static_cast<uint32_t>(p[2]) << 8) | static_cast<uint32_t>(p[3]);
}

void append_chunk(std::vector<uint8_t>& out, const char type[4],
                  const std::vector<uint8_t>& data) {
  put_u32(out, static_cast<uint32_t>(data.size()));
  const size_t start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  const uint32_t crc = static_cast<uint32_t>(
      ::crc32(0, out.data() + start, static_cast<uInt>(out.size() - start)));
  put_u32(out, crc);
}

std::vector<uint8_t> zlib_compress(const std::vector<uint8_t>& data) {
  uLongf bound = compressBound(static_cast<uLong>(data.size()));
  std::vector<uint8_t> out(bound);
  if (compress2(out.data(), &bound, data.data(), static_cast<uLong>(data.size()), 6) != Z_OK)
    throw std::runtime_error("png: zlib compression failed");
  out.resize(bound);
  return out;
}

std::vector<uint8_t> zlib_decompress(const std::vector<uint8_t>& data, size_t expected) {
  std::vector<uint8_t> out(expected);
  uLongf size = static_cast<uLongf>(expected);
  const int rc = uncompress(out.data(), &size, data.data(), static_cast<uLong>(data.size()));
  if (rc != Z_OK || size != expected)
    throw std::runtime_error("png: zlib decompression failed or size mismatch");
  return out;
}

uint8_t paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return static_cast<uint8_t>(a);
  if (pb <= pc) return static_cast<uint8_t>(b);
  return static_cast<uint8_t>(c);
}

}  // namespace

void write_png(const std::string& path, const PngImage& image) {
  if (image.width <= 0 || image.height <= 0 ||
      (image.channels != 1 && image.channels != 3) ||
      image.pixels.size() != static_cast<size_t>(image.width) * image.height * image.channels)
    throw std::invalid_argument("write_png: malformed image buffer");

  std::vector<uint8_t> ihdr;
  put_u32(ihdr, static_cast<uint32_t>(image.width));
  put_u32(ihdr, static_cast<uint32_t>(image.height));
  ihdr.push_back(8);                                       // bit depth
  ihdr.push_back(image.channels == 1 ? 0 : 2);             // color type
  ihdr.push_back(0);                                       // compression
  ihdr.push_back(0);                                       // filter
  ihdr.push_back(0);                                       // no interlace

  // Filter type 0 (None) on every scanline.
  const size_t stride = static_cast<size_t>(image.width) * image.channels;
  std::vector<uint8_t> raw;
  raw.reserve((stride + 1) * image.height);
  for (int y = 0; y < image.height; ++y) {
    raw.push_back(0);
    const uint8_t* row = image.pixels.data() + y * stride;
    raw.insert(raw.end(), row, row + stride);
  }

  std::vector<uint8_t> file = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  append_chunk(file, "IHDR", ihdr);
  append_chunk(file, "IDAT", zlib_compress(raw));
  append_chunk(file, "IEND", {});

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_png: cannot open " + path);
  out.write(reinterpret_cast<const char*>(file.data()), static_cast<std::streamsize>(file.size()));
  if (!out) throw std::runtime_error("write_png: write failed for " + path);
}

PngImage read_png(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_png: cannot open " + path);
  std::vector<uint8_t> file((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());

  static const uint8_t kSig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  if (file.size() < 8 || std::memcmp(file.data(), kSig, 8) != 0)
    throw std::runtime_error("read_png: not a PNG file: " + path);

  PngImage image;
  std::vector<uint8_t> idat;
  size_t pos = 8;
  bool saw_ihdr = false, saw_iend = false;
  while (pos + 12 <= file.size() && !saw_iend) {
    const uint32_t len = get_u32(file.data() + pos);
    if (pos + 12 + len > file.size()) throw std::runtime_error("read_png: truncated chunk");
    const char* type = reinterpret_cast<const char*>(file.data() + pos + 4);
    const uint8_t* data = file.data() + pos + 8;
    const uint32_t crc = get_u32(file.data() + pos + 8 + len);
    const uint32_t actual =
        static_cast<uint32_t>(::crc32(0, file.data() + pos + 4, static_cast<uInt>(len + 4)));
    if (crc != actual) throw std::runtime_error("read_png: chunk CRC mismatch");

    if (std::memcmp(type, "IHDR", 4) == 0) {
      if (len != 13) throw std::runtime_error("read_png: bad IHDR");
      image.width = static_cast<int>(get_u32(data));
      image.height = static_cast<int>(get_u32(data + 4));
      const int bit_depth = data[8], color_type = data[9], interlace = data[12];
      if (bit_depth != 8 || (color_type != 0 && color_type != 2) || interlace != 0)
        throw std::runtime_error("read_png: unsupported format (need 8-bit gray/RGB): " + path);
      image.channels = color_type == 0 ? 1 : 3;
      saw_ihdr = true;
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), data, data + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      saw_iend = true;
    }
    pos += 12 + len;
  }
  if (!saw_ihdr || !saw_iend || image.width <= 0 || image.height <= 0)
    throw std::runtime_error("read_png: malformed PNG: " + path);

  const size_t stride = static_cast<size_t>(image.width) * image.channels;
  const std::vector<uint8_t> raw = zlib_decompress(idat, (stride + 1) * image.height);

  image.pixels.assign(stride * image.height, 0);
  const int bpp = image.channels;
  for (int y = 0; y < image.height; ++y) {
    const uint8_t filter = raw[y * (stride + 1)];
    const uint8_t* src = raw.data() + y * (stride + 1) + 1;
    uint8_t* dst = image.pixels.data() + y * stride;
    const uint8_t* prev = y > 0 ? image.pixels.data() + (y - 1) * stride : nullptr;
    for (size_t x = 0; x < stride; ++x) {
      const int a = x >= static_cast<size_t>(bpp) ? dst[x - bpp] : 0;
      const int b = prev ? prev[x] : 0;
      const int c = (prev && x >= static_cast<size_t>(bpp)) ? prev[x - bpp] : 0;
      int v = src[x];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: v += paeth(a, b, c); break;
        default: throw std::runtime_error("read_png: unknown filter type");
      }
      dst[x] = static_cast<uint8_t>(v);
    }
  }
  return image;
}

}  // namespace sgs
