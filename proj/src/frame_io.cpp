#include "pmvc/frame_io.hpp"

#include <zlib.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "pmvc/error.hpp"

namespace pmvc {
namespace {

namespace fs = std::filesystem;

std::string frame_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%04d.rgb", index);
  return buf;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::kIo, "cannot open " + path);
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  return data;
}

void write_file(const std::string& path, const std::uint8_t* data,
                std::size_t n) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorKind::kIo, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n));
  require(out.good(), ErrorKind::kIo, "write failed for " + path);
}

// Planar file layout <-> the interleaved tensor layout used internally.
Tensor frame_from_planar(const std::vector<std::uint8_t>& planar, int h, int w) {
  require(planar.size() == static_cast<std::size_t>(h) * w * 3, ErrorKind::kFormat,
          "frame file has wrong size");
  Tensor f({h, w, 3});
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (std::size_t px = 0; px < plane; ++px)
    for (int c = 0; c < 3; ++c)
      f.data()[px * 3 + c] = sample_from_byte(planar[plane * c + px]);
  return f;
}

std::vector<std::uint8_t> frame_to_planar(const Tensor& f) {
  const std::size_t plane = static_cast<std::size_t>(f.dim(0)) * f.dim(1);
  std::vector<std::uint8_t> planar(plane * 3);
  for (std::size_t px = 0; px < plane; ++px)
    for (int c = 0; c < 3; ++c)
      planar[plane * c + px] = byte_from_sample(f.data()[px * 3 + c]);
  return planar;
}

// --- PNG helpers -----------------------------------------------------------

constexpr std::uint8_t kPngSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};

void put_u32_be(std::vector<std::uint8_t>& v, std::uint32_t x) {
  v.push_back(static_cast<std::uint8_t>(x >> 24));
  v.push_back(static_cast<std::uint8_t>(x >> 16));
  v.push_back(static_cast<std::uint8_t>(x >> 8));
  v.push_back(static_cast<std::uint8_t>(x));
}

std::uint32_t get_u32_be(const std::uint8_t* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) |
         (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) | p[3];
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                  const std::uint8_t* data, std::size_t n) {
  put_u32_be(out, static_cast<std::uint32_t>(n));
  const std::size_t start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data, data + n);
  const std::uint32_t crc = static_cast<std::uint32_t>(
      crc32(0, out.data() + start, static_cast<uInt>(4 + n)));
  put_u32_be(out, crc);
}

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

}  // namespace

Video load_sequence(const std::string& dir) {
  const std::string desc_path = (fs::path(dir) / "sequence.json").string();
  std::ifstream in(desc_path);
  require(in.good(), ErrorKind::kIo, "cannot open " + desc_path);
  nlohmann::json desc;
  try {
    in >> desc;
  } catch (const std::exception& e) {
    fail(ErrorKind::kFormat, "bad sequence descriptor: " + std::string(e.what()));
  }
  require(desc.contains("width") && desc.contains("height") &&
              desc.contains("frames"),
          ErrorKind::kFormat, "descriptor must define width, height, frames");
  Video v;
  v.width = desc["width"].get<int>();
  v.height = desc["height"].get<int>();
  const int count = desc["frames"].get<int>();
  require(v.width > 0 && v.height > 0 && count > 0, ErrorKind::kFormat,
          "descriptor fields must be positive");
  v.frames.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const std::string fp = (fs::path(dir) / frame_name(i)).string();
    v.frames.push_back(frame_from_planar(read_file(fp), v.height, v.width));
  }
  return v;
}

void save_sequence(const std::string& dir, const Video& video) {
  require(!video.frames.empty(), ErrorKind::kContract, "empty video");
  std::error_code ec;
  fs::create_directories(dir, ec);
  nlohmann::json desc;
  desc["width"] = video.width;
  desc["height"] = video.height;
  desc["frames"] = static_cast<int>(video.frames.size());
  const std::string desc_path = (fs::path(dir) / "sequence.json").string();
  std::ofstream out(desc_path, std::ios::trunc);
  require(out.good(), ErrorKind::kIo, "cannot write " + desc_path);
  out << desc.dump(2) << "\n";
  for (std::size_t i = 0; i < video.frames.size(); ++i) {
    const Tensor& f = video.frames[i];
    require(f.dim(0) == video.height && f.dim(1) == video.width,
            ErrorKind::kDimension, "frame shape differs from descriptor");
    const auto planar = frame_to_planar(f);
    write_file((fs::path(dir) / frame_name(static_cast<int>(i))).string(),
               planar.data(), planar.size());
  }
}

Tensor load_png(const std::string& path) {
  const auto file = read_file(path);
  require(file.size() > 8 && std::memcmp(file.data(), kPngSig, 8) == 0,
          ErrorKind::kFormat, "not a PNG file");
  int w = 0, h = 0, bit_depth = 0, color_type = 0;
  std::vector<std::uint8_t> idat;
  std::size_t pos = 8;
  bool saw_ihdr = false, saw_iend = false;
  while (pos + 8 <= file.size() && !saw_iend) {
    const std::uint32_t len = get_u32_be(&file[pos]);
    require(pos + 12 + len <= file.size(), ErrorKind::kFormat,
            "truncated PNG chunk");
    const char* type = reinterpret_cast<const char*>(&file[pos + 4]);
    const std::uint8_t* data = &file[pos + 8];
    if (std::memcmp(type, "IHDR", 4) == 0) {
      require(len == 13, ErrorKind::kFormat, "bad IHDR");
      w = static_cast<int>(get_u32_be(data));
      h = static_cast<int>(get_u32_be(data + 4));
      bit_depth = data[8];
      color_type = data[9];
      require(data[12] == 0, ErrorKind::kFormat, "interlaced PNG unsupported");
      require(bit_depth == 8 && (color_type == 2 || color_type == 6),
              ErrorKind::kFormat, "only 8-bit RGB/RGBA PNG supported");
      saw_ihdr = true;
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), data, data + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      saw_iend = true;
    }
    pos += 12 + len;
  }
  require(saw_ihdr && !idat.empty() && w > 0 && h > 0, ErrorKind::kFormat,
          "PNG missing IHDR or IDAT");

  const int bpp = color_type == 6 ? 4 : 3;
  const std::size_t stride = static_cast<std::size_t>(w) * bpp;
  std::vector<std::uint8_t> raw(static_cast<std::size_t>(h) * (stride + 1));
  uLongf raw_len = static_cast<uLongf>(raw.size());
  const int zrc = uncompress(raw.data(), &raw_len, idat.data(),
                             static_cast<uLong>(idat.size()));
  require(zrc == Z_OK && raw_len == raw.size(), ErrorKind::kFormat,
          "PNG pixel data corrupt");

  std::vector<std::uint8_t> pixels(static_cast<std::size_t>(h) * stride);
  for (int y = 0; y < h; ++y) {
    const std::uint8_t filter = raw[static_cast<std::size_t>(y) * (stride + 1)];
    const std::uint8_t* src =
        &raw[static_cast<std::size_t>(y) * (stride + 1) + 1];
    std::uint8_t* dst = &pixels[static_cast<std::size_t>(y) * stride];
    const std::uint8_t* up =
        y > 0 ? &pixels[static_cast<std::size_t>(y - 1) * stride] : nullptr;
    for (std::size_t x = 0; x < stride; ++x) {
      const int a = x >= static_cast<std::size_t>(bpp) ? dst[x - bpp] : 0;
      const int b = up ? up[x] : 0;
      const int c = (up && x >= static_cast<std::size_t>(bpp)) ? up[x - bpp] : 0;
      int v = src[x];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: v += paeth(a, b, c); break;
        default: fail(ErrorKind::kFormat, "unknown PNG filter type");
      }
      dst[x] = static_cast<std::uint8_t>(v & 0xFF);
    }
  }

  Tensor f({h, w, 3});
  for (std::size_t px = 0; px < static_cast<std::size_t>(h) * w; ++px)
    for (int c = 0; c < 3; ++c)
      f.data()[px * 3 + c] = sample_from_byte(pixels[px * bpp + c]);
  return f;
}

void save_png(const std::string& path, const Tensor& frame) {
  require(frame.rank() == 3 && frame.dim(2) == 3, ErrorKind::kDimension,
          "expected an RGB frame tensor");
  const int h = frame.dim(0), w = frame.dim(1);
  const auto rgb = frame_to_rgb(frame);
  const std::size_t stride = static_cast<std::size_t>(w) * 3;
  std::vector<std::uint8_t> raw(static_cast<std::size_t>(h) * (stride + 1));
  for (int y = 0; y < h; ++y) {
    raw[static_cast<std::size_t>(y) * (stride + 1)] = 0;  // filter: none
    std::memcpy(&raw[static_cast<std::size_t>(y) * (stride + 1) + 1],
                &rgb[static_cast<std::size_t>(y) * stride], stride);
  }
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> compressed(bound);
  const int zrc = compress2(compressed.data(), &bound, raw.data(),
                            static_cast<uLong>(raw.size()), 6);
  require(zrc == Z_OK, ErrorKind::kIo, "PNG compression failed");
  compressed.resize(bound);

  std::vector<std::uint8_t> out(kPngSig, kPngSig + 8);
  std::uint8_t ihdr[13];
  ihdr[0] = static_cast<std::uint8_t>(w >> 24);
  ihdr[1] = static_cast<std::uint8_t>(w >> 16);
  ihdr[2] = static_cast<std::uint8_t>(w >> 8);
  ihdr[3] = static_cast<std::uint8_t>(w);
  ihdr[4] = static_cast<std::uint8_t>(h >> 24);
  ihdr[5] = static_cast<std::uint8_t>(h >> 16);
  ihdr[6] = static_cast<std::uint8_t>(h >> 8);
  ihdr[7] = static_cast<std::uint8_t>(h);
  ihdr[8] = 8;   // bit depth
  ihdr[9] = 2;   // color type: RGB
  ihdr[10] = 0;  // compression
  ihdr[11] = 0;  // filter
  ihdr[12] = 0;  // interlace
  append_chunk(out, "IHDR", ihdr, sizeof(ihdr));
  append_chunk(out, "IDAT", compressed.data(), compressed.size());
  append_chunk(out, "IEND", nullptr, 0);
  write_file(path, out.data(), out.size());
}

}  // namespace pmvc
