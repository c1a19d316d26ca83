#include "spectralprior/image.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "spectralprior/error.hpp"
#include "spectralprior/spectral.hpp"

namespace spectralprior::io {
namespace {

constexpr std::array<std::uint8_t, 8> kPngSignature{0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

// --- PNM ---------------------------------------------------------------------

class PnmReader {
 public:
  explicit PnmReader(std::span<const std::uint8_t> b) : bytes_(b) {}

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

  std::size_t number(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    last_start_ = start;
    std::size_t v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_] - '0');
      if (v > (1u << 24)) throw IoError(std::string("pnm: ") + what + " too large", start);
      ++pos_;
    }
    if (pos_ == start) throw IoError(std::string("pnm: expected ") + what, start);
    return v;
  }

  std::size_t pos_ = 0;
  std::size_t last_start_ = 0;
  std::span<const std::uint8_t> bytes_;
};

ImageBuffer decode_pnm(std::span<const std::uint8_t> bytes) {
  ImageBuffer img;
  img.channels = bytes[1] == '5' ? 1 : 3;
  PnmReader r(bytes);
  r.pos_ = 2;
  img.width = r.number("width");
  img.height = r.number("height");
  const std::size_t maxval = r.number("maxval");
  const std::size_t maxval_at = r.last_start_;
  if (maxval != 255) {
    throw IoError("pnm: unsupported maxval " + std::to_string(maxval) + " (only 8-bit, maxval 255)", maxval_at);
  }
  if (img.width == 0 || img.height == 0) throw IoError("pnm: zero image extent", maxval_at);
  if (r.pos_ >= bytes.size() || !std::isspace(bytes[r.pos_])) throw IoError("pnm: expected whitespace after maxval", r.pos_);
  ++r.pos_;
  const std::size_t n = img.width * img.height * img.channels;
  if (bytes.size() - r.pos_ < n) {
    throw IoError("pnm: truncated raster, need " + std::to_string(n) + " bytes", bytes.size());
  }
  img.samples.assign(bytes.begin() + static_cast<std::ptrdiff_t>(r.pos_),
                     bytes.begin() + static_cast<std::ptrdiff_t>(r.pos_ + n));
  return img;
}

std::vector<std::uint8_t> encode_pnm(const ImageBuffer& img) {
  const std::string header =
      std::string(img.channels == 1 ? "P5" : "P6") + "\n" + std::to_string(img.width) + " " +
      std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.samples.begin(), img.samples.end());
  return out;
}

// --- PNG ---------------------------------------------------------------------

std::uint32_t be32(std::span<const std::uint8_t> b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) | b[at + 3];
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::uint8_t paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return static_cast<std::uint8_t>(a);
  if (pb <= pc) return static_cast<std::uint8_t>(b);
  return static_cast<std::uint8_t>(c);
}

ImageBuffer decode_png(std::span<const std::uint8_t> bytes) {
  std::size_t pos = kPngSignature.size();
  std::size_t width = 0, height = 0;
  int color_type = -1;
  std::vector<std::uint8_t> palette;
  std::vector<std::uint8_t> idat;
  bool seen_end = false;
  std::size_t idat_offset = 0;

  while (!seen_end) {
    if (bytes.size() - pos < 12) throw IoError("png: truncated chunk header", pos);
    const std::uint32_t len = be32(bytes, pos);
    const std::size_t type_at = pos + 4;
    if (len > bytes.size() - pos - 12) throw IoError("png: chunk length runs past end of file", pos);
    const std::string type(bytes.begin() + static_cast<std::ptrdiff_t>(type_at),
                           bytes.begin() + static_cast<std::ptrdiff_t>(type_at + 4));
    const std::size_t data_at = type_at + 4;
    const std::uint32_t stored_crc = be32(bytes, data_at + len);
    const auto crc = static_cast<std::uint32_t>(crc32(0L, bytes.data() + type_at, len + 4));
    if (crc != stored_crc) throw IoError("png: CRC mismatch in " + type + " chunk", data_at + len);
    auto data = bytes.subspan(data_at, len);

    if (type == "IHDR") {
      if (len != 13) throw IoError("png: IHDR must be 13 bytes", pos);
      width = be32(data, 0);
      height = be32(data, 4);
      const int depth = data[8];
      color_type = data[9];
      if (width == 0 || height == 0 || width > (1u << 16) || height > (1u << 16)) {
        throw IoError("png: unsupported image extent", data_at);
      }
      if (depth != 8) throw IoError("png: unsupported bit depth " + std::to_string(depth) + " (only 8)", data_at + 8);
      if (color_type != 0 && color_type != 2 && color_type != 3 && color_type != 4 && color_type != 6) {
        throw IoError("png: invalid color type " + std::to_string(color_type), data_at + 9);
      }
      if (data[10] != 0 || data[11] != 0) throw IoError("png: unknown compression or filter method", data_at + 10);
      if (data[12] != 0) throw IoError("png: interlaced images are not supported", data_at + 12);
    } else if (color_type < 0) {
      throw IoError("png: first chunk must be IHDR", pos);
    } else if (type == "PLTE") {
      if (len % 3 != 0 || len == 0) throw IoError("png: malformed palette", pos);
      palette.assign(data.begin(), data.end());
    } else if (type == "IDAT") {
      if (idat.empty()) idat_offset = data_at;
      idat.insert(idat.end(), data.begin(), data.end());
    } else if (type == "IEND") {
      seen_end = true;
    } else if (!(type[0] & 0x20)) {
      throw IoError("png: unknown critical chunk " + type, type_at);
    }
    pos = data_at + len + 4;
  }
  if (idat.empty()) throw IoError("png: no image data", pos);
  if (color_type == 3 && palette.empty()) throw IoError("png: palette image without PLTE", pos);

  const std::size_t in_channels = color_type == 0 ? 1 : color_type == 2 ? 3 : color_type == 3 ? 1 : color_type == 4 ? 2 : 4;
  const std::size_t stride = width * in_channels;
  std::vector<std::uint8_t> raw((stride + 1) * height);
  uLongf raw_len = static_cast<uLongf>(raw.size());
  const int rc = uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size()));
  if (rc != Z_OK || raw_len != raw.size()) throw IoError("png: corrupt or short IDAT stream", idat_offset);

  std::vector<std::uint8_t> pixels(stride * height);
  for (std::size_t y = 0; y < height; ++y) {
    const std::uint8_t filter = raw[y * (stride + 1)];
    const std::uint8_t* src = raw.data() + y * (stride + 1) + 1;
    std::uint8_t* dst = pixels.data() + y * stride;
    const std::uint8_t* up = y > 0 ? dst - stride : nullptr;
    for (std::size_t i = 0; i < stride; ++i) {
      const int a = i >= in_channels ? dst[i - in_channels] : 0;
      const int b = up ? up[i] : 0;
      const int c = (up && i >= in_channels) ? up[i - in_channels] : 0;
      int v = src[i];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: v += paeth(a, b, c); break;
        default: throw IoError("png: invalid filter type " + std::to_string(filter) + " in row " + std::to_string(y), idat_offset);
      }
      dst[i] = static_cast<std::uint8_t>(v);
    }
  }

  ImageBuffer img;
  img.width = width;
  img.height = height;
  img.channels = (color_type == 0 || color_type == 4) ? 1 : 3;
  img.samples.resize(width * height * img.channels);
  for (std::size_t p = 0; p < width * height; ++p) {
    const std::uint8_t* px = pixels.data() + p * in_channels;
    if (color_type == 3) {
      if (std::size_t{px[0]} * 3 + 2 >= palette.size()) throw IoError("png: palette index out of range", idat_offset);
      for (std::size_t c = 0; c < 3; ++c) img.samples[p * 3 + c] = palette[px[0] * 3 + c];
    } else {
      for (std::size_t c = 0; c < img.channels; ++c) img.samples[p * img.channels + c] = px[c];
    }
  }
  return img;
}

void put_chunk(std::vector<std::uint8_t>& out, const char* type, std::span<const std::uint8_t> data) {
  put_be32(out, static_cast<std::uint32_t>(data.size()));
  const std::size_t start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  put_be32(out, static_cast<std::uint32_t>(crc32(0L, out.data() + start, static_cast<uInt>(data.size() + 4))));
}

std::vector<std::uint8_t> encode_png(const ImageBuffer& img) {
  std::vector<std::uint8_t> out(kPngSignature.begin(), kPngSignature.end());
  std::vector<std::uint8_t> ihdr;
  put_be32(ihdr, static_cast<std::uint32_t>(img.width));
  put_be32(ihdr, static_cast<std::uint32_t>(img.height));
  ihdr.insert(ihdr.end(), {8, static_cast<std::uint8_t>(img.channels == 1 ? 0 : 2), 0, 0, 0});
  put_chunk(out, "IHDR", ihdr);

  const std::size_t stride = img.width * img.channels;
  std::vector<std::uint8_t> raw;
  raw.reserve((stride + 1) * img.height);
  for (std::size_t y = 0; y < img.height; ++y) {
    raw.push_back(0);
    raw.insert(raw.end(), img.samples.begin() + static_cast<std::ptrdiff_t>(y * stride),
               img.samples.begin() + static_cast<std::ptrdiff_t>((y + 1) * stride));
  }
  uLongf len = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> z(len);
  if (compress2(z.data(), &len, raw.data(), static_cast<uLong>(raw.size()), Z_BEST_COMPRESSION) != Z_OK) {
    throw IoError("png: deflate failed");
  }
  z.resize(len);
  put_chunk(out, "IDAT", z);
  put_chunk(out, "IEND", {});
  return out;
}

void check_buffer(const ImageBuffer& img) {
  if (img.channels != 1 && img.channels != 3) throw ConfigError("image: channels must be 1 or 3");
  if (img.width == 0 || img.height == 0) throw ConfigError("image: zero extent");
  if (img.samples.size() != img.width * img.height * img.channels) throw ConfigError("image: sample count mismatch");
}

std::size_t mirror(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * (n - 1));
  i %= period;
  if (i < 0) i += period;
  return static_cast<std::size_t>(i < static_cast<std::ptrdiff_t>(n) ? i : period - i);
}

}  // namespace

Tensor ImageBuffer::to_tensor() const {
  check_buffer(*this);
  Tensor t({channels, height, width});
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t p = 0; p < width * height; ++p) t[c * width * height + p] = samples[p * channels + c] / 255.0;
  return t;
}

ImageBuffer ImageBuffer::from_tensor(const Tensor& t) {
  if (t.rank() != 3 || (t.dim(0) != 1 && t.dim(0) != 3)) {
    throw ShapeError("image: tensor must be [1|3,H,W], got " + spectralprior::to_string(t.shape()), "channels");
  }
  ImageBuffer img;
  img.channels = t.dim(0);
  img.height = t.dim(1);
  img.width = t.dim(2);
  img.samples.resize(t.size());
  const std::size_t n = img.width * img.height;
  for (std::size_t c = 0; c < img.channels; ++c) {
    for (std::size_t p = 0; p < n; ++p) {
      const double v = std::clamp(t[c * n + p], 0.0, 1.0);
      img.samples[p * img.channels + c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
  }
  return img;
}

ImageBuffer decode_image(std::span<const std::uint8_t> bytes) {
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '6')) return decode_pnm(bytes);
  if (bytes.size() >= 8 && std::equal(kPngSignature.begin(), kPngSignature.end(), bytes.begin())) return decode_png(bytes);
  if (bytes.size() >= 2 && bytes[0] == 'P') throw IoError("pnm: only binary P5/P6 are supported", 1);
  throw IoError("unrecognized image format", 0);
}

std::vector<std::uint8_t> encode_image(const ImageBuffer& image, ImageFormat format) {
  check_buffer(image);
  switch (format) {
    case ImageFormat::pgm:
      if (image.channels != 1) throw ConfigError("pgm output needs a single-channel image; use .ppm or .png");
      return encode_pnm(image);
    case ImageFormat::ppm:
      if (image.channels != 3) throw ConfigError("ppm output needs a 3-channel image; use .pgm or .png");
      return encode_pnm(image);
    case ImageFormat::png: return encode_png(image);
  }
  throw ConfigError("unknown image format");
}

ImageFormat format_for(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".pgm") return ImageFormat::pgm;
  if (ext == ".ppm") return ImageFormat::ppm;
  if (ext == ".png") return ImageFormat::png;
  throw ConfigError("unsupported image extension '" + ext + "' (expected .pgm, .ppm or .png)");
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

ImageBuffer load_image(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return decode_image(bytes);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what(), e.offset());
  }
}

void save_image(const ImageBuffer& image, const std::filesystem::path& path) {
  write_file(path, encode_image(image, format_for(path)));
}

PaddedImage pad_to_power_of_two(const Tensor& image) {
  if (image.rank() != 3) throw ShapeError("pad: expected [C,H,W]", "rank");
  const std::size_t C = image.dim(0), H = image.dim(1), W = image.dim(2);
  const std::size_t PH = spectral::next_power_of_two(H), PW = spectral::next_power_of_two(W);
  PaddedImage out{Tensor({C, PH, PW}), Tensor({1, PH, PW}), H, W};
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t y = 0; y < PH; ++y)
      for (std::size_t x = 0; x < PW; ++x)
        out.image[(c * PH + y) * PW + x] =
            image[(c * H + mirror(static_cast<std::ptrdiff_t>(y), H)) * W + mirror(static_cast<std::ptrdiff_t>(x), W)];
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x) out.mask[y * PW + x] = 1.0;
  return out;
}

Tensor crop(const Tensor& image, std::size_t height, std::size_t width) {
  if (image.rank() != 3 || height > image.dim(1) || width > image.dim(2) || height == 0 || width == 0) {
    throw ShapeError("crop: window exceeds image", "H/W");
  }
  const std::size_t C = image.dim(0), H = image.dim(1), W = image.dim(2);
  Tensor out({C, height, width});
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t y = 0; y < height; ++y)
      for (std::size_t x = 0; x < width; ++x) out[(c * height + y) * width + x] = image[(c * H + y) * W + x];
  return out;
}

void write_pad_sidecar(const std::filesystem::path& path, const PaddedImage& padded) {
  std::ostringstream os;
  os << "original " << padded.height << ' ' << padded.width << '\n'
     << "padded " << padded.image.dim(1) << ' ' << padded.image.dim(2) << '\n';
  const auto s = os.str();
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

std::pair<std::size_t, std::size_t> read_pad_sidecar(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  std::istringstream in(std::string(bytes.begin(), bytes.end()));
  std::string tag;
  std::size_t h = 0, w = 0;
  if (!(in >> tag >> h >> w) || tag != "original" || h == 0 || w == 0) {
    throw IoError(path.string() + ": malformed pad sidecar", static_cast<std::size_t>(std::max<std::streamoff>(0, in.tellg())));
  }
  return {h, w};
}

Tensor load_mask(const std::filesystem::path& path) {
  const auto img = load_image(path);
  Tensor m({1, img.height, img.width});
  for (std::size_t p = 0; p < img.width * img.height; ++p) {
    double v = 0.0;
    for (std::size_t c = 0; c < img.channels; ++c) v += img.samples[p * img.channels + c];
    m[p] = v / (255.0 * static_cast<double>(img.channels)) >= 0.5 ? 1.0 : 0.0;
  }
  return m;
}

}  // namespace spectralprior::io
