#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "jse/dsp.hpp"

namespace jse {
namespace {

std::uint32_t le32(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}
std::uint16_t le16(const unsigned char* p) { return std::uint16_t(p[0] | (p[1] << 8)); }

void put32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff),
                     char((v >> 24) & 0xff)};
  os.write(b, 4);
}
void put16(std::ostream& os, std::uint16_t v) {
  const char b[2] = {char(v & 0xff), char((v >> 8) & 0xff)};
  os.write(b, 2);
}

constexpr std::uint16_t kPcm = 1;
constexpr std::uint16_t kFloat = 3;
constexpr std::uint16_t kExtensible = 0xFFFE;

}  // namespace

WavData read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw InvalidInput(path.string() + " is not a RIFF/WAVE file");
  }
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t len = le32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + len > bytes.size()) throw InvalidInput(path.string() + ": truncated chunk");
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (len < 16) throw InvalidInput(path.string() + ": short fmt chunk");
      format = le16(bytes.data() + body);
      channels = le16(bytes.data() + body + 2);
      rate = le32(bytes.data() + body + 4);
      bits = le16(bytes.data() + body + 14);
      if (format == kExtensible && len >= 26) format = le16(bytes.data() + body + 24);
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_len = len;
    }
    pos = body + len + (len & 1u);
  }
  if (channels == 0 || data == nullptr) throw InvalidInput(path.string() + ": missing fmt or data chunk");
  const bool pcm16 = format == kPcm && bits == 16;
  const bool f32 = format == kFloat && bits == 32;
  if (!pcm16 && !f32) throw InvalidInput(path.string() + ": only 16-bit PCM and float32 are supported");

  const std::size_t width = bits / 8;
  const std::size_t frames = data_len / (width * channels);
  WavData out{Signal(channels, frames), static_cast<double>(rate)};
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t m = 0; m < channels; ++m) {
      const unsigned char* p = data + (t * channels + m) * width;
      if (pcm16) {
        out.signal(m, t) = static_cast<std::int16_t>(le16(p)) / 32768.0;
      } else {
        const std::uint32_t u = le32(p);
        float v;
        std::memcpy(&v, &u, 4);
        out.signal(m, t) = v;
      }
    }
  }
  return out;
}

Signal read_wav(const std::filesystem::path& path, double expected_rate) {
  WavData w = read_wav(path);
  if (w.sample_rate != expected_rate) {
    throw InvalidInput(path.string() + ": sample rate " + std::to_string(w.sample_rate) +
                       " does not match expected " + std::to_string(expected_rate));
  }
  return std::move(w.signal);
}

void write_wav(const std::filesystem::path& path, const Signal& signal, double sample_rate) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  const std::uint16_t channels = static_cast<std::uint16_t>(signal.channels());
  const std::uint32_t frames = static_cast<std::uint32_t>(signal.samples());
  const std::uint32_t data_len = frames * channels * 4;
  os.write("RIFF", 4);
  put32(os, 36 + data_len);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  put32(os, 16);
  put16(os, kFloat);
  put16(os, channels);
  put32(os, static_cast<std::uint32_t>(sample_rate));
  put32(os, static_cast<std::uint32_t>(sample_rate) * channels * 4);
  put16(os, static_cast<std::uint16_t>(channels * 4));
  put16(os, 32);
  os.write("data", 4);
  put32(os, data_len);
  for (std::size_t t = 0; t < signal.samples(); ++t) {
    for (std::size_t m = 0; m < signal.channels(); ++m) {
      const float v = static_cast<float>(signal(m, t));
      std::uint32_t u;
      std::memcpy(&u, &v, 4);
      put32(os, u);
    }
  }
  if (!os) throw IoError("failed writing " + path.string());
}

}  // namespace jse
