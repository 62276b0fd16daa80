#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

#include "jse/spectral.hpp"

namespace jse {

namespace {

constexpr std::array<char, 4> kMagic = {'N', 'N', 'J', 'T'};
constexpr std::uint8_t kVersion = 1;
constexpr std::uint8_t kFloat32 = 0;

template <typename T>
void put_le(std::ostream& os, T v) {
  std::array<char, sizeof(T)> buf{};
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff);
  os.write(buf.data(), buf.size());
}

template <typename T>
T get_le(std::istream& is) {
  std::array<unsigned char, sizeof(T)> buf{};
  is.read(reinterpret_cast<char*>(buf.data()), buf.size());
  if (!is) throw InvalidInput("NNJT: unexpected end of data");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return static_cast<T>(v);
}

}  // namespace

std::size_t Tensor::numel() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

void write_tensor(std::ostream& os, const Tensor& t) {
  if (t.dims.size() > 255) throw InvalidInput("NNJT: too many dimensions");
  if (t.numel() != t.data.size()) throw InvalidInput("NNJT: payload does not match dims");
  os.write(kMagic.data(), kMagic.size());
  put_le<std::uint8_t>(os, kVersion);
  put_le<std::uint8_t>(os, kFloat32);
  put_le<std::uint8_t>(os, static_cast<std::uint8_t>(t.dims.size()));
  for (auto d : t.dims) put_le<std::uint32_t>(os, d);
  for (float v : t.data) put_le<std::uint32_t>(os, std::bit_cast<std::uint32_t>(v));
  if (!os) throw IoError("NNJT: write failed");
}

Tensor read_tensor(std::istream& is) {
  std::array<char, 4> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kMagic) throw InvalidInput("NNJT: bad magic");
  if (get_le<std::uint8_t>(is) != kVersion) throw InvalidInput("NNJT: unsupported version");
  if (get_le<std::uint8_t>(is) != kFloat32) throw InvalidInput("NNJT: unsupported dtype");
  const auto ndim = get_le<std::uint8_t>(is);
  Tensor t;
  t.dims.resize(ndim);
  std::uint64_t numel = 1;
  for (auto& d : t.dims) {
    d = get_le<std::uint32_t>(is);
    numel *= d;
    if (numel > (std::uint64_t{1} << 34)) throw InvalidInput("NNJT: tensor too large");
  }
  t.data.resize(static_cast<std::size_t>(numel));
  for (auto& v : t.data) v = std::bit_cast<float>(get_le<std::uint32_t>(is));
  return t;
}

void write_archive(const std::filesystem::path& path, const TensorArchive& archive) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  if (archive.size() > std::numeric_limits<std::uint32_t>::max()) throw InvalidInput("NNJT: too many tensors");
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(archive.size()));
  for (const auto& [name, t] : archive) {
    if (name.size() > std::numeric_limits<std::uint16_t>::max()) throw InvalidInput("NNJT: tensor name too long");
    put_le<std::uint16_t>(os, static_cast<std::uint16_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_tensor(os, t);
  }
  os.flush();
  if (!os) throw IoError("write failed: " + path.string());
}

TensorArchive read_archive(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  TensorArchive out;
  const auto count = get_le<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = get_le<std::uint16_t>(is);
    std::string name(len, '\0');
    is.read(name.data(), len);
    if (!is) throw InvalidInput("NNJT: truncated tensor name");
    out.emplace_back(std::move(name), read_tensor(is));
  }
  return out;
}

const Tensor& find_tensor(const TensorArchive& archive, const std::string& name) {
  for (const auto& [n, t] : archive) {
    if (n == name) return t;
  }
  throw InvalidInput("NNJT: missing tensor '" + name + "'");
}

Tensor spectrogram_tensor(const Spectrogram& s) {
  Tensor t;
  t.dims = {static_cast<std::uint32_t>(s.frames()), static_cast<std::uint32_t>(s.bins()),
            static_cast<std::uint32_t>(s.channels()), 2};
  t.data.reserve(s.size() * 2);
  for (const Complex& v : s.raw()) {
    t.data.push_back(static_cast<float>(v.real()));
    t.data.push_back(static_cast<float>(v.imag()));
  }
  return t;
}

namespace {

Tensor complex_tensor(std::vector<std::uint32_t> dims, const std::vector<Complex>& values) {
  Tensor t;
  t.dims = std::move(dims);
  t.dims.push_back(2);
  t.data.reserve(values.size() * 2);
  for (const Complex& v : values) {
    t.data.push_back(static_cast<float>(v.real()));
    t.data.push_back(static_cast<float>(v.imag()));
  }
  return t;
}

}  // namespace

Tensor echo_filter_tensor(const EchoFilter& h) {
  return complex_tensor({static_cast<std::uint32_t>(h.bins()), static_cast<std::uint32_t>(h.taps()),
                         static_cast<std::uint32_t>(h.channels())},
                        h.raw());
}

Tensor dereverb_filter_tensor(const DereverbFilter& g) {
  const auto M = static_cast<std::uint32_t>(g.channels());
  return complex_tensor({static_cast<std::uint32_t>(g.bins()), static_cast<std::uint32_t>(g.taps()), M, M}, g.raw());
}

}  // namespace jse
