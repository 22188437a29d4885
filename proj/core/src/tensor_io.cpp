#include "ssa/tensor_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

#include "ssa/errors.hpp"

namespace ssa {
namespace io {

void write_u8(std::ostream& out, std::uint8_t v) { out.put(static_cast<char>(v)); }

void write_u32(std::ostream& out, std::uint32_t v) {
  std::array<char, 4> bytes{};
  for (int i = 0; i < 4; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFFu);
  out.write(bytes.data(), 4);
}

std::uint8_t read_u8(std::istream& in, const char* what) {
  const int c = in.get();
  if (c == std::char_traits<char>::eof()) {
    throw FormatError(std::string("truncated file while reading ") + what);
  }
  return static_cast<std::uint8_t>(c);
}

std::uint32_t read_u32(std::istream& in, const char* what) {
  std::array<unsigned char, 4> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), 4);
  if (in.gcount() != 4) throw FormatError(std::string("truncated file while reading ") + what);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
  return v;
}

void write_magic(std::ostream& out, const char (&magic)[5]) { out.write(magic, 4); }

void expect_magic(std::istream& in, const char (&magic)[5]) {
  char got[4] = {};
  in.read(got, 4);
  if (in.gcount() != 4 || std::memcmp(got, magic, 4) != 0) {
    throw FormatError(std::string("bad magic, expected \"") + magic + "\"");
  }
}

}  // namespace io

namespace {

template <typename U>
using Bits = std::conditional_t<sizeof(U) == 4, std::uint32_t, std::uint64_t>;

template <typename U>
void write_values(std::ostream& out, std::span<const U> values) {
  std::vector<char> buffer(values.size() * sizeof(U));
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<Bits<U>>(values[i]);
    for (std::size_t b = 0; b < sizeof(U); ++b) {
      buffer[i * sizeof(U) + b] = static_cast<char>((bits >> (8 * b)) & 0xFFu);
    }
  }
  out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
}

template <typename U>
std::vector<U> read_values(std::istream& in, std::size_t count) {
  std::vector<unsigned char> buffer(count * sizeof(U));
  in.read(reinterpret_cast<char*>(buffer.data()), static_cast<std::streamsize>(buffer.size()));
  if (static_cast<std::size_t>(in.gcount()) != buffer.size()) {
    throw FormatError("truncated SSAT payload: expected " + std::to_string(count) + " values");
  }
  std::vector<U> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    Bits<U> bits = 0;
    for (std::size_t b = 0; b < sizeof(U); ++b) {
      bits |= static_cast<Bits<U>>(buffer[i * sizeof(U) + b]) << (8 * b);
    }
    values[i] = std::bit_cast<U>(bits);
  }
  return values;
}

std::uint32_t checked_dim(std::size_t d) {
  if (d > std::numeric_limits<std::uint32_t>::max()) {
    throw DimensionError("dimension " + std::to_string(d) + " does not fit the SSAT header");
  }
  return static_cast<std::uint32_t>(d);
}

}  // namespace

template <typename T>
void write_ssat(std::ostream& out, const FeatureMap<T>& tensor) {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  io::write_magic(out, "SSAT");
  io::write_u8(out, kSsatVersion);
  io::write_u8(out, static_cast<std::uint8_t>(std::is_same_v<T, float> ? DType::F32 : DType::F64));
  const Shape5& s = tensor.shape();
  for (std::size_t d : {s.n, s.c, s.f, s.h, s.w}) io::write_u32(out, checked_dim(d));
  write_values<T>(out, tensor.data());
  if (!out) throw FormatError("failed to write SSAT tensor");
}

SsatHeader read_ssat_header(std::istream& in) {
  io::expect_magic(in, "SSAT");
  const std::uint8_t version = io::read_u8(in, "SSAT version");
  if (version != kSsatVersion) {
    throw FormatError("unsupported SSAT version " + std::to_string(version));
  }
  const std::uint8_t dtype = io::read_u8(in, "SSAT dtype");
  if (dtype > 1) throw FormatError("unknown SSAT dtype " + std::to_string(dtype));
  SsatHeader header;
  header.dtype = static_cast<DType>(dtype);
  header.shape.n = io::read_u32(in, "SSAT dim n");
  header.shape.c = io::read_u32(in, "SSAT dim c");
  header.shape.f = io::read_u32(in, "SSAT dim f");
  header.shape.h = io::read_u32(in, "SSAT dim h");
  header.shape.w = io::read_u32(in, "SSAT dim w");
  return header;
}

template <typename T>
FeatureMap<T> read_ssat(std::istream& in) {
  const SsatHeader header = read_ssat_header(in);
  const std::size_t count = header.shape.numel();
  if (header.dtype == DType::F32) {
    auto values = read_values<float>(in, count);
    return FeatureMap<T>(header.shape, std::vector<T>(values.begin(), values.end()));
  }
  auto values = read_values<double>(in, count);
  return FeatureMap<T>(header.shape, std::vector<T>(values.begin(), values.end()));
}

template <typename T>
void save_ssat(const std::filesystem::path& path, const FeatureMap<T>& tensor) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  write_ssat(out, tensor);
}

template <typename T>
FeatureMap<T> load_ssat(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_ssat<T>(in);
}

template void write_ssat<float>(std::ostream&, const FeatureMap<float>&);
template void write_ssat<double>(std::ostream&, const FeatureMap<double>&);
template FeatureMap<float> read_ssat<float>(std::istream&);
template FeatureMap<double> read_ssat<double>(std::istream&);
template void save_ssat<float>(const std::filesystem::path&, const FeatureMap<float>&);
template void save_ssat<double>(const std::filesystem::path&, const FeatureMap<double>&);
template FeatureMap<float> load_ssat<float>(const std::filesystem::path&);
template FeatureMap<double> load_ssat<double>(const std::filesystem::path&);

}  // namespace ssa
