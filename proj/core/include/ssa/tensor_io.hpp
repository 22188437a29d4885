#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "ssa/tensor.hpp"

namespace ssa {

// "SSAT" golden-tensor layout, all integers little-endian:
//   bytes 0..3   magic "SSAT"
//   byte  4      version (1)
//   byte  5      dtype (0 = f32, 1 = f64)
//   bytes 6..25  u32 n, c, f, h, w
//   then n*c*f*h*w raw little-endian values in row-major order.

enum class DType : std::uint8_t { F32 = 0, F64 = 1 };

struct SsatHeader {
  DType dtype = DType::F32;
  Shape5 shape;
};

inline constexpr std::uint8_t kSsatVersion = 1;

template <typename T>
void write_ssat(std::ostream& out, const FeatureMap<T>& tensor);

SsatHeader read_ssat_header(std::istream& in);

/// Reads one tensor. Values stored with the other dtype are converted to T.
template <typename T>
FeatureMap<T> read_ssat(std::istream& in);

template <typename T>
void save_ssat(const std::filesystem::path& path, const FeatureMap<T>& tensor);

template <typename T>
FeatureMap<T> load_ssat(const std::filesystem::path& path);

// Little-endian primitives shared by the other container formats.
namespace io {
void write_u8(std::ostream& out, std::uint8_t v);
void write_u32(std::ostream& out, std::uint32_t v);
std::uint8_t read_u8(std::istream& in, const char* what);
std::uint32_t read_u32(std::istream& in, const char* what);
void write_magic(std::ostream& out, const char (&magic)[5]);
void expect_magic(std::istream& in, const char (&magic)[5]);
}  // namespace io

}  // namespace ssa
