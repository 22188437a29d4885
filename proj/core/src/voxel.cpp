#include "ssa/voxel.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include "ssa/errors.hpp"
#include "ssa/tensor_io.hpp"

namespace ssa {

std::size_t VoxelGrid::count() const {
  std::size_t n = 0;
  for (std::uint8_t v : occupancy) n += v != 0;
  return n;
}

// SSAV I/O --------------------------------------------------------------------

void write_voxels(std::ostream& out, const VoxelDataset& data) {
  io::write_magic(out, "SSAV");
  io::write_u32(out, static_cast<std::uint32_t>(data.grids.size()));
  io::write_u32(out, data.classes);
  std::vector<char> packed(kVoxelPackedBytes);
  for (const VoxelGrid& g : data.grids) {
    if (g.occupancy.size() != kVoxelCount) throw DimensionError("voxel grid must hold 32^3 cells");
    io::write_u32(out, g.label);
    std::fill(packed.begin(), packed.end(), 0);
    for (std::size_t i = 0; i < kVoxelCount; ++i) {
      if (g.occupancy[i]) packed[i / 8] = static_cast<char>(packed[i / 8] | (1u << (i % 8)));
    }
    out.write(packed.data(), static_cast<std::streamsize>(packed.size()));
  }
  if (!out) throw FormatError("failed to write voxel container");
}

VoxelDataset read_voxels(std::istream& in) {
  io::expect_magic(in, "SSAV");
  VoxelDataset data;
  const std::uint32_t count = io::read_u32(in, "voxel count");
  data.classes = io::read_u32(in, "class count");
  data.grids.reserve(count);
  std::vector<char> packed(kVoxelPackedBytes);
  for (std::uint32_t r = 0; r < count; ++r) {
    VoxelGrid g;
    g.label = io::read_u32(in, "voxel label");
    if (g.label >= data.classes) {
      throw FormatError("voxel record " + std::to_string(r) + " has label " +
                        std::to_string(g.label) + " >= n_classes " + std::to_string(data.classes));
    }
    if (!in.read(packed.data(), static_cast<std::streamsize>(packed.size()))) {
      throw FormatError("truncated voxel record " + std::to_string(r) + " of " + std::to_string(count));
    }
    for (std::size_t i = 0; i < kVoxelCount; ++i) {
      g.occupancy[i] = (static_cast<unsigned char>(packed[i / 8]) >> (i % 8)) & 1u;
    }
    data.grids.push_back(std::move(g));
  }
  return data;
}

void save_voxels(const std::filesystem::path& path, const VoxelDataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  write_voxels(out, data);
}

VoxelDataset load_voxels(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_voxels(in);
}

// Augmentation ------------------------------------------------------------------

VoxelGrid rotate_azimuth(const VoxelGrid& grid, double degrees) {
  const long quarter = std::lround(degrees / 90.0);
  const bool exact = std::abs(degrees - 90.0 * static_cast<double>(quarter)) < 1e-9;
  VoxelGrid out;
  out.label = grid.label;
  constexpr std::size_t n = kVoxelSide;
  if (exact) {
    const long q = ((quarter % 4) + 4) % 4;
    for (std::size_t f = 0; f < n; ++f) {
      for (std::size_t h = 0; h < n; ++h) {
        for (std::size_t w = 0; w < n; ++w) {
          std::size_t sh = h, sw = w;
          switch (q) {
            case 1: sh = n - 1 - w; sw = h; break;
            case 2: sh = n - 1 - h; sw = n - 1 - w; break;
            case 3: sh = w; sw = n - 1 - h; break;
            default: break;
          }
          out.at(f, h, w) = grid.at(f, sh, sw);
        }
      }
    }
    return out;
  }
  // Inverse-map every destination cell centre back into the source grid.
  const double rad = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(rad), s = std::sin(rad);
  const double mid = static_cast<double>(n) / 2.0;
  for (std::size_t h = 0; h < n; ++h) {
    for (std::size_t w = 0; w < n; ++w) {
      const double dh = static_cast<double>(h) + 0.5 - mid;
      const double dw = static_cast<double>(w) + 0.5 - mid;
      const double src_h = c * dh - s * dw + mid;
      const double src_w = s * dh + c * dw + mid;
      const double fh = std::floor(src_h), fw = std::floor(src_w);
      if (fh < 0 || fw < 0 || fh >= static_cast<double>(n) || fw >= static_cast<double>(n)) continue;
      const auto ih = static_cast<std::size_t>(fh), iw = static_cast<std::size_t>(fw);
      for (std::size_t f = 0; f < n; ++f) out.at(f, h, w) = grid.at(f, ih, iw);
    }
  }
  return out;
}

VoxelGrid augment_voxels(const VoxelGrid& grid, const VoxelAugmentation& p) {
  constexpr auto n = static_cast<long>(kVoxelSide);
  VoxelGrid rotated = rotate_azimuth(grid, 30.0 * static_cast<double>(p.rotation_steps % 12));
  VoxelGrid out;
  out.label = grid.label;
  for (long f = 0; f < n; ++f) {
    for (long h = 0; h < n; ++h) {
      for (long w = 0; w < n; ++w) {
        const long sf = f - p.shift[0], sh = h - p.shift[1];
        long sw = w - p.shift[2];
        if (sf < 0 || sh < 0 || sw < 0 || sf >= n || sh >= n || sw >= n) continue;
        if (p.flip) sw = n - 1 - sw;
        out.at(static_cast<std::size_t>(f), static_cast<std::size_t>(h), static_cast<std::size_t>(w)) =
            rotated.at(static_cast<std::size_t>(sf), static_cast<std::size_t>(sh),
                       static_cast<std::size_t>(sw));
      }
    }
  }
  if (p.salt > 0) {
    Rng rng(p.noise_seed);
    for (auto& v : out.occupancy) {
      if (rng.bernoulli(p.salt)) v = 1;
    }
  }
  return out;
}

VoxelAugmentation draw_augmentation(Rng& rng, const AugmentOptions& o) {
  VoxelAugmentation p;
  p.rotation_steps = o.orientations > 1 ? static_cast<std::size_t>(rng.below(o.orientations)) : 0;
  const auto span = static_cast<std::uint64_t>(2 * o.max_shift + 1);
  for (int& s : p.shift) s = static_cast<int>(rng.below(span)) - o.max_shift;
  p.flip = rng.bernoulli(o.flip_probability);
  p.salt = o.salt;
  p.noise_seed = rng.next();
  return p;
}

VoxelGrid augment_voxels(const VoxelGrid& grid, std::uint64_t seed, const AugmentOptions& options) {
  Rng rng(seed);
  return augment_voxels(grid, draw_augmentation(rng, options));
}

FeatureMap<float> scale_voxels(const VoxelGrid& grid) {
  FeatureMap<float> x(Shape5{1, 1, kVoxelSide, kVoxelSide, kVoxelSide});
  for (std::size_t i = 0; i < kVoxelCount; ++i) x[i] = grid.occupancy[i] ? 5.0f : -1.0f;
  return x;
}

LabeledSet to_labeled_set(const VoxelDataset& data) {
  std::vector<FeatureMap<float>> maps;
  std::vector<const FeatureMap<float>*> ptrs;
  maps.reserve(data.grids.size());
  LabeledSet set;
  for (const VoxelGrid& g : data.grids) {
    maps.push_back(scale_voxels(g));
    set.labels.push_back(g.label);
  }
  for (const auto& m : maps) ptrs.push_back(&m);
  set.inputs = stack_samples<float>(ptrs);
  set.classes = data.classes;
  return set;
}

// Synthetic shapes ----------------------------------------------------------------

namespace {

template <typename Inside>
VoxelGrid fill(Inside inside) {
  VoxelGrid g;
  for (std::size_t f = 0; f < kVoxelSide; ++f) {
    for (std::size_t h = 0; h < kVoxelSide; ++h) {
      for (std::size_t w = 0; w < kVoxelSide; ++w) {
        if (inside(static_cast<double>(f) + 0.5, static_cast<double>(h) + 0.5,
                   static_cast<double>(w) + 0.5)) {
          g.at(f, h, w) = 1;
        }
      }
    }
  }
  return g;
}

}  // namespace

VoxelGrid make_box(std::array<std::size_t, 3> origin, std::array<std::size_t, 3> extent) {
  VoxelGrid g;
  for (std::size_t f = origin[0]; f < std::min(kVoxelSide, origin[0] + extent[0]); ++f) {
    for (std::size_t h = origin[1]; h < std::min(kVoxelSide, origin[1] + extent[1]); ++h) {
      for (std::size_t w = origin[2]; w < std::min(kVoxelSide, origin[2] + extent[2]); ++w) {
        g.at(f, h, w) = 1;
      }
    }
  }
  return g;
}

VoxelGrid make_sphere(std::array<double, 3> c, double r) {
  return fill([&](double f, double h, double w) {
    const double df = f - c[0], dh = h - c[1], dw = w - c[2];
    return df * df + dh * dh + dw * dw <= r * r;
  });
}

VoxelGrid make_cylinder(std::array<double, 3> c, double r, double height) {
  return fill([&](double f, double h, double w) {
    const double dh = h - c[1], dw = w - c[2];
    return std::abs(f - c[0]) <= height / 2 && dh * dh + dw * dw <= r * r;
  });
}

VoxelGrid make_torus(std::array<double, 3> c, double major, double minor) {
  return fill([&](double f, double h, double w) {
    const double dh = h - c[1], dw = w - c[2], df = f - c[0];
    const double ring = std::sqrt(dh * dh + dw * dw) - major;
    return ring * ring + df * df <= minor * minor;
  });
}

VoxelDataset gen_synthetic_shapes(std::size_t n_per_class, std::uint64_t seed) {
  VoxelDataset data;
  data.classes = kShapeClasses;
  const std::size_t total = n_per_class * kShapeClasses;
  data.grids.reserve(total);
  for (std::size_t i = 0; i < total; ++i) {
    Rng rng(Rng::derive_seed(seed, i));
    const auto cls = static_cast<ShapeClass>(i % kShapeClasses);
    auto jitter = [&](double half) {
      return std::array<double, 3>{16.0 + rng.uniform(-half, half), 16.0 + rng.uniform(-half, half),
                                   16.0 + rng.uniform(-half, half)};
    };
    VoxelGrid g;
    switch (cls) {
      case ShapeClass::Box: {
        std::array<std::size_t, 3> extent{}, origin{};
        for (int a = 0; a < 3; ++a) {
          extent[a] = 8 + rng.below(15);
          origin[a] = rng.below(kVoxelSide - extent[a] + 1);
        }
        g = make_box(origin, extent);
        break;
      }
      case ShapeClass::Sphere:
        g = make_sphere(jitter(3.0), rng.uniform(6.0, 12.0));
        break;
      case ShapeClass::Cylinder:
        g = make_cylinder(jitter(3.0), rng.uniform(4.0, 10.0), rng.uniform(10.0, 24.0));
        break;
      case ShapeClass::Torus: {
        const double minor = rng.uniform(2.0, 4.0);
        g = make_torus(jitter(2.0), rng.uniform(6.0, 11.0 - minor / 2), minor);
        break;
      }
    }
    g.label = static_cast<std::uint32_t>(cls);
    data.grids.push_back(std::move(g));
  }
  return data;
}

}  // namespace ssa
