#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "ssa/dataset.hpp"
#include "ssa/rng.hpp"

namespace ssa {

inline constexpr std::size_t kVoxelSide = 32;
inline constexpr std::size_t kVoxelCount = kVoxelSide * kVoxelSide * kVoxelSide;
inline constexpr std::size_t kVoxelPackedBytes = kVoxelCount / 8;

/// Binary 32^3 occupancy grid indexed (f, h, w) with f the vertical axis.
struct VoxelGrid {
  std::vector<std::uint8_t> occupancy = std::vector<std::uint8_t>(kVoxelCount, 0);
  std::uint32_t label = 0;

  static std::size_t index(std::size_t f, std::size_t h, std::size_t w) {
    return (f * kVoxelSide + h) * kVoxelSide + w;
  }
  std::uint8_t& at(std::size_t f, std::size_t h, std::size_t w) { return occupancy[index(f, h, w)]; }
  std::uint8_t at(std::size_t f, std::size_t h, std::size_t w) const { return occupancy[index(f, h, w)]; }
  std::size_t count() const;

  bool operator==(const VoxelGrid&) const = default;
};

struct VoxelDataset {
  std::vector<VoxelGrid> grids;
  std::uint32_t classes = 0;
};

// "SSAV" container, integers little-endian:
//   magic "SSAV", u32 count, u32 n_classes, then per record
//   u32 label + 4096 bytes of occupancy bits. Voxel i = (f*32 + h)*32 + w
//   lives in byte i/8 at bit i%8 (least significant bit first).
void write_voxels(std::ostream& out, const VoxelDataset& data);
VoxelDataset read_voxels(std::istream& in);
void save_voxels(const std::filesystem::path& path, const VoxelDataset& data);
VoxelDataset load_voxels(const std::filesystem::path& path);

/// One draw of the augmentation pipeline.
struct VoxelAugmentation {
  /// Azimuth rotation by 30 degrees * rotation_steps about the vertical axis.
  std::size_t rotation_steps = 0;
  /// Integer translation along (f, h, w); vacated cells become empty.
  std::array<int, 3> shift{0, 0, 0};
  /// Mirror the w axis.
  bool flip = false;
  /// Probability that an empty voxel is switched on.
  double salt = 0.0;
  std::uint64_t noise_seed = 0;
};

struct AugmentOptions {
  std::size_t orientations = 12;
  int max_shift = 2;
  double flip_probability = 0.5;
  double salt = 0.01;
};

/// Rotation -> flip -> translation -> salt noise with explicit parameters.
VoxelGrid augment_voxels(const VoxelGrid& grid, const VoxelAugmentation& params);
/// Draws parameters from `seed` (uniform orientation, shifts in
/// [-max_shift, max_shift], flip with probability 1/2) and applies them.
VoxelGrid augment_voxels(const VoxelGrid& grid, std::uint64_t seed, const AugmentOptions& options = {});
VoxelAugmentation draw_augmentation(Rng& rng, const AugmentOptions& options = {});

/// Nearest-neighbour azimuth rotation about the grid centre; multiples of
/// 90 degrees are exact index permutations.
VoxelGrid rotate_azimuth(const VoxelGrid& grid, double degrees);

/// Maps occupancy {0, 1} to network input {-1, 5}, shape (1, 1, 32, 32, 32).
FeatureMap<float> scale_voxels(const VoxelGrid& grid);
LabeledSet to_labeled_set(const VoxelDataset& data);

enum class ShapeClass : std::uint32_t { Box = 0, Sphere = 1, Cylinder = 2, Torus = 3 };
inline constexpr std::size_t kShapeClasses = 4;

/// Solid primitives; voxel (f, h, w) is filled when its centre (f+0.5, h+0.5, w+0.5) lies inside.
VoxelGrid make_box(std::array<std::size_t, 3> origin, std::array<std::size_t, 3> extent);
VoxelGrid make_sphere(std::array<double, 3> centre, double radius);
/// Vertical cylinder (axis along f).
VoxelGrid make_cylinder(std::array<double, 3> centre, double radius, double height);
/// Torus lying in the (h, w) plane.
VoxelGrid make_torus(std::array<double, 3> centre, double major, double minor);

/// Random boxes, spheres, cylinders and tori; sample i has class i mod 4.
VoxelDataset gen_synthetic_shapes(std::size_t n_per_class, std::uint64_t seed);

}  // namespace ssa
