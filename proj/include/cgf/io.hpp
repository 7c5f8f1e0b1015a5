#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cgf/geometry.hpp"

namespace cgf {

// XYZ text: one point per line, "x y z" or "x y z nx ny nz", '#' starts a
// comment, blank lines skipped. Every data line must have the same field
// count.
PointCloud read_xyz(const std::string& path);
void write_xyz(const PointCloud& cloud, const std::string& path);

// ASCII PLY with at least float/double properties x, y, z on the vertex
// element; nx, ny, nz are picked up when present, other properties and
// elements are skipped.
PointCloud read_ply(const std::string& path);
void write_ply(const PointCloud& cloud, const std::string& path);

// Dispatch on extension (.xyz, .ply, case-insensitive).
PointCloud read_cloud(const std::string& path);
void write_cloud(const PointCloud& cloud, const std::string& path);

// Aligned-set manifest: a list of cloud files with ground-truth rigid
// transforms into a shared world frame. Text format, one entry per record:
//   cloud <relative-path>
//   transform <16 numbers, row-major 4x4>
struct AlignedSet {
  std::vector<std::string> paths;      // as stored in the manifest
  std::vector<PointCloud> clouds;
  std::vector<RigidTransform> to_world;
  mutable std::optional<double> eps_cache;  // filled by compute_eps
};

AlignedSet read_aligned_set(const std::string& manifest_path);
void write_aligned_set_manifest(const std::vector<std::string>& relative_paths,
                                const std::vector<RigidTransform>& to_world,
                                const std::string& manifest_path);

}  // namespace cgf
