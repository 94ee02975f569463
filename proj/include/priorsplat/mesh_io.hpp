#pragma once

#include <filesystem>

#include "priorsplat/geometry.hpp"

namespace priorsplat {

// ASCII OBJ: v / f records, 1-based (or negative relative) indices, polygons
// fan-triangulated. Other records are ignored.
TriangleMesh read_obj(const std::filesystem::path& path);

// Binary little-endian PLY with vertex x,y,z and face vertex_indices. Optional
// per-vertex red/green/blue and per-face red/green/blue (albedo) are read.
TriangleMesh read_ply_mesh(const std::filesystem::path& path);

// Dispatches on extension (.obj / .ply). Degenerate faces are dropped with a
// logged warning.
TriangleMesh read_mesh(const std::filesystem::path& path);

// Writes x,y,z float32 vertices (+ uchar colors when present), a
// vertex_indices face list, and per-face uchar albedo when present.
void write_ply_mesh(const std::filesystem::path& path, const TriangleMesh& mesh);

// Point clouds: x,y,z (+ nx,ny,nz) (+ red,green,blue as uchar holding
// round(255 * linear value)).
PointCloud read_ply_cloud(const std::filesystem::path& path);
void write_ply_cloud(const std::filesystem::path& path, const PointCloud& cloud);

}  // namespace priorsplat
