#pragma once

// Minimal PLY point-cloud reader/writer: ascii and binary_little_endian,
// float/double x,y,z vertex properties, anything else skipped. Faces are
// ignored; only the vertex element is read.

#include <string>
#include <vector>

#include "vvt/geometry.hpp"

namespace vvt {

std::vector<Vec3> read_ply(const std::string& path);

void write_ply_ascii(const std::string& path, const std::vector<Vec3>& points);
void write_ply_binary(const std::string& path, const std::vector<Vec3>& points);

}  // namespace vvt
