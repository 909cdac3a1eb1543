#include "vvt/ply.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "vvt/errors.hpp"

namespace vvt {
namespace {

struct Property {
  std::string name;
  std::string type;
};

std::size_t scalar_size(const std::string& type) {
  if (type == "char" || type == "uchar" || type == "int8" || type == "uint8")
    return 1;
  if (type == "short" || type == "ushort" || type == "int16" ||
      type == "uint16")
    return 2;
  if (type == "int" || type == "uint" || type == "int32" || type == "uint32" ||
      type == "float" || type == "float32")
    return 4;
  if (type == "double" || type == "float64") return 8;
  throw DataError("ply: unsupported property type '" + type + "'");
}

double read_scalar_le(const char* p, const std::string& type) {
  if (type == "float" || type == "float32") {
    float f;
    std::memcpy(&f, p, 4);
    return static_cast<double>(f);
  }
  if (type == "double" || type == "float64") {
    double d;
    std::memcpy(&d, p, 8);
    return d;
  }
  throw DataError("ply: coordinate property must be float or double");
}

}  // namespace

std::vector<Vec3> read_ply(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open ply file: " + path);

  std::string line;
  if (!std::getline(in, line) || (line != "ply" && line != "ply\r")) {
    throw DataError("ply: missing magic in " + path);
  }

  std::string format;
  std::size_t vertex_count = 0;
  std::vector<Property> vertex_props;
  bool in_vertex_element = false;

  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "comment") continue;
    if (tok == "format") {
      ls >> format;
      if (format != "ascii" && format != "binary_little_endian") {
        throw DataError("ply: unsupported format '" + format + "'");
      }
    } else if (tok == "element") {
      std::string name;
      std::size_t count = 0;
      ls >> name >> count;
      in_vertex_element = (name == "vertex");
      if (in_vertex_element) vertex_count = count;
    } else if (tok == "property") {
      if (!in_vertex_element) continue;
      Property p;
      ls >> p.type;
      if (p.type == "list") {
        throw DataError("ply: list properties on vertices are unsupported");
      }
      ls >> p.name;
      vertex_props.push_back(p);
    } else if (tok == "end_header") {
      break;
    }
  }

  int ix = -1, iy = -1, iz = -1;
  for (std::size_t i = 0; i < vertex_props.size(); ++i) {
    if (vertex_props[i].name == "x") ix = static_cast<int>(i);
    if (vertex_props[i].name == "y") iy = static_cast<int>(i);
    if (vertex_props[i].name == "z") iz = static_cast<int>(i);
  }
  if (ix < 0 || iy < 0 || iz < 0) {
    throw DataError("ply: vertex element lacks x/y/z properties in " + path);
  }

  std::vector<Vec3> points;
  points.reserve(vertex_count);

  if (format == "ascii") {
    for (std::size_t v = 0; v < vertex_count; ++v) {
      if (!std::getline(in, line)) {
        throw DataError("ply: truncated vertex data in " + path);
      }
      std::istringstream ls(line);
      Vec3 p;
      for (std::size_t i = 0; i < vertex_props.size(); ++i) {
        double val;
        if (!(ls >> val)) {
          throw DataError("ply: malformed vertex line in " + path);
        }
        if (static_cast<int>(i) == ix) p.x() = val;
        if (static_cast<int>(i) == iy) p.y() = val;
        if (static_cast<int>(i) == iz) p.z() = val;
      }
      points.push_back(p);
    }
  } else {
    std::size_t stride = 0;
    std::vector<std::size_t> offsets(vertex_props.size());
    for (std::size_t i = 0; i < vertex_props.size(); ++i) {
      offsets[i] = stride;
      stride += scalar_size(vertex_props[i].type);
    }
    std::vector<char> buf(stride);
    for (std::size_t v = 0; v < vertex_count; ++v) {
      if (!in.read(buf.data(), static_cast<std::streamsize>(stride))) {
        throw DataError("ply: truncated binary vertex data in " + path);
      }
      const auto sx = static_cast<std::size_t>(ix);
      const auto sy = static_cast<std::size_t>(iy);
      const auto sz = static_cast<std::size_t>(iz);
      points.emplace_back(
          read_scalar_le(buf.data() + offsets[sx], vertex_props[sx].type),
          read_scalar_le(buf.data() + offsets[sy], vertex_props[sy].type),
          read_scalar_le(buf.data() + offsets[sz], vertex_props[sz].type));
    }
  }
  return points;
}

void write_ply_ascii(const std::string& path, const std::vector<Vec3>& points) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open output ply: " + path);
  out << "ply\nformat ascii 1.0\nelement vertex " << points.size()
      << "\nproperty double x\nproperty double y\nproperty double z\n"
         "end_header\n";
  char buf[96];
  for (const Vec3& p : points) {
    std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g\n", p.x(), p.y(), p.z());
    out << buf;
  }
}

void write_ply_binary(const std::string& path,
                      const std::vector<Vec3>& points) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open output ply: " + path);
  out << "ply\nformat binary_little_endian 1.0\nelement vertex "
      << points.size()
      << "\nproperty double x\nproperty double y\nproperty double z\n"
         "end_header\n";
  for (const Vec3& p : points) {
    const double xyz[3] = {p.x(), p.y(), p.z()};
    out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
  }
}

}  // namespace vvt
