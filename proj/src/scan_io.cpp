#include "lpcc/scan_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "lpcc/error.hpp"

namespace lpcc {

namespace {

std::vector<char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

template <class T>
T read_le(const char* p) {
  static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

std::vector<Point3> load_kitti(const std::filesystem::path& path) {
  const auto bytes = read_all(path);
  require(bytes.size() % 16 == 0, ErrorKind::format,
          path.string() + ": size is not a multiple of 16 bytes (4 float32 per point)");
  std::vector<Point3> out;
  out.reserve(bytes.size() / 16);
  for (std::size_t off = 0; off < bytes.size(); off += 16) {
    const Point3 p{read_le<float>(&bytes[off]), read_le<float>(&bytes[off + 4]), read_le<float>(&bytes[off + 8])};
    out.push_back(p);
  }
  return out;
}

struct PlyProperty {
  std::string name;
  std::string type;
  std::size_t size = 0;
};

std::size_t ply_type_size(const std::string& t) {
  if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
  if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
  if (t == "int" || t == "uint" || t == "float" || t == "int32" || t == "uint32" || t == "float32") return 4;
  if (t == "double" || t == "float64") return 8;
  return 0;
}

double ply_binary_value(const char* p, const std::string& t) {
  if (t == "char" || t == "int8") return static_cast<std::int8_t>(*p);
  if (t == "uchar" || t == "uint8") return static_cast<std::uint8_t>(*p);
  if (t == "short" || t == "int16") return read_le<std::int16_t>(p);
  if (t == "ushort" || t == "uint16") return read_le<std::uint16_t>(p);
  if (t == "int" || t == "int32") return read_le<std::int32_t>(p);
  if (t == "uint" || t == "uint32") return read_le<std::uint32_t>(p);
  if (t == "float" || t == "float32") return read_le<float>(p);
  return read_le<double>(p);
}

std::vector<Point3> load_ply(const std::filesystem::path& path) {
  const auto bytes = read_all(path);
  const std::string name = path.string();
  std::size_t pos = 0;
  auto next_line = [&]() {
    require(pos < bytes.size(), ErrorKind::format, name + ": unexpected end of PLY header");
    const auto start = pos;
    while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    std::string line(bytes.begin() + static_cast<std::ptrdiff_t>(start), bytes.begin() + static_cast<std::ptrdiff_t>(pos));
    if (pos < bytes.size()) ++pos;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };

  require(next_line() == "ply", ErrorKind::format, name + ": missing 'ply' magic");
  bool binary = false;
  bool in_vertex = false;
  bool vertex_seen = false;
  bool vertex_first = true;
  std::size_t count = 0;
  std::vector<PlyProperty> props;
  for (;;) {
    const std::string line = next_line();
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    if (key == "end_header") break;
    if (key == "comment" || key == "obj_info" || key.empty()) continue;
    if (key == "format") {
      std::string fmt;
      ss >> fmt;
      if (fmt == "ascii") {
        binary = false;
      } else if (fmt == "binary_little_endian") {
        binary = true;
      } else {
        fail(ErrorKind::format, name + ": unsupported PLY format '" + fmt + "'");
      }
    } else if (key == "element") {
      std::string el;
      std::size_t n = 0;
      ss >> el >> n;
      in_vertex = el == "vertex";
      if (in_vertex) {
        vertex_seen = true;
        count = n;
      } else if (!vertex_seen && n > 0) {
        vertex_first = false;
      }
    } else if (key == "property") {
      if (!in_vertex) continue;
      std::string type;
      ss >> type;
      require(type != "list", ErrorKind::format, name + ": list properties on vertices are not supported");
      PlyProperty p;
      ss >> p.name;
      p.type = type;
      p.size = ply_type_size(type);
      require(p.size > 0, ErrorKind::format, name + ": unknown PLY property type '" + type + "'");
      props.push_back(p);
    } else {
      fail(ErrorKind::format, name + ": unexpected PLY header line '" + line + "'");
    }
  }
  require(vertex_seen, ErrorKind::format, name + ": no vertex element");
  require(vertex_first, ErrorKind::format, name + ": vertex element must come first");
  int ix = -1, iy = -1, iz = -1;
  for (std::size_t i = 0; i < props.size(); ++i) {
    if (props[i].name == "x") ix = static_cast<int>(i);
    if (props[i].name == "y") iy = static_cast<int>(i);
    if (props[i].name == "z") iz = static_cast<int>(i);
  }
  require(ix >= 0 && iy >= 0 && iz >= 0, ErrorKind::format, name + ": vertex needs x, y and z properties");

  std::vector<Point3> out;
  out.reserve(count);
  if (binary) {
    std::size_t stride = 0;
    std::vector<std::size_t> offsets;
    for (const auto& p : props) {
      offsets.push_back(stride);
      stride += p.size;
    }
    require(bytes.size() - pos >= stride * count, ErrorKind::truncated, name + ": PLY vertex data truncated");
    for (std::size_t v = 0; v < count; ++v) {
      const char* row = bytes.data() + pos + v * stride;
      out.push_back({ply_binary_value(row + offsets[ix], props[ix].type),
                     ply_binary_value(row + offsets[iy], props[iy].type),
                     ply_binary_value(row + offsets[iz], props[iz].type)});
    }
  } else {
    std::istringstream body(std::string(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end()));
    std::vector<double> vals(props.size());
    for (std::size_t v = 0; v < count; ++v) {
      for (auto& x : vals) {
        body >> x;
        require(!body.fail(), ErrorKind::format, name + ": malformed or truncated ASCII vertex " + std::to_string(v));
      }
      out.push_back({vals[ix], vals[iy], vals[iz]});
    }
  }
  return out;
}

}  // namespace

ScanFormat parse_scan_format(const std::string& name) {
  if (name == "auto") return ScanFormat::automatic;
  if (name == "bin" || name == "kitti") return ScanFormat::kitti_bin;
  if (name == "ply") return ScanFormat::ply;
  fail(ErrorKind::invalid_argument, "unknown scan format '" + name + "'");
}

std::vector<Point3> load_scan(const std::filesystem::path& path, ScanFormat format) {
  if (format == ScanFormat::automatic) {
    const auto ext = path.extension().string();
    if (ext == ".ply" || ext == ".PLY") {
      format = ScanFormat::ply;
    } else if (ext == ".bin" || ext == ".BIN") {
      format = ScanFormat::kitti_bin;
    } else {
      fail(ErrorKind::invalid_argument, "cannot infer scan format of " + path.string());
    }
  }
  return format == ScanFormat::ply ? load_ply(path) : load_kitti(path);
}

void save_kitti_bin(const std::filesystem::path& path, const std::vector<Point3>& points) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::io, "cannot open " + path.string() + " for writing");
  for (const auto& p : points) {
    const float v[4] = {static_cast<float>(p.x), static_cast<float>(p.y), static_cast<float>(p.z), 0.0f};
    out.write(reinterpret_cast<const char*>(v), sizeof(v));
  }
  require(static_cast<bool>(out), ErrorKind::io, "failed writing " + path.string());
}

void save_ply(const std::filesystem::path& path, const std::vector<Point3>& points, bool binary) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::io, "cannot open " + path.string() + " for writing");
  out << "ply\nformat " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n"
      << "element vertex " << points.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\nend_header\n";
  if (binary) {
    for (const auto& p : points) {
      const double v[3] = {p.x, p.y, p.z};
      out.write(reinterpret_cast<const char*>(v), sizeof(v));
    }
  } else {
    out.precision(17);
    for (const auto& p : points) out << p.x << ' ' << p.y << ' ' << p.z << '\n';
  }
  require(static_cast<bool>(out), ErrorKind::io, "failed writing " + path.string());
}

}  // namespace lpcc
