#include "cgf/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "cgf/util.hpp"

namespace cgf {
namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream stream(line);
  std::string token;
  while (stream >> token) out.push_back(token);
  return out;
}

double parse_number(const std::string& token, const std::string& path,
                    std::size_t line_no) {
  const char* begin = token.data();
  const char* end = begin + token.size();
  if (begin != end && *begin == '+') ++begin;  // from_chars rejects leading '+'
  double value = 0.0;
  auto result = std::from_chars(begin, end, value);
  require(result.ec == std::errc{} && result.ptr == end &&
              std::isfinite(value),
          ErrorCode::Parse,
          path + ":" + std::to_string(line_no) + ": bad number '" + token + "'");
  return value;
}

Vec3 normalize_or_throw(const Vec3& n, const std::string& path,
                        std::size_t line_no) {
  double norm = n.norm();
  require(norm > 1e-12, ErrorCode::Parse,
          path + ":" + std::to_string(line_no) + ": zero-length normal");
  return n / norm;
}

}  // namespace

PointCloud read_xyz(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::Io, "cannot open: " + path);
  PointCloud cloud;
  std::string line;
  std::size_t line_no = 0;
  int field_count = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto pos = line.find('#'); pos != std::string::npos) line.resize(pos);
    auto fields = split_ws(line);
    if (fields.empty()) continue;
    require(fields.size() == 3 || fields.size() == 6, ErrorCode::Parse,
            path + ":" + std::to_string(line_no) +
                ": expected 3 or 6 fields, got " + std::to_string(fields.size()));
    if (field_count < 0) field_count = static_cast<int>(fields.size());
    require(static_cast<int>(fields.size()) == field_count, ErrorCode::Parse,
            path + ":" + std::to_string(line_no) + ": inconsistent field count");
    Vec3 p(parse_number(fields[0], path, line_no),
           parse_number(fields[1], path, line_no),
           parse_number(fields[2], path, line_no));
    cloud.points.push_back(p);
    if (field_count == 6) {
      Vec3 n(parse_number(fields[3], path, line_no),
             parse_number(fields[4], path, line_no),
             parse_number(fields[5], path, line_no));
      cloud.normals.push_back(normalize_or_throw(n, path, line_no));
    }
  }
  require(!cloud.points.empty(), ErrorCode::EmptyCloud,
          path + ": no points found");
  return cloud;
}

void write_xyz(const PointCloud& cloud, const std::string& path) {
  cloud.validate();
  std::ofstream out(path);
  require(out.good(), ErrorCode::Io, "cannot write: " + path);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    out << format_double(p.x()) << ' ' << format_double(p.y()) << ' '
        << format_double(p.z());
    if (cloud.has_normals()) {
      const Vec3& n = cloud.normals[i];
      out << ' ' << format_double(n.x()) << ' ' << format_double(n.y()) << ' '
          << format_double(n.z());
    }
    out << '\n';
  }
  require(out.good(), ErrorCode::Io, "write failed: " + path);
}

PointCloud read_ply(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::Io, "cannot open: " + path);
  std::string line;
  std::size_t line_no = 0;

  auto next_line = [&](std::string& out_line) {
    if (!std::getline(in, out_line)) return false;
    ++line_no;
    if (!out_line.empty() && out_line.back() == '\r') out_line.pop_back();
    return true;
  };

  require(next_line(line) && line == "ply", ErrorCode::Parse,
          path + ": missing 'ply' magic");

  struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<std::string> properties;
  };
  std::vector<Element> elements;
  bool ascii = false;
  bool header_done = false;
  while (next_line(line)) {
    auto fields = split_ws(line);
    if (fields.empty() || fields[0] == "comment" || fields[0] == "obj_info")
      continue;
    if (fields[0] == "format") {
      require(fields.size() >= 2, ErrorCode::Parse, path + ": bad format line");
      require(fields[1] == "ascii", ErrorCode::Parse,
              path + ": only ascii PLY is supported");
      ascii = true;
    } else if (fields[0] == "element") {
      require(fields.size() == 3, ErrorCode::Parse, path + ": bad element line");
      Element e;
      e.name = fields[1];
      e.count = static_cast<std::size_t>(
          parse_number(fields[2], path, line_no));
      elements.push_back(e);
    } else if (fields[0] == "property") {
      require(!elements.empty(), ErrorCode::Parse,
              path + ": property before any element");
      require(fields.size() >= 3, ErrorCode::Parse, path + ": bad property line");
      elements.back().properties.push_back(lower(fields.back()));
    } else if (fields[0] == "end_header") {
      header_done = true;
      break;
    } else {
      throw_error(ErrorCode::Parse, path + ": unknown header line '" + line + "'");
    }
  }
  require(ascii && header_done, ErrorCode::Parse, path + ": truncated header");

  PointCloud cloud;
  for (const auto& element : elements) {
    if (element.name != "vertex") {
      for (std::size_t i = 0; i < element.count; ++i)
        require(next_line(line), ErrorCode::Parse,
                path + ": truncated element '" + element.name + "'");
      continue;
    }
    auto find_prop = [&](const char* name) {
      auto it = std::find(element.properties.begin(), element.properties.end(),
                          name);
      return it == element.properties.end()
                 ? -1
                 : static_cast<int>(it - element.properties.begin());
    };
    int ix = find_prop("x"), iy = find_prop("y"), iz = find_prop("z");
    require(ix >= 0 && iy >= 0 && iz >= 0, ErrorCode::Parse,
            path + ": vertex element lacks x/y/z properties");
    int inx = find_prop("nx"), iny = find_prop("ny"), inz = find_prop("nz");
    bool with_normals = inx >= 0 && iny >= 0 && inz >= 0;
    for (std::size_t i = 0; i < element.count; ++i) {
      require(next_line(line), ErrorCode::Parse, path + ": truncated vertices");
      auto fields = split_ws(line);
      require(fields.size() >= element.properties.size(), ErrorCode::Parse,
              path + ":" + std::to_string(line_no) + ": short vertex row");
      auto value = [&](int idx) {
        return parse_number(fields[static_cast<std::size_t>(idx)], path, line_no);
      };
      cloud.points.emplace_back(value(ix), value(iy), value(iz));
      if (with_normals)
        cloud.normals.push_back(normalize_or_throw(
            Vec3(value(inx), value(iny), value(inz)), path, line_no));
    }
  }
  require(!cloud.points.empty(), ErrorCode::EmptyCloud,
          path + ": no vertices found");
  return cloud;
}

void write_ply(const PointCloud& cloud, const std::string& path) {
  cloud.validate();
  std::ofstream out(path);
  require(out.good(), ErrorCode::Io, "cannot write: " + path);
  out << "ply\nformat ascii 1.0\n";
  out << "element vertex " << cloud.size() << '\n';
  out << "property double x\nproperty double y\nproperty double z\n";
  if (cloud.has_normals())
    out << "property double nx\nproperty double ny\nproperty double nz\n";
  out << "end_header\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    out << format_double(p.x()) << ' ' << format_double(p.y()) << ' '
        << format_double(p.z());
    if (cloud.has_normals()) {
      const Vec3& n = cloud.normals[i];
      out << ' ' << format_double(n.x()) << ' ' << format_double(n.y()) << ' '
          << format_double(n.z());
    }
    out << '\n';
  }
  require(out.good(), ErrorCode::Io, "write failed: " + path);
}

namespace {

enum class CloudFormat { Xyz, Ply };

CloudFormat format_from_path(const std::string& path) {
  auto ext = lower(std::filesystem::path(path).extension().string());
  if (ext == ".xyz") return CloudFormat::Xyz;
  if (ext == ".ply") return CloudFormat::Ply;
  throw_error(ErrorCode::InvalidArgument,
              "unsupported cloud extension '" + ext + "' for " + path);
}

}  // namespace

PointCloud read_cloud(const std::string& path) {
  return format_from_path(path) == CloudFormat::Xyz ? read_xyz(path)
                                                    : read_ply(path);
}

void write_cloud(const PointCloud& cloud, const std::string& path) {
  if (format_from_path(path) == CloudFormat::Xyz)
    write_xyz(cloud, path);
  else
    write_ply(cloud, path);
}

AlignedSet read_aligned_set(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  require(in.good(), ErrorCode::Io, "cannot open: " + manifest_path);
  auto base = std::filesystem::path(manifest_path).parent_path();
  AlignedSet set;
  std::string line;
  std::size_t line_no = 0;
  std::optional<std::string> pending_path;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto pos = line.find('#'); pos != std::string::npos) line.resize(pos);
    auto fields = split_ws(line);
    if (fields.empty()) continue;
    if (fields[0] == "cloud") {
      require(fields.size() == 2, ErrorCode::Parse,
              manifest_path + ":" + std::to_string(line_no) + ": bad cloud line");
      require(!pending_path, ErrorCode::Parse,
              manifest_path + ":" + std::to_string(line_no) +
                  ": cloud line without a transform for the previous cloud");
      pending_path = fields[1];
    } else if (fields[0] == "transform") {
      require(pending_path.has_value(), ErrorCode::Parse,
              manifest_path + ":" + std::to_string(line_no) +
                  ": transform line without a preceding cloud line");
      require(fields.size() == 17, ErrorCode::Parse,
              manifest_path + ":" + std::to_string(line_no) +
                  ": transform needs 16 numbers");
      Eigen::Matrix4d m;
      for (int i = 0; i < 16; ++i)
        m(i / 4, i % 4) =
            parse_number(fields[static_cast<std::size_t>(i + 1)], manifest_path,
                         line_no);
      require((m.row(3) - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() <=
                  1e-12,
              ErrorCode::Parse,
              manifest_path + ":" + std::to_string(line_no) +
                  ": last transform row must be 0 0 0 1");
      RigidTransform t = RigidTransform::from_matrix(m);
      require((t.rotation * t.rotation.transpose() - Mat3::Identity())
                      .cwiseAbs()
                      .maxCoeff() <= 1e-6 &&
                  t.rotation.determinant() > 0.0,
              ErrorCode::Parse,
              manifest_path + ":" + std::to_string(line_no) +
                  ": transform is not a rotation");
      set.paths.push_back(*pending_path);
      set.clouds.push_back(read_cloud((base / *pending_path).string()));
      set.to_world.push_back(t);
      pending_path.reset();
    } else {
      throw_error(ErrorCode::Parse, manifest_path + ":" + std::to_string(line_no) +
                                        ": unknown directive '" + fields[0] + "'");
    }
  }
  require(!pending_path, ErrorCode::Parse,
          manifest_path + ": trailing cloud line without transform");
  require(!set.clouds.empty(), ErrorCode::Parse,
          manifest_path + ": manifest lists no clouds");
  return set;
}

void write_aligned_set_manifest(const std::vector<std::string>& relative_paths,
                                const std::vector<RigidTransform>& to_world,
                                const std::string& manifest_path) {
  require(relative_paths.size() == to_world.size(), ErrorCode::Shape,
          "path and transform counts differ");
  require(!relative_paths.empty(), ErrorCode::InvalidArgument,
          "manifest needs at least one cloud");
  std::ofstream out(manifest_path);
  require(out.good(), ErrorCode::Io, "cannot write: " + manifest_path);
  for (std::size_t i = 0; i < relative_paths.size(); ++i) {
    out << "cloud " << relative_paths[i] << '\n';
    out << "transform";
    Eigen::Matrix4d m = to_world[i].matrix();
    for (int k = 0; k < 16; ++k) out << ' ' << format_double(m(k / 4, k % 4));
    out << '\n';
  }
  require(out.good(), ErrorCode::Io, "write failed: " + manifest_path);
}

}  // namespace cgf
