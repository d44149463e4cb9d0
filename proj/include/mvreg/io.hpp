#pragma once

#include <Eigen/Core>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mvreg/error.hpp"
#include "mvreg/point_cloud.hpp"
#include "mvreg/se3.hpp"

namespace mvreg {

enum class CloudFormat { ply_ascii, ply_binary_le, xyz, auto_detect };

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline int ply_type_size(const std::string& t) {
  if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
  if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
  if (t == "int" || t == "uint" || t == "int32" || t == "uint32" ||
      t == "float" || t == "float32")
    return 4;
  if (t == "double" || t == "float64") return 8;
  return 0;
}

struct PlyProperty {
  std::string name;
  std::string type;       // item type for lists
  std::string count_type;  // non-empty for list properties
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

inline double read_binary_scalar(std::istream& in, const std::string& type,
                                 const std::string& path) {
  unsigned char buf[8];
  const int size = ply_type_size(type);
  in.read(reinterpret_cast<char*>(buf), size);
  if (!in) {
    throw Error("ParseError", path + ": truncated binary data at byte " +
                                  std::to_string(in.tellg()));
  }
  // Host is little-endian on every supported platform.
  if (type == "float" || type == "float32") {
    float f;
    std::memcpy(&f, buf, 4);
    return static_cast<double>(f);
  }
  if (type == "double" || type == "float64") {
    double d;
    std::memcpy(&d, buf, 8);
    return d;
  }
  std::int64_t v = 0;
  if (type == "char" || type == "int8") v = static_cast<std::int8_t>(buf[0]);
  if (type == "uchar" || type == "uint8") v = buf[0];
  if (type == "short" || type == "int16") {
    std::int16_t x;
    std::memcpy(&x, buf, 2);
    v = x;
  }
  if (type == "ushort" || type == "uint16") {
    std::uint16_t x;
    std::memcpy(&x, buf, 2);
    v = x;
  }
  if (type == "int" || type == "int32") {
    std::int32_t x;
    std::memcpy(&x, buf, 4);
    v = x;
  }
  if (type == "uint" || type == "uint32") {
    std::uint32_t x;
    std::memcpy(&x, buf, 4);
    v = x;
  }
  return static_cast<double>(v);
}

inline PointCloud load_ply(std::istream& in, const std::string& path,
                           CloudFormat requested) {
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> std::string {
    if (!std::getline(in, line)) {
      throw Error("ParseError",
                  path + ": unexpected end of header at line " +
                      std::to_string(line_no));
    }
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };

  if (trim(next_line()) != "ply") {
    throw Error("ParseError", path + ": missing 'ply' magic on line 1");
  }

  bool binary = false;
  bool format_seen = false;
  std::vector<PlyElement> elements;
  while (true) {
    const std::string raw = next_line();
    std::istringstream ls(raw);
    std::string keyword;
    ls >> keyword;
    if (keyword.empty() || keyword == "comment" || keyword == "obj_info") {
      continue;
    }
    if (keyword == "format") {
      std::string fmt, version;
      ls >> fmt >> version;
      if (fmt == "ascii") {
        binary = false;
      } else if (fmt == "binary_little_endian") {
        binary = true;
      } else if (fmt == "binary_big_endian") {
        throw Error("UnsupportedFormat",
                    path + ": big-endian PLY is not supported");
      } else {
        throw Error("ParseError", path + ": unknown PLY format '" + fmt +
                                      "' on line " + std::to_string(line_no));
      }
      format_seen = true;
    } else if (keyword == "element") {
      PlyElement e;
      if (!(ls >> e.name >> e.count)) {
        throw Error("ParseError", path + ": malformed element on line " +
                                      std::to_string(line_no));
      }
      elements.push_back(e);
    } else if (keyword == "property") {
      if (elements.empty()) {
        throw Error("ParseError", path + ": property before any element, line " +
                                      std::to_string(line_no));
      }
      PlyProperty p;
      std::string first;
      ls >> first;
      if (first == "list") {
        ls >> p.count_type >> p.type >> p.name;
      } else {
        p.type = first;
        ls >> p.name;
      }
      if (p.name.empty() || ply_type_size(p.type) == 0 ||
          (!p.count_type.empty() && ply_type_size(p.count_type) == 0)) {
        throw Error("ParseError", path + ": malformed property on line " +
                                      std::to_string(line_no));
      }
      elements.back().properties.push_back(p);
    } else if (keyword == "end_header") {
      break;
    } else {
      throw Error("ParseError", path + ": unknown header keyword '" + keyword +
                                    "' on line " + std::to_string(line_no));
    }
  }
  if (!format_seen) {
    throw Error("ParseError", path + ": header has no format line");
  }
  if (requested == CloudFormat::ply_ascii && binary) {
    throw Error("UnsupportedFormat", path + ": expected ASCII PLY, got binary");
  }
  if (requested == CloudFormat::ply_binary_le && !binary) {
    throw Error("UnsupportedFormat", path + ": expected binary PLY, got ASCII");
  }

  PointCloud cloud;
  for (const PlyElement& element : elements) {
    const bool is_vertex = element.name == "vertex";
    int ix = -1, iy = -1, iz = -1;
    if (is_vertex) {
      for (std::size_t k = 0; k < element.properties.size(); ++k) {
        const PlyProperty& p = element.properties[k];
        if (!p.count_type.empty()) continue;
        if (p.name == "x") ix = static_cast<int>(k);
        if (p.name == "y") iy = static_cast<int>(k);
        if (p.name == "z") iz = static_cast<int>(k);
      }
      if (ix < 0 || iy < 0 || iz < 0) {
        throw Error("ParseError", path + ": vertex element lacks x/y/z");
      }
      cloud.points.reserve(element.count);
    }
    for (std::size_t row = 0; row < element.count; ++row) {
      Eigen::Vector3d point = Eigen::Vector3d::Zero();
      if (binary) {
        for (std::size_t k = 0; k < element.properties.size(); ++k) {
          const PlyProperty& p = element.properties[k];
          if (!p.count_type.empty()) {
            const double n = read_binary_scalar(in, p.count_type, path);
            for (std::int64_t item = 0; item < static_cast<std::int64_t>(n);
                 ++item) {
              read_binary_scalar(in, p.type, path);
            }
            continue;
          }
          const double v = read_binary_scalar(in, p.type, path);
          if (is_vertex) {
            if (static_cast<int>(k) == ix) point.x() = v;
            if (static_cast<int>(k) == iy) point.y() = v;
            if (static_cast<int>(k) == iz) point.z() = v;
          }
        }
      } else {
        const std::string data_line = next_line();
        std::istringstream ls(data_line);
        for (std::size_t k = 0; k < element.properties.size(); ++k) {
          const PlyProperty& p = element.properties[k];
          if (!p.count_type.empty()) {
            std::int64_t n;
            if (!(ls >> n)) {
              throw Error("ParseError", path + ": bad list count on line " +
                                            std::to_string(line_no));
            }
            double dummy;
            for (std::int64_t item = 0; item < n; ++item) ls >> dummy;
            continue;
          }
          double v;
          if (!(ls >> v)) {
            throw Error("ParseError", path + ": missing value on line " +
                                          std::to_string(line_no));
          }
          if (is_vertex) {
            if (static_cast<int>(k) == ix) point.x() = v;
            if (static_cast<int>(k) == iy) point.y() = v;
            if (static_cast<int>(k) == iz) point.z() = v;
          }
        }
      }
      if (is_vertex) {
        if (!point.allFinite()) {
          throw Error("ParseError", path + ": non-finite vertex coordinate");
        }
        cloud.points.push_back(point);
      }
    }
  }
  if (cloud.points.empty()) {
    throw Error("EmptyCloud", path + ": no vertices");
  }
  return cloud;
}

inline PointCloud load_xyz(std::istream& in, const std::string& path) {
  PointCloud cloud;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::istringstream ls(t);
    double x, y, z;
    if (!(ls >> x >> y >> z)) {
      throw Error("ParseError",
                  path + ": line " + std::to_string(line_no) +
                      ": expected at least 3 coordinates");
    }
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z)) {
      throw Error("ParseError", path + ": line " + std::to_string(line_no) +
                                    ": non-finite coordinate");
    }
    cloud.points.emplace_back(x, y, z);  // extra columns (normals etc.) ignored
  }
  if (cloud.points.empty()) {
    throw Error("EmptyCloud", path + ": no points");
  }
  return cloud;
}

}  // namespace detail

inline PointCloud load_cloud(const std::string& path,
                             CloudFormat format = CloudFormat::auto_detect) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error("ParseError", path + ": cannot open file");
  }
  if (format == CloudFormat::auto_detect) {
    char magic[3] = {0, 0, 0};
    in.read(magic, 3);
    in.seekg(0);
    format = (magic[0] == 'p' && magic[1] == 'l' && magic[2] == 'y')
                 ? CloudFormat::ply_binary_le  // refined by the header itself
                 : CloudFormat::xyz;
    if (format != CloudFormat::xyz) {
      PointCloud cloud = detail::load_ply(in, path, CloudFormat::auto_detect);
      cloud.id = path;
      return cloud;
    }
  }
  PointCloud cloud;
  if (format == CloudFormat::xyz) {
    cloud = detail::load_xyz(in, path);
  } else {
    cloud = detail::load_ply(in, path, format);
  }
  cloud.id = path;
  return cloud;
}

inline void save_cloud(const std::string& path, const PointCloud& cloud,
                       CloudFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error("ParseError", path + ": cannot open file for writing");
  }
  switch (format) {
    case CloudFormat::xyz:
      for (const auto& p : cloud.points) {
        out << format_double(p.x()) << " " << format_double(p.y()) << " "
            << format_double(p.z()) << "\n";
      }
      break;
    case CloudFormat::ply_ascii:
    case CloudFormat::ply_binary_le: {
      const bool binary = format == CloudFormat::ply_binary_le;
      out << "ply\nformat "
          << (binary ? "binary_little_endian" : "ascii") << " 1.0\n"
          << "element vertex " << cloud.points.size() << "\n"
          << "property double x\nproperty double y\nproperty double z\n"
          << "end_header\n";
      for (const auto& p : cloud.points) {
        if (binary) {
          double xyz[3] = {p.x(), p.y(), p.z()};
          out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
        } else {
          out << format_double(p.x()) << " " << format_double(p.y()) << " "
              << format_double(p.z()) << "\n";
        }
      }
      break;
    }
    case CloudFormat::auto_detect:
      throw Error("UnsupportedFormat", "auto_detect is not a writable format");
  }
}

// ---------------------------------------------------------------------------
// Matrix dump format: one row per line, entries space-separated with 17
// significant digits. Mask files use the same layout with 0/1 entries.

inline void write_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out << " ";
      out << format_double(m(i, j));
    }
    out << "\n";
  }
}

inline Eigen::MatrixXd read_matrix(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    std::istringstream ls(t);
    std::vector<double> row;
    double v;
    while (ls >> v) row.push_back(v);
    if (row.empty() || (!rows.empty() && row.size() != rows.front().size())) {
      throw Error("ParseError",
                  "matrix line " + std::to_string(line_no) + ": ragged row");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    throw Error("ParseError", "matrix file is empty");
  }
  Eigen::MatrixXd m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return m;
}

inline Eigen::MatrixXd read_matrix_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("ParseError", path + ": cannot open file");
  return read_matrix(in);
}

inline std::vector<RigidMotion> load_motions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("ParseError", path + ": cannot open file");
  return read_motions(in);
}

inline void save_motions(const std::string& path,
                         const std::vector<RigidMotion>& motions) {
  std::ofstream out(path);
  if (!out) throw Error("ParseError", path + ": cannot open file for writing");
  write_motions(out, motions);
}

// ---------------------------------------------------------------------------
// Flat key-value configuration: `key = value` lines, '#' comments. Repeated
// keys accumulate (used for scan file lists).

class ConfigMap {
 public:
  void set(const std::string& key, const std::string& value) {
    values_[key].push_back(value);
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key,
                         const std::string& fallback = "") const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second.back();
  }

  double get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      return std::stod(it->second.back());
    } catch (const std::exception&) {
      throw Error("ConfigError", "key '" + key + "' is not a number");
    }
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      return std::stoull(it->second.back());
    } catch (const std::exception&) {
      throw Error("ConfigError", "key '" + key + "' is not an integer");
    }
  }

  bool get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const std::string& v = it->second.back();
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw Error("ConfigError", "key '" + key + "' is not a boolean");
  }

  std::vector<std::string> get_list(const std::string& key) const {
    auto it = values_.find(key);
    return it == values_.end() ? std::vector<std::string>{} : it->second;
  }

  const std::map<std::string, std::vector<std::string>>& entries() const {
    return values_;
  }

  /// Deterministic echo used in run reports.
  void write(std::ostream& out) const {
    for (const auto& [key, list] : values_) {
      for (const auto& v : list) out << key << " = " << v << "\n";
    }
  }

 private:
  std::map<std::string, std::vector<std::string>> values_;
};

inline ConfigMap parse_config(std::istream& in, const std::string& path) {
  ConfigMap cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw Error("ConfigError", path + ": line " + std::to_string(line_no) +
                                     ": expected 'key = value'");
    }
    const std::string key = detail::trim(t.substr(0, eq));
    const std::string value = detail::trim(t.substr(eq + 1));
    if (key.empty()) {
      throw Error("ConfigError",
                  path + ": line " + std::to_string(line_no) + ": empty key");
    }
    cfg.set(key, value);
  }
  return cfg;
}

inline ConfigMap load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("ConfigError", path + ": cannot open file");
  return parse_config(in, path);
}

}  // namespace mvreg
