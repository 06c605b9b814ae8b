#pragma once

// Point-cloud and manifest I/O for the pipeline: ASCII XYZ files, binary
// little-endian PLY (float64 positions), station manifests and flat
// key=value config files.

#include <array>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lod3kit/geom.hpp"
#include "lod3kit/rng.hpp"

namespace lod3kit {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file_bytes(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

inline bool is_blank_or_comment(const std::string& line) {
  for (char c : line) {
    if (c == '#') return true;
    if (!std::isspace(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// ASCII XYZ: one point per line, "x y z"; '#' comments and blank lines allowed
// ---------------------------------------------------------------------------

inline std::vector<Point3> read_xyz(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<Point3> points;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::is_blank_or_comment(line)) continue;
    std::istringstream ls(line);
    Point3 p;
    if (!(ls >> p.x >> p.y >> p.z))
      throw IoError(path.string() + ":" + std::to_string(lineno) +
                    ": expected three coordinates");
    points.push_back(p);
  }
  return points;
}

inline void write_xyz(const std::filesystem::path& path, const std::vector<Point3>& points) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  for (const Point3& p : points) out << p.x << ' ' << p.y << ' ' << p.z << '\n';
  if (!out) throw IoError("short write to " + path.string());
}

// ---------------------------------------------------------------------------
// Binary little-endian PLY with double-precision vertex positions. The reader
// accepts extra vertex properties (skipped) and extra elements after the
// vertex element; the writer emits x/y/z only.
// ---------------------------------------------------------------------------

namespace detail {

inline double read_le_double(const unsigned char* p) {
  uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | p[i];
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

inline float read_le_float(const unsigned char* p) {
  uint32_t bits = 0;
  for (int i = 3; i >= 0; --i) bits = (bits << 8) | p[i];
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

inline void append_le_double(std::string& out, double d) {
  uint64_t bits;
  std::memcpy(&bits, &d, 8);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

inline size_t ply_type_size(const std::string& type) {
  if (type == "char" || type == "uchar" || type == "int8" || type == "uint8") return 1;
  if (type == "short" || type == "ushort" || type == "int16" || type == "uint16") return 2;
  if (type == "int" || type == "uint" || type == "int32" || type == "uint32" ||
      type == "float" || type == "float32")
    return 4;
  if (type == "double" || type == "float64") return 8;
  throw IoError("unsupported ply property type '" + type + "'");
}

}  // namespace detail

inline std::vector<Point3> read_ply(const std::filesystem::path& path) {
  const std::string bytes = detail::read_file_bytes(path);
  size_t pos = 0;
  auto next_line = [&]() -> std::string {
    size_t end = bytes.find('\n', pos);
    if (end == std::string::npos) throw IoError(path.string() + ": truncated ply header");
    std::string line = bytes.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pos = end + 1;
    return line;
  };

  if (next_line() != "ply") throw IoError(path.string() + ": not a ply file");
  if (next_line() != "format binary_little_endian 1.0")
    throw IoError(path.string() + ": only binary little-endian ply is supported");

  size_t vertex_count = 0;
  // Byte offset and width of each vertex property; x/y/z must be present.
  struct Prop {
    std::string name;
    size_t offset;
    size_t size;
    std::string type;
  };
  std::vector<Prop> props;
  size_t vertex_stride = 0;
  bool in_vertex = false;
  bool seen_vertex = false;

  for (;;) {
    const std::string line = next_line();
    if (line == "end_header") break;
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "comment" || tok == "obj_info") continue;
    if (tok == "element") {
      std::string name;
      size_t count = 0;
      if (!(ls >> name >> count)) throw IoError(path.string() + ": malformed element line");
      if (name == "vertex") {
        vertex_count = count;
        in_vertex = true;
        seen_vertex = true;
      } else {
        // Elements after the vertex block are tolerated (we never read past
        // the vertex data); anything before it would shift the offsets we
        // rely on.
        in_vertex = false;
        if (!seen_vertex)
          throw IoError(path.string() + ": element '" + name + "' precedes vertex element");
      }
      continue;
    }
    if (tok == "property") {
      if (!in_vertex) continue;  // properties of trailing elements are ignored
      std::string type, name;
      if (!(ls >> type >> name)) throw IoError(path.string() + ": malformed property line");
      if (type == "list")
        throw IoError(path.string() + ": list properties on vertices are not supported");
      const size_t size = detail::ply_type_size(type);
      props.push_back({name, vertex_stride, size, type});
      vertex_stride += size;
      continue;
    }
    throw IoError(path.string() + ": unexpected header line '" + line + "'");
  }

  const Prop* px = nullptr;
  const Prop* py = nullptr;
  const Prop* pz = nullptr;
  for (const Prop& p : props) {
    if (p.name == "x") px = &p;
    else if (p.name == "y") py = &p;
    else if (p.name == "z") pz = &p;
  }
  if (!px || !py || !pz) throw IoError(path.string() + ": vertex element lacks x/y/z properties");

  if (bytes.size() < pos + vertex_count * vertex_stride)
    throw IoError(path.string() + ": truncated vertex data");

  auto read_coord = [&](const Prop& p, const unsigned char* base) -> double {
    if (p.size == 8) return detail::read_le_double(base + p.offset);
    if (p.type == "float" || p.type == "float32") return detail::read_le_float(base + p.offset);
    throw IoError(path.string() + ": coordinate property '" + p.name +
                  "' must be float or double");
  };

  std::vector<Point3> points(vertex_count);
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data()) + pos;
  for (size_t i = 0; i < vertex_count; ++i) {
    const unsigned char* base = data + i * vertex_stride;
    points[i] = Point3{read_coord(*px, base), read_coord(*py, base), read_coord(*pz, base)};
  }
  return points;
}

inline void write_ply(const std::filesystem::path& path, const std::vector<Point3>& points) {
  std::string out;
  out += "ply\n";
  out += "format binary_little_endian 1.0\n";
  out += "element vertex " + std::to_string(points.size()) + "\n";
  out += "property double x\n";
  out += "property double y\n";
  out += "property double z\n";
  out += "end_header\n";
  out.reserve(out.size() + points.size() * 24);
  for (const Point3& p : points) {
    detail::append_le_double(out, p.x);
    detail::append_le_double(out, p.y);
    detail::append_le_double(out, p.z);
  }
  detail::write_file_bytes(path, out);
}

/// Reads either point format, chosen by extension (.ply, else ASCII xyz).
inline std::vector<Point3> read_point_cloud(const std::filesystem::path& path) {
  if (path.extension() == ".ply") return read_ply(path);
  return read_xyz(path);
}

// ---------------------------------------------------------------------------
// Station manifest: one scan station per line,
//   station_id viewpoint_x viewpoint_y viewpoint_z pointcloud_path
// Cloud paths are resolved relative to the manifest's directory.
// ---------------------------------------------------------------------------

struct StationEntry {
  std::string id;
  Point3 viewpoint;
  std::filesystem::path cloud_path;
};

inline std::vector<StationEntry> read_station_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  const std::filesystem::path base = path.parent_path();
  std::vector<StationEntry> entries;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::is_blank_or_comment(line)) continue;
    std::istringstream ls(line);
    StationEntry e;
    std::string rel;
    if (!(ls >> e.id >> e.viewpoint.x >> e.viewpoint.y >> e.viewpoint.z >> rel))
      throw IoError(path.string() + ":" + std::to_string(lineno) +
                    ": expected 'id x y z cloud_path'");
    e.cloud_path =
        std::filesystem::path(rel).is_absolute() ? std::filesystem::path(rel) : base / rel;
    entries.push_back(std::move(e));
  }
  if (entries.empty()) throw IoError(path.string() + ": no stations");
  return entries;
}

inline void write_station_manifest(const std::filesystem::path& path,
                                   const std::vector<StationEntry>& entries) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  const std::filesystem::path base = path.parent_path();
  for (const StationEntry& e : entries) {
    std::error_code ec;
    std::filesystem::path rel = std::filesystem::relative(e.cloud_path, base, ec);
    if (ec || rel.empty()) rel = e.cloud_path;
    out << e.id << ' ' << e.viewpoint.x << ' ' << e.viewpoint.y << ' ' << e.viewpoint.z << ' '
        << rel.generic_string() << '\n';
  }
}

// ---------------------------------------------------------------------------
// Flat key=value configuration. Every numeric stage parameter lives here so a
// run can be reproduced from the config file alone; the CLI maps --key value
// overrides onto the same names.
// ---------------------------------------------------------------------------

struct PipelineConfig {
  double tolerance = 0.7;           // half-width of the confirmation band, meters
  double raster_resolution = 0.05;  // conflict-map sampling, meters per pixel
  int classifier_size = 572;        // square resample fed to the classifier
  double alpha_window = 0.5;        // CM-branch weight for the window class
  double alpha_door = 0.5;          // CM-branch weight for the door class
  double min_area_frac = 0.005;     // opening candidate area threshold
  int kernel_w = 5;                 // morphological opening kernel
  int kernel_h = 5;
  std::string morphology = "post";  // "post", "pre", or "off"
  bool shape_approx = true;         // rectangle approximation for candidates
  uint64_t seed = 1;                // synthetic-data / experiment seed
  int threads = 1;

  bool operator==(const PipelineConfig&) const = default;
};

namespace detail {

inline bool parse_bool(const std::string& v) {
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  throw IoError("expected boolean, got '" + v + "'");
}

}  // namespace detail

/// Applies a single key=value pair; throws on unknown keys or bad values.
inline void config_set(PipelineConfig& cfg, const std::string& key, const std::string& value) {
  try {
    if (key == "tolerance") cfg.tolerance = std::stod(value);
    else if (key == "raster_resolution") cfg.raster_resolution = std::stod(value);
    else if (key == "classifier_size") cfg.classifier_size = std::stoi(value);
    else if (key == "alpha_window") cfg.alpha_window = std::stod(value);
    else if (key == "alpha_door") cfg.alpha_door = std::stod(value);
    else if (key == "min_area_frac") cfg.min_area_frac = std::stod(value);
    else if (key == "kernel_w") cfg.kernel_w = std::stoi(value);
    else if (key == "kernel_h") cfg.kernel_h = std::stoi(value);
    else if (key == "morphology") {
      if (value != "post" && value != "pre" && value != "off")
        throw IoError("morphology must be post, pre or off");
      cfg.morphology = value;
    } else if (key == "shape_approx") cfg.shape_approx = detail::parse_bool(value);
    else if (key == "seed") cfg.seed = std::stoull(value);
    else if (key == "threads") cfg.threads = std::stoi(value);
    else throw IoError("unknown config key '" + key + "'");
  } catch (const std::invalid_argument&) {
    throw IoError("bad value '" + value + "' for config key '" + key + "'");
  } catch (const std::out_of_range&) {
    throw IoError("bad value '" + value + "' for config key '" + key + "'");
  }
}

inline PipelineConfig read_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  PipelineConfig cfg;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::is_blank_or_comment(line)) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    auto trim = [](std::string s) {
      size_t b = s.find_first_not_of(" \t");
      size_t e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    config_set(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

inline std::string config_to_string(const PipelineConfig& cfg) {
  std::ostringstream out;
  out.precision(17);
  out << "tolerance=" << cfg.tolerance << '\n'
      << "raster_resolution=" << cfg.raster_resolution << '\n'
      << "classifier_size=" << cfg.classifier_size << '\n'
      << "alpha_window=" << cfg.alpha_window << '\n'
      << "alpha_door=" << cfg.alpha_door << '\n'
      << "min_area_frac=" << cfg.min_area_frac << '\n'
      << "kernel_w=" << cfg.kernel_w << '\n'
      << "kernel_h=" << cfg.kernel_h << '\n'
      << "morphology=" << cfg.morphology << '\n'
      << "shape_approx=" << (cfg.shape_approx ? "true" : "false") << '\n'
      << "seed=" << cfg.seed << '\n'
      << "threads=" << cfg.threads << '\n';
  return out.str();
}

inline void write_config(const std::filesystem::path& path, const PipelineConfig& cfg) {
  detail::write_file_bytes(path, config_to_string(cfg));
}

// ---------------------------------------------------------------------------
// Content hashing for run manifests and determinism checks
// ---------------------------------------------------------------------------

inline uint64_t hash_file(const std::filesystem::path& path) {
  const std::string bytes = detail::read_file_bytes(path);
  return fnv1a64(bytes.data(), bytes.size());
}

/// FNV-1a over every regular file under `root` (sorted relative paths, path
/// names mixed in). Files whose relative path appears in `exclude` are
/// skipped, which is how timing logs stay out of determinism comparisons.
inline uint64_t hash_tree(const std::filesystem::path& root,
                          const std::vector<std::string>& exclude = {}) {
  std::map<std::string, uint64_t> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    std::string rel = std::filesystem::relative(entry.path(), root).generic_string();
    bool skipped = false;
    for (const std::string& ex : exclude)
      if (rel == ex) {
        skipped = true;
        break;
      }
    if (!skipped) files[rel] = hash_file(entry.path());
  }
  uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& [rel, fh] : files) {
    h = fnv1a64(rel.data(), rel.size(), h);
    h = fnv1a64(&fh, sizeof(fh), h);
  }
  return h;
}

}  // namespace lod3kit
