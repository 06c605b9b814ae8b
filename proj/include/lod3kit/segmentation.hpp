#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lod3kit/image_png.hpp"
#include "lod3kit/raster.hpp"
#include "lod3kit/visibility.hpp"

namespace lod3kit {

// ---------------------------------------------------------------------------
// Connected components (4-connectivity)
// ---------------------------------------------------------------------------

struct ComponentInfo {
  int min_x = 0, min_y = 0, max_x = -1, max_y = -1;  // inclusive bbox
  size_t count = 0;
};

/// Labels 4-connected components of cells satisfying `keep`; background
/// cells get label -1. Scan order makes labels deterministic.
template <typename T, typename Pred>
std::pair<Grid<int>, std::vector<ComponentInfo>> label_components(const Grid<T>& grid,
                                                                  Pred keep) {
  Grid<int> labels(grid.width, grid.height, -1);
  std::vector<ComponentInfo> comps;
  std::vector<std::pair<int, int>> stack;
  for (int sy = 0; sy < grid.height; ++sy)
    for (int sx = 0; sx < grid.width; ++sx) {
      if (labels.at(sx, sy) != -1 || !keep(grid.at(sx, sy))) continue;
      int label = static_cast<int>(comps.size());
      comps.push_back({sx, sy, sx, sy, 0});
      ComponentInfo& info = comps.back();
      stack.push_back({sx, sy});
      labels.at(sx, sy) = label;
      while (!stack.empty()) {
        auto [x, y] = stack.back();
        stack.pop_back();
        ++info.count;
        info.min_x = std::min(info.min_x, x);
        info.max_x = std::max(info.max_x, x);
        info.min_y = std::min(info.min_y, y);
        info.max_y = std::max(info.max_y, y);
        const int nx[4] = {x - 1, x + 1, x, x};
        const int ny[4] = {y, y, y - 1, y + 1};
        for (int k = 0; k < 4; ++k) {
          if (!grid.in_bounds(nx[k], ny[k]) || labels.at(nx[k], ny[k]) != -1) continue;
          if (!keep(grid.at(nx[k], ny[k]))) continue;
          labels.at(nx[k], ny[k]) = label;
          stack.push_back({nx[k], ny[k]});
        }
      }
    }
  return {std::move(labels), std::move(comps)};
}

// ---------------------------------------------------------------------------
// Heuristic conflict-map classifier
// ---------------------------------------------------------------------------

/// Geometry cues for the deterministic classifier (a stand-in for a
/// trained network, and documented as such): conflict components whose
/// lower edge reaches the bottom band and which are taller than wide in
/// metric terms lean Door, the rest lean Window.
struct HeuristicParams {
  double bottom_band = 0.2;    // fraction of the facade height
  double door_aspect = 1.2;    // metric height/width threshold
  double conflict_mass = 0.7;  // winning opening class
  double door_window_mass = 0.2;  // Window mass on Door components
  double window_door_mass = 0.1;  // Door mass on Window components
  double facade_mass = 0.9;    // Confirmed -> Facade
  double unknown_mass = 0.8;   // Unknown/empty -> Unknown
};

/// Turns a conflict grid into per-class probabilities. `pixel_w` and
/// `pixel_h` are the metric pixel extents used for aspect ratios; pass 1,1
/// for synthetic square-pixel maps.
inline ProbabilityRaster heuristic_classify(const CmGrid& cm, double pixel_w = 1.0,
                                            double pixel_h = 1.0,
                                            const HeuristicParams& hp = {}) {
  if (cm.width == 0 || cm.height == 0)
    throw std::invalid_argument("heuristic_classify: empty conflict map");
  auto [labels, comps] =
      label_components(cm, [](CmCell c) { return c == CmCell::Conflict; });

  // Decide Door/Window once per component.
  std::vector<bool> is_door(comps.size(), false);
  for (size_t i = 0; i < comps.size(); ++i) {
    const ComponentInfo& c = comps[i];
    bool bottom = (c.max_y + 1) >= (1.0 - hp.bottom_band) * cm.height;
    double w_m = (c.max_x - c.min_x + 1) * pixel_w;
    double h_m = (c.max_y - c.min_y + 1) * pixel_h;
    is_door[i] = bottom && h_m / w_m >= hp.door_aspect;
  }

  ProbabilityRaster out(cm.width, cm.height);
  for (int y = 0; y < cm.height; ++y)
    for (int x = 0; x < cm.width; ++x) {
      double p[kNumClasses];
      switch (cm.at(x, y)) {
        case CmCell::Conflict: {
          bool door = is_door[labels.at(x, y)];
          double win = door ? hp.door_window_mass : hp.conflict_mass;
          double dor = door ? hp.conflict_mass : hp.window_door_mass;
          double rest = (1.0 - win - dor) / 2.0;
          p[0] = rest; p[1] = win; p[2] = dor; p[3] = rest;
          break;
        }
        case CmCell::Confirmed: {
          double rest = (1.0 - hp.facade_mass) / 3.0;
          p[0] = hp.facade_mass; p[1] = rest; p[2] = rest; p[3] = rest;
          break;
        }
        default: {  // Unknown or Empty: nothing observed here
          double rest = (1.0 - hp.unknown_mass) / 3.0;
          p[0] = rest; p[1] = rest; p[2] = rest; p[3] = hp.unknown_mass;
          break;
        }
      }
      for (int c = 0; c < kNumClasses; ++c) out.at(static_cast<SemClass>(c), x, y) = p[c];
    }
  out.normalize();
  return out;
}

inline ProbabilityRaster heuristic_classify(const ConflictMap& cm, const HeuristicParams& hp = {}) {
  double pw = cm.frame.width / cm.grid.width;
  double ph = cm.frame.height / cm.grid.height;
  return heuristic_classify(cm.grid, pw, ph, hp);
}

// ---------------------------------------------------------------------------
// Probability raster interchange (16-bit PNG per class + manifest)
// ---------------------------------------------------------------------------

inline ImageGray16 probability_to_image(const ProbabilityRaster& p, SemClass c) {
  ImageGray16 img(p.width, p.height);
  const auto& ch = p.channels[static_cast<int>(c)];
  for (size_t i = 0; i < ch.size(); ++i) {
    double v = std::clamp(ch[i], 0.0, 1.0);
    img.data[i] = static_cast<std::uint16_t>(std::lround(v * 65535.0));
  }
  return img;
}

/// Writes one 16-bit grayscale PNG per class plus a manifest line file.
/// Returns the manifest path.
inline std::filesystem::path write_probability_manifest(const std::filesystem::path& dir,
                                                        const std::string& stem,
                                                        const ProbabilityRaster& p,
                                                        const std::string& source = "lod3kit") {
  std::filesystem::create_directories(dir);
  std::ostringstream line;
  line << "source=" << source;
  for (int c = 0; c < kNumClasses; ++c) {
    SemClass cls = static_cast<SemClass>(c);
    std::string file = stem + "_" + class_name(cls) + ".png";
    write_png_gray16(dir / file, probability_to_image(p, cls));
    line << " ; class=" << class_name(cls) << " file=" << file;
  }
  std::filesystem::path manifest = dir / (stem + ".probs");
  std::ofstream os(manifest);
  if (!os) throw std::runtime_error("cannot write " + manifest.string());
  os << line.str() << '\n';
  return manifest;
}

/// Reads a manifest written by write_probability_manifest or by an
/// external tool following the same format: `class=NAME file=PATH` entries
/// separated by ';' or newlines, paths relative to the manifest. Values
/// are clamped to [0,1] and renormalized per pixel; deviations beyond
/// 1e-3 are reported through `warning` when provided.
inline ProbabilityRaster ingest_probability_raster(const std::filesystem::path& manifest_path,
                                                   std::string* warning = nullptr) {
  std::ifstream is(manifest_path);
  if (!is) throw std::runtime_error("cannot read " + manifest_path.string());
  std::stringstream buffer;
  buffer << is.rdbuf();
  std::string text = buffer.str();
  for (char& ch : text)
    if (ch == ';' || ch == '\n' || ch == '\t') ch = ' ';

  std::map<std::string, std::string> files;
  std::istringstream tokens(text);
  std::string tok, pending_class;
  while (tokens >> tok) {
    if (tok.rfind("class=", 0) == 0)
      pending_class = tok.substr(6);
    else if (tok.rfind("file=", 0) == 0) {
      if (pending_class.empty())
        throw std::runtime_error(manifest_path.string() + ": file entry without a class");
      files[pending_class] = tok.substr(5);
      pending_class.clear();
    }
  }
  ProbabilityRaster p;
  for (int c = 0; c < kNumClasses; ++c) {
    SemClass cls = static_cast<SemClass>(c);
    auto it = files.find(class_name(cls));
    if (it == files.end())
      throw std::runtime_error(manifest_path.string() + ": missing class channel '" +
                               class_name(cls) + "'");
    ImageGray16 img = read_png_gray16(manifest_path.parent_path() / it->second);
    if (c == 0) {
      p = ProbabilityRaster(img.width, img.height);
    } else if (img.width != p.width || img.height != p.height) {
      throw std::runtime_error(manifest_path.string() + ": channel dimensions disagree");
    }
    auto& ch = p.channels[c];
    for (size_t i = 0; i < ch.size(); ++i) ch[i] = img.data[i] / 65535.0;
  }
  double max_dev = 0.0;
  for (size_t i = 0; i < p.pixels(); ++i) {
    double s = 0.0;
    for (const auto& ch : p.channels) s += ch[i];
    max_dev = std::max(max_dev, std::abs(s - 1.0));
  }
  if (max_dev > 1e-3 && warning)
    *warning = manifest_path.string() + ": per-pixel sums deviate up to " +
               std::to_string(max_dev) + "; renormalized";
  p.normalize();
  return p;
}

// ---------------------------------------------------------------------------
// Morphology
// ---------------------------------------------------------------------------

namespace detail {

/// Windowed-sum helper over a binary grid via a summed-area table.
class BoxCounter {
 public:
  explicit BoxCounter(const Grid<std::uint8_t>& g)
      : w_(g.width), h_(g.height), sat_(static_cast<size_t>(w_ + 1) * (h_ + 1), 0) {
    for (int y = 0; y < h_; ++y)
      for (int x = 0; x < w_; ++x)
        at(x + 1, y + 1) = g.at(x, y) + at(x, y + 1) + at(x + 1, y) - at(x, y);
  }
  /// Sum over the clipped window [x0,x1] x [y0,y1], inclusive.
  long long window(int x0, int y0, int x1, int y1) const {
    x0 = std::max(x0, 0);
    y0 = std::max(y0, 0);
    x1 = std::min(x1, w_ - 1);
    y1 = std::min(y1, h_ - 1);
    if (x0 > x1 || y0 > y1) return 0;
    return at(x1 + 1, y1 + 1) - at(x0, y1 + 1) - at(x1 + 1, y0) + at(x0, y0);
  }

 private:
  int w_, h_;
  std::vector<long long> sat_;
  long long& at(int x, int y) { return sat_[static_cast<size_t>(y) * (w_ + 1) + x]; }
  long long at(int x, int y) const { return sat_[static_cast<size_t>(y) * (w_ + 1) + x]; }
};

}  // namespace detail

/// Binary opening (erosion then dilation) with a w x h rectangle, borders
/// treated as background.
inline Grid<std::uint8_t> binary_open(const Grid<std::uint8_t>& in, int kw, int kh) {
  if (kw % 2 == 0 || kh % 2 == 0 || kw < 1 || kh < 1)
    throw std::invalid_argument("morphological kernel must be odd in both dimensions");
  int rx = kw / 2, ry = kh / 2;
  Grid<std::uint8_t> eroded(in.width, in.height, 0);
  {
    detail::BoxCounter counter(in);
    long long full = static_cast<long long>(kw) * kh;
    for (int y = 0; y < in.height; ++y)
      for (int x = 0; x < in.width; ++x)
        // window clipped at the border can never reach `full` there,
        // which is exactly the background-border convention
        eroded.at(x, y) = counter.window(x - rx, y - ry, x + rx, y + ry) == full ? 1 : 0;
  }
  Grid<std::uint8_t> opened(in.width, in.height, 0);
  detail::BoxCounter counter(eroded);
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x)
      opened.at(x, y) = counter.window(x - rx, y - ry, x + rx, y + ry) > 0 ? 1 : 0;
  return opened;
}

/// Per-class opening of the non-facade classes; pixels an opening removes
/// fall back to Facade. Anti-extensive per class and idempotent.
inline ClassMap morphological_open(const ClassMap& map, int kw, int kh) {
  if (kw % 2 == 0 || kh % 2 == 0 || kw < 1 || kh < 1)
    throw std::invalid_argument("morphological kernel must be odd in both dimensions");
  if (kw == 1 && kh == 1) return map;
  ClassMap out = map;
  for (int ci = 0; ci < kNumClasses; ++ci) {
    SemClass cls = static_cast<SemClass>(ci);
    if (cls == SemClass::Facade) continue;
    Grid<std::uint8_t> bin(map.width, map.height, 0);
    for (size_t i = 0; i < map.size(); ++i) bin.cells[i] = map.cells[i] == cls ? 1 : 0;
    Grid<std::uint8_t> opened = binary_open(bin, kw, kh);
    for (size_t i = 0; i < map.size(); ++i)
      if (bin.cells[i] && !opened.cells[i]) out.cells[i] = SemClass::Facade;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Argmax
// ---------------------------------------------------------------------------

/// Winner per pixel; exact ties go to the lowest class code (Facade <
/// Window < Door < Unknown).
inline ClassMap argmax_classify(const ProbabilityRaster& p) {
  ClassMap map(p.width, p.height, SemClass::Facade);
  for (size_t i = 0; i < p.pixels(); ++i) {
    int best = 0;
    double best_v = p.channels[0][i];
    for (int c = 1; c < kNumClasses; ++c)
      if (p.channels[c][i] > best_v) {
        best = c;
        best_v = p.channels[c][i];
      }
    map.cells[i] = static_cast<SemClass>(best);
  }
  return map;
}

/// Pre-fusion morphology variant: opens the raster's argmax map and zeroes
/// the winning-class mass wherever the opening removed it, then
/// renormalizes. Used when noise suppression is wanted before fusion
/// rather than after.
inline ProbabilityRaster open_probability_raster(const ProbabilityRaster& p, int kw, int kh) {
  ClassMap before = argmax_classify(p);
  ClassMap after = morphological_open(before, kw, kh);
  ProbabilityRaster out = p;
  for (size_t i = 0; i < p.pixels(); ++i)
    if (before.cells[i] != after.cells[i])
      out.channels[static_cast<int>(before.cells[i])][i] = 0.0;
  out.normalize();
  return out;
}

}  // namespace lod3kit
