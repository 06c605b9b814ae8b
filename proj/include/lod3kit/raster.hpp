#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lod3kit/geom.hpp"

namespace lod3kit {

template <typename T>
struct Grid {
  int width = 0;
  int height = 0;
  std::vector<T> cells;

  Grid() = default;
  Grid(int w, int h, T fill = T{}) : width(w), height(h), cells(static_cast<size_t>(w) * h, fill) {
    if (w < 0 || h < 0) throw std::invalid_argument("grid dimensions must be non-negative");
  }

  T& at(int x, int y) { return cells[static_cast<size_t>(y) * width + x]; }
  const T& at(int x, int y) const { return cells[static_cast<size_t>(y) * width + x]; }
  bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
  size_t size() const { return cells.size(); }
  bool operator==(const Grid& o) const = default;
};

/// Nearest-neighbor resampling; categorical contents survive unchanged.
template <typename T>
Grid<T> resample_nearest(const Grid<T>& src, int w, int h) {
  if (src.width == 0 || src.height == 0) throw std::invalid_argument("resample: empty source");
  Grid<T> dst(w, h);
  for (int y = 0; y < h; ++y) {
    int sy = std::min(src.height - 1, static_cast<int>((y + 0.5) * src.height / h));
    for (int x = 0; x < w; ++x) {
      int sx = std::min(src.width - 1, static_cast<int>((x + 0.5) * src.width / w));
      dst.at(x, y) = src.at(sx, sy);
    }
  }
  return dst;
}

// ---------------------------------------------------------------------------
// Visibility states
// ---------------------------------------------------------------------------

enum class PointState : std::uint8_t { Confirmed, Conflict, Unknown };

/// Conflict-map cell; Empty marks pixels no classified ray touched.
enum class CmCell : std::uint8_t { Empty = 0, Confirmed, Conflict, Unknown };

inline CmCell to_cell(PointState s) {
  switch (s) {
    case PointState::Confirmed: return CmCell::Confirmed;
    case PointState::Conflict: return CmCell::Conflict;
    case PointState::Unknown: return CmCell::Unknown;
  }
  return CmCell::Empty;
}

inline std::optional<PointState> to_state(CmCell c) {
  switch (c) {
    case CmCell::Confirmed: return PointState::Confirmed;
    case CmCell::Conflict: return PointState::Conflict;
    case CmCell::Unknown: return PointState::Unknown;
    case CmCell::Empty: return std::nullopt;
  }
  return std::nullopt;
}

/// Collision precedence: Conflict > Confirmed > Unknown > Empty. Used both
/// within one rasterization and when merging maps from several stations;
/// max() makes the merge associative and commutative.
inline int cell_precedence(CmCell c) {
  switch (c) {
    case CmCell::Conflict: return 3;
    case CmCell::Confirmed: return 2;
    case CmCell::Unknown: return 1;
    case CmCell::Empty: return 0;
  }
  return 0;
}

inline CmCell merge_cells(CmCell a, CmCell b) {
  return cell_precedence(a) >= cell_precedence(b) ? a : b;
}

using CmGrid = Grid<CmCell>;

// ---------------------------------------------------------------------------
// Semantic classes
// ---------------------------------------------------------------------------

/// The four-class scheme shared by synthetic maps, classifiers and fusion.
/// The integer codes are normative: they are the palette indices of
/// exported semantic PNGs.
enum class SemClass : std::uint8_t { Facade = 0, Window = 1, Door = 2, Unknown = 3 };

inline constexpr int kNumClasses = 4;

inline const char* class_name(SemClass c) {
  switch (c) {
    case SemClass::Facade: return "facade";
    case SemClass::Window: return "window";
    case SemClass::Door: return "door";
    case SemClass::Unknown: return "unknown";
  }
  return "?";
}

inline std::optional<SemClass> class_from_name(const std::string& s) {
  for (int i = 0; i < kNumClasses; ++i) {
    SemClass c = static_cast<SemClass>(i);
    if (s == class_name(c)) return c;
  }
  return std::nullopt;
}

using ClassMap = Grid<SemClass>;

// ---------------------------------------------------------------------------
// Color codecs
// ---------------------------------------------------------------------------

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

inline constexpr Rgb kCmColorConflict{255, 0, 0};
inline constexpr Rgb kCmColorConfirmed{0, 255, 0};
inline constexpr Rgb kCmColorUnknown{0, 0, 255};
inline constexpr Rgb kCmColorEmpty{128, 128, 128};

inline Rgb cell_color(CmCell c) {
  switch (c) {
    case CmCell::Conflict: return kCmColorConflict;
    case CmCell::Confirmed: return kCmColorConfirmed;
    case CmCell::Unknown: return kCmColorUnknown;
    case CmCell::Empty: return kCmColorEmpty;
  }
  return kCmColorEmpty;
}

inline CmCell cell_from_color(Rgb c) {
  if (c == kCmColorConflict) return CmCell::Conflict;
  if (c == kCmColorConfirmed) return CmCell::Confirmed;
  if (c == kCmColorUnknown) return CmCell::Unknown;
  if (c == kCmColorEmpty) return CmCell::Empty;
  throw std::runtime_error("unknown conflict-map state color (" + std::to_string(c.r) + "," +
                           std::to_string(c.g) + "," + std::to_string(c.b) + ")");
}

/// Display palette for semantic class PNGs, indexed by SemClass code.
inline constexpr std::array<Rgb, kNumClasses> kClassPalette{
    Rgb{200, 200, 200},  // facade
    Rgb{255, 215, 0},    // window
    Rgb{139, 69, 19},    // door
    Rgb{0, 0, 255},      // unknown
};

// ---------------------------------------------------------------------------
// Probability rasters
// ---------------------------------------------------------------------------

/// Per-class probability field on a pixel grid. Channel order is the
/// SemClass code order.
struct ProbabilityRaster {
  int width = 0;
  int height = 0;
  std::array<std::vector<double>, kNumClasses> channels;

  ProbabilityRaster() = default;
  ProbabilityRaster(int w, int h) : width(w), height(h) {
    for (auto& ch : channels) ch.assign(static_cast<size_t>(w) * h, 0.0);
  }

  size_t pixels() const { return static_cast<size_t>(width) * height; }
  double& at(SemClass c, int x, int y) {
    return channels[static_cast<int>(c)][static_cast<size_t>(y) * width + x];
  }
  double at(SemClass c, int x, int y) const {
    return channels[static_cast<int>(c)][static_cast<size_t>(y) * width + x];
  }

  void normalize() {
    for (size_t i = 0; i < pixels(); ++i) {
      double s = 0.0;
      for (const auto& ch : channels) s += ch[i];
      if (s > 0.0)
        for (auto& ch : channels) ch[i] /= s;
      else
        for (auto& ch : channels) ch[i] = 1.0 / kNumClasses;
    }
  }

  bool is_normalized(double tol = 1e-6) const {
    for (size_t i = 0; i < pixels(); ++i) {
      double s = 0.0;
      for (const auto& ch : channels) s += ch[i];
      if (std::abs(s - 1.0) > tol) return false;
    }
    return true;
  }
};

}  // namespace lod3kit
