#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>

#include "lod3kit/image_png.hpp"
#include "lod3kit/raster.hpp"

namespace lod3kit {

/// Per-class convex combination weights; the CM-side raster gets alpha,
/// the image-side raster beta, and each pair must sum to one.
struct FusionWeights {
  double alpha_door = 0.5, beta_door = 0.5;
  double alpha_win = 0.5, beta_win = 0.5;

  void check() const {
    auto bad = [](double a, double b) {
      return a < 0.0 || a > 1.0 || b < 0.0 || b > 1.0 || std::abs(a + b - 1.0) > 1e-12;
    };
    if (bad(alpha_door, beta_door) || bad(alpha_win, beta_win))
      throw std::invalid_argument("fusion weights must be convex pairs summing to 1");
  }

  static FusionWeights from_alphas(double alpha_win, double alpha_door) {
    FusionWeights w{alpha_door, 1.0 - alpha_door, alpha_win, 1.0 - alpha_win};
    w.check();
    return w;
  }
};

/// The raw weighted combination, before renormalization: Door and Window
/// channels take their own weight pairs, Facade and Unknown (for which no
/// weights are specified) combine 0.5/0.5. Degenerate weights reproduce
/// the corresponding input channel bit-exactly.
inline ProbabilityRaster fuse_raw(const ProbabilityRaster& p_cm, const ProbabilityRaster& p_img,
                                  const FusionWeights& w) {
  if (p_cm.width != p_img.width || p_cm.height != p_img.height)
    throw std::invalid_argument("fuse: raster dimensions disagree");
  w.check();
  ProbabilityRaster out(p_cm.width, p_cm.height);
  std::array<std::pair<double, double>, kNumClasses> pairs;
  pairs[static_cast<int>(SemClass::Facade)] = {0.5, 0.5};
  pairs[static_cast<int>(SemClass::Window)] = {w.alpha_win, w.beta_win};
  pairs[static_cast<int>(SemClass::Door)] = {w.alpha_door, w.beta_door};
  pairs[static_cast<int>(SemClass::Unknown)] = {0.5, 0.5};
  for (int c = 0; c < kNumClasses; ++c) {
    auto [a, b] = pairs[c];
    const auto& x = p_cm.channels[c];
    const auto& y = p_img.channels[c];
    auto& z = out.channels[c];
    for (size_t i = 0; i < z.size(); ++i) z[i] = x[i] * a + y[i] * b;
  }
  return out;
}

/// Fused and renormalized raster (differing per-class weights do not
/// preserve the unit sum by themselves).
inline ProbabilityRaster fuse(const ProbabilityRaster& p_cm, const ProbabilityRaster& p_img,
                              const FusionWeights& w) {
  if (!p_cm.is_normalized() || !p_img.is_normalized())
    throw std::invalid_argument("fuse: inputs must be normalized");
  ProbabilityRaster out = fuse_raw(p_cm, p_img, w);
  out.normalize();
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// Confusion counts indexed [gt][pred]; IoU per class, absent when the
/// class appears in neither map (0/0).
struct EvalReport {
  std::array<std::array<std::uint64_t, kNumClasses>, kNumClasses> confusion{};
  std::array<std::optional<double>, kNumClasses> iou;

  std::optional<double> mean_iou() const {
    double sum = 0.0;
    int n = 0;
    for (const auto& v : iou)
      if (v) {
        sum += *v;
        ++n;
      }
    if (n == 0) return std::nullopt;
    return sum / n;
  }

  std::string to_tsv() const {
    std::ostringstream os;
    os << "class\tiou\ttp\tfp\tfn\n";
    for (int c = 0; c < kNumClasses; ++c) {
      std::uint64_t tp = confusion[c][c], fp = 0, fn = 0;
      for (int o = 0; o < kNumClasses; ++o)
        if (o != c) {
          fp += confusion[o][c];
          fn += confusion[c][o];
        }
      os << class_name(static_cast<SemClass>(c)) << '\t';
      if (iou[c])
        os << *iou[c];
      else
        os << "n/a";
      os << '\t' << tp << '\t' << fp << '\t' << fn << '\n';
    }
    os << "mean\t";
    if (auto m = mean_iou())
      os << *m;
    else
      os << "n/a";
    os << "\t\t\t\n";
    return os.str();
  }
};

/// Fills the per-class IoU slots from the confusion counts; classes absent
/// from both prediction and reference stay unset.
inline void finalize_iou(EvalReport& r) {
  for (int c = 0; c < kNumClasses; ++c) {
    std::uint64_t tp = r.confusion[c][c], fp = 0, fn = 0;
    for (int o = 0; o < kNumClasses; ++o)
      if (o != c) {
        fp += r.confusion[o][c];
        fn += r.confusion[c][o];
      }
    std::uint64_t denom = tp + fp + fn;
    if (denom > 0) r.iou[c] = static_cast<double>(tp) / static_cast<double>(denom);
  }
}

inline EvalReport evaluate_iou(const ClassMap& pred, const ClassMap& gt) {
  if (pred.width != gt.width || pred.height != gt.height)
    throw std::invalid_argument("evaluate_iou: dimensions disagree");
  EvalReport r;
  for (size_t i = 0; i < gt.size(); ++i)
    ++r.confusion[static_cast<int>(gt.cells[i])][static_cast<int>(pred.cells[i])];
  finalize_iou(r);
  return r;
}

// ---------------------------------------------------------------------------
// Heatmaps
// ---------------------------------------------------------------------------

/// Probability channel to 8-bit grayscale, round half up (0.5 -> 128).
inline ImageGray8 export_probability_heatmap(const ProbabilityRaster& p, SemClass c) {
  ImageGray8 img(p.width, p.height);
  const auto& ch = p.channels[static_cast<int>(c)];
  for (size_t i = 0; i < ch.size(); ++i) {
    double v = std::clamp(ch[i], 0.0, 1.0);
    img.data[i] = static_cast<std::uint8_t>(std::floor(v * 255.0 + 0.5));
  }
  return img;
}

}  // namespace lod3kit
