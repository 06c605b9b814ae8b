#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lod3kit/citygml.hpp"
#include "lod3kit/image_png.hpp"
#include "lod3kit/raster.hpp"
#include "lod3kit/rng.hpp"
#include "lod3kit/threads.hpp"

namespace lod3kit {

// ---------------------------------------------------------------------------
// Procedural facade layouts
// ---------------------------------------------------------------------------

/// Opening rectangle in facade meters. The facade coordinate system has x
/// to the right and y downward (y = 0 at the top edge), matching raster
/// row order, so a door "touches the bottom" when rect.y_max == height.
struct LayoutOpening {
  OpeningKind kind = OpeningKind::Window;
  Rect2 rect;
};

struct FacadeLayout {
  double width = 0.0;   // meters
  double height = 0.0;  // meters
  std::vector<LayoutOpening> openings;
  int rows = 0;  // window grid summary, for manifests
  int cols = 0;
  int doors = 0;
};

struct LayoutParams {
  int min_rows = 1, max_rows = 6;
  int min_cols = 1, max_cols = 8;
  double win_w_min = 0.8, win_w_max = 1.6;   // meters
  double win_h_min = 1.0, win_h_max = 2.0;
  int min_doors = 0, max_doors = 2;
  double door_w_min = 0.9, door_w_max = 1.4;
  double door_h_min = 2.0, door_h_max = 2.6;
  double h_gap_min = 0.5, h_gap_max = 1.2;   // spacing between/around windows
  double v_gap_min = 0.5, v_gap_max = 1.0;
  // ground band below the lowest window row; taller when doors are present
  // so doors never reach the windows
  double ground_min = 1.0, ground_max = 2.0;
  double ground_door_min = 2.8, ground_door_max = 3.4;
};

/// Samples a facade: a rows x cols window grid with uniform window size
/// and spacing, plus 0-2 doors sitting on the bottom edge inside the
/// ground band. Deterministic per seed.
inline FacadeLayout sample_facade_layout(std::uint64_t rng_seed, const LayoutParams& p = {}) {
  if (p.min_rows < 1 || p.max_rows < p.min_rows || p.min_cols < 1 || p.max_cols < p.min_cols ||
      p.min_doors < 0 || p.max_doors < p.min_doors)
    throw std::invalid_argument("facade layout: empty parameter range");
  Rng rng(rng_seed);
  FacadeLayout fl;
  fl.rows = static_cast<int>(rng.uniform_int(p.min_rows, p.max_rows));
  fl.cols = static_cast<int>(rng.uniform_int(p.min_cols, p.max_cols));
  double win_w = rng.uniform(p.win_w_min, p.win_w_max);
  double win_h = rng.uniform(p.win_h_min, p.win_h_max);
  double h_gap = rng.uniform(p.h_gap_min, p.h_gap_max);
  double v_gap = rng.uniform(p.v_gap_min, p.v_gap_max);
  fl.doors = static_cast<int>(rng.uniform_int(p.min_doors, p.max_doors));
  double ground = fl.doors > 0 ? rng.uniform(p.ground_door_min, p.ground_door_max)
                               : rng.uniform(p.ground_min, p.ground_max);

  fl.width = fl.cols * win_w + (fl.cols + 1) * h_gap;
  fl.height = v_gap + fl.rows * (win_h + v_gap) + ground;

  for (int r = 0; r < fl.rows; ++r)
    for (int c = 0; c < fl.cols; ++c) {
      double x = h_gap + c * (win_w + h_gap);
      double y = v_gap + r * (win_h + v_gap);
      fl.openings.push_back({OpeningKind::Window, {x, y, x + win_w, y + win_h}});
    }

  const double margin = 0.3;       // door distance from facade sides
  const double door_gap = 0.2;     // distance between doors
  int placed = 0;
  std::vector<Rect2> door_rects;
  for (int d = 0; d < fl.doors; ++d) {
    double w = rng.uniform(p.door_w_min, p.door_w_max);
    double h = rng.uniform(p.door_h_min, std::min(p.door_h_max, ground - 0.2));
    if (fl.width - 2 * margin < w) {
      if (p.min_doors > 0) throw std::invalid_argument("facade layout: door cannot fit");
      break;
    }
    // rejection placement against previously placed doors
    bool ok = false;
    Rect2 rect;
    for (int attempt = 0; attempt < 50 && !ok; ++attempt) {
      double x = rng.uniform(margin, fl.width - margin - w);
      rect = {x, fl.height - h, x + w, fl.height};
      ok = true;
      for (const auto& other : door_rects)
        if (rect.x_min < other.x_max + door_gap && other.x_min < rect.x_max + door_gap)
          ok = false;
    }
    if (!ok) continue;  // facade too crowded for another door
    door_rects.push_back(rect);
    fl.openings.push_back({OpeningKind::Door, rect});
    ++placed;
  }
  fl.doors = placed;
  return fl;
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

/// A labeled training pair: the semantic map is the label, the conflict
/// grid is the would-be network input.
struct ScmPair {
  ClassMap scm;
  CmGrid cm;
};

namespace detail {

inline SemClass class_at_layout(const FacadeLayout& fl, double x, double y) {
  for (const auto& op : fl.openings)
    if (op.rect.contains(x, y))
      return op.kind == OpeningKind::Window ? SemClass::Window : SemClass::Door;
  return SemClass::Facade;
}

}  // namespace detail

/// Renders at an explicit pixel size; pixel centers sample the layout.
/// Openings become Window/Door in the label and Conflict in the map
/// (ideal noise-free sensing), facade becomes Confirmed.
inline ScmPair render_scm_sized(const FacadeLayout& fl, int width, int height) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("render_scm: empty raster");
  ScmPair out{ClassMap(width, height, SemClass::Facade),
              CmGrid(width, height, CmCell::Confirmed)};
  for (int y = 0; y < height; ++y) {
    double fy = (y + 0.5) * fl.height / height;
    for (int x = 0; x < width; ++x) {
      double fx = (x + 0.5) * fl.width / width;
      SemClass c = detail::class_at_layout(fl, fx, fy);
      out.scm.at(x, y) = c;
      if (c != SemClass::Facade) out.cm.at(x, y) = CmCell::Conflict;
    }
  }
  return out;
}

inline ScmPair render_scm(const FacadeLayout& fl, double resolution) {
  if (resolution <= 0.0) throw std::invalid_argument("render_scm: resolution must be positive");
  int w = std::max(1, static_cast<int>(std::ceil(fl.width / resolution)));
  int h = std::max(1, static_cast<int>(std::ceil(fl.height / resolution)));
  return render_scm_sized(fl, w, h);
}

// ---------------------------------------------------------------------------
// Occlusion masks
// ---------------------------------------------------------------------------

/// Binary occluder: nonzero cells block the view.
struct MaskImage {
  std::string id;
  Grid<std::uint8_t> mask;
};

struct MaskCorpus {
  std::vector<MaskImage> random_masks;
  std::vector<MaskImage> tree_masks;
  std::vector<std::string> used;  // mask ids, in application order

  size_t total() const { return random_masks.size() + tree_masks.size(); }
};

struct TreePlacement {
  double mu_x = 0, sigma_x = 0;  // pixels
  int delta = 0;                 // grounding offset, pixels
  int w_cm = 0, h_cm = 0, w_tree = 0, h_tree = 0;
  double x_p = 0;  // clamped horizontal position
  int y_p = 0;     // top row of the tree
};

/// Horizontal position from a centered gaussian, clamped into bounds;
/// vertical position grounds the tree below the bottom edge by delta.
inline TreePlacement place_tree(int w_cm, int h_cm, int w_tree, int h_tree, int delta,
                                double gaussian_draw) {
  if (w_tree > w_cm) throw std::invalid_argument("tree silhouette wider than the map");
  TreePlacement t;
  t.w_cm = w_cm;
  t.h_cm = h_cm;
  t.w_tree = w_tree;
  t.h_tree = h_tree;
  t.delta = delta;
  t.mu_x = (w_cm - w_tree) / 2.0;
  t.sigma_x = (w_cm - w_tree) / 6.0;
  t.x_p = std::clamp(t.mu_x + t.sigma_x * gaussian_draw, 0.0, double(w_cm - w_tree));
  t.y_p = h_cm + delta - h_tree;
  return t;
}

namespace detail {

/// Marks every nonzero mask cell as Unknown in both halves of the pair;
/// the footprint is clipped to the pair's bounds.
inline void stamp_mask(ScmPair& pair, const Grid<std::uint8_t>& mask, int at_x, int at_y) {
  for (int my = 0; my < mask.height; ++my) {
    int y = at_y + my;
    if (y < 0 || y >= pair.scm.height) continue;
    for (int mx = 0; mx < mask.width; ++mx) {
      int x = at_x + mx;
      if (x < 0 || x >= pair.scm.width) continue;
      if (!mask.at(mx, my)) continue;
      pair.scm.at(x, y) = SemClass::Unknown;
      pair.cm.at(x, y) = CmCell::Unknown;
    }
  }
}

}  // namespace detail

/// Which mask (if any) hit a dataset item; `mask_id` is empty for
/// untouched items.
struct OcclusionRecord {
  std::string mask_id;
  bool is_tree = false;
};

/// Occlusion pass over a whole dataset: selects |random|+|tree| distinct
/// items (sampling without replacement), applies each random mask at a
/// uniform position and each tree mask via place_tree, turning covered
/// pixels Unknown. Every mask is consumed exactly once; unselected items
/// pass through untouched. Returns one record per item.
inline std::vector<OcclusionRecord> apply_occlusions(std::vector<ScmPair>& dataset,
                                                     MaskCorpus& corpus, std::uint64_t rng_seed,
                                                     double delta_frac = 0.05, int threads = 1) {
  size_t m = corpus.total();
  if (m > dataset.size())
    throw std::invalid_argument("mask corpus larger than the dataset");
  std::vector<OcclusionRecord> records(dataset.size());
  if (m == 0) return records;

  Rng rng(rng_seed);
  std::vector<size_t> selected = rng.sample_without_replacement(dataset.size(), m);

  // Sequential assignment pass: which mask goes where, at which position.
  // All randomness is consumed here so the application loop can span
  // threads without changing the result.
  struct Job {
    size_t item;
    const MaskImage* mask;
    int x, y;
  };
  std::vector<Job> jobs;
  jobs.reserve(m);
  for (size_t k = 0; k < selected.size(); ++k) {
    size_t item = selected[k];
    const ScmPair& pair = dataset[item];
    bool is_random = k < corpus.random_masks.size();
    const MaskImage& mask =
        is_random ? corpus.random_masks[k] : corpus.tree_masks[k - corpus.random_masks.size()];
    if (mask.mask.width > pair.scm.width || (is_random && mask.mask.height > pair.scm.height))
      throw std::invalid_argument("mask " + mask.id + " larger than the conflict map");
    int x, y;
    if (is_random) {
      x = static_cast<int>(rng.uniform_int(0, pair.scm.width - mask.mask.width));
      y = static_cast<int>(rng.uniform_int(0, pair.scm.height - mask.mask.height));
    } else {
      int delta = static_cast<int>(std::lround(delta_frac * pair.scm.height));
      TreePlacement t = place_tree(pair.scm.width, pair.scm.height, mask.mask.width,
                                   mask.mask.height, delta, rng.normal());
      x = static_cast<int>(std::lround(t.x_p));
      y = t.y_p;
    }
    jobs.push_back({item, &mask, x, y});
    records[item] = {mask.id, !is_random};
    corpus.used.push_back(mask.id);
  }

  parallel_for(jobs.size(), threads, [&](size_t j) {
    detail::stamp_mask(dataset[jobs[j].item], jobs[j].mask->mask, jobs[j].x, jobs[j].y);
  });
  return records;
}

// ---------------------------------------------------------------------------
// Synthetic mask corpus (stand-in for real silhouette collections)
// ---------------------------------------------------------------------------

/// Random geometric occluder: a cluster of overlapping filled rectangles
/// and ellipses inside a w x h canvas.
inline MaskImage synth_random_mask(Rng& rng, const std::string& id, int w, int h) {
  MaskImage m{id, Grid<std::uint8_t>(w, h, 0)};
  int blobs = static_cast<int>(rng.uniform_int(2, 5));
  for (int b = 0; b < blobs; ++b) {
    bool ellipse = rng.uniform01() < 0.5;
    double cx = rng.uniform(0.2, 0.8) * w;
    double cy = rng.uniform(0.2, 0.8) * h;
    double rx = rng.uniform(0.1, 0.35) * w;
    double ry = rng.uniform(0.1, 0.35) * h;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double dx = (x + 0.5 - cx) / rx;
        double dy = (y + 0.5 - cy) / ry;
        bool inside = ellipse ? dx * dx + dy * dy <= 1.0
                              : std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
        if (inside) m.mask.at(x, y) = 1;
      }
  }
  return m;
}

/// Tree silhouette: trunk reaching the canvas bottom plus an elliptical
/// canopy. The bottom row is always occupied, so a grounded placement
/// covers the facade bottom.
inline MaskImage synth_tree_mask(Rng& rng, const std::string& id, int w, int h) {
  MaskImage m{id, Grid<std::uint8_t>(w, h, 0)};
  double trunk_w = std::max(2.0, rng.uniform(0.08, 0.16) * w);
  double cx = w / 2.0;
  double canopy_ry = rng.uniform(0.28, 0.42) * h;
  double canopy_rx = rng.uniform(0.3, 0.48) * w;
  double canopy_cy = canopy_ry + 0.05 * h;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double dx = (x + 0.5 - cx) / canopy_rx;
      double dy = (y + 0.5 - canopy_cy) / canopy_ry;
      bool canopy = dx * dx + dy * dy <= 1.0;
      bool trunk = std::abs(x + 0.5 - cx) <= trunk_w / 2.0 && y + 0.5 >= canopy_cy;
      if (canopy || trunk) m.mask.at(x, y) = 1;
    }
  return m;
}

/// Loads a binary mask corpus from PNG directories (luma > 127 occludes),
/// sorted by filename for reproducibility.
inline std::vector<MaskImage> load_mask_dir(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.path().extension() == ".png") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<MaskImage> out;
  for (const auto& f : files) {
    ImageGray8 img = read_png_gray8(f);
    MaskImage m{f.stem().string(), Grid<std::uint8_t>(img.width, img.height, 0)};
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        m.mask.at(x, y) = img.data[static_cast<size_t>(y) * img.width + x] > 127 ? 1 : 0;
    out.push_back(std::move(m));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

inline ImageIndexed8 scm_to_image(const ClassMap& scm) { return classmap_to_image(scm); }

inline ClassMap scm_from_image(const ImageIndexed8& img) { return classmap_from_image(img); }

/// Writes `<dir>/CM/<name>.png` (state colors) and `<dir>/SCM/<name>.png`
/// (indexed, class palette); both re-import losslessly.
inline void export_training_pair(const ClassMap& scm, const CmGrid& cm,
                                 const std::filesystem::path& dir, const std::string& name) {
  if (scm.width != cm.width || scm.height != cm.height)
    throw std::invalid_argument("training pair dimensions disagree");
  std::filesystem::create_directories(dir / "CM");
  std::filesystem::create_directories(dir / "SCM");
  write_png_rgb8(dir / "CM" / (name + ".png"), cm_to_image(cm));
  write_png_indexed(dir / "SCM" / (name + ".png"), scm_to_image(scm));
}

struct DatasetOptions {
  int count = 100;
  std::uint64_t seed = 1;
  int size = 572;  // output pixel dims (square)
  double delta_frac = 0.05;
  LayoutParams layout;
  int threads = 1;
};

/// Full generation run: procedural layouts, rendering, occlusion pass,
/// PNG export and a manifest.tsv (index, item seed, layout summary,
/// applied mask id or '-').
inline void generate_dataset(const std::filesystem::path& dir, DatasetOptions opt,
                             MaskCorpus corpus) {
  if (opt.count < 1) throw std::invalid_argument("dataset count must be >= 1");
  std::vector<ScmPair> items(opt.count);
  std::vector<std::uint64_t> item_seeds(opt.count);
  std::vector<FacadeLayout> layouts(opt.count);
  parallel_for(opt.count, opt.threads, [&](size_t i) {
    item_seeds[i] = Rng::child(opt.seed, i).next_u64();
    layouts[i] = sample_facade_layout(item_seeds[i], opt.layout);
    items[i] = render_scm_sized(layouts[i], opt.size, opt.size);
  });
  std::vector<OcclusionRecord> records =
      apply_occlusions(items, corpus, opt.seed ^ 0x5ca1ab1eULL, opt.delta_frac, opt.threads);

  std::filesystem::create_directories(dir);
  char name[16];
  for (int i = 0; i < opt.count; ++i) {
    std::snprintf(name, sizeof name, "%05d", i);
    export_training_pair(items[i].scm, items[i].cm, dir, name);
  }
  std::ofstream manifest(dir / "manifest.tsv");
  if (!manifest) throw std::runtime_error("cannot write " + (dir / "manifest.tsv").string());
  manifest << "index\tseed\trows\tcols\tdoors\tmask\n";
  for (int i = 0; i < opt.count; ++i) {
    std::snprintf(name, sizeof name, "%05d", i);
    manifest << name << '\t' << item_seeds[i] << '\t' << layouts[i].rows << '\t'
             << layouts[i].cols << '\t' << layouts[i].doors << '\t'
             << (records[i].mask_id.empty() ? "-" : records[i].mask_id) << '\n';
  }
}

}  // namespace lod3kit
