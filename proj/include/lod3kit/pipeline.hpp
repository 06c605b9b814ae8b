#pragma once

// End-to-end pipeline: conflict-map extraction -> per-wall classification ->
// fusion -> opening reconstruction -> evaluation, with per-stage outputs on
// disk so stages can be resumed or swapped out individually. Also hosts the
// synthetic round-trip experiment used to measure the whole chain.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lod3kit/citygml.hpp"
#include "lod3kit/fusion.hpp"
#include "lod3kit/io.hpp"
#include "lod3kit/reconstruction.hpp"
#include "lod3kit/scmg.hpp"
#include "lod3kit/segmentation.hpp"
#include "lod3kit/threads.hpp"
#include "lod3kit/visibility.hpp"

namespace lod3kit {

struct PipelineError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

/// Sorted stems of all `ext` files directly under `dir`.
inline std::vector<std::string> list_stems(const std::filesystem::path& dir,
                                           const std::string& ext) {
  std::vector<std::string> out;
  if (!std::filesystem::exists(dir)) return out;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ext)
      out.push_back(e.path().stem().string());
  std::sort(out.begin(), out.end());
  return out;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Report messages go into single TSV cells.
inline std::string one_line(std::string s) {
  for (char& c : s)
    if (c == '\n' || c == '\t' || c == '\r') c = ' ';
  return s;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

/// Classifies every station's returns against the prior walls and writes one
/// conflict map (PNG + frame sidecar) per wall surface.
inline void stage_cm(const CityModel& model, const std::vector<ScanStation>& stations,
                     const PipelineConfig& cfg, const std::filesystem::path& cm_dir) {
  std::filesystem::create_directories(cm_dir);
  std::vector<const WallSurface*> walls;
  for (const Building* b : model.buildings())
    for (const WallSurface* w : b->walls()) walls.push_back(w);
  if (walls.empty()) throw PipelineError("input model has no wall surfaces");

  VisibilityConfig vis;
  vis.tolerance_t = cfg.tolerance;
  vis.raster_resolution = cfg.raster_resolution;

  WallScene scene = build_scene(walls);
  std::vector<ConflictMap> maps;
  maps.reserve(walls.size());
  for (const WallSurface* w : walls) maps.push_back(make_conflict_map(*w, vis));

  for (const ScanStation& st : stations) {
    std::vector<ClassifiedHit> hits = classify_station(st, scene, vis, cfg.threads);
    for (const ClassifiedHit& h : hits)
      if (h.wall >= 0) splat_hit(maps[h.wall], h.hit_point, h.state);
  }
  for (const ConflictMap& cm : maps)
    write_conflict_map(cm_dir / (cm.surface_id + ".png"), cm);
}

/// Resamples each conflict map to the classifier raster and runs the
/// built-in heuristic classifier; one probability manifest per wall.
inline void stage_classify(const std::filesystem::path& cm_dir, const PipelineConfig& cfg,
                           const std::filesystem::path& probs_dir) {
  std::filesystem::create_directories(probs_dir);
  std::vector<std::string> stems = detail::list_stems(cm_dir, ".png");
  if (stems.empty()) throw PipelineError("no conflict maps under " + cm_dir.string());
  parallel_for(stems.size(), cfg.threads, [&](std::size_t i) {
    ConflictMap cm = read_conflict_map(cm_dir / (stems[i] + ".png"));
    ConflictMap rs = resample_conflict_map(cm, cfg.classifier_size, cfg.classifier_size);
    write_probability_manifest(probs_dir, stems[i], heuristic_classify(rs), "cm-heuristic");
    // carry the pixel-to-wall mapping along at the new raster size
    detail::write_file_bytes(probs_dir / (stems[i] + ".frame"), format_cm_sidecar(rs));
  });
}

/// Combines the conflict-map branch with an optional image branch (matched
/// by stem under `image_probs_dir`), then derives the per-wall class map.
/// Walls without an image-branch manifest pass the CM probabilities through.
inline void stage_fuse(const std::filesystem::path& probs_cm_dir,
                       const std::filesystem::path& image_probs_dir,
                       const PipelineConfig& cfg,
                       const std::filesystem::path& probs_fused_dir,
                       const std::filesystem::path& classmap_dir) {
  std::filesystem::create_directories(probs_fused_dir);
  std::filesystem::create_directories(classmap_dir);
  std::vector<std::string> stems = detail::list_stems(probs_cm_dir, ".probs");
  if (stems.empty())
    throw PipelineError("no probability manifests under " + probs_cm_dir.string());
  const FusionWeights weights = FusionWeights::from_alphas(cfg.alpha_window, cfg.alpha_door);
  const bool pre = cfg.morphology == "pre";
  parallel_for(stems.size(), cfg.threads, [&](std::size_t i) {
    ProbabilityRaster fused =
        ingest_probability_raster(probs_cm_dir / (stems[i] + ".probs"));
    if (pre) fused = open_probability_raster(fused, cfg.kernel_w, cfg.kernel_h);
    if (!image_probs_dir.empty()) {
      const std::filesystem::path m = image_probs_dir / (stems[i] + ".probs");
      if (std::filesystem::exists(m)) {
        ProbabilityRaster p_img = ingest_probability_raster(m);
        if (pre) p_img = open_probability_raster(p_img, cfg.kernel_w, cfg.kernel_h);
        fused = fuse(fused, p_img, weights);
      }
    }
    write_probability_manifest(probs_fused_dir, stems[i], fused, "fusion");
    ClassMap map = argmax_classify(fused);
    if (cfg.morphology == "post") map = morphological_open(map, cfg.kernel_w, cfg.kernel_h);
    write_png_indexed(classmap_dir / (stems[i] + ".png"), classmap_to_image(map));
    const std::filesystem::path frame = probs_cm_dir / (stems[i] + ".frame");
    if (std::filesystem::exists(frame))
      detail::write_file_bytes(classmap_dir / (stems[i] + ".frame"),
                               detail::read_file_bytes(frame));
  });
}

/// Inserts openings from the class maps into the prior model and writes the
/// LoD3 document plus a per-wall outcome report.
inline std::vector<WallOutcome> stage_reconstruct(const CityModel& lod2,
                                                  const std::filesystem::path& classmap_dir,
                                                  const std::filesystem::path& probs_dir,
                                                  const PipelineConfig& cfg,
                                                  const std::filesystem::path& lod3_path,
                                                  const std::filesystem::path& report_path) {
  std::map<std::string, ClassMap> maps;
  std::map<std::string, WallFrame> frames;
  for (const std::string& stem : detail::list_stems(classmap_dir, ".png")) {
    maps.emplace(stem, classmap_from_image(read_png_indexed(classmap_dir / (stem + ".png"))));
    const std::filesystem::path fp = classmap_dir / (stem + ".frame");
    if (std::filesystem::exists(fp)) {
      std::istringstream is(detail::read_file_bytes(fp));
      std::string line;
      std::getline(is, line);
      frames.emplace(stem, parse_cm_sidecar(line).frame);
    }
  }
  if (maps.empty()) throw PipelineError("no class maps under " + classmap_dir.string());

  std::map<std::string, ProbabilityRaster> probs;
  if (!probs_dir.empty())
    for (const std::string& stem : detail::list_stems(probs_dir, ".probs"))
      probs.emplace(stem, ingest_probability_raster(probs_dir / (stem + ".probs")));

  ReconstructOptions opt;
  opt.min_area_frac = cfg.min_area_frac;
  opt.shape_approx = cfg.shape_approx;
  std::vector<WallOutcome> outcomes;
  CityModel lod3 = reconstruct_lod3(lod2, maps, probs, opt, &outcomes, frames);
  detail::write_file_bytes(lod3_path, serialize_citygml(lod3));

  std::ostringstream rep;
  rep << "surface\tstatus\topenings\tmessage\n";
  for (const WallOutcome& o : outcomes)
    rep << o.surface_id << '\t' << (o.ok ? "ok" : "failed") << '\t' << o.inserted << '\t'
        << detail::one_line(o.message) << '\n';
  detail::write_file_bytes(report_path, rep.str());
  return outcomes;
}

inline std::vector<WallOutcome> read_outcome_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw PipelineError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);  // header
  std::vector<WallOutcome> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t begin = 0;
    for (std::size_t i = 0; i <= line.size(); ++i)
      if (i == line.size() || line[i] == '\t') {
        cells.push_back(line.substr(begin, i - begin));
        begin = i + 1;
      }
    if (cells.size() < 3) throw PipelineError(path.string() + ": malformed outcome row");
    WallOutcome o;
    o.surface_id = cells[0];
    o.ok = cells[1] == "ok";
    o.inserted = std::stoull(cells[2]);
    if (cells.size() > 3) o.message = cells[3];
    out.push_back(std::move(o));
  }
  return out;
}

/// Per-wall IoU against reference class maps (matched by stem under
/// `gt_dir`), plus the aggregate over all matched walls.
inline EvalReport stage_eval(const std::filesystem::path& classmap_dir,
                             const std::filesystem::path& gt_dir,
                             const std::filesystem::path& eval_path) {
  EvalReport agg;
  std::ostringstream per;
  per << "surface\tmean_iou\n";
  bool any = false;
  for (const std::string& stem : detail::list_stems(classmap_dir, ".png")) {
    const std::filesystem::path gp = gt_dir / (stem + ".png");
    if (!std::filesystem::exists(gp)) continue;
    ClassMap pred = classmap_from_image(read_png_indexed(classmap_dir / (stem + ".png")));
    ClassMap gt = classmap_from_image(read_png_indexed(gp));
    if (gt.width != pred.width || gt.height != pred.height)
      throw PipelineError("reference class map dimensions disagree for " + stem);
    EvalReport r = evaluate_iou(pred, gt);
    for (int c = 0; c < kNumClasses; ++c)
      for (int o = 0; o < kNumClasses; ++o) agg.confusion[c][o] += r.confusion[c][o];
    per << stem << '\t';
    if (auto m = r.mean_iou()) per << *m; else per << "n/a";
    per << '\n';
    any = true;
  }
  if (!any)
    throw PipelineError("no reference class maps matched anything under " +
                        classmap_dir.string());
  finalize_iou(agg);
  detail::write_file_bytes(eval_path, per.str() + "\n" + agg.to_tsv());
  return agg;
}

// ---------------------------------------------------------------------------
// Orchestration
// ---------------------------------------------------------------------------

struct PipelineInputs {
  std::filesystem::path lod2;          // prior CityGML document
  std::filesystem::path stations;      // station manifest
  std::filesystem::path image_probs;   // optional: image-branch manifests
  std::filesystem::path ground_truth;  // optional: reference class maps
};

struct PipelineResult {
  std::vector<WallOutcome> outcomes;
  std::optional<EvalReport> eval;

  bool all_ok() const {
    if (outcomes.empty()) return false;
    for (const WallOutcome& o : outcomes)
      if (!o.ok) return false;
    return true;
  }
};

/// Runs cm -> classify -> fuse -> reconstruct (-> eval when reference maps
/// are given). Every stage leaves its outputs plus a `.done` marker in its
/// own directory; with `resume` set, stages whose marker survives are
/// skipped, so deleting a stage directory reruns just that part. Timings go
/// to timings.tsv, the only output file that is not reproducible bit for
/// bit.
inline PipelineResult run_pipeline(const PipelineConfig& cfg, const PipelineInputs& in,
                                   const std::filesystem::path& out_dir,
                                   bool resume = false) {
  std::filesystem::create_directories(out_dir);
  const auto cm_dir = out_dir / "cm";
  const auto probs_cm_dir = out_dir / "probs_cm";
  const auto probs_fused_dir = out_dir / "probs_fused";
  const auto classmap_dir = out_dir / "classmaps";
  const auto lod3_path = out_dir / "lod3.gml";
  const auto report_path = out_dir / "reconstruct_report.tsv";

  CityModel lod2 = parse_citygml(detail::read_file_bytes(in.lod2));
  ValidationReport vr = validate_geometry(lod2);
  if (!vr.ok()) throw PipelineError("input model fails validation:\n" + vr.to_text());
  std::vector<StationEntry> entries = read_station_manifest(in.stations);

  {
    std::ostringstream mf;
    mf << "[config]\n";
    // the thread count affects wall clock only, never output bytes, so it
    // stays out of the fingerprint and trees stay comparable across widths
    std::istringstream cs(config_to_string(cfg));
    for (std::string line; std::getline(cs, line);)
      if (line.rfind("threads=", 0) != 0) mf << line << '\n';
    mf << "[inputs]\n";
    mf << "lod2\t" << detail::hex64(hash_file(in.lod2)) << '\t' << in.lod2.filename().string()
       << '\n';
    mf << "stations\t" << detail::hex64(hash_file(in.stations)) << '\t'
       << in.stations.filename().string() << '\n';
    for (const StationEntry& e : entries)
      mf << "cloud\t" << detail::hex64(hash_file(e.cloud_path)) << '\t' << e.id << '\n';
    if (!in.image_probs.empty())
      mf << "image_probs\t" << detail::hex64(hash_tree(in.image_probs)) << '\t'
         << in.image_probs.filename().string() << '\n';
    if (!in.ground_truth.empty())
      mf << "ground_truth\t" << detail::hex64(hash_tree(in.ground_truth)) << '\t'
         << in.ground_truth.filename().string() << '\n';
    detail::write_file_bytes(out_dir / "run_manifest.txt", mf.str());
  }

  std::vector<std::pair<std::string, double>> timings;
  const auto timed = [&](const char* name, const std::filesystem::path& marker, auto&& fn) {
    if (resume && std::filesystem::exists(marker)) return false;
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
    timings.emplace_back(name, dt.count());
    detail::write_file_bytes(marker, "");
    return true;
  };

  timed("cm", cm_dir / ".done", [&] {
    std::vector<ScanStation> stations;
    stations.reserve(entries.size());
    for (const StationEntry& e : entries)
      stations.push_back({e.id, e.viewpoint, read_point_cloud(e.cloud_path)});
    stage_cm(lod2, stations, cfg, cm_dir);
  });
  timed("classify", probs_cm_dir / ".done", [&] { stage_classify(cm_dir, cfg, probs_cm_dir); });
  timed("fuse", classmap_dir / ".done",
        [&] { stage_fuse(probs_cm_dir, in.image_probs, cfg, probs_fused_dir, classmap_dir); });

  PipelineResult result;
  const bool ran_reconstruct = timed("reconstruct", out_dir / ".reconstruct.done", [&] {
    result.outcomes =
        stage_reconstruct(lod2, classmap_dir, probs_fused_dir, cfg, lod3_path, report_path);
  });
  if (!ran_reconstruct) result.outcomes = read_outcome_report(report_path);

  if (!in.ground_truth.empty()) {
    // evaluation is a cheap pure report, so it always reruns
    const auto t0 = std::chrono::steady_clock::now();
    result.eval = stage_eval(classmap_dir, in.ground_truth, out_dir / "eval.tsv");
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
    timings.emplace_back("eval", dt.count());
  }

  std::ostringstream ts;
  ts << "stage\tseconds\n";
  for (const auto& [name, secs] : timings) ts << name << '\t' << secs << '\n';
  detail::write_file_bytes(out_dir / "timings.tsv", ts.str());
  return result;
}

// ---------------------------------------------------------------------------
// Round-trip experiment
// ---------------------------------------------------------------------------

/// Facade layouts sized for roughly ten openings per building.
inline LayoutParams roundtrip_layout_params() {
  LayoutParams p;
  p.min_rows = 2;
  p.max_rows = 3;
  p.min_cols = 3;
  p.max_cols = 5;
  return p;
}

struct RoundtripOptions {
  int buildings = 20;
  double occlusion = 0.0;  // target fraction of each facade hidden by occluders
  std::uint64_t seed = 7;
  LayoutParams layout = roundtrip_layout_params();
};

struct RoundtripRow {
  std::string building_id;
  int gt_openings = 0;
  int detected = 0;
  int matched = 0;
  int considered = 0;          // reference openings that are not majority-occluded
  int considered_matched = 0;
  bool wall_ok = false;        // insertion succeeded (no rollback)
  bool valid = false;          // output wall passes geometry validation
};

struct RoundtripReport {
  std::vector<RoundtripRow> rows;
  int gt_total = 0, detected_total = 0, matched_total = 0;
  int considered_total = 0, considered_matched_total = 0;
  std::optional<double> mean_pixel_iou;
  EvalReport pixel_eval;
  double validity_rate = 0.0;

  double recall() const { return gt_total ? double(matched_total) / gt_total : 0.0; }
  double precision() const {
    return detected_total ? double(matched_total) / detected_total : 0.0;
  }
  double considered_recall() const {
    return considered_total ? double(considered_matched_total) / considered_total : 0.0;
  }

  std::string to_tsv() const {
    std::ostringstream os;
    os << "building\tgt\tdetected\tmatched\tconsidered\tconsidered_matched\twall_ok\tvalid\n";
    for (const RoundtripRow& r : rows)
      os << r.building_id << '\t' << r.gt_openings << '\t' << r.detected << '\t' << r.matched
         << '\t' << r.considered << '\t' << r.considered_matched << '\t' << (r.wall_ok ? 1 : 0)
         << '\t' << (r.valid ? 1 : 0) << '\n';
    os << "total\t" << gt_total << '\t' << detected_total << '\t' << matched_total << '\t'
       << considered_total << '\t' << considered_matched_total << "\t\t\n\n";
    os << "recall\t" << recall() << '\n';
    os << "precision\t" << precision() << '\n';
    os << "considered_recall\t" << considered_recall() << '\n';
    os << "mean_pixel_iou\t";
    if (mean_pixel_iou) os << *mean_pixel_iou; else os << "n/a";
    os << '\n';
    os << "validity_rate\t" << validity_rate << '\n';
    return os.str();
  }
};

namespace detail {

struct GtOpening {
  OpeningKind kind = OpeningKind::Window;
  Rect2 uv;               // in the wall frame, [0,1]^2
  double occluded = 0.0;  // fraction of its lattice samples behind occluders
};

struct GtWall {
  std::string building_id, wall_id;
  WallFrame frame;
  double width = 0.0, height = 0.0;
  std::vector<GtOpening> openings;
};

/// Sample lattice coordinate: pixel centers at spacing `s`, clamped so the
/// last (partial) pixel still gets a sample on the wall.
inline double lattice_coord(int i, double s, double limit) {
  return std::min((i + 0.5) * s, limit - 1e-9);
}

/// Stamps elliptical "blobs" and grounded "trees" into the occupancy grid
/// until the requested fraction of cells is covered; shapes that would
/// overshoot the budget are skipped, so coverage never exceeds `frac`.
inline void stamp_occluders(Grid<std::uint8_t>& occ, double w_m, double h_m, double s,
                            double frac, Rng rng) {
  const std::size_t target =
      static_cast<std::size_t>(frac * static_cast<double>(occ.size()));
  std::size_t covered = 0;
  for (int attempt = 0; attempt < 400 && covered < target; ++attempt) {
    const bool tree = rng.uniform01() < 0.5;
    double cx, cy, rx, ry;
    double trunk_half = 0.0;
    if (tree) {
      rx = ry = rng.uniform(0.7, 1.5);
      cx = rng.uniform(0.0, w_m);
      cy = h_m - rng.uniform(0.8, 1.8) - ry;  // canopy above a short trunk
      trunk_half = 0.12;
    } else {
      rx = rng.uniform(0.5, 1.2);
      ry = rng.uniform(0.5, 1.5);
      cx = rng.uniform(0.0, w_m);
      cy = rng.uniform(0.0, h_m);
    }
    const auto inside = [&](double x, double y) {
      const double dx = (x - cx) / rx, dy = (y - cy) / ry;
      if (dx * dx + dy * dy <= 1.0) return true;
      return tree && std::abs(x - cx) <= trunk_half && y >= cy;
    };
    const double y_lo = cy - ry, y_hi = tree ? h_m : cy + ry;
    const int ix0 = std::max(0, static_cast<int>(std::floor((cx - rx) / s)) - 1);
    const int ix1 = std::min(occ.width - 1, static_cast<int>(std::ceil((cx + rx) / s)) + 1);
    const int iy0 = std::max(0, static_cast<int>(std::floor(y_lo / s)) - 1);
    const int iy1 = std::min(occ.height - 1, static_cast<int>(std::ceil(y_hi / s)) + 1);

    std::size_t fresh = 0;
    for (int iy = iy0; iy <= iy1; ++iy)
      for (int ix = ix0; ix <= ix1; ++ix)
        if (!occ.at(ix, iy) &&
            inside(lattice_coord(ix, s, w_m), lattice_coord(iy, s, h_m)))
          ++fresh;
    if (fresh == 0 || covered + fresh > target) continue;
    for (int iy = iy0; iy <= iy1; ++iy)
      for (int ix = ix0; ix <= ix1; ++ix)
        if (inside(lattice_coord(ix, s, w_m), lattice_coord(iy, s, h_m)))
          occ.at(ix, iy) = 1;
    covered += fresh;
  }
}

inline double occluded_fraction(const Grid<std::uint8_t>& occ, const Rect2& rect, double s,
                                double w_m, double h_m) {
  const int ix0 = std::max(0, static_cast<int>(std::floor(rect.x_min / s)) - 1);
  const int ix1 = std::min(occ.width - 1, static_cast<int>(std::ceil(rect.x_max / s)) + 1);
  const int iy0 = std::max(0, static_cast<int>(std::floor(rect.y_min / s)) - 1);
  const int iy1 = std::min(occ.height - 1, static_cast<int>(std::ceil(rect.y_max / s)) + 1);
  std::size_t total = 0, hit = 0;
  for (int iy = iy0; iy <= iy1; ++iy)
    for (int ix = ix0; ix <= ix1; ++ix)
      if (rect.contains(lattice_coord(ix, s, w_m), lattice_coord(iy, s, h_m))) {
        ++total;
        if (occ.at(ix, iy)) ++hit;
      }
  return total ? static_cast<double>(hit) / static_cast<double>(total) : 0.0;
}

inline bool hits_opening(const FacadeLayout& lay, double x, double y) {
  for (const LayoutOpening& o : lay.openings)
    if (o.rect.contains(x, y)) return true;
  return false;
}

/// Reference class map in the wall frame at the classifier raster size.
inline ClassMap render_gt_classmap(const GtWall& gw, int size) {
  ClassMap m(size, size, SemClass::Facade);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double u = (x + 0.5) / size, v = (y + 0.5) / size;
      for (const GtOpening& o : gw.openings)
        if (o.uv.contains(u, v)) {
          m.at(x, y) = o.kind == OpeningKind::Door ? SemClass::Door : SemClass::Window;
          break;
        }
    }
  return m;
}

}  // namespace detail

/// Builds a procedural city of single-facade buildings with known openings,
/// simulates one scan station per facade (exact facade returns; returns well
/// behind the prior inside openings; returns well in front on occluders),
/// runs the full pipeline on the generated files, and scores the
/// reconstruction against the generating layouts.
inline RoundtripReport run_roundtrip_experiment(const PipelineConfig& cfg,
                                                const RoundtripOptions& opt,
                                                const std::filesystem::path& out_dir) {
  if (opt.buildings < 1) throw PipelineError("round trip needs at least one building");
  if (opt.occlusion < 0.0 || opt.occlusion > 0.5)
    throw PipelineError("occlusion fraction must be in [0, 0.5]");

  const auto input_dir = out_dir / "input";
  const auto cloud_dir = input_dir / "clouds";
  const auto gt_dir = out_dir / "gt_classmaps";
  std::filesystem::create_directories(cloud_dir);
  std::filesystem::create_directories(gt_dir);

  const double s = cfg.raster_resolution;  // one return per conflict-map pixel
  CityModel lod2;
  std::vector<StationEntry> stations;
  std::vector<detail::GtWall> gt;

  for (int b = 0; b < opt.buildings; ++b) {
    char nm[16];
    std::snprintf(nm, sizeof nm, "b%03d", b);
    const std::string bid = nm;
    const FacadeLayout lay =
        sample_facade_layout(Rng::child(opt.seed, 2 * b).next_u64(), opt.layout);
    const double wall_w = lay.width, wall_h = lay.height;
    const double ox = 40.0 * b;  // keep buildings far apart along x

    WallSurface ws;
    ws.id = bid + "_wall";
    ws.exterior.vertices = {{ox, 0, 0},
                            {ox + wall_w, 0, 0},
                            {ox + wall_w, 0, wall_h},
                            {ox, 0, wall_h},
                            {ox, 0, 0}};
    ws.corners = derive_corners(ws.exterior);
    Building bld;
    bld.id = bid;
    bld.lod = Lod::LoD2;
    BuildingMember member;
    member.is_wall = true;
    member.wall = ws;
    bld.members.push_back(std::move(member));
    CityMember cm_member;
    cm_member.is_building = true;
    cm_member.building = std::move(bld);
    lod2.members.push_back(std::move(cm_member));

    detail::GtWall gw;
    gw.building_id = bid;
    gw.wall_id = ws.id;
    gw.frame = wall_frame(ws);
    gw.width = wall_w;
    gw.height = wall_h;

    const int nx = std::max(1, static_cast<int>(std::ceil(wall_w / s)));
    const int ny = std::max(1, static_cast<int>(std::ceil(wall_h / s)));
    Grid<std::uint8_t> occ(nx, ny, 0);
    if (opt.occlusion > 0.0)
      detail::stamp_occluders(occ, wall_w, wall_h, s, opt.occlusion,
                              Rng::child(opt.seed, 2 * b + 1));

    for (const LayoutOpening& o : lay.openings) {
      Rect2 r = o.rect;
      // reference doors stop 1 cm above the wall edge so the reference model
      // itself passes strict containment
      if (o.kind == OpeningKind::Door) r.y_max = std::min(r.y_max, wall_h - 0.01);
      const Vec2 a = gw.frame.uv(Point3{ox + r.x_min, 0.0, wall_h - r.y_min});
      const Vec2 c = gw.frame.uv(Point3{ox + r.x_max, 0.0, wall_h - r.y_max});
      const Rect2 uv{std::min(a.x, c.x), std::min(a.y, c.y), std::max(a.x, c.x),
                     std::max(a.y, c.y)};
      gw.openings.push_back({o.kind, uv, detail::occluded_fraction(occ, o.rect, s, wall_w, wall_h)});
    }

    const Point3 vp{ox + wall_w / 2.0, -15.0, wall_h / 2.0};
    std::vector<Point3> pts;
    pts.reserve(static_cast<std::size_t>(nx) * ny);
    for (int iy = 0; iy < ny; ++iy)
      for (int ix = 0; ix < nx; ++ix) {
        const double lx = detail::lattice_coord(ix, s, wall_w);
        const double ly = detail::lattice_coord(iy, s, wall_h);
        const Point3 g{ox + lx, 0.0, wall_h - ly};
        double k = 1.0;  // exact return on the facade
        if (occ.at(ix, iy))
          k = 0.7;  // return on an occluder 4.5 m in front of the wall
        else if (detail::hits_opening(lay, lx, ly))
          k = 1.2;  // return 3 m behind the prior, through the opening
        pts.push_back(vp + (g - vp) * k);
      }
    const std::string sid = bid + "_st";
    const auto cloud_path = cloud_dir / (sid + ".ply");
    write_ply(cloud_path, pts);
    stations.push_back({sid, vp, cloud_path});

    write_png_indexed(gt_dir / (gw.wall_id + ".png"),
                      classmap_to_image(detail::render_gt_classmap(gw, cfg.classifier_size)));
    gt.push_back(std::move(gw));
  }

  const auto lod2_path = input_dir / "lod2.gml";
  detail::write_file_bytes(lod2_path, serialize_citygml(lod2));
  const auto stations_path = input_dir / "stations.txt";
  write_station_manifest(stations_path, stations);

  PipelineInputs in;
  in.lod2 = lod2_path;
  in.stations = stations_path;
  in.ground_truth = gt_dir;
  const PipelineResult pr = run_pipeline(cfg, in, out_dir / "run");

  CityModel lod3 = parse_citygml(detail::read_file_bytes(out_dir / "run" / "lod3.gml"));
  const ValidationReport post = validate_geometry(lod3);
  std::set<std::string> invalid;
  for (const Violation& v : post.violations) invalid.insert(v.surface_id);

  std::map<std::string, const WallSurface*> out_walls;
  for (const Building* bb : lod3.buildings())
    for (const WallSurface* w : bb->walls()) out_walls[w->id] = w;
  std::map<std::string, const WallOutcome*> outcome_by_id;
  for (const WallOutcome& o : pr.outcomes) outcome_by_id[o.surface_id] = &o;

  RoundtripReport rep;
  int valid_walls = 0;
  for (const detail::GtWall& gw : gt) {
    const auto it = out_walls.find(gw.wall_id);
    if (it == out_walls.end())
      throw PipelineError("wall " + gw.wall_id + " missing from the reconstructed model");
    const WallSurface& w = *it->second;
    const WallFrame fr = wall_frame(w);

    struct Det {
      OpeningKind kind;
      Rect2 uv;
    };
    std::vector<Det> dets;
    for (const Opening& op : w.openings) {
      Rect2 r{1e30, 1e30, -1e30, -1e30};
      for (const Point3& p : op.ring.open_vertices()) {
        const Vec2 q = fr.uv(p);
        r.x_min = std::min(r.x_min, q.x);
        r.y_min = std::min(r.y_min, q.y);
        r.x_max = std::max(r.x_max, q.x);
        r.y_max = std::max(r.y_max, q.y);
      }
      dets.push_back({op.kind, r});
    }

    RoundtripRow row;
    row.building_id = gw.building_id;
    row.gt_openings = static_cast<int>(gw.openings.size());
    row.detected = static_cast<int>(dets.size());

    struct Cand {
      double iou;
      std::size_t g, d;
    };
    std::vector<Cand> cands;
    for (std::size_t gi = 0; gi < gw.openings.size(); ++gi)
      for (std::size_t di = 0; di < dets.size(); ++di) {
        if (gw.openings[gi].kind != dets[di].kind) continue;
        const double iou = rect_iou(gw.openings[gi].uv, dets[di].uv);
        if (iou >= 0.5) cands.push_back({iou, gi, di});
      }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      if (a.iou != b.iou) return a.iou > b.iou;
      if (a.g != b.g) return a.g < b.g;
      return a.d < b.d;
    });
    std::vector<bool> g_used(gw.openings.size(), false), d_used(dets.size(), false);
    for (const Cand& c : cands) {
      if (g_used[c.g] || d_used[c.d]) continue;
      g_used[c.g] = d_used[c.d] = true;
      ++row.matched;
    }
    for (std::size_t gi = 0; gi < gw.openings.size(); ++gi) {
      const bool considered = gw.openings[gi].occluded <= 0.5;
      row.considered += considered;
      row.considered_matched += considered && g_used[gi];
    }

    const auto oc = outcome_by_id.find(gw.wall_id);
    row.wall_ok = oc != outcome_by_id.end() && oc->second->ok;
    row.valid = invalid.count(gw.wall_id) == 0;
    valid_walls += row.valid ? 1 : 0;

    rep.gt_total += row.gt_openings;
    rep.detected_total += row.detected;
    rep.matched_total += row.matched;
    rep.considered_total += row.considered;
    rep.considered_matched_total += row.considered_matched;
    rep.rows.push_back(std::move(row));
  }
  rep.validity_rate = static_cast<double>(valid_walls) / static_cast<double>(gt.size());
  if (pr.eval) {
    rep.pixel_eval = *pr.eval;
    rep.mean_pixel_iou = pr.eval->mean_iou();
  }
  detail::write_file_bytes(out_dir / "report.tsv", rep.to_tsv());
  return rep;
}

}  // namespace lod3kit
