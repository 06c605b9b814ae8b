// lod3: command-line front end for the LoD3 reconstruction toolkit.
//
// Subcommands mirror the pipeline stages (cm, classify, fuse, reconstruct)
// plus dataset generation (scmg generate), model validation, evaluation,
// the full chained run, and the synthetic round-trip experiment.
//
// Exit codes: 0 success, 1 usage or runtime error, 2 content failure
// (validation violations or rolled-back walls).

#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lod3kit/pipeline.hpp"

namespace fs = std::filesystem;
using namespace lod3kit;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << bytes;
}

CityModel read_model(const fs::path& path) { return parse_citygml(slurp(path)); }

// Shared --config / --<key> plumbing. Config file values override the
// defaults, explicit command-line flags override the file.
struct ConfigCli {
  std::string config_path;
  PipelineConfig flags;  // receives CLI-bound values
  bool no_shape_approx = false;

  void attach(CLI::App* sub, bool with_fusion = true) {
    sub->add_option("--config", config_path, "key=value configuration file")
        ->check(CLI::ExistingFile);
    sub->add_option("--tolerance", flags.tolerance, "confirmation band half-width, meters");
    sub->add_option("--raster_resolution", flags.raster_resolution,
                    "conflict-map resolution, meters per pixel");
    sub->add_option("--classifier_size", flags.classifier_size,
                    "square classifier raster size");
    if (with_fusion) {
      sub->add_option("--alpha_window", flags.alpha_window, "CM-branch window weight");
      sub->add_option("--alpha_door", flags.alpha_door, "CM-branch door weight");
    }
    sub->add_option("--min_area_frac", flags.min_area_frac,
                    "opening candidate area threshold");
    sub->add_option("--kernel_w", flags.kernel_w, "morphology kernel width");
    sub->add_option("--kernel_h", flags.kernel_h, "morphology kernel height");
    sub->add_option("--morphology", flags.morphology, "post, pre, or off")
        ->check(CLI::IsMember({"post", "pre", "off"}));
    sub->add_flag("--no-shape-approx", no_shape_approx,
                  "trace component outlines instead of bounding rectangles");
    sub->add_option("--seed", flags.seed, "seed for synthetic data");
    sub->add_option("--threads", flags.threads, "worker thread cap");
  }

  PipelineConfig resolve(CLI::App* sub, PipelineConfig base = {}) const {
    PipelineConfig cfg = base;
    if (!config_path.empty()) cfg = read_config(config_path);
    auto take = [&](const char* name, auto member) {
      if (sub->count(name)) cfg.*member = flags.*member;
    };
    take("--tolerance", &PipelineConfig::tolerance);
    take("--raster_resolution", &PipelineConfig::raster_resolution);
    take("--classifier_size", &PipelineConfig::classifier_size);
    if (sub->get_option_no_throw("--alpha_window")) {
      take("--alpha_window", &PipelineConfig::alpha_window);
      take("--alpha_door", &PipelineConfig::alpha_door);
    }
    take("--min_area_frac", &PipelineConfig::min_area_frac);
    take("--kernel_w", &PipelineConfig::kernel_w);
    take("--kernel_h", &PipelineConfig::kernel_h);
    take("--morphology", &PipelineConfig::morphology);
    take("--seed", &PipelineConfig::seed);
    take("--threads", &PipelineConfig::threads);
    if (no_shape_approx) cfg.shape_approx = false;
    return cfg;
  }
};

// ---------------------------------------------------------------------------

int cmd_cm(const fs::path& lod2, const fs::path& stations_path, const fs::path& out,
           const PipelineConfig& cfg) {
  CityModel model = read_model(lod2);
  ValidationReport vr = validate_geometry(model);
  if (!vr.ok()) {
    std::cerr << "input model fails validation:\n" << vr.to_text();
    return 2;
  }
  std::vector<StationEntry> entries = read_station_manifest(stations_path);
  std::vector<ScanStation> stations;
  stations.reserve(entries.size());
  for (const StationEntry& e : entries)
    stations.push_back({e.id, e.viewpoint, read_point_cloud(e.cloud_path)});
  stage_cm(model, stations, cfg, out);
  std::cout << "wrote conflict maps for " << detail::list_stems(out, ".png").size()
            << " walls to " << out.string() << "\n";
  return 0;
}

int cmd_scmg_generate(const fs::path& out, int count, std::uint64_t seed, int size,
                      double delta_frac, const fs::path& tree_dir, const fs::path& random_dir,
                      int threads) {
  DatasetOptions opt;
  opt.count = count;
  opt.seed = seed;
  opt.size = size;
  opt.delta_frac = delta_frac;
  opt.threads = threads;
  MaskCorpus corpus;
  if (!random_dir.empty()) {
    for (MaskImage& m : load_mask_dir(random_dir)) corpus.random_masks.push_back(std::move(m));
  }
  if (!tree_dir.empty()) {
    for (MaskImage& m : load_mask_dir(tree_dir)) corpus.tree_masks.push_back(std::move(m));
  }
  generate_dataset(out, opt, std::move(corpus));
  std::cout << "generated " << count << " training pairs in " << out.string() << "\n";
  return 0;
}

int cmd_classify(const fs::path& cm_dir, const fs::path& out, const PipelineConfig& cfg) {
  stage_classify(cm_dir, cfg, out);
  std::cout << "wrote probability manifests for " << detail::list_stems(out, ".probs").size()
            << " walls to " << out.string() << "\n";
  return 0;
}

int cmd_fuse(const fs::path& cm_probs, const fs::path& img_probs, double alpha_win,
             double alpha_door, const fs::path& out, const fs::path& gt_path,
             const std::string& morphology, int kernel_w, int kernel_h) {
  fs::create_directories(out);
  std::string warning;
  ProbabilityRaster p_cm = ingest_probability_raster(cm_probs, &warning);
  if (!warning.empty()) std::cerr << "warning: " << warning << "\n";
  const bool pre = morphology == "pre";
  if (pre) p_cm = open_probability_raster(p_cm, kernel_w, kernel_h);

  ProbabilityRaster fused = std::move(p_cm);
  if (!img_probs.empty()) {
    warning.clear();
    ProbabilityRaster p_img = ingest_probability_raster(img_probs, &warning);
    if (!warning.empty()) std::cerr << "warning: " << warning << "\n";
    if (pre) p_img = open_probability_raster(p_img, kernel_w, kernel_h);
    fused = fuse(fused, p_img, FusionWeights::from_alphas(alpha_win, alpha_door));
  }

  write_probability_manifest(out, "fused", fused, "fusion");
  ClassMap map = argmax_classify(fused);
  if (morphology == "post") map = morphological_open(map, kernel_w, kernel_h);
  write_png_indexed(out / "classmap.png", classmap_to_image(map));
  for (int c = 0; c < kNumClasses; ++c) {
    const SemClass sc = static_cast<SemClass>(c);
    write_png_gray8(out / (std::string("heatmap_") + class_name(sc) + ".png"),
                    export_probability_heatmap(fused, sc));
  }
  if (!gt_path.empty()) {
    ClassMap gt = classmap_from_image(read_png_indexed(gt_path));
    EvalReport rep = evaluate_iou(map, gt);
    spit(out / "eval.tsv", rep.to_tsv());
  }
  std::cout << "fused outputs in " << out.string() << "\n";
  return 0;
}

int cmd_reconstruct(const fs::path& lod2, const fs::path& classmap_dir, const fs::path& out_gml,
                    const fs::path& probs_dir, const PipelineConfig& cfg) {
  CityModel model = read_model(lod2);
  std::vector<WallOutcome> outcomes =
      stage_reconstruct(model, classmap_dir, probs_dir, cfg, out_gml,
                        out_gml.parent_path().empty()
                            ? fs::path("reconstruct_report.tsv")
                            : out_gml.parent_path() / "reconstruct_report.tsv");
  bool all_ok = true;
  size_t openings = 0;
  for (const WallOutcome& o : outcomes) {
    openings += o.inserted;
    if (!o.ok) {
      all_ok = false;
      std::cerr << o.surface_id << " rolled back: " << o.message << "\n";
    }
  }
  std::cout << "wrote " << out_gml.string() << " (" << openings << " openings on "
            << outcomes.size() << " walls)\n";
  return all_ok ? 0 : 2;
}

int cmd_validate(const fs::path& path) {
  CityModel model = read_model(path);
  ValidationReport vr = validate_geometry(model);
  if (vr.ok()) {
    std::cout << "valid\n";
    return 0;
  }
  std::cout << vr.to_text();
  return 2;
}

int cmd_eval(const fs::path& pred, const fs::path& gt, const fs::path& out) {
  std::string text;
  if (fs::is_directory(pred)) {
    const fs::path report = out.empty() ? pred / "eval.tsv" : out;
    EvalReport rep = stage_eval(pred, gt, report);
    text = rep.to_tsv();
  } else {
    ClassMap p = classmap_from_image(read_png_indexed(pred));
    ClassMap g = classmap_from_image(read_png_indexed(gt));
    EvalReport rep = evaluate_iou(p, g);
    text = rep.to_tsv();
    if (!out.empty()) spit(out, text);
  }
  std::cout << text;
  return 0;
}

int cmd_run(const fs::path& lod2, const fs::path& stations, const fs::path& image_probs,
            const fs::path& gt, const fs::path& out, bool resume, const PipelineConfig& cfg) {
  PipelineInputs in;
  in.lod2 = lod2;
  in.stations = stations;
  in.image_probs = image_probs;
  in.ground_truth = gt;
  PipelineResult res = run_pipeline(cfg, in, out, resume);
  for (const WallOutcome& o : res.outcomes)
    if (!o.ok) std::cerr << o.surface_id << " rolled back: " << o.message << "\n";
  std::cout << "pipeline outputs in " << out.string() << "\n";
  if (res.eval && res.eval->mean_iou())
    std::cout << "mean IoU " << *res.eval->mean_iou() << "\n";
  return res.all_ok() ? 0 : 2;
}

int cmd_roundtrip(const fs::path& out, int buildings, double occlusion,
                  const PipelineConfig& cfg) {
  RoundtripOptions opt;
  opt.buildings = buildings;
  opt.occlusion = occlusion;
  opt.seed = cfg.seed;
  RoundtripReport rep = run_roundtrip_experiment(cfg, opt, out);
  std::cout << rep.to_tsv();
  return 0;
}

/// The synthetic facades contain windows small enough that the stock area
/// threshold would drop them; the experiment defaults to a finer raster and
/// a lower threshold. A --config file or explicit flags still win.
PipelineConfig roundtrip_defaults() {
  PipelineConfig cfg;
  cfg.raster_resolution = 0.03;
  cfg.min_area_frac = 0.0005;
  cfg.seed = 7;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LoD3 building reconstruction from laser-scan conflict maps"};
  app.require_subcommand(1);

  // cm
  auto* cm = app.add_subcommand("cm", "rasterize per-wall conflict maps from scans");
  fs::path cm_lod2, cm_stations, cm_out;
  ConfigCli cm_cfg;
  cm->add_option("--lod2", cm_lod2, "prior CityGML file")->required()->check(CLI::ExistingFile);
  cm->add_option("--stations", cm_stations, "station manifest")
      ->required()
      ->check(CLI::ExistingFile);
  cm->add_option("--out", cm_out, "output directory")->required();
  cm_cfg.attach(cm, /*with_fusion=*/false);

  // scmg generate
  auto* scmg = app.add_subcommand("scmg", "synthetic conflict-map generation");
  auto* gen = scmg->add_subcommand("generate", "generate labeled SCM/CM training pairs");
  fs::path gen_out, gen_tree, gen_random;
  int gen_count = 100, gen_size = 572, gen_threads = 1;
  std::uint64_t gen_seed = 1;
  double gen_delta = 0.05;
  gen->add_option("--count", gen_count, "number of pairs")->required();
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--tree-masks", gen_tree, "directory of tree silhouette masks")
      ->check(CLI::ExistingDirectory);
  gen->add_option("--random-masks", gen_random, "directory of random occluder masks")
      ->check(CLI::ExistingDirectory);
  gen->add_option("--delta-frac", gen_delta, "tree grounding offset as a height fraction");
  gen->add_option("--size", gen_size, "square raster size");
  gen->add_option("--threads", gen_threads, "worker thread cap");
  scmg->require_subcommand(1);

  // classify
  auto* cls = app.add_subcommand("classify", "heuristic per-wall class probabilities");
  fs::path cls_cm, cls_out;
  ConfigCli cls_cfg;
  cls->add_option("--cm", cls_cm, "conflict-map directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  cls->add_option("--out", cls_out, "output directory")->required();
  cls_cfg.attach(cls, /*with_fusion=*/false);

  // fuse
  auto* fu = app.add_subcommand("fuse", "fuse two probability rasters into a class map");
  fs::path fu_cm, fu_img, fu_out, fu_gt;
  double fu_alpha_win = 0.5, fu_alpha_door = 0.5;
  std::string fu_morph = "post";
  int fu_kw = 5, fu_kh = 5;
  fu->add_option("--cm-probs", fu_cm, "conflict-map branch manifest")
      ->required()
      ->check(CLI::ExistingFile);
  fu->add_option("--img-probs", fu_img, "image branch manifest")->check(CLI::ExistingFile);
  fu->add_option("--alpha-win", fu_alpha_win, "CM-branch window weight");
  fu->add_option("--alpha-door", fu_alpha_door, "CM-branch door weight");
  fu->add_option("--out", fu_out, "output directory")->required();
  fu->add_option("--gt", fu_gt, "reference class map for eval.tsv")->check(CLI::ExistingFile);
  fu->add_option("--morphology", fu_morph, "post, pre, or off")
      ->check(CLI::IsMember({"post", "pre", "off"}));
  fu->add_option("--kernel_w", fu_kw, "morphology kernel width");
  fu->add_option("--kernel_h", fu_kh, "morphology kernel height");

  // reconstruct
  auto* rec = app.add_subcommand("reconstruct", "insert detected openings into the prior model");
  fs::path rec_lod2, rec_maps, rec_out, rec_probs;
  ConfigCli rec_cfg;
  rec->add_option("--lod2", rec_lod2, "prior CityGML file")->required()->check(CLI::ExistingFile);
  rec->add_option("--classmaps", rec_maps, "class-map directory (PNG + .frame sidecars)")
      ->required()
      ->check(CLI::ExistingDirectory);
  rec->add_option("--out", rec_out, "output CityGML file")->required();
  rec->add_option("--probs", rec_probs, "probability manifests for candidate confidence")
      ->check(CLI::ExistingDirectory);
  rec->add_option("--min-area-frac", rec_cfg.flags.min_area_frac,
                  "opening candidate area threshold");
  rec->add_flag("--no-shape-approx", rec_cfg.no_shape_approx,
                "trace component outlines instead of bounding rectangles");

  // validate
  auto* val = app.add_subcommand("validate", "check CityGML geometry constraints");
  fs::path val_in;
  val->add_option("file", val_in, "CityGML file")->required()->check(CLI::ExistingFile);

  // eval
  auto* ev = app.add_subcommand("eval", "per-class IoU of predicted vs reference class maps");
  fs::path ev_pred, ev_gt, ev_out;
  ev->add_option("--pred", ev_pred, "predicted class map PNG or directory")->required();
  ev->add_option("--gt", ev_gt, "reference class map PNG or directory")->required();
  ev->add_option("--out", ev_out, "write the report here as well");

  // run
  auto* run = app.add_subcommand("run", "full pipeline: cm, classify, fuse, reconstruct, eval");
  fs::path run_lod2, run_stations, run_img, run_gt, run_out;
  bool run_resume = false;
  ConfigCli run_cfg;
  run->add_option("--lod2", run_lod2, "prior CityGML file")
      ->required()
      ->check(CLI::ExistingFile);
  run->add_option("--stations", run_stations, "station manifest")
      ->required()
      ->check(CLI::ExistingFile);
  run->add_option("--image-probs", run_img, "image-branch manifests by wall id")
      ->check(CLI::ExistingDirectory);
  run->add_option("--gt", run_gt, "reference class maps by wall id")
      ->check(CLI::ExistingDirectory);
  run->add_option("--out", run_out, "output directory")->required();
  run->add_flag("--resume", run_resume, "skip stages whose outputs are already present");
  run_cfg.attach(run);

  // roundtrip
  auto* rt = app.add_subcommand("roundtrip", "synthetic end-to-end experiment");
  fs::path rt_out;
  int rt_buildings = 20;
  double rt_occlusion = 0.0;
  ConfigCli rt_cfg;
  rt->add_option("--out", rt_out, "output directory")->required();
  rt->add_option("--buildings", rt_buildings, "number of procedural buildings");
  rt->add_option("--occlusion", rt_occlusion, "facade fraction hidden by occluders");
  rt_cfg.attach(rt);

  CLI11_PARSE(app, argc, argv);

  try {
    if (cm->parsed()) return cmd_cm(cm_lod2, cm_stations, cm_out, cm_cfg.resolve(cm));
    if (scmg->parsed())
      return cmd_scmg_generate(gen_out, gen_count, gen_seed, gen_size, gen_delta, gen_tree,
                               gen_random, gen_threads);
    if (cls->parsed()) return cmd_classify(cls_cm, cls_out, cls_cfg.resolve(cls));
    if (fu->parsed())
      return cmd_fuse(fu_cm, fu_img, fu_alpha_win, fu_alpha_door, fu_out, fu_gt, fu_morph,
                      fu_kw, fu_kh);
    if (rec->parsed()) {
      PipelineConfig cfg;
      cfg.min_area_frac = rec_cfg.flags.min_area_frac;
      cfg.shape_approx = !rec_cfg.no_shape_approx;
      return cmd_reconstruct(rec_lod2, rec_maps, rec_out, rec_probs, cfg);
    }
    if (val->parsed()) return cmd_validate(val_in);
    if (ev->parsed()) return cmd_eval(ev_pred, ev_gt, ev_out);
    if (run->parsed())
      return cmd_run(run_lod2, run_stations, run_img, run_gt, run_out, run_resume,
                     run_cfg.resolve(run));
    if (rt->parsed())
      return cmd_roundtrip(rt_out, rt_buildings, rt_occlusion,
                           rt_cfg.resolve(rt, roundtrip_defaults()));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
