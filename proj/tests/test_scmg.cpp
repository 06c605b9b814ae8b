#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <set>

#include "lod3kit/scmg.hpp"

using namespace lod3kit;

namespace {

MaskCorpus small_corpus(std::uint64_t seed, int randoms, int trees, int w, int h) {
  Rng rng(seed);
  MaskCorpus corpus;
  for (int i = 0; i < randoms; ++i)
    corpus.random_masks.push_back(synth_random_mask(rng, "rnd" + std::to_string(i), w, h));
  for (int i = 0; i < trees; ++i)
    corpus.tree_masks.push_back(synth_tree_mask(rng, "tree" + std::to_string(i), w, h));
  return corpus;
}

}  // namespace

TEST_CASE("facade layouts satisfy their structural contract", "[scmg]") {
  LayoutParams p;
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    FacadeLayout fl = sample_facade_layout(seed, p);
    CAPTURE(seed);
    REQUIRE(fl.width > 0);
    REQUIRE(fl.height > 0);
    CHECK(fl.rows >= p.min_rows);
    CHECK(fl.rows <= p.max_rows);
    CHECK(fl.cols >= p.min_cols);
    CHECK(fl.cols <= p.max_cols);
    CHECK(fl.doors <= p.max_doors);

    int windows = 0, doors = 0;
    for (const auto& op : fl.openings) {
      // inside the facade
      CHECK(op.rect.x_min >= 0.0);
      CHECK(op.rect.y_min >= 0.0);
      CHECK(op.rect.x_max <= fl.width + 1e-12);
      CHECK(op.rect.y_max <= fl.height + 1e-12);
      if (op.kind == OpeningKind::Window) {
        ++windows;
      } else {
        ++doors;
        // doors sit exactly on the bottom edge
        CHECK(op.rect.y_max == fl.height);
      }
    }
    CHECK(windows == fl.rows * fl.cols);
    CHECK(doors == fl.doors);

    // openings are pairwise disjoint
    for (size_t i = 0; i < fl.openings.size(); ++i)
      for (size_t j = i + 1; j < fl.openings.size(); ++j)
        CHECK_FALSE(fl.openings[i].rect.intersects(fl.openings[j].rect));
  }
}

TEST_CASE("facade layout is a pure function of its seed", "[scmg]") {
  FacadeLayout a = sample_facade_layout(99);
  FacadeLayout b = sample_facade_layout(99);
  CHECK(a.width == b.width);
  CHECK(a.height == b.height);
  REQUIRE(a.openings.size() == b.openings.size());
  for (size_t i = 0; i < a.openings.size(); ++i) {
    CHECK(a.openings[i].rect.x_min == b.openings[i].rect.x_min);
    CHECK(a.openings[i].rect.y_max == b.openings[i].rect.y_max);
  }
  // neighboring seeds produce different facades
  FacadeLayout c = sample_facade_layout(100);
  CHECK((a.width != c.width || a.height != c.height || a.openings.size() != c.openings.size()));
  CHECK_THROWS_AS(sample_facade_layout(1, LayoutParams{.min_rows = 3, .max_rows = 2}),
                  std::invalid_argument);
}

TEST_CASE("rendering samples pixel centers against the layout", "[scmg]") {
  FacadeLayout fl = sample_facade_layout(7);
  const int size = 128;
  ScmPair pair = render_scm_sized(fl, size, size);
  REQUIRE(pair.scm.width == size);
  REQUIRE(pair.cm.height == size);
  // brute-force oracle over every pixel
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      double fx = (x + 0.5) * fl.width / size;
      double fy = (y + 0.5) * fl.height / size;
      SemClass expect = SemClass::Facade;
      for (const auto& op : fl.openings)
        if (op.rect.contains(fx, fy))
          expect = op.kind == OpeningKind::Window ? SemClass::Window : SemClass::Door;
      REQUIRE(pair.scm.at(x, y) == expect);
      REQUIRE(pair.cm.at(x, y) ==
              (expect == SemClass::Facade ? CmCell::Confirmed : CmCell::Conflict));
    }
  CHECK_THROWS_AS(render_scm_sized(fl, 0, 10), std::invalid_argument);
  CHECK_THROWS_AS(render_scm(fl, 0.0), std::invalid_argument);
}

TEST_CASE("tree placement follows the centered gaussian rule", "[scmg]") {
  // 500-wide map, 100-wide tree: mu = 400/2, sigma = 400/6
  TreePlacement t = place_tree(500, 400, 100, 150, 20, 0.0);
  CHECK(t.mu_x == Catch::Approx(200.0));
  CHECK(t.sigma_x == Catch::Approx(400.0 / 6.0));
  CHECK(t.x_p == Catch::Approx(200.0));
  CHECK(t.y_p == 400 + 20 - 150);

  // one sigma to the right
  CHECK(place_tree(500, 400, 100, 150, 20, 1.0).x_p ==
        Catch::Approx(200.0 + 400.0 / 6.0));
  // extreme draws clamp into [0, w_cm - w_tree]
  CHECK(place_tree(500, 400, 100, 150, 20, -100.0).x_p == 0.0);
  CHECK(place_tree(500, 400, 100, 150, 20, 100.0).x_p == 400.0);
  // degenerate fit: tree exactly as wide as the map pins to zero
  CHECK(place_tree(100, 400, 100, 150, 0, 3.0).x_p == 0.0);
  CHECK_THROWS_AS(place_tree(80, 400, 100, 150, 0, 0.0), std::invalid_argument);
}

TEST_CASE("synthetic masks have sane footprints", "[scmg]") {
  Rng rng(3);
  MaskImage r = synth_random_mask(rng, "r", 60, 50);
  size_t on = 0;
  for (auto v : r.mask.cells) on += v;
  CHECK(on > 0);
  CHECK(on < r.mask.size());

  MaskImage t = synth_tree_mask(rng, "t", 60, 80);
  // tree trunks reach the canvas bottom, so a grounded placement occludes
  // the facade's bottom edge
  bool bottom_occupied = false;
  for (int x = 0; x < t.mask.width; ++x)
    if (t.mask.at(x, t.mask.height - 1)) bottom_occupied = true;
  CHECK(bottom_occupied);
}

TEST_CASE("occlusion pass touches exactly the corpus-sized subset", "[scmg]") {
  const int n = 40, size = 96;
  std::vector<ScmPair> clean(n);
  for (int i = 0; i < n; ++i)
    clean[i] = render_scm_sized(sample_facade_layout(1000 + i), size, size);

  std::vector<ScmPair> ds = clean;
  MaskCorpus corpus = small_corpus(5, 4, 3, 30, 40);
  auto records = apply_occlusions(ds, corpus, 77, 0.05);
  REQUIRE(records.size() == static_cast<size_t>(n));

  int differing = 0;
  std::set<std::string> used_ids;
  for (int i = 0; i < n; ++i) {
    bool changed = !(ds[i].scm == clean[i].scm);
    if (changed) ++differing;
    CHECK(changed == !records[i].mask_id.empty());
    if (!records[i].mask_id.empty()) {
      CHECK(used_ids.insert(records[i].mask_id).second);  // no mask reused
      // occluded pixels turn Unknown in both halves of the pair
      for (size_t k = 0; k < ds[i].scm.size(); ++k)
        if (ds[i].scm.cells[k] != clean[i].scm.cells[k]) {
          CHECK(ds[i].scm.cells[k] == SemClass::Unknown);
          CHECK(ds[i].cm.cells[k] == CmCell::Unknown);
        }
    }
  }
  CHECK(differing == 7);
  CHECK(corpus.used.size() == 7);
  // corpus order: random masks first, then trees
  for (int k = 0; k < 4; ++k) CHECK(corpus.used[k].substr(0, 3) == "rnd");
  for (int k = 4; k < 7; ++k) CHECK(corpus.used[k].substr(0, 4) == "tree");

  // deterministic per seed
  std::vector<ScmPair> again = clean;
  MaskCorpus corpus2 = small_corpus(5, 4, 3, 30, 40);
  auto records2 = apply_occlusions(again, corpus2, 77, 0.05);
  for (int i = 0; i < n; ++i) {
    CHECK(records2[i].mask_id == records[i].mask_id);
    CHECK(again[i].scm == ds[i].scm);
    CHECK(again[i].cm == ds[i].cm);
  }

  // a corpus larger than the dataset is refused
  std::vector<ScmPair> tiny(2, clean[0]);
  MaskCorpus big = small_corpus(6, 2, 1, 20, 20);
  CHECK_THROWS_AS(apply_occlusions(tiny, big, 1), std::invalid_argument);
}

TEST_CASE("tree masks ground at the facade bottom", "[scmg]") {
  // one tree mask over a single-item dataset: the stamped footprint's
  // bottom row must reach the bottom edge (y_p + h_tree >= h_cm)
  const int size = 120;
  std::vector<ScmPair> ds{render_scm_sized(sample_facade_layout(4), size, size)};
  ClassMap before = ds[0].scm;
  MaskCorpus corpus;
  Rng rng(9);
  corpus.tree_masks.push_back(synth_tree_mask(rng, "t0", 40, 60));
  apply_occlusions(ds, corpus, 123, 0.05);

  int lowest = -1;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      if (ds[0].scm.at(x, y) == SemClass::Unknown && before.at(x, y) != SemClass::Unknown)
        lowest = std::max(lowest, y);
  // delta = round(0.05 * 120) = 6 rows hang below the edge; the silhouette
  // occupies its full bottom row, so occlusion reaches the last row
  CHECK(lowest == size - 1);
}

TEST_CASE("dataset generation writes a complete training set", "[scmg]") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "lod3kit_scmg_test";
  fs::remove_all(dir);
  DatasetOptions opt;
  opt.count = 6;
  opt.seed = 42;
  opt.size = 64;
  generate_dataset(dir, opt, small_corpus(8, 2, 1, 20, 24));

  for (int i = 0; i < opt.count; ++i) {
    char name[16];
    std::snprintf(name, sizeof name, "%05d", i);
    REQUIRE(fs::exists(dir / "SCM" / (std::string(name) + ".png")));
    REQUIRE(fs::exists(dir / "CM" / (std::string(name) + ".png")));
  }
  REQUIRE(fs::exists(dir / "manifest.tsv"));

  // the pair re-imports losslessly and stays self-consistent
  ClassMap scm = scm_from_image(read_png_indexed(dir / "SCM" / "00000.png"));
  CmGrid cm = cm_from_image(read_png_rgb8(dir / "CM" / "00000.png"));
  REQUIRE(scm.width == opt.size);
  REQUIRE(cm.width == opt.size);
  for (int y = 0; y < opt.size; ++y)
    for (int x = 0; x < opt.size; ++x) {
      SemClass c = scm.at(x, y);
      CmCell m = cm.at(x, y);
      if (c == SemClass::Facade) CHECK(m == CmCell::Confirmed);
      if (c == SemClass::Window || c == SemClass::Door) CHECK(m == CmCell::Conflict);
      if (c == SemClass::Unknown) CHECK(m == CmCell::Unknown);
    }

  // same options, same corpus: byte-identical dataset
  fs::path dir2 = fs::temp_directory_path() / "lod3kit_scmg_test2";
  fs::remove_all(dir2);
  generate_dataset(dir2, opt, small_corpus(8, 2, 1, 20, 24));
  auto bytes = [](const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  };
  CHECK(bytes(dir / "SCM" / "00003.png") == bytes(dir2 / "SCM" / "00003.png"));
  CHECK(bytes(dir / "manifest.tsv") == bytes(dir2 / "manifest.tsv"));
  fs::remove_all(dir);
  fs::remove_all(dir2);
}
