#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "dimtp/evaluation.hpp"
#include "dimtp/predictor.hpp"
#include "dimtp/rng.hpp"
#include "dimtp/scenario_io.hpp"
#include "model_util.hpp"

using namespace dimtp;

namespace {

std::vector<Point> offset_track(std::span<const Point> base, double dlon, double dlat) {
  std::vector<Point> out(base.begin(), base.end());
  for (Point& p : out) {
    p.lon += dlon;
    p.lat += dlat;
  }
  return out;
}

// Straight-line replay of the best-of rule for the oracle comparison.
struct OracleBest {
  double ade, fde;
  int idx;
};
OracleBest oracle_best(const std::vector<std::vector<Point>>& cands,
                       std::span<const Point> gt) {
  OracleBest best{0, 0, -1};
  double best_sum = 1e300;
  for (std::size_t j = 0; j < cands.size(); ++j) {
    double ade = 0;
    for (std::size_t t = 0; t < gt.size(); ++t) ade += haversine_m(cands[j][t], gt[t]);
    ade /= static_cast<double>(gt.size());
    const double fde = haversine_m(cands[j].back(), gt.back());
    if (ade + fde < best_sum) {
      best_sum = ade + fde;
      best = {ade, fde, static_cast<int>(j)};
    }
  }
  return best;
}

}  // namespace

TEST_CASE("best-of candidates") {
  const std::vector<Point> gt = {{0, 0}, {0.001, 0.001}, {0.002, 0.002}, {0.003, 0.003}};
  SUBCASE("exact candidate wins with zero error") {
    const BestOf b = best_of_candidates({offset_track(gt, 0.01, 0), gt}, gt);
    CHECK(b.index == 1);
    CHECK(b.ade_m == 0.0);
    CHECK(b.fde_m == 0.0);
  }
  SUBCASE("constant latitude offset gives the arc length") {
    const BestOf b = best_of_candidates({offset_track(gt, 0.0, 0.001)}, gt);
    CHECK(b.ade_m == doctest::Approx(111.19).epsilon(0.001));
    CHECK(b.fde_m == doctest::Approx(111.19).epsilon(0.001));
  }
  SUBCASE("selection is joint over ade + fde") {
    // A: best ADE, bad FDE. B: best FDE, bad ADE. C: best combined.
    std::vector<Point> a = offset_track(gt, 0.0, 0.0001);
    a.back().lat += 0.01;
    std::vector<Point> b = offset_track(gt, 0.0, 0.005);
    b.back() = gt.back();
    const std::vector<Point> c = offset_track(gt, 0.0, 0.0008);
    const BestOf best = best_of_candidates({a, b, c}, gt);
    CHECK(best.index == 2);
  }
  SUBCASE("matches the exhaustive oracle with ties") {
    Rng rng(61);
    for (int trial = 0; trial < 300; ++trial) {
      const int L_p = rng.uniform_int(1, 6);
      const int n = rng.uniform_int(1, 8);
      std::vector<Point> gtr;
      for (int t = 0; t < L_p; ++t) {
        gtr.push_back({rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1)});
      }
      std::vector<std::vector<Point>> cands;
      for (int j = 0; j < n; ++j) {
        if (j > 0 && rng.uniform() < 0.3) {
          cands.push_back(cands[rng.uniform_int(0, j - 1)]);  // forced exact tie
          continue;
        }
        cands.push_back(offset_track(gtr, rng.uniform(-0.01, 0.01), rng.uniform(-0.01, 0.01)));
      }
      const BestOf got = best_of_candidates(cands, gtr);
      const OracleBest want = oracle_best(cands, gtr);
      CHECK(got.index == want.idx);
      CHECK(got.ade_m == doctest::Approx(want.ade).epsilon(1e-12));
      CHECK(got.fde_m == doctest::Approx(want.fde).epsilon(1e-12));
    }
  }
  SUBCASE("length mismatch is rejected") {
    CHECK_THROWS_AS(best_of_candidates({offset_track(gt, 0, 0)},
                                       std::span<const Point>(gt.data(), 3)),
                    std::invalid_argument);
  }
}

TEST_CASE("dataset evaluation") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "dimtp_eval_test";
  fs::remove_all(dir);
  fs::create_directories(dir);

  ModelConfig cfg = testutil::small_config(8, 3);
  Model model = testutil::small_model(cfg);

  std::vector<std::string> files;
  for (int i = 0; i < 3; ++i) {
    Scenario sc = testutil::toy_scenario(2, cfg.total_len());
    sc.trajectories[0].mmsi = "a" + std::to_string(i);
    sc.trajectories[1].mmsi = "b" + std::to_string(i);
    const std::string path = (dir / ("scenario_" + std::to_string(i) + ".json")).string();
    write_scenario_file(path, sc, cfg.observed_len, cfg.predicted_len);
    files.push_back(path);
  }

  SUBCASE("empty input gives an empty report") {
    const MetricReport r = evaluate_dataset(model, {}, 3, 1, 1);
    CHECK(r.empty());
  }
  SUBCASE("missing files are enumerated, not fatal") {
    std::vector<std::string> withMissing = files;
    withMissing.push_back((dir / "absent.json").string());
    const MetricReport r = evaluate_dataset(model, withMissing, 3, 1, 1);
    CHECK(r.vessels == 6);
    REQUIRE(r.missing.size() == 1);
    CHECK(r.missing[0].find("absent") != std::string::npos);
  }
  SUBCASE("fixed seed reproduces the report bytes") {
    const std::string a = evaluate_dataset(model, files, 6, 3, 9).to_json().dump();
    const std::string b = evaluate_dataset(model, files, 6, 3, 9).to_json().dump();
    CHECK(a == b);
  }
  SUBCASE("nested candidate sets never hurt") {
    // Same seed: the n=3 candidate set per branch is a prefix of the n=6 one.
    const MetricReport small = evaluate_dataset(model, files, 3, 3, 4);
    const MetricReport big = evaluate_dataset(model, files, 6, 3, 4);
    CHECK(big.ade_m <= small.ade_m + 1e-12);
    CHECK(big.fde_m <= small.fde_m + 1e-12);
    const MetricReport k1 = evaluate_dataset(model, files, 2, 1, 4);
    const MetricReport k3 = evaluate_dataset(model, files, 6, 3, 4);
    CHECK(k3.ade_m <= k1.ade_m + 1e-12);
  }

  fs::remove_all(dir);
}
