#include "dimtp/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <thread>

#include "dimtp/predictor.hpp"
#include "dimtp/rng.hpp"
#include "dimtp/scenario_io.hpp"

namespace dimtp {

using nlohmann::json;

namespace {

// DIMTP_THREADS caps scenario-level parallelism; unset means serial.
int worker_count(std::size_t jobs) {
  const char* env = std::getenv("DIMTP_THREADS");
  if (env == nullptr) return 1;
  const int requested = std::atoi(env);
  return std::max(1, std::min<int>(requested, static_cast<int>(jobs)));
}

}  // namespace

BestOf best_of_candidates(const std::vector<std::vector<Point>>& candidates,
                          std::span<const Point> ground_truth) {
  if (candidates.empty()) throw std::invalid_argument("best_of_candidates: no candidates");
  const std::size_t L_p = ground_truth.size();
  BestOf best;
  double best_sum = 0.0;
  for (std::size_t j = 0; j < candidates.size(); ++j) {
    const std::vector<Point>& cand = candidates[j];
    if (cand.size() != L_p) {
      throw std::invalid_argument("best_of_candidates: candidate length " +
                                  std::to_string(cand.size()) + " does not match ground truth " +
                                  std::to_string(L_p));
    }
    double ade = 0.0;
    for (std::size_t t = 0; t < L_p; ++t) ade += haversine_m(cand[t], ground_truth[t]);
    ade /= static_cast<double>(L_p);
    const double fde = haversine_m(cand.back(), ground_truth.back());
    const double sum = ade + fde;
    if (j == 0 || sum < best_sum) {
      best_sum = sum;
      best = {ade, fde, static_cast<int>(j)};
    }
  }
  return best;
}

MetricReport evaluate_dataset(const Model& model, std::vector<std::string> scenario_files, int n,
                              int k, std::uint64_t seed) {
  std::sort(scenario_files.begin(), scenario_files.end());

  MetricReport report;
  report.n = n;
  report.k = k;
  report.seed = seed;

  struct PerScenario {
    bool ok = false;
    ScenarioScore score;
  };
  std::vector<PerScenario> results(scenario_files.size());

  auto process = [&](std::size_t idx) {
    const std::string& path = scenario_files[idx];
    PerScenario out;
    Scenario sc;
    try {
      sc = read_scenario_file(path);
    } catch (const std::exception&) {
      return out;
    }
    const int L_o = model.cfg.observed_len;
    const int L = model.cfg.total_len();
    if (static_cast<int>(sc.length()) != L) return out;

    const Scenario observed = sc.head(L_o);
    const EncounterMask mask = compute_encounter_mask(observed);
    const ScenarioPrediction pred =
        predict_scenario(model, observed, mask, k, n, mix_seed(seed, idx));

    out.ok = true;
    out.score.path = path;
    for (std::size_t i = 0; i < pred.vessels.size(); ++i) {
      std::vector<std::vector<Point>> cands;
      cands.reserve(pred.vessels[i].candidates.size());
      for (const Candidate& c : pred.vessels[i].candidates) cands.push_back(c.points);
      const std::span<const Point> gt(sc.trajectories[i].points.data() + L_o,
                                      static_cast<std::size_t>(L - L_o));
      const BestOf b = best_of_candidates(cands, gt);
      out.score.ade_m += b.ade_m;
      out.score.fde_m += b.fde_m;
      ++out.score.vessels;
    }
    return out;
  };

  const int workers = worker_count(scenario_files.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < scenario_files.size(); ++i) results[i] = process(i);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = static_cast<std::size_t>(w); i < scenario_files.size();
             i += static_cast<std::size_t>(workers)) {
          results[i] = process(i);
        }
      });
    }
    for (std::thread& t : pool) t.join();
  }

  double ade_total = 0.0, fde_total = 0.0;
  int vessel_total = 0;
  for (std::size_t idx = 0; idx < results.size(); ++idx) {
    if (!results[idx].ok) {
      report.missing.push_back(scenario_files[idx]);
      continue;
    }
    ScenarioScore score = results[idx].score;
    ade_total += score.ade_m;
    fde_total += score.fde_m;
    vessel_total += score.vessels;
    score.ade_m /= std::max(1, score.vessels);
    score.fde_m /= std::max(1, score.vessels);
    report.scenarios.push_back(std::move(score));
  }

  report.vessels = vessel_total;
  if (vessel_total > 0) {
    report.ade_m = ade_total / vessel_total;
    report.fde_m = fde_total / vessel_total;
  }
  return report;
}

json MetricReport::to_json() const {
  json j;
  j["ade_m"] = ade_m;
  j["fde_m"] = fde_m;
  j["vessels"] = vessels;
  j["n"] = n;
  j["k"] = k;
  j["seed"] = seed;
  json list = json::array();
  for (const ScenarioScore& s : scenarios) {
    list.push_back(json{{"path", s.path}, {"ade_m", s.ade_m}, {"fde_m", s.fde_m}, {"m", s.vessels}});
  }
  j["scenarios"] = std::move(list);
  j["missing"] = missing;
  return j;
}

std::string MetricReport::to_table() const {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-44s %8s %10s %10s\n", "scenario", "vessels", "ADE [m]",
                "FDE [m]");
  out += buf;
  for (const ScenarioScore& s : scenarios) {
    std::string name = s.path;
    if (name.size() > 43) name = "..." + name.substr(name.size() - 40);
    std::snprintf(buf, sizeof(buf), "%-44s %8d %10.2f %10.2f\n", name.c_str(), s.vessels, s.ade_m,
                  s.fde_m);
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "%-44s %8d %10.2f %10.2f  (best of n=%d, k=%d)\n", "TOTAL",
                vessels, ade_m, fde_m, n, k);
  out += buf;
  if (!missing.empty()) {
    out += "unreadable files:\n";
    for (const std::string& m : missing) out += "  " + m + "\n";
  }
  return out;
}

}  // namespace dimtp
