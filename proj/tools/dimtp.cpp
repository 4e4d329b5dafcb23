// dimtp: preprocess AIS data, train the dual-intention predictor, and run
// multimodal inference and evaluation. See README.md for the file formats.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dimtp/common.hpp"
#include "dimtp/evaluation.hpp"
#include "dimtp/model.hpp"
#include "dimtp/plot.hpp"
#include "dimtp/predictor.hpp"
#include "dimtp/preprocess.hpp"
#include "dimtp/prototype.hpp"
#include "dimtp/scenario_io.hpp"
#include "dimtp/synthetic.hpp"
#include "dimtp/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dimtp;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  return json::parse(in);
}

// Resolved option set shared by the subcommands: defaults, then the config
// file, then command-line flags.
struct Options {
  // pipeline
  double gap_threshold_s = 600.0;
  int min_points = 20;
  double dt_s = 30.0;
  int observed_len = 6;
  int predicted_len = 12;
  std::vector<double> region;  // lon_min lat_min lon_max lat_max; empty = from data

  // model
  int d = 64;
  int latent_dim = 64;
  int depth = 2;
  int prototype_count = 30;
  float epsilon = 1.3f;
  std::vector<int> mlp_hidden = {1024, 512, 1024};
  std::vector<int> attn_hidden = {1024, 1024};
  int attn_qk_dim = 1024;

  // training
  int epochs = 500;
  float lr = 1e-4f;
  std::vector<int> milestones = {160, 300};
  float lambda1 = 1.0f, lambda2 = 1.0f, lambda3 = 1.0f;
  float alpha = 0.01f;

  // sampling
  int k = 10;
  int n = 50;

  // synth
  int synth_count = 100;
  std::vector<double> turn_deg = {0.0, 40.0, -40.0};
  double noise_std_deg = 0.0003;
  double encounter_fraction = 0.5;
  int max_vessels = 3;

  std::uint64_t seed = 1;

  void apply_json(const json& j) {
    gap_threshold_s = j.value("gap_threshold_s", gap_threshold_s);
    min_points = j.value("min_points", min_points);
    dt_s = j.value("resample_dt_s", dt_s);
    observed_len = j.value("observed_len", observed_len);
    predicted_len = j.value("predicted_len", predicted_len);
    region = j.value("region", region);
    d = j.value("d", d);
    latent_dim = j.value("latent_dim", latent_dim);
    depth = j.value("depth", depth);
    prototype_count = j.value("prototype_count", prototype_count);
    epsilon = j.value("epsilon", epsilon);
    mlp_hidden = j.value("mlp_hidden", mlp_hidden);
    attn_hidden = j.value("attn_hidden", attn_hidden);
    attn_qk_dim = j.value("attn_qk_dim", attn_qk_dim);
    epochs = j.value("epochs", epochs);
    lr = j.value("lr", lr);
    milestones = j.value("milestones", milestones);
    lambda1 = j.value("lambda1", lambda1);
    lambda2 = j.value("lambda2", lambda2);
    lambda3 = j.value("lambda3", lambda3);
    alpha = j.value("alpha", alpha);
    k = j.value("k", k);
    n = j.value("n", n);
    synth_count = j.value("synth_count", synth_count);
    turn_deg = j.value("turn_deg", turn_deg);
    noise_std_deg = j.value("noise_std_deg", noise_std_deg);
    encounter_fraction = j.value("encounter_fraction", encounter_fraction);
    max_vessels = j.value("max_vessels", max_vessels);
    seed = j.value("seed", seed);
  }

  json effective() const {
    return json{{"gap_threshold_s", gap_threshold_s},
                {"min_points", min_points},
                {"resample_dt_s", dt_s},
                {"observed_len", observed_len},
                {"predicted_len", predicted_len},
                {"region", region},
                {"d", d},
                {"latent_dim", latent_dim},
                {"depth", depth},
                {"prototype_count", prototype_count},
                {"epsilon", epsilon},
                {"mlp_hidden", mlp_hidden},
                {"attn_hidden", attn_hidden},
                {"attn_qk_dim", attn_qk_dim},
                {"epochs", epochs},
                {"lr", lr},
                {"milestones", milestones},
                {"lambda1", lambda1},
                {"lambda2", lambda2},
                {"lambda3", lambda3},
                {"alpha", alpha},
                {"k", k},
                {"n", n},
                {"synth_count", synth_count},
                {"turn_deg", turn_deg},
                {"noise_std_deg", noise_std_deg},
                {"encounter_fraction", encounter_fraction},
                {"max_vessels", max_vessels},
                {"seed", seed}};
  }

  PipelineConfig pipeline() const {
    PipelineConfig cfg;
    if (region.size() == 4) cfg.region = {region[0], region[1], region[2], region[3]};
    cfg.gap_threshold_s = gap_threshold_s;
    cfg.min_points = min_points;
    cfg.resample_dt_s = dt_s;
    cfg.observed_len = observed_len;
    cfg.predicted_len = predicted_len;
    return cfg;
  }

  ModelConfig model() const {
    ModelConfig cfg;
    cfg.d = d;
    cfg.latent_dim = latent_dim;
    cfg.depth = depth;
    cfg.prototype_count = prototype_count;
    cfg.observed_len = observed_len;
    cfg.predicted_len = predicted_len;
    cfg.epsilon = epsilon;
    cfg.mlp_hidden = mlp_hidden;
    cfg.attn_hidden = attn_hidden;
    cfg.attn_qk_dim = attn_qk_dim;
    return cfg;
  }

  TrainOptions train() const {
    TrainOptions t;
    t.epochs = epochs;
    t.lr = lr;
    t.milestones = milestones;
    t.weights = {lambda1, lambda2, lambda3, alpha};
    t.seed = seed;
    return t;
  }
};

// Every flag is registered on the subcommand so it can override the config
// file value after apply_json ran.
void register_common_flags(CLI::App* cmd, Options& opt) {
  cmd->add_option("--seed", opt.seed, "Seed for every stochastic step");
  cmd->add_option("--L_o", opt.observed_len, "Observed steps per scenario");
  cmd->add_option("--L_p", opt.predicted_len, "Predicted steps per scenario");
}

void register_model_flags(CLI::App* cmd, Options& opt) {
  cmd->add_option("--d", opt.d, "Shared encoder width");
  cmd->add_option("--latent-dim", opt.latent_dim, "CVAE latent width");
  cmd->add_option("--depth", opt.depth, "Masked attention depth");
  cmd->add_option("--C", opt.prototype_count, "Number of intention prototypes");
  cmd->add_option("--epsilon", opt.epsilon, "Prior variance of the latent");
  cmd->add_option("--hidden", opt.mlp_hidden, "Hidden widths of the MLP stacks");
  cmd->add_option("--attn-hidden", opt.attn_hidden, "Hidden widths of the classifier Q/K");
  cmd->add_option("--attn-qk-dim", opt.attn_qk_dim, "Masked attention Q/K output width");
}

void register_train_flags(CLI::App* cmd, Options& opt) {
  cmd->add_option("--epochs", opt.epochs, "Training epochs");
  cmd->add_option("--lr", opt.lr, "Base learning rate");
  cmd->add_option("--milestones", opt.milestones, "Epochs at which the rate halves");
  cmd->add_option("--lambda1", opt.lambda1, "Classification loss weight");
  cmd->add_option("--lambda2", opt.lambda2, "CVAE loss weight");
  cmd->add_option("--lambda3", opt.lambda3, "Regression loss weight");
  cmd->add_option("--alpha", opt.alpha, "Destination term weight inside the CVAE loss");
}

std::string resolve_index(const std::string& data) {
  if (fs::is_directory(data)) return (fs::path(data) / "index.json").string();
  return data;
}

std::vector<Scenario> load_scenarios(const std::string& index_path,
                                     std::vector<std::string>* paths_out = nullptr) {
  std::vector<Scenario> out;
  for (const std::string& p : scenario_paths_from_index(index_path)) {
    out.push_back(read_scenario_file(p));
    if (paths_out != nullptr) paths_out->push_back(p);
  }
  return out;
}

CoordNormalizer normalizer_for(const Options& opt, const std::vector<Scenario>& scenarios) {
  if (opt.region.size() == 4) {
    return CoordNormalizer::from_bbox({opt.region[0], opt.region[1], opt.region[2], opt.region[3]});
  }
  return CoordNormalizer::from_scenarios(scenarios);
}

void write_corpus(const std::string& outdir, const std::vector<Scenario>& scenarios,
                  const std::vector<EncounterMask>& masks, const Options& opt) {
  fs::create_directories(outdir);
  std::vector<IndexEntry> entries;
  char name[64];
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    std::snprintf(name, sizeof(name), "scenario_%05zu.json", i);
    write_scenario_file((fs::path(outdir) / name).string(), scenarios[i], opt.observed_len,
                        opt.predicted_len);
    entries.push_back({name, scenarios[i].t0(), static_cast<int>(scenarios[i].size()), masks[i]});
  }
  write_index_file((fs::path(outdir) / "index.json").string(), entries, opt.effective());
}

int cmd_preprocess(const Options& opt, const std::string& input, const std::string& outdir) {
  const CsvResult csv = read_ais_csv_file(input);
  const PipelineOutput out = run_pipeline(csv.records, opt.pipeline());
  write_corpus(outdir, out.scenarios, out.masks, opt);
  std::printf("parsed %zu records (%d malformed), rejected %d, dropped %d short segments\n",
              csv.records.size(), csv.rejected, out.rejected_records, out.short_segments);
  std::printf("wrote %zu scenarios to %s\n", out.scenarios.size(), outdir.c_str());
  return kExitOk;
}

int cmd_synth(const Options& opt, const std::string& outdir) {
  SynthConfig cfg;
  cfg.turn_deg = opt.turn_deg;
  cfg.noise_std_deg = opt.noise_std_deg;
  cfg.encounter_fraction = opt.encounter_fraction;
  cfg.max_vessels = opt.max_vessels;
  cfg.observed_len = opt.observed_len;
  cfg.predicted_len = opt.predicted_len;
  cfg.dt_s = opt.dt_s;
  cfg.seed = opt.seed;
  const std::vector<SynthScenario> corpus = generate_corpus(cfg, opt.synth_count);

  std::vector<Scenario> scenarios;
  std::vector<EncounterMask> masks;
  std::vector<std::vector<int>> labels;
  std::vector<std::string> names;
  char name[64];
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    scenarios.push_back(corpus[i].scenario);
    masks.push_back(corpus[i].oracle_mask);
    labels.push_back(corpus[i].labels);
    std::snprintf(name, sizeof(name), "scenario_%05zu.json", i);
    names.emplace_back(name);
  }
  write_corpus(outdir, scenarios, masks, opt);
  write_labels_file((fs::path(outdir) / "labels.json").string(), names, labels, opt.effective());
  std::printf("wrote %zu synthetic scenarios to %s\n", scenarios.size(), outdir.c_str());
  return kExitOk;
}

int cmd_extract_prototypes(const Options& opt, const std::string& data, const std::string& out,
                           const std::string& geojson_path) {
  const std::string index = resolve_index(data);
  const std::vector<Scenario> scenarios = load_scenarios(index);
  if (scenarios.empty()) {
    std::fprintf(stderr, "no scenarios found in %s\n", index.c_str());
    return kExitValidation;
  }
  Model model = Model::create(opt.model(), normalizer_for(opt, scenarios), opt.seed);
  const Stage1Result r1 = train_stage1(model, scenarios, opt.train());
  std::printf("reconstruction loss: %.6g -> %.6g over %d epochs\n", r1.loss_per_epoch.front(),
              r1.loss_per_epoch.back(), opt.epochs);
  model.to_checkpoint(opt.effective()).save(out);
  std::printf("wrote stage-1 checkpoint %s.json / %s.bin\n", out.c_str(), out.c_str());
  if (!geojson_path.empty()) {
    std::ofstream g(geojson_path);
    if (!g) throw std::runtime_error("cannot write " + geojson_path);
    g << prototypes_geojson(decode_prototypes_deg(model)).dump(2) << "\n";
    std::printf("wrote prototype GeoJSON %s\n", geojson_path.c_str());
  }
  return kExitOk;
}

int cmd_train(const Options& opt, const std::string& data, const std::string& stage1,
              const std::string& out, const std::string& report_path, bool epsilon_set) {
  const std::string index = resolve_index(data);
  Model model = Model::from_checkpoint(Checkpoint::load(stage1));
  if (!model.has_prototypes()) {
    std::fprintf(stderr, "%s is not a stage-1 checkpoint (no prototypes)\n", stage1.c_str());
    return kExitValidation;
  }
  if (epsilon_set) model.cfg.epsilon = opt.epsilon;
  std::vector<Scenario> scenarios = load_scenarios(index);
  if (scenarios.empty()) {
    std::fprintf(stderr, "no scenarios found in %s\n", index.c_str());
    return kExitValidation;
  }
  std::vector<EncounterMask> masks;
  for (const Scenario& sc : scenarios) {
    masks.push_back(compute_encounter_mask(sc.head(model.cfg.observed_len)));
  }
  const std::vector<std::vector<int>> labels = label_scenarios(model, scenarios);
  const Stage2Result r2 = train_stage2(model, scenarios, masks, labels, opt.train());
  std::printf("total loss: %.6g -> %.6g over %d epochs\n", r2.epochs.front().total,
              r2.epochs.back().total, opt.epochs);
  model.to_checkpoint(opt.effective()).save(out);
  std::printf("wrote checkpoint %s.json / %s.bin\n", out.c_str(), out.c_str());
  if (!report_path.empty()) {
    std::ofstream rep(report_path);
    if (!rep) throw std::runtime_error("cannot write " + report_path);
    rep << r2.to_csv();
    std::printf("wrote training report %s\n", report_path.c_str());
  }
  return kExitOk;
}

// Inference provenance reflects the loaded model, not the CLI defaults.
json inference_config(const Model& model, const std::string& checkpoint, const Options& opt) {
  return json{{"model", model.cfg.to_json()},
              {"checkpoint", checkpoint},
              {"k", opt.k},
              {"n", opt.n},
              {"seed", opt.seed}};
}

int cmd_predict(const Options& opt, const std::string& checkpoint, const std::string& scenario,
                const std::string& out) {
  const Model model = Model::from_checkpoint(Checkpoint::load(checkpoint));
  const Scenario full = read_scenario_file(scenario);
  if (full.length() < static_cast<std::size_t>(model.cfg.observed_len)) {
    std::fprintf(stderr, "scenario %s has %zu steps, need at least %d observed\n",
                 scenario.c_str(), full.length(), model.cfg.observed_len);
    return kExitValidation;
  }
  const Scenario observed = full.head(model.cfg.observed_len);
  const EncounterMask mask = compute_encounter_mask(observed);
  const ScenarioPrediction pred =
      predict_scenario(model, observed, mask, opt.k, opt.n, opt.seed);
  write_prediction_file(out, pred, full, model.cfg.observed_len,
                        inference_config(model, checkpoint, opt));
  std::printf("wrote %d candidates per vessel (%zu vessels) to %s\n", opt.n,
              pred.vessels.size(), out.c_str());
  return kExitOk;
}

int cmd_evaluate(const Options& opt, const std::string& checkpoint, const std::string& data,
                 const std::string& out) {
  const Model model = Model::from_checkpoint(Checkpoint::load(checkpoint));
  const std::string index = resolve_index(data);
  std::vector<std::string> files;
  try {
    files = scenario_paths_from_index(index);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kExitValidation;
  }
  const MetricReport report = evaluate_dataset(model, files, opt.n, opt.k, opt.seed);
  std::fputs(report.to_table().c_str(), stdout);
  if (!out.empty()) {
    std::ofstream o(out);
    if (!o) throw std::runtime_error("cannot write " + out);
    json j = report.to_json();
    j["config"] = inference_config(model, checkpoint, opt);
    o << j.dump(2) << "\n";
  }
  if (report.empty()) {
    std::fprintf(stderr, "no scenario produced a metric\n");
    return kExitValidation;
  }
  return kExitOk;
}

int cmd_plot(const std::string& prediction, const std::string& out,
             const std::string& geojson_path) {
  std::ifstream in(prediction);
  if (!in) throw std::runtime_error("cannot open " + prediction);
  const json pred = json::parse(in);
  std::ofstream svg(out);
  if (!svg) throw std::runtime_error("cannot write " + out);
  svg << prediction_svg(pred);
  std::printf("wrote %s\n", out.c_str());
  if (!geojson_path.empty()) {
    std::ofstream g(geojson_path);
    if (!g) throw std::runtime_error("cannot write " + geojson_path);
    g << prediction_geojson(pred).dump(2) << "\n";
    std::printf("wrote %s\n", geojson_path.c_str());
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dual-intention multimodal vessel trajectory prediction"};
  app.require_subcommand(1);

  Options opt;
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file; flags override its values")
      ->envname("DIMTP_CONFIG");

  std::string input, outdir, data, checkpoint, stage1, scenario, out, report, geojson;

  CLI::App* preprocess = app.add_subcommand("preprocess", "AIS CSV to scenario files");
  preprocess->add_option("--input", input, "AIS CSV file")->required();
  preprocess->add_option("--outdir", outdir, "Output directory")->required();
  preprocess->add_option("--gap-threshold", opt.gap_threshold_s, "Track split gap, seconds");
  preprocess->add_option("--min-points", opt.min_points, "Minimum points per segment");
  preprocess->add_option("--dt", opt.dt_s, "Resampling interval, seconds");
  preprocess->add_option("--region", opt.region,
                         "lon_min lat_min lon_max lat_max working region")
      ->expected(4);
  register_common_flags(preprocess, opt);

  CLI::App* synth = app.add_subcommand("synth", "Generate a labeled synthetic corpus");
  synth->add_option("--outdir", outdir, "Output directory")->required();
  synth->add_option("--count", opt.synth_count, "Scenario count");
  synth->add_option("--turn-deg", opt.turn_deg, "Turn angle per mode, degrees");
  synth->add_option("--noise", opt.noise_std_deg, "Positional noise std, degrees");
  synth->add_option("--encounter-fraction", opt.encounter_fraction, "Share of encounter scenarios");
  synth->add_option("--max-vessels", opt.max_vessels, "Largest scenario size");
  register_common_flags(synth, opt);

  CLI::App* extract = app.add_subcommand("extract-prototypes",
                                         "Train the history autoencoder and cluster prototypes");
  extract->add_option("--data", data, "Scenario index file or directory")->required();
  extract->add_option("--out", out, "Checkpoint path prefix")->required();
  extract->add_option("--geojson", geojson, "Also export prototypes as GeoJSON");
  extract->add_option("--region", opt.region, "Normalization region (default: data bounds)")
      ->expected(4);
  register_common_flags(extract, opt);
  register_model_flags(extract, opt);
  register_train_flags(extract, opt);

  CLI::App* train = app.add_subcommand("train", "Stage-2 training from a stage-1 checkpoint");
  train->add_option("--data", data, "Scenario index file or directory")->required();
  train->add_option("--stage1", stage1, "Stage-1 checkpoint prefix")->required();
  train->add_option("--out", out, "Output checkpoint prefix")->required();
  train->add_option("--report", report, "Write per-epoch losses as CSV");
  CLI::Option* train_epsilon =
      train->add_option("--epsilon", opt.epsilon, "Override the checkpoint prior variance");
  register_common_flags(train, opt);
  register_train_flags(train, opt);

  CLI::App* predict = app.add_subcommand("predict", "Multimodal inference on one scenario");
  predict->add_option("--checkpoint", checkpoint, "Checkpoint prefix")->required();
  predict->add_option("--scenario", scenario, "Scenario JSON file")->required();
  predict->add_option("--out", out, "Prediction JSON path")->required();
  predict->add_option("--k", opt.k, "Intention branches per vessel");
  predict->add_option("--n", opt.n, "Total candidates per vessel (multiple of k)");
  register_common_flags(predict, opt);

  CLI::App* evaluate = app.add_subcommand("evaluate", "Best-of-n ADE/FDE over a dataset");
  evaluate->add_option("--checkpoint", checkpoint, "Checkpoint prefix")->required();
  evaluate->add_option("--data", data, "Scenario index file or directory")->required();
  evaluate->add_option("--out", out, "Also write the report as JSON");
  evaluate->add_option("--k", opt.k, "Intention branches per vessel");
  evaluate->add_option("--n", opt.n, "Total candidates per vessel (multiple of k)");
  register_common_flags(evaluate, opt);

  CLI::App* plot = app.add_subcommand("plot", "Render a prediction file as SVG (and GeoJSON)");
  plot->add_option("--prediction", scenario, "Prediction JSON file")->required();
  plot->add_option("--out", out, "SVG output path")->required();
  plot->add_option("--geojson", geojson, "GeoJSON output path");

  // Config file values land between defaults and flags.
  app.preparse_callback([&](std::size_t) {
    for (int i = 1; i + 1 < argc; ++i) {
      if (std::string(argv[i]) == "--config") {
        opt.apply_json(load_config_file(argv[i + 1]));
        break;
      }
    }
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (preprocess->parsed()) return cmd_preprocess(opt, input, outdir);
    if (synth->parsed()) return cmd_synth(opt, outdir);
    if (extract->parsed()) return cmd_extract_prototypes(opt, data, out, geojson);
    if (train->parsed()) {
      return cmd_train(opt, data, stage1, out, report, train_epsilon->count() > 0);
    }
    if (predict->parsed()) return cmd_predict(opt, checkpoint, scenario, out);
    if (evaluate->parsed()) return cmd_evaluate(opt, checkpoint, data, out);
    if (plot->parsed()) return cmd_plot(scenario, out, geojson);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return kExitValidation;
  } catch (const InvalidStateError& e) {
    std::fprintf(stderr, "invalid state: %s\n", e.what());
    return kExitValidation;
  } catch (const InsufficientDataError& e) {
    std::fprintf(stderr, "insufficient data: %s\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  }
  return kExitValidation;
}
