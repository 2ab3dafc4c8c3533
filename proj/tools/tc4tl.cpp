// Command-line front end: synth, calibrate, train, predict, score.
// Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "tc4tl/tc4tl.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tc4tl;

namespace {

struct CommonFlags {
  std::optional<std::uint64_t> seed;
  unsigned jobs = 1;
  std::string config_path;
};

json load_config(const std::string& path, const char* section) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) raise(Errc::IoFailure, "cannot open config file " + path);
  json all = json::parse(in);
  return all.contains(section) ? all[section] : json::object();
}

void write_manifest(const fs::path& dir, const std::string& command,
                    const json& config, const json& inputs,
                    const json& outputs, std::uint64_t seed, unsigned jobs,
                    double duration_s) {
  json manifest;
  manifest["command"] = command;
  manifest["version"] = std::string(kVersion);
  manifest["seed"] = seed;
  manifest["jobs"] = jobs;
  manifest["config"] = config;
  manifest["inputs"] = inputs;
  manifest["outputs"] = outputs;
  manifest["duration_seconds"] = duration_s;
  fs::create_directories(dir);
  std::ofstream out(dir / (command + "_manifest.json"));
  out << manifest.dump(2) << "\n";
}

void print_warnings(const Warnings& warnings) {
  for (const auto& warning : warnings)
    std::cerr << "warning: " << warning << "\n";
}

SynthSpec spec_from_json(const json& j) {
  SynthSpec spec;
  if (j.contains("n_events")) spec.n_events = j["n_events"].get<std::size_t>();
  if (j.contains("grain_mix")) spec.grain_mix = j["grain_mix"].get<double>();
  if (j.contains("label_weights")) {
    spec.label_weights.clear();
    for (const auto& [key, value] : j["label_weights"].items())
      spec.label_weights[std::stod(key)] = value.get<double>();
  }
  auto range = [&](const char* key, IntRange fallback) {
    if (!j.contains(key)) return fallback;
    return IntRange{j[key][0].get<int>(), j[key][1].get<int>()};
  };
  spec.looks_per_event = range("looks_per_event", spec.looks_per_event);
  spec.samples_per_look = range("samples_per_look", spec.samples_per_look);
  if (j.contains("tx_true_dbm")) spec.tx_true_dbm = j["tx_true_dbm"].get<double>();
  if (j.contains("n_true")) spec.n_true = j["n_true"].get<double>();
  if (j.contains("noise_sigma_db"))
    spec.noise_sigma_db = j["noise_sigma_db"].get<double>();
  if (j.contains("imu_noise_sigma"))
    spec.imu_noise_sigma = j["imu_noise_sigma"].get<double>();
  auto vocab = [&](const char* key, WeightedVocab fallback) {
    if (!j.contains(key)) return fallback;
    WeightedVocab out;
    for (const auto& [value, weight] : j[key].items()) {
      out.values.push_back(value);
      out.weights.push_back(weight.get<double>());
    }
    return out;
  };
  spec.devices = vocab("devices", spec.devices);
  spec.carries = vocab("carries", spec.carries);
  spec.poses = vocab("poses", spec.poses);
  if (j.contains("tx_powers")) {
    spec.tx_powers.clear();
    spec.tx_power_weights.clear();
    for (const auto& entry : j["tx_powers"]) {
      if (entry["value"].is_null()) {
        spec.tx_powers.push_back(std::nullopt);
      } else {
        spec.tx_powers.push_back(entry["value"].get<int>());
      }
      spec.tx_power_weights.push_back(entry["weight"].get<double>());
    }
  }
  if (j.contains("seed")) spec.seed = j["seed"].get<std::uint64_t>();
  return spec;
}

json spec_to_json(const SynthSpec& spec) {
  json j;
  j["n_events"] = spec.n_events;
  j["grain_mix"] = spec.grain_mix;
  for (const auto& [label, weight] : spec.label_weights)
    j["label_weights"][label_token(label)] = weight;
  j["looks_per_event"] = {spec.looks_per_event.lo, spec.looks_per_event.hi};
  j["samples_per_look"] = {spec.samples_per_look.lo, spec.samples_per_look.hi};
  j["tx_true_dbm"] = spec.tx_true_dbm;
  j["n_true"] = spec.n_true;
  j["noise_sigma_db"] = spec.noise_sigma_db;
  j["imu_noise_sigma"] = spec.imu_noise_sigma;
  j["seed"] = spec.seed;
  return j;
}

GridSpec grid_from_flags(const json& config, double tx_min, double tx_max,
                         double tx_step, double n_min, double n_max,
                         double n_step) {
  GridSpec grid;
  grid.tx_min = config.value("tx_min", tx_min);
  grid.tx_max = config.value("tx_max", tx_max);
  grid.tx_step = config.value("tx_step", tx_step);
  grid.n_min = config.value("n_min", n_min);
  grid.n_max = config.value("n_max", n_max);
  grid.n_step = config.value("n_step", n_step);
  return grid;
}

int run(int argc, char** argv) {
  CLI::App app{"Bluetooth proximity pipeline: synthesize, calibrate, train, "
               "predict, score"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_help_all_flag("--help-all");

  CommonFlags common;
  std::uint64_t seed_flag = 1;
  app.add_option("--seed", seed_flag, "Seed override for the subcommand");
  app.add_option("--jobs", common.jobs, "Worker threads for parallel stages")
      ->check(CLI::Range(1u, 256u));
  app.add_option("--config", common.config_path,
                 "JSON config file; flags override its values");

  // synth ------------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "Generate a labeled dataset");
  std::string synth_spec_path;
  std::string synth_out;
  std::size_t synth_n = 0;
  synth->add_option("--spec", synth_spec_path, "Synth spec JSON file");
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--n-events", synth_n, "Override event count");

  // calibrate --------------------------------------------------------------
  auto* calibrate = app.add_subcommand(
      "calibrate", "Grid-search path loss constants per grain");
  std::string cal_train, cal_key, cal_grain = "both", cal_out = ".";
  bool cal_surface = false;
  calibrate->add_option("--train", cal_train, "Training dataset directory")
      ->required();
  calibrate->add_option("--key", cal_key, "Key file (default train/key.tsv)");
  calibrate->add_option("--grain", cal_grain, "fine, coarse, or both")
      ->check(CLI::IsMember({"fine", "coarse", "both"}));
  calibrate->add_option("--out", cal_out, "Output directory");
  calibrate->add_flag("--surface", cal_surface,
                      "Also write the objective surface TSV");

  // extract ----------------------------------------------------------------
  auto* extract = app.add_subcommand(
      "extract", "Write the per-event feature matrix as TSV");
  std::string ext_data, ext_key, ext_model, ext_out;
  extract->add_option("--data", ext_data, "Dataset directory")->required();
  extract->add_option("--key", ext_key,
                      "Key file; required when no model is given");
  extract->add_option("--model", ext_model,
                      "Reuse this bundle's calibration and scalers");
  extract->add_option("--out", ext_out, "Feature matrix TSV path")->required();

  // train ------------------------------------------------------------------
  auto* train = app.add_subcommand("train", "Train a classifier bundle");
  std::string train_dir, train_key, train_kind = "mlp", train_out;
  bool train_grid = false;
  bool no_tune = false;
  int mlp_epochs = 0;
  std::string mlp_loss;
  int gbm_ntrees = 0, gbm_depth = 0;
  double gbm_lr = 0.0;
  train->add_option("--train", train_dir, "Training dataset directory")
      ->required();
  train->add_option("--key", train_key, "Key file (default train/key.tsv)");
  train->add_option("--kind", train_kind, "Model kind: mlp or gbm")
      ->check(CLI::IsMember({"mlp", "gbm"}));
  train->add_option("--out", train_out, "Model output file")->required();
  train->add_flag("--grid", train_grid, "Grid-search gbm hyperparameters");
  train->add_flag("--no-tune-threshold", no_tune,
                  "Keep the default binary decision threshold");
  train->add_option("--epochs", mlp_epochs, "MLP training epochs");
  train->add_option("--loss", mlp_loss, "MLP loss: mse or ce")
      ->check(CLI::IsMember({"", "mse", "ce"}));
  train->add_option("--ntrees", gbm_ntrees, "GBM boosting rounds");
  train->add_option("--max-depth", gbm_depth, "GBM tree depth");
  train->add_option("--learning-rate", gbm_lr, "GBM learning rate");

  // predict ----------------------------------------------------------------
  auto* predict = app.add_subcommand("predict", "Predict distances");
  std::string pred_model, pred_eval, pred_out;
  predict->add_option("--model", pred_model, "Model bundle file")->required();
  predict->add_option("--eval", pred_eval, "Evaluation dataset directory")
      ->required();
  predict->add_option("--out", pred_out, "System output TSV path")->required();

  // score ------------------------------------------------------------------
  auto* score = app.add_subcommand("score", "Score predictions against a key");
  std::string score_output, score_key, score_report;
  score->add_option("--output", score_output, "System output TSV")->required();
  score->add_option("--key", score_key, "Ground truth key TSV")->required();
  score->add_option("--report", score_report,
                    "Also write the machine-readable report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& error) {
    int code = app.exit(error);
    return code == 0 ? 0 : 2;
  }
  auto started = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         started)
        .count();
  };
  Warnings warnings;

  if (synth->parsed()) {
    json config = load_config(common.config_path, "synth");
    SynthSpec spec;
    if (!synth_spec_path.empty()) {
      std::ifstream in(synth_spec_path);
      if (!in) raise(Errc::IoFailure, "cannot open spec " + synth_spec_path);
      spec = spec_from_json(json::parse(in));
    } else {
      spec = spec_from_json(config);
    }
    if (synth->count("--n-events") > 0) spec.n_events = synth_n;
    if (app.count("--seed") > 0) spec.seed = seed_flag;
    generate_dataset(spec, synth_out);
    write_manifest(synth_out, "synth", spec_to_json(spec),
                   {{"spec", synth_spec_path}},
                   {{"dataset", synth_out},
                    {"key", (fs::path(synth_out) / "key.tsv").string()}},
                   spec.seed, common.jobs, elapsed());
    std::cout << "wrote " << spec.n_events << " events to " << synth_out
              << "\n";
    return 0;
  }

  if (calibrate->parsed()) {
    json config = load_config(common.config_path, "calibrate");
    if (cal_key.empty()) cal_key = (fs::path(cal_train) / "key.tsv").string();
    Dataset data = load_dataset(cal_train, cal_key, common.jobs, &warnings);
    print_warnings(warnings);
    GridSpec grid = grid_from_flags(config, -80, -30, 1, 2, 4, 0.1);
    json outputs;
    for (Grain grain : {Grain::Fine, Grain::Coarse}) {
      bool fine = grain == Grain::Fine;
      if (cal_grain != "both" && (cal_grain == "fine") != fine) continue;
      auto result = calibrate_grid(data, grain, grid, common.jobs);
      std::string stem = fine ? "fine" : "coarse";
      fs::create_directories(cal_out);
      fs::path cal_path = fs::path(cal_out) / ("calibration_" + stem + ".txt");
      write_text_file(cal_path, write_calibration(result.best,
                                                  result.objective));
      outputs["calibration_" + stem] = cal_path.string();
      if (cal_surface) {
        std::string tsv = "tx_ref_dbm\tn_exponent\tobjective\n";
        for (const auto& cell : result.surface) {
          tsv += detail::format_double(cell.tx_ref_dbm);
          tsv += '\t';
          tsv += detail::format_double(cell.n_exponent);
          tsv += '\t';
          tsv += detail::format_double(cell.objective);
          tsv += '\n';
        }
        fs::path surface_path =
            fs::path(cal_out) / ("surface_" + stem + ".tsv");
        write_text_file(surface_path, tsv);
        outputs["surface_" + stem] = surface_path.string();
      }
      std::cout << stem << ": tx_ref_dbm "
                << detail::format_double(result.best.tx_ref_dbm)
                << ", n_exponent "
                << detail::format_double(result.best.n_exponent)
                << ", objective "
                << detail::format_double(result.objective) << "\n";
    }
    json config_out = {{"grid",
                        {{"tx_min", grid.tx_min},
                         {"tx_max", grid.tx_max},
                         {"tx_step", grid.tx_step},
                         {"n_min", grid.n_min},
                         {"n_max", grid.n_max},
                         {"n_step", grid.n_step}}},
                       {"grain", cal_grain}};
    write_manifest(cal_out, "calibrate", config_out,
                   {{"train", cal_train}, {"key", cal_key}}, outputs,
                   seed_flag, common.jobs, elapsed());
    return 0;
  }

  if (extract->parsed()) {
    ModelBundle bundle;
    Dataset data;
    if (!ext_model.empty()) {
      bundle = load_bundle(ext_model);
      std::optional<fs::path> key;
      if (!ext_key.empty()) key = ext_key;
      data = load_dataset(ext_data, key, common.jobs, &warnings);
    } else {
      if (ext_key.empty()) ext_key = (fs::path(ext_data) / "key.tsv").string();
      data = load_dataset(ext_data, ext_key, common.jobs, &warnings);
      if (detail::has_grain(data, Grain::Fine))
        bundle.params.fine = calibrate_grid(data, Grain::Fine, {},
                                            common.jobs).best;
      if (detail::has_grain(data, Grain::Coarse))
        bundle.params.coarse = calibrate_grid(data, Grain::Coarse, {},
                                              common.jobs).best;
      bundle.scalers = fit_scalers(data);
      for (const auto& event : data.events) {
        bundle.known_devices.insert(event.metadata.tx_device);
        bundle.known_devices.insert(event.metadata.rx_device);
      }
    }
    std::map<std::string, FeatureVector> rows;
    for (const auto& event : data.events)
      rows.emplace(event.metadata.file_id,
                   bundle_features(bundle, event, &warnings));
    print_warnings(warnings);
    fs::path out_dir = fs::path(ext_out).parent_path();
    if (out_dir.empty()) out_dir = ".";
    fs::create_directories(out_dir);
    write_text_file(ext_out, write_feature_matrix(rows));
    write_manifest(out_dir, "extract",
                   {{"model", ext_model.empty() ? "fit on data" : ext_model}},
                   {{"data", ext_data}, {"key", ext_key}},
                   {{"features", ext_out}}, seed_flag, common.jobs,
                   elapsed());
    std::cout << "wrote " << rows.size() << " feature rows to " << ext_out
              << "\n";
    return 0;
  }

  if (train->parsed()) {
    json config = load_config(common.config_path, "train");
    if (train_key.empty())
      train_key = (fs::path(train_dir) / "key.tsv").string();
    Dataset data = load_dataset(train_dir, train_key, common.jobs, &warnings);

    TrainBundleOptions options;
    options.kind = config.value("kind", train_kind) == "gbm" ? ModelKind::Gbm
                                                             : ModelKind::Mlp;
    if (train->count("--kind") > 0)
      options.kind = train_kind == "gbm" ? ModelKind::Gbm : ModelKind::Mlp;
    options.jobs = common.jobs;
    options.gbm_grid_search = train_grid || config.value("grid", false);
    options.tune_threshold = !no_tune && config.value("tune_threshold", true);
    options.mlp.epochs = config.value("epochs", options.mlp.epochs);
    if (mlp_epochs > 0) options.mlp.epochs = mlp_epochs;
    std::string loss = config.value("loss", std::string("mse"));
    if (!mlp_loss.empty()) loss = mlp_loss;
    options.mlp.loss = loss == "ce" ? LossKind::CrossEntropy
                                    : LossKind::MseSoftmax;
    options.gbm.ntrees = config.value("ntrees", options.gbm.ntrees);
    if (gbm_ntrees > 0) options.gbm.ntrees = gbm_ntrees;
    options.gbm.max_depth = config.value("max_depth", options.gbm.max_depth);
    if (gbm_depth > 0) options.gbm.max_depth = gbm_depth;
    options.gbm.learning_rate =
        config.value("learning_rate", options.gbm.learning_rate);
    if (gbm_lr > 0) options.gbm.learning_rate = gbm_lr;
    if (app.count("--seed") > 0) {
      options.mlp.seed = seed_flag;
      options.gbm.seed = seed_flag;
    }

    auto result = train_bundle(data, options, &warnings);
    print_warnings(warnings);
    fs::path out_dir = fs::path(train_out).parent_path();
    if (out_dir.empty()) out_dir = ".";
    fs::create_directories(out_dir);
    save_bundle(result.bundle, train_out);
    json outputs = {{"model", train_out}};
    if (options.kind == ModelKind::Mlp) {
      std::string log = "epoch\ttrain_loss\tval_loss\n";
      for (std::size_t e = 0; e < result.mlp.log.size(); ++e) {
        log += detail::format_int(static_cast<long long>(e + 1));
        log += '\t';
        log += detail::format_double(result.mlp.log[e].train_loss);
        log += '\t';
        log += detail::format_double(result.mlp.log[e].val_loss);
        log += '\n';
      }
      fs::path log_path = out_dir / "mlp_loss_log.tsv";
      write_text_file(log_path, log);
      outputs["loss_log"] = log_path.string();
    } else if (options.gbm_grid_search) {
      fs::path fine_path = out_dir / "leaderboard_fine.tsv";
      fs::path coarse_path = out_dir / "leaderboard_coarse.tsv";
      write_text_file(fine_path, write_leaderboard(result.leaderboard_fine,
                                                   GbmTask::MultiClass4));
      write_text_file(coarse_path, write_leaderboard(
                                       result.leaderboard_coarse,
                                       GbmTask::Binary));
      outputs["leaderboard_fine"] = fine_path.string();
      outputs["leaderboard_coarse"] = coarse_path.string();
    }
    json config_out = {
        {"kind", options.kind == ModelKind::Gbm ? "gbm" : "mlp"},
        {"grid_search", options.gbm_grid_search},
        {"tune_threshold", options.tune_threshold},
        {"epochs", options.mlp.epochs},
        {"loss", loss},
        {"ntrees", options.gbm.ntrees},
        {"max_depth", options.gbm.max_depth},
        {"learning_rate", options.gbm.learning_rate},
    };
    write_manifest(out_dir, "train", config_out,
                   {{"train", train_dir}, {"key", train_key}}, outputs,
                   options.mlp.seed, common.jobs, elapsed());
    std::cout << "wrote model to " << train_out << "\n";
    return 0;
  }

  if (predict->parsed()) {
    ModelBundle bundle = load_bundle(pred_model);
    Dataset data = load_dataset(pred_eval, std::nullopt, common.jobs,
                                &warnings);
    auto predictions = bundle_predict(bundle, data, &warnings);
    print_warnings(warnings);
    fs::path out_dir = fs::path(pred_out).parent_path();
    if (out_dir.empty()) out_dir = ".";
    fs::create_directories(out_dir);
    write_text_file(pred_out, write_system_output(predictions));
    write_manifest(out_dir, "predict",
                   {{"kind", std::string(model_kind_name(bundle.kind))}},
                   {{"model", pred_model}, {"eval", pred_eval}},
                   {{"output", pred_out}}, seed_flag, common.jobs, elapsed());
    std::cout << "wrote " << predictions.size() << " predictions to "
              << pred_out << "\n";
    return 0;
  }

  if (score->parsed()) {
    auto output = parse_system_output(read_text_file(score_output));
    auto key = parse_key_file(read_text_file(score_key));
    auto report = score_run(output, key, {}, &warnings);
    print_warnings(warnings);
    std::cout << format_score_table(report);
    if (!score_report.empty()) {
      fs::path out_dir = fs::path(score_report).parent_path();
      if (out_dir.empty()) out_dir = ".";
      fs::create_directories(out_dir);
      write_text_file(score_report, write_score_report(report));
      write_manifest(out_dir, "score", json::object(),
                     {{"output", score_output}, {"key", score_key}},
                     {{"report", score_report}}, seed_flag, common.jobs,
                     elapsed());
    }
    return 0;
  }

  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& error) {
    std::cerr << "error: " << error.what() << "\n";
    return exit_code_for(error.code());
  } catch (const json::exception& error) {
    std::cerr << "error: " << error.what() << "\n";
    return 3;
  } catch (const std::exception& error) {
    std::cerr << "error: " << error.what() << "\n";
    return 3;
  }
}
