#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "tc4tl/error.hpp"
#include "tc4tl/features.hpp"
#include "tc4tl/gbm.hpp"
#include "tc4tl/ingest.hpp"
#include "tc4tl/mlp.hpp"
#include "tc4tl/pathloss.hpp"
#include "tc4tl/version.hpp"

namespace tc4tl {

// ---------------------------------------------------------------------------
// Feature subset for tree models

// Tree models take the raw predicted distance plus the categorical codes.
// The min-max normalized columns and the grain flag are omitted: trees are
// scale-free and each grain gets its own model.
inline std::vector<FeatureSpec> gbm_feature_schema() {
  return {
      {"predicted_distance_m", false, 0}, {"tx_power_code", true, 3},
      {"tx_carry_code", true, 3},         {"rx_carry_code", true, 3},
      {"tx_pose_code", true, 3},          {"rx_pose_code", true, 3},
      {"tx_device_code", true, 3},        {"rx_device_code", true, 3},
  };
}

inline FeatureRow gbm_row(const FeatureVector& features) {
  return {features.predicted_distance_m,
          static_cast<double>(features.codes.tx_power_code),
          static_cast<double>(features.codes.tx_carry_code),
          static_cast<double>(features.codes.rx_carry_code),
          static_cast<double>(features.codes.tx_pose_code),
          static_cast<double>(features.codes.rx_pose_code),
          static_cast<double>(features.codes.tx_device_code),
          static_cast<double>(features.codes.rx_device_code)};
}

// ---------------------------------------------------------------------------
// Bundle

enum class ModelKind { Mlp, Gbm };

inline std::string_view model_kind_name(ModelKind kind) {
  return kind == ModelKind::Mlp ? "mlp" : "gbm";
}

// Everything prediction needs: per-grain path loss constants, feature
// scalers fitted on the training set, the devices seen in training, the
// hardware tier table, and the classifier weights.
struct ModelBundle {
  int format_version = kModelFormatVersion;
  ModelKind kind = ModelKind::Mlp;
  ParamsByGrain params;
  Scalers scalers;
  std::set<std::string> known_devices;
  DeviceTierTable tiers = DeviceTierTable::defaults();
  MlpModel mlp;         // kind == Mlp
  GbmModel gbm_fine;    // kind == Gbm, four-class
  GbmModel gbm_coarse;  // kind == Gbm, binary
};

// Features for one event under a trained bundle. Devices unseen in training
// are remapped to a known twin or to the unknown sentinel first.
inline FeatureVector bundle_features(const ModelBundle& bundle,
                                     const Event& event,
                                     Warnings* warnings = nullptr) {
  Event patched = event;
  patched.metadata.tx_device =
      remap_unseen_device(event.metadata.tx_device, bundle.known_devices);
  patched.metadata.rx_device =
      remap_unseen_device(event.metadata.rx_device, bundle.known_devices);
  return extract_features(patched, bundle.params, bundle.scalers, bundle.tiers,
                          warnings);
}

inline double bundle_predict_event(const ModelBundle& bundle,
                                   const Event& event,
                                   Warnings* warnings = nullptr) {
  FeatureVector features = bundle_features(bundle, event, warnings);
  if (bundle.kind == ModelKind::Mlp) {
    return predict_mlp(bundle.mlp, features.to_array());
  }
  if (event.metadata.grain == Grain::Fine)
    return predict_multiclass(bundle.gbm_fine, gbm_row(features));
  return predict_binary(bundle.gbm_coarse, gbm_row(features));
}

inline std::map<std::string, double> bundle_predict(
    const ModelBundle& bundle, const Dataset& data,
    Warnings* warnings = nullptr) {
  std::map<std::string, double> out;
  for (const auto& event : data.events)
    out[event.metadata.file_id] = bundle_predict_event(bundle, event, warnings);
  return out;
}

// ---------------------------------------------------------------------------
// Training

struct TrainBundleOptions {
  ModelKind kind = ModelKind::Mlp;
  GridSpec calibration_grid;
  TrainConfig mlp;
  GbmConfig gbm;
  bool gbm_grid_search = false;
  GbmGrid gbm_grid;
  // Re-fit the binary decision threshold on the validation split by f1,
  // the same way the shipped 0.56 default was chosen.
  bool tune_threshold = true;
  unsigned jobs = 1;
};

struct BundleTrainResult {
  ModelBundle bundle;
  GridSearchResult calibration_fine;
  GridSearchResult calibration_coarse;
  MlpTrainResult mlp;          // kind == Mlp
  GbmTrainResult gbm_fine;     // kind == Gbm
  GbmTrainResult gbm_coarse;   // kind == Gbm
  std::vector<LeaderboardEntry> leaderboard_fine;    // grid search only
  std::vector<LeaderboardEntry> leaderboard_coarse;  // grid search only
};

namespace detail {

inline bool has_grain(const Dataset& data, Grain grain) {
  for (const auto& event : data.events) {
    if (event.metadata.grain == grain &&
        data.labels.count(event.metadata.file_id))
      return true;
  }
  return false;
}

}  // namespace detail

// Full training pipeline: per-grain grid calibration, scaler fit, feature
// extraction, then classifier training. The key must label every grain the
// chosen classifier kind needs.
inline BundleTrainResult train_bundle(const Dataset& train,
                                      const TrainBundleOptions& options,
                                      Warnings* warnings = nullptr) {
  if (train.events.empty() || train.labels.empty())
    raise(Errc::EmptyTrainingSet, "training needs labeled events");

  BundleTrainResult result;
  auto& bundle = result.bundle;
  bundle.kind = options.kind;

  bool fine_present = detail::has_grain(train, Grain::Fine);
  bool coarse_present = detail::has_grain(train, Grain::Coarse);

  if (fine_present) {
    result.calibration_fine = calibrate_grid(
        train, Grain::Fine, options.calibration_grid, options.jobs);
    bundle.params.fine = result.calibration_fine.best;
  } else {
    bundle.params.fine = kDefaultFineParams;
    if (warnings)
      warnings->push_back(
          "no labeled fine-grain events; using default fine constants");
  }
  if (coarse_present) {
    result.calibration_coarse = calibrate_grid(
        train, Grain::Coarse, options.calibration_grid, options.jobs);
    bundle.params.coarse = result.calibration_coarse.best;
  } else {
    bundle.params.coarse = kDefaultCoarseParams;
    if (warnings)
      warnings->push_back(
          "no labeled coarse-grain events; using default coarse constants");
  }

  bundle.scalers = fit_scalers(train);
  for (const auto& event : train.events) {
    bundle.known_devices.insert(event.metadata.tx_device);
    bundle.known_devices.insert(event.metadata.rx_device);
  }

  std::vector<std::vector<double>> mlp_rows;
  std::vector<FeatureRow> fine_rows;
  std::vector<FeatureRow> coarse_rows;
  std::vector<double> mlp_labels;
  std::vector<double> fine_labels;
  std::vector<double> coarse_labels;
  for (const auto& event : train.events) {
    auto it = train.labels.find(event.metadata.file_id);
    if (it == train.labels.end()) {
      if (warnings)
        warnings->push_back("unlabeled training event skipped: " +
                            event.metadata.file_id);
      continue;
    }
    FeatureVector features = bundle_features(bundle, event, warnings);
    double label = it->second.max_distance_m;
    if (options.kind == ModelKind::Mlp) {
      auto array = features.to_array();
      mlp_rows.emplace_back(array.begin(), array.end());
      mlp_labels.push_back(label);
    } else if (event.metadata.grain == Grain::Fine) {
      fine_rows.push_back(gbm_row(features));
      fine_labels.push_back(label);
    } else {
      coarse_rows.push_back(gbm_row(features));
      coarse_labels.push_back(label);
    }
  }

  if (options.kind == ModelKind::Mlp) {
    result.mlp = train_mlp(mlp_rows, mlp_labels, options.mlp);
    bundle.mlp = result.mlp.model;
    return result;
  }

  if (fine_rows.empty())
    raise(Errc::EmptyGrain, "tree training needs labeled fine-grain events");
  if (coarse_rows.empty())
    raise(Errc::EmptyGrain,
          "tree training needs labeled coarse-grain events");
  auto schema = gbm_feature_schema();
  if (options.gbm_grid_search) {
    auto fine = grid_search_gbm(fine_rows, fine_labels, GbmTask::MultiClass4,
                                schema, options.gbm_grid, options.gbm);
    auto coarse = grid_search_gbm(coarse_rows, coarse_labels, GbmTask::Binary,
                                  schema, options.gbm_grid, options.gbm);
    result.leaderboard_fine = std::move(fine.leaderboard);
    result.leaderboard_coarse = std::move(coarse.leaderboard);
    result.gbm_fine = std::move(fine.final_result);
    result.gbm_coarse = std::move(coarse.final_result);
  } else {
    result.gbm_fine =
        train_gbm(fine_rows, fine_labels, GbmTask::MultiClass4, schema,
                  options.gbm);
    result.gbm_coarse = train_gbm(coarse_rows, coarse_labels, GbmTask::Binary,
                                  schema, options.gbm);
  }
  bundle.gbm_fine = result.gbm_fine.model;
  bundle.gbm_coarse = result.gbm_coarse.model;

  if (options.tune_threshold) {
    // Tuning needs held-out predictions. The grid path retrains its final
    // model on everything, so tune on a split model with the same config.
    const GbmTrainResult* split_model = &result.gbm_coarse;
    GbmTrainResult tuner;
    if (options.gbm_grid_search) {
      GbmConfig config = result.leaderboard_coarse.front().config;
      tuner = train_gbm(coarse_rows, coarse_labels, GbmTask::Binary, schema,
                        config);
      split_model = &tuner;
    }
    std::vector<FeatureRow> val_rows;
    std::vector<double> val_labels;
    for (auto i : split_model->val_indices) {
      val_rows.push_back(coarse_rows[i]);
      val_labels.push_back(coarse_labels[i]);
    }
    bool both_classes = false;
    for (std::size_t i = 1; i < val_labels.size(); ++i)
      both_classes |= val_labels[i] != val_labels[0];
    if (both_classes && !split_model->model.trees.empty()) {
      double tuned =
          tune_binary_threshold(split_model->model, val_rows, val_labels);
      // Tuning admits p == t as contact but prediction is strictly greater,
      // so store a cut just below the winning candidate.
      double below = 0.0;
      for (const auto& row : val_rows) {
        double p = predict_binary_prob(split_model->model, row);
        if (p < tuned) below = std::max(below, p);
      }
      bundle.gbm_coarse.binary_threshold = (below + tuned) / 2.0;
    } else if (warnings) {
      warnings->push_back(
          "binary threshold left at default; validation split unusable");
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Serialization

inline std::string write_bundle(const ModelBundle& bundle) {
  std::string out = "tc4tl-model\n";
  out += "format=" + detail::format_int(bundle.format_version) + "\n";
  out += "kind=";
  out += model_kind_name(bundle.kind);
  out += '\n';
  out += "calibration.fine.tx_ref_dbm=" +
         detail::format_double(bundle.params.fine.tx_ref_dbm) + "\n";
  out += "calibration.fine.n_exponent=" +
         detail::format_double(bundle.params.fine.n_exponent) + "\n";
  out += "calibration.coarse.tx_ref_dbm=" +
         detail::format_double(bundle.params.coarse.tx_ref_dbm) + "\n";
  out += "calibration.coarse.n_exponent=" +
         detail::format_double(bundle.params.coarse.n_exponent) + "\n";
  out += "scaler.mean_rssi.min=" +
         detail::format_double(bundle.scalers.mean_rssi.min_value) + "\n";
  out += "scaler.mean_rssi.max=" +
         detail::format_double(bundle.scalers.mean_rssi.max_value) + "\n";
  out += "scaler.path_loss.min=" +
         detail::format_double(bundle.scalers.path_loss.min_value) + "\n";
  out += "scaler.path_loss.max=" +
         detail::format_double(bundle.scalers.path_loss.max_value) + "\n";
  out += "known_devices=" +
         detail::format_int(static_cast<long long>(
             bundle.known_devices.size())) +
         "\n";
  for (const auto& device : bundle.known_devices)
    out += "device " + device + "\n";
  std::string tiers = bundle.tiers.to_tsv();
  std::size_t tier_lines = 0;
  for (char c : tiers) tier_lines += c == '\n' ? 1 : 0;
  out += "tiers=" + detail::format_int(static_cast<long long>(tier_lines)) +
         "\n";
  out += tiers;
  if (bundle.kind == ModelKind::Mlp) {
    out += "[mlp]\n";
    out += write_mlp(bundle.mlp);
  } else {
    out += "[gbm_fine]\n";
    out += write_gbm(bundle.gbm_fine);
    out += "[gbm_coarse]\n";
    out += write_gbm(bundle.gbm_coarse);
  }
  return out;
}

namespace detail {

inline std::string join_lines(const std::vector<std::string_view>& lines,
                              std::size_t from, std::size_t to) {
  std::string out;
  for (std::size_t i = from; i < to; ++i) {
    out += lines[i];
    out += '\n';
  }
  return out;
}

}  // namespace detail

inline ModelBundle parse_bundle(std::string_view content) {
  auto lines = detail::split(content, '\n');
  for (auto& line : lines) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  }
  std::size_t cursor = 0;
  auto next_line = [&]() -> std::string_view {
    while (cursor < lines.size()) {
      std::string_view line = lines[cursor++];
      if (!line.empty()) return line;
    }
    raise(Errc::MalformedLine, "truncated model bundle");
  };
  auto expect_kv = [&](std::string_view key) -> std::string_view {
    std::string_view line = next_line();
    if (!line.starts_with(key) || line.size() <= key.size() ||
        line[key.size()] != '=')
      raise(Errc::MalformedLine, "expected " + std::string(key) + "=");
    return line.substr(key.size() + 1);
  };
  auto as_double = [&](std::string_view text) {
    auto value = detail::parse_double(text);
    if (!value) raise(Errc::MalformedLine, "bad numeric field");
    return *value;
  };

  if (next_line() != "tc4tl-model")
    raise(Errc::MalformedLine, "not a model bundle");
  ModelBundle bundle;
  auto version = detail::parse_int(expect_kv("format"));
  if (!version) raise(Errc::MalformedLine, "bad format field");
  if (*version != kModelFormatVersion)
    raise(Errc::UnknownModelVersion,
          "model format " + detail::format_int(*version) +
              " is not supported");
  bundle.format_version = static_cast<int>(*version);
  std::string_view kind = expect_kv("kind");
  if (kind == "mlp") {
    bundle.kind = ModelKind::Mlp;
  } else if (kind == "gbm") {
    bundle.kind = ModelKind::Gbm;
  } else {
    raise(Errc::MalformedLine, "unknown model kind");
  }
  bundle.params.fine.tx_ref_dbm =
      as_double(expect_kv("calibration.fine.tx_ref_dbm"));
  bundle.params.fine.n_exponent =
      as_double(expect_kv("calibration.fine.n_exponent"));
  bundle.params.fine.grain = Grain::Fine;
  bundle.params.coarse.tx_ref_dbm =
      as_double(expect_kv("calibration.coarse.tx_ref_dbm"));
  bundle.params.coarse.n_exponent =
      as_double(expect_kv("calibration.coarse.n_exponent"));
  bundle.params.coarse.grain = Grain::Coarse;
  bundle.scalers.mean_rssi.min_value =
      as_double(expect_kv("scaler.mean_rssi.min"));
  bundle.scalers.mean_rssi.max_value =
      as_double(expect_kv("scaler.mean_rssi.max"));
  bundle.scalers.path_loss.min_value =
      as_double(expect_kv("scaler.path_loss.min"));
  bundle.scalers.path_loss.max_value =
      as_double(expect_kv("scaler.path_loss.max"));
  auto n_devices = detail::parse_int(expect_kv("known_devices"));
  if (!n_devices) raise(Errc::MalformedLine, "bad known_devices count");
  for (long long i = 0; i < *n_devices; ++i) {
    std::string_view line = next_line();
    if (!line.starts_with("device "))
      raise(Errc::MalformedLine, "bad device line");
    bundle.known_devices.insert(std::string(line.substr(7)));
  }
  auto n_tiers = detail::parse_int(expect_kv("tiers"));
  if (!n_tiers) raise(Errc::MalformedLine, "bad tiers count");
  std::string tier_text;
  for (long long i = 0; i < *n_tiers; ++i) {
    tier_text += next_line();
    tier_text += '\n';
  }
  bundle.tiers = DeviceTierTable::from_tsv(tier_text);

  if (bundle.kind == ModelKind::Mlp) {
    if (next_line() != "[mlp]")
      raise(Errc::MalformedLine, "expected [mlp] section");
    bundle.mlp = parse_mlp(detail::join_lines(lines, cursor, lines.size()));
  } else {
    if (next_line() != "[gbm_fine]")
      raise(Errc::MalformedLine, "expected [gbm_fine] section");
    std::size_t coarse_at = cursor;
    while (coarse_at < lines.size() && lines[coarse_at] != "[gbm_coarse]")
      ++coarse_at;
    if (coarse_at == lines.size())
      raise(Errc::MalformedLine, "expected [gbm_coarse] section");
    bundle.gbm_fine =
        parse_gbm(detail::join_lines(lines, cursor, coarse_at));
    bundle.gbm_coarse =
        parse_gbm(detail::join_lines(lines, coarse_at + 1, lines.size()));
  }
  return bundle;
}

inline void save_bundle(const ModelBundle& bundle,
                        const std::filesystem::path& path) {
  write_text_file(path, write_bundle(bundle));
}

inline ModelBundle load_bundle(const std::filesystem::path& path) {
  return parse_bundle(read_text_file(path));
}

}  // namespace tc4tl
