#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "tc4tl/detail/text.hpp"
#include "tc4tl/error.hpp"
#include "tc4tl/event.hpp"
#include "tc4tl/ingest.hpp"
#include "tc4tl/pathloss.hpp"

namespace tc4tl {

// Offset between advertised transmit power and expected RSSI at the
// measurement reference, in dB.
inline constexpr double kPathLossOffsetDb = 41.0;
// Attenuation needs a transmit power; unknown power shares the encoding of
// power 7, so the same stand-in keeps the two features consistent.
inline constexpr int kAssumedTxPowerDbm = 7;

inline constexpr double kMinPredictedDistanceM = 1.2;
inline constexpr double kMaxPredictedDistanceM = 4.5;

inline double path_loss_attenuation(double tx_power_dbm, double mean_rssi) {
  return tx_power_dbm - kPathLossOffsetDb - mean_rssi;
}

struct MinMaxScaler {
  double min_value = 0.0;
  double max_value = 0.0;

  // Degenerate range carries no information; map everything to the center.
  double transform(double value) const {
    if (!(max_value > min_value)) return 0.5;
    return std::clamp((value - min_value) / (max_value - min_value), 0.0, 1.0);
  }
};

struct Scalers {
  MinMaxScaler mean_rssi;
  MinMaxScaler path_loss;
};

// ---------------------------------------------------------------------------
// Device tiers

inline std::string normalize_device(std::string_view device) {
  std::string out;
  out.reserve(device.size());
  for (char c : device) {
    if (c == ' ' || c == '-' || c == '_') continue;
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    out.push_back(c);
  }
  return out;
}

// Maps device names to hardware tiers: 0 unknown or pre-iPhone7,
// 1 iPhone7/8 family, 2 iPhoneX and newer. Lookups ignore case and
// separators. Unlisted devices fall to tier 0.
class DeviceTierTable {
 public:
  int tier_of(std::string_view device) const {
    auto it = tiers_.find(normalize_device(device));
    return it == tiers_.end() ? 0 : it->second;
  }

  void set(std::string_view device, int tier) {
    tiers_[normalize_device(device)] = tier;
  }

  static DeviceTierTable defaults() {
    DeviceTierTable table;
    for (const char* name :
         {"iPhone5", "iPhone5c", "iPhone5s", "iPhone6", "iPhone6Plus",
          "iPhone6s", "iPhone6sPlus", "iPhoneSE", "iPodTouch", "GalaxyS9",
          "GalaxyNote9", "Pixel3", "Pixel4"})
      table.set(name, 0);
    for (const char* name :
         {"iPhone7", "iPhone7Plus", "iPhone8", "iPhone8Plus"})
      table.set(name, 1);
    for (const char* name :
         {"iPhoneX", "iPhoneXR", "iPhoneXS", "iPhoneXSMax", "iPhone11",
          "iPhone11Pro", "iPhone11ProMax"})
      table.set(name, 2);
    return table;
  }

  static DeviceTierTable from_tsv(std::string_view content) {
    DeviceTierTable table;
    std::size_t line_no = 0;
    for (std::string_view line : detail::split(content, '\n')) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      line = detail::trim(line);
      if (line.empty() || line.front() == '#') continue;
      auto fields = detail::split(line, '\t');
      if (fields.size() != 2)
        raise(Errc::MalformedLine,
              "tier table line " + detail::format_int(line_no) +
                  ": expected device<TAB>tier");
      auto tier = detail::parse_int(fields[1]);
      if (!tier || *tier < 0 || *tier > 2)
        raise(Errc::MalformedLine,
              "tier table line " + detail::format_int(line_no) +
                  ": tier must be 0, 1, or 2");
      table.set(fields[0], static_cast<int>(*tier));
    }
    return table;
  }

  std::string to_tsv() const {
    std::string out;
    for (const auto& [device, tier] : tiers_) {
      out += device;
      out += '\t';
      out += detail::format_int(tier);
      out += '\n';
    }
    return out;
  }

 private:
  std::map<std::string, int> tiers_;
};

// A device seen in training passes through; a known hardware twin substitutes
// for an unseen one; anything else becomes the unknown sentinel. Every output
// is a fixed point, so the mapping is idempotent.
inline std::string remap_unseen_device(const std::string& device,
                                       const std::set<std::string>& known) {
  if (known.count(device)) return device;
  static const std::map<std::string, std::string> kSubstitutes = {
      {"iphone6s", "iPhone7"},
      {"iphone11pro", "iPhone11"},
      {"iphone11promax", "iPhone11"},
  };
  auto it = kSubstitutes.find(normalize_device(device));
  if (it != kSubstitutes.end() && known.count(it->second)) return it->second;
  return std::string(kUnknown);
}

// ---------------------------------------------------------------------------
// Encoding

struct CategoricalCodes {
  int tx_power_code = 0;  // 0: power 7 or unknown, 1: power 8, 2: power 12
  int tx_carry_code = 0;  // 0: unknown, 1: hand, 2: pocket
  int rx_carry_code = 0;
  int tx_pose_code = 0;  // 0: unknown, 1: sitting, 2: standing
  int rx_pose_code = 0;
  int tx_device_code = 0;  // hardware tier
  int rx_device_code = 0;
};

namespace detail {

inline int encode_carry(std::string_view carry, std::string_view side,
                        Warnings* warnings) {
  if (carry == "hand") return 1;
  if (carry == "pocket") return 2;
  if (carry != kUnknown)
    warn(warnings, std::string(side) + " carry '" + std::string(carry) +
                       "' unrecognized; encoded as unknown");
  return 0;
}

inline int encode_pose(std::string_view pose, std::string_view side,
                       Warnings* warnings) {
  if (pose == "sitting") return 1;
  if (pose == "standing") return 2;
  if (pose != kUnknown)
    warn(warnings, std::string(side) + " pose '" + std::string(pose) +
                       "' unrecognized; encoded as unknown");
  return 0;
}

}  // namespace detail

inline CategoricalCodes encode_categorical(const EventMetadata& metadata,
                                           const DeviceTierTable& tiers,
                                           Warnings* warnings = nullptr) {
  CategoricalCodes codes;
  if (metadata.tx_power_dbm) {
    int power = *metadata.tx_power_dbm;
    if (power == 7) {
      codes.tx_power_code = 0;
    } else if (power == 8) {
      codes.tx_power_code = 1;
    } else if (power == 12) {
      codes.tx_power_code = 2;
    } else {
      detail::warn(warnings, "transmit power " + detail::format_int(power) +
                                 " unrecognized; encoded as unknown");
      codes.tx_power_code = 0;
    }
  }
  codes.tx_carry_code = detail::encode_carry(metadata.tx_carry, "tx", warnings);
  codes.rx_carry_code = detail::encode_carry(metadata.rx_carry, "rx", warnings);
  codes.tx_pose_code = detail::encode_pose(metadata.tx_pose, "tx", warnings);
  codes.rx_pose_code = detail::encode_pose(metadata.rx_pose, "rx", warnings);
  codes.tx_device_code = tiers.tier_of(metadata.tx_device);
  codes.rx_device_code = tiers.tier_of(metadata.rx_device);
  return codes;
}

// ---------------------------------------------------------------------------
// Feature vector

struct FeatureVector {
  double predicted_distance_m = 0.0;  // raw meters, clamped to [1.2, 4.5]
  double norm_mean_rssi = 0.0;
  double norm_path_loss = 0.0;
  int grain_code = 0;  // 0 fine, 1 coarse
  CategoricalCodes codes;

  std::array<double, 11> to_array() const {
    return {predicted_distance_m,
            norm_mean_rssi,
            norm_path_loss,
            static_cast<double>(grain_code),
            static_cast<double>(codes.tx_power_code),
            static_cast<double>(codes.tx_carry_code),
            static_cast<double>(codes.rx_carry_code),
            static_cast<double>(codes.tx_pose_code),
            static_cast<double>(codes.rx_pose_code),
            static_cast<double>(codes.tx_device_code),
            static_cast<double>(codes.rx_device_code)};
  }
};

inline constexpr std::array<std::string_view, 11> kFeatureNames = {
    "predicted_distance_m", "norm_mean_rssi", "norm_path_loss",
    "grain_code",           "tx_power_code",  "tx_carry_code",
    "rx_carry_code",        "tx_pose_code",   "rx_pose_code",
    "tx_device_code",       "rx_device_code"};

inline double attenuation_for_event(const EventMetadata& metadata,
                                    double rssi) {
  double power = metadata.tx_power_dbm
                     ? static_cast<double>(*metadata.tx_power_dbm)
                     : static_cast<double>(kAssumedTxPowerDbm);
  return path_loss_attenuation(power, rssi);
}

inline Scalers fit_scalers(const Dataset& train) {
  Scalers scalers;
  bool first = true;
  for (const auto& event : train.events) {
    double rssi = mean_rssi(event);
    double atten = attenuation_for_event(event.metadata, rssi);
    if (first) {
      scalers.mean_rssi = {rssi, rssi};
      scalers.path_loss = {atten, atten};
      first = false;
      continue;
    }
    scalers.mean_rssi.min_value = std::min(scalers.mean_rssi.min_value, rssi);
    scalers.mean_rssi.max_value = std::max(scalers.mean_rssi.max_value, rssi);
    scalers.path_loss.min_value = std::min(scalers.path_loss.min_value, atten);
    scalers.path_loss.max_value = std::max(scalers.path_loss.max_value, atten);
  }
  if (first) raise(Errc::EmptyTrainingSet, "no events to fit scalers on");
  return scalers;
}

inline FeatureVector extract_features(const Event& event,
                                      const ParamsByGrain& params,
                                      const Scalers& scalers,
                                      const DeviceTierTable& tiers,
                                      Warnings* warnings = nullptr) {
  FeatureVector features;
  double rssi = mean_rssi(event);
  const auto& cal = params.for_grain(event.metadata.grain);
  features.predicted_distance_m =
      std::clamp(estimate_distance(cal, rssi), kMinPredictedDistanceM,
                 kMaxPredictedDistanceM);
  features.norm_mean_rssi = scalers.mean_rssi.transform(rssi);
  features.norm_path_loss = scalers.path_loss.transform(
      attenuation_for_event(event.metadata, rssi));
  features.grain_code = event.metadata.grain == Grain::Coarse ? 1 : 0;
  features.codes = encode_categorical(event.metadata, tiers, warnings);
  return features;
}

// TSV with a header row; one row per event in file_id order.
inline std::string write_feature_matrix(
    const std::map<std::string, FeatureVector>& rows) {
  std::string out = "file_id";
  for (auto name : kFeatureNames) {
    out += '\t';
    out += name;
  }
  out += '\n';
  for (const auto& [file_id, features] : rows) {
    out += file_id;
    for (double value : features.to_array()) {
      out += '\t';
      out += detail::format_double(value);
    }
    out += '\n';
  }
  return out;
}

}  // namespace tc4tl
