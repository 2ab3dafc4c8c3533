#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tc4tl {

inline constexpr double kLookSeconds = 4.0;
inline constexpr std::string_view kUnknown = "UNKNOWN";

enum class Channel {
  Bluetooth,
  Accelerometer,
  Gyroscope,
  Attitude,
  Gravity,
  MagneticField,
  Heading,
  Altitude,
};

inline constexpr std::size_t kChannelCount = 8;

inline constexpr std::size_t channel_arity(Channel c) noexcept {
  switch (c) {
    case Channel::Bluetooth: return 1;
    case Channel::Accelerometer: return 3;
    case Channel::Gyroscope: return 3;
    case Channel::Attitude: return 3;
    case Channel::Gravity: return 3;
    case Channel::MagneticField: return 4;  // x, y, z, accuracy code
    case Channel::Heading: return 3;
    case Channel::Altitude: return 2;
  }
  return 0;
}

inline constexpr std::string_view channel_tag(Channel c) noexcept {
  switch (c) {
    case Channel::Bluetooth: return "Bluetooth";
    case Channel::Accelerometer: return "Accelerometer";
    case Channel::Gyroscope: return "Gyroscope";
    case Channel::Attitude: return "Attitude";
    case Channel::Gravity: return "Gravity";
    case Channel::MagneticField: return "Magnetic-field";
    case Channel::Heading: return "Heading";
    case Channel::Altitude: return "Altitude";
  }
  return "";
}

inline std::optional<Channel> parse_channel_tag(std::string_view tag) noexcept {
  for (std::size_t i = 0; i < kChannelCount; ++i) {
    Channel c = static_cast<Channel>(i);
    if (channel_tag(c) == tag) return c;
  }
  return std::nullopt;
}

enum class Grain { Fine, Coarse };

inline constexpr char grain_code(Grain g) noexcept {
  return g == Grain::Fine ? 'F' : 'C';
}

inline std::optional<Grain> parse_grain(std::string_view text) noexcept {
  if (text == "F") return Grain::Fine;
  if (text == "C") return Grain::Coarse;
  return std::nullopt;
}

inline constexpr std::array<double, 4> kFineLabels = {1.2, 1.8, 3.0, 4.5};
inline constexpr std::array<double, 2> kCoarseLabels = {1.8, 4.5};

inline constexpr bool is_valid_label(Grain grain, double distance_m) noexcept {
  if (grain == Grain::Coarse) {
    return distance_m == 1.8 || distance_m == 4.5;
  }
  return distance_m == 1.2 || distance_m == 1.8 || distance_m == 3.0 ||
         distance_m == 4.5;
}

// Canonical text form of a distance label as used in key files.
inline constexpr std::string_view label_token(double distance_m) noexcept {
  if (distance_m == 1.2) return "1.2";
  if (distance_m == 1.8) return "1.8";
  if (distance_m == 3.0) return "3.0";
  if (distance_m == 4.5) return "4.5";
  return "";
}

inline constexpr std::array<std::string_view, 3> kCarryVocabulary = {
    "hand", "pocket", kUnknown};
inline constexpr std::array<std::string_view, 3> kPoseVocabulary = {
    "sitting", "standing", kUnknown};

struct SensorSample {
  double time_s = 0.0;
  Channel channel = Channel::Bluetooth;
  std::vector<double> values;
};

struct EventMetadata {
  std::string file_id;
  std::string tx_device{kUnknown};
  std::string rx_device{kUnknown};
  std::optional<int> tx_power_dbm;  // empty means unknown
  std::string tx_carry{kUnknown};
  std::string rx_carry{kUnknown};
  std::string tx_pose{kUnknown};
  std::string rx_pose{kUnknown};
  Grain grain = Grain::Fine;
};

struct Event {
  EventMetadata metadata;
  std::vector<SensorSample> samples;
};

// Nominal 4 s window [start_s, end_s). A window whose span extends past the
// event's last sample is flagged partial. sample indices are [begin, end)
// into the owning event's sample vector.
struct LookWindow {
  std::size_t index = 0;
  double start_s = 0.0;
  double end_s = kLookSeconds;
  std::size_t begin = 0;
  std::size_t end = 0;
  bool partial = false;
};

struct GroundTruthLabel {
  std::string file_id;
  Grain grain = Grain::Fine;
  double max_distance_m = 4.5;
};

// ---------------------------------------------------------------------------
// Validation

inline constexpr std::size_t kEventLevel = static_cast<std::size_t>(-1);

struct Violation {
  std::size_t sample_index = kEventLevel;  // kEventLevel for event-wide rules
  std::string rule;
};

namespace detail {

template <std::size_t N>
inline bool in_vocabulary(std::string_view value,
                          const std::array<std::string_view, N>& vocab) {
  for (auto entry : vocab) {
    if (value == entry) return true;
  }
  return false;
}

}  // namespace detail

// Report-returning check of every structural invariant; never throws.
inline std::vector<Violation> validate_event(const Event& event) {
  std::vector<Violation> report;
  const auto& meta = event.metadata;
  if (!detail::in_vocabulary(meta.tx_carry, kCarryVocabulary))
    report.push_back({kEventLevel, "tx_carry outside vocabulary"});
  if (!detail::in_vocabulary(meta.rx_carry, kCarryVocabulary))
    report.push_back({kEventLevel, "rx_carry outside vocabulary"});
  if (!detail::in_vocabulary(meta.tx_pose, kPoseVocabulary))
    report.push_back({kEventLevel, "tx_pose outside vocabulary"});
  if (!detail::in_vocabulary(meta.rx_pose, kPoseVocabulary))
    report.push_back({kEventLevel, "rx_pose outside vocabulary"});

  bool saw_bluetooth = false;
  double prev_time = 0.0;
  for (std::size_t i = 0; i < event.samples.size(); ++i) {
    const auto& sample = event.samples[i];
    if (sample.values.size() != channel_arity(sample.channel))
      report.push_back({i, "values arity does not match channel"});
    if (sample.time_s < 0.0)
      report.push_back({i, "negative sample time"});
    if (i > 0 && sample.time_s < prev_time)
      report.push_back({i, "samples not ordered by time"});
    prev_time = sample.time_s;
    if (sample.channel == Channel::Bluetooth) {
      saw_bluetooth = true;
      if (!sample.values.empty() &&
          (sample.values[0] < -120.0 || sample.values[0] > 0.0))
        report.push_back({i, "RSSI outside [-120, 0] dBm"});
    }
    if (sample.channel == Channel::MagneticField &&
        sample.values.size() == 4) {
      double code = sample.values[3];
      if (code != 0.0 && code != 1.0 && code != 2.0 && code != 3.0)
        report.push_back({i, "magnetic accuracy code outside {0,1,2,3}"});
    }
  }
  if (!saw_bluetooth)
    report.push_back({kEventLevel, "no Bluetooth sample"});
  return report;
}

}  // namespace tc4tl
