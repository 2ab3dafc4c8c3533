#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tc4tl/detail/text.hpp"
#include "tc4tl/error.hpp"
#include "tc4tl/event.hpp"
#include "tc4tl/ingest.hpp"
#include "tc4tl/random.hpp"

namespace tc4tl {

// Within-event look distances stay within this band below the labeled max.
inline constexpr double kFineLookVariationM = 0.9;
inline constexpr double kCoarseLookVariationM = 2.1;
// Coarse 1.8 m events would otherwise allow non-positive look distances.
inline constexpr double kMinLookDistanceM = 0.3;

inline constexpr double look_variation(Grain grain) noexcept {
  return grain == Grain::Fine ? kFineLookVariationM : kCoarseLookVariationM;
}

struct IntRange {
  int lo = 1;
  int hi = 1;
};

struct WeightedVocab {
  std::vector<std::string> values;
  std::vector<double> weights;  // same length as values
};

struct SynthSpec {
  std::size_t n_events = 1000;
  double grain_mix = 0.5;  // fraction of events that are coarse grain
  // Weight per distance label; restricted to each grain's label set.
  std::map<double, double> label_weights{
      {1.2, 1.0}, {1.8, 1.0}, {3.0, 1.0}, {4.5, 1.0}};
  IntRange looks_per_event{3, 8};
  IntRange samples_per_look{5, 15};  // Bluetooth samples per look
  double tx_true_dbm = -54.0;
  double n_true = 2.1;
  double noise_sigma_db = 4.0;
  double imu_noise_sigma = 0.1;
  WeightedVocab devices{{"iPhone6s", "iPhone7", "iPhone8", "iPhoneX",
                         "iPhoneXR", "iPhone11", "iPhone11Pro",
                         std::string(kUnknown)},
                        {1, 1, 1, 1, 1, 1, 1, 1}};
  WeightedVocab carries{{"hand", "pocket", std::string(kUnknown)}, {1, 1, 1}};
  WeightedVocab poses{{"sitting", "standing", std::string(kUnknown)},
                      {1, 1, 1}};
  std::vector<std::optional<int>> tx_powers{7, 8, 12, std::nullopt};
  std::vector<double> tx_power_weights{1, 1, 1, 1};
  std::uint64_t seed = 1;
};

struct GeneratedEvent {
  Event event;
  GroundTruthLabel label;
  std::vector<double> look_distances;
};

namespace detail {

inline void check_spec(const SynthSpec& spec) {
  if (spec.grain_mix < 0.0 || spec.grain_mix > 1.0)
    raise(Errc::InvalidDataset, "grain_mix must lie in [0,1]");
  if (spec.noise_sigma_db < 0.0)
    raise(Errc::InvalidDataset, "noise_sigma_db must be non-negative");
  if (spec.looks_per_event.lo < 1 ||
      spec.looks_per_event.hi < spec.looks_per_event.lo)
    raise(Errc::InvalidDataset, "looks_per_event range is empty");
  if (spec.samples_per_look.lo < 1 ||
      spec.samples_per_look.hi < spec.samples_per_look.lo)
    raise(Errc::InvalidDataset, "samples_per_look range is empty");
}

inline std::string pick(const WeightedVocab& vocab, Rng& rng) {
  return vocab.values[rng.pick_weighted(vocab.weights)];
}

// Largest-remainder allocation of count slots across non-negative weights.
inline std::vector<std::size_t> apportion(const std::vector<double>& weights,
                                          std::size_t count) {
  double total = 0.0;
  for (double w : weights) total += w;
  std::vector<std::size_t> out(weights.size(), 0);
  if (total <= 0.0 || count == 0) return out;
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    double exact = static_cast<double>(count) * weights[i] / total;
    out[i] = static_cast<std::size_t>(std::floor(exact));
    assigned += out[i];
    remainders.push_back({exact - std::floor(exact), i});
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) {
                     return a.first > b.first;  // ties keep index order
                   });
  for (std::size_t k = 0; assigned < count; ++k, ++assigned) {
    out[remainders[k % remainders.size()].second] += 1;
  }
  return out;
}

}  // namespace detail

// One event's full sensor recording. All draws come from the provided rng
// in a fixed order, so one event's stream is independent of every other's.
inline GeneratedEvent generate_event(const SynthSpec& spec,
                                     const GroundTruthLabel& label, Rng& rng) {
  if (!is_valid_label(label.grain, label.max_distance_m))
    raise(Errc::InconsistentLabel,
          "label " + detail::format_double(label.max_distance_m) +
              " is not valid for this grain");

  GeneratedEvent out;
  out.label = label;
  auto& event = out.event;
  event.metadata.file_id = label.file_id;
  event.metadata.grain = label.grain;
  event.metadata.tx_device = detail::pick(spec.devices, rng);
  event.metadata.rx_device = detail::pick(spec.devices, rng);
  event.metadata.tx_power_dbm =
      spec.tx_powers[rng.pick_weighted(spec.tx_power_weights)];
  event.metadata.tx_carry = detail::pick(spec.carries, rng);
  event.metadata.rx_carry = detail::pick(spec.carries, rng);
  event.metadata.tx_pose = detail::pick(spec.poses, rng);
  event.metadata.rx_pose = detail::pick(spec.poses, rng);

  int n_looks = static_cast<int>(
      rng.uniform_int(spec.looks_per_event.lo, spec.looks_per_event.hi));
  std::size_t pinned = static_cast<std::size_t>(
      rng.below(static_cast<std::uint64_t>(n_looks)));
  double max_d = label.max_distance_m;
  double low_d = std::max(kMinLookDistanceM, max_d - look_variation(label.grain));
  for (int i = 0; i < n_looks; ++i) {
    out.look_distances.push_back(
        static_cast<std::size_t>(i) == pinned ? max_d
                                              : rng.uniform(low_d, max_d));
  }

  for (int look = 0; look < n_looks; ++look) {
    double start = static_cast<double>(look) * kLookSeconds;
    double d = out.look_distances[static_cast<std::size_t>(look)];
    double clean_rssi = spec.tx_true_dbm - 10.0 * spec.n_true * std::log10(d);
    std::vector<SensorSample> look_samples;

    int n_bt = static_cast<int>(
        rng.uniform_int(spec.samples_per_look.lo, spec.samples_per_look.hi));
    for (int s = 0; s < n_bt; ++s) {
      SensorSample sample;
      sample.time_s = start + kLookSeconds * rng.uniform01();
      sample.channel = Channel::Bluetooth;
      double rssi = clean_rssi + rng.gaussian(0.0, spec.noise_sigma_db);
      sample.values.push_back(std::clamp(rssi, -120.0, 0.0));
      look_samples.push_back(std::move(sample));
    }

    for (std::size_t c = 0; c < kChannelCount; ++c) {
      Channel channel = static_cast<Channel>(c);
      if (channel == Channel::Bluetooth) continue;
      SensorSample sample;
      sample.time_s = start + kLookSeconds * rng.uniform01();
      sample.channel = channel;
      std::size_t arity = channel_arity(channel);
      for (std::size_t v = 0; v < arity; ++v) {
        sample.values.push_back(rng.gaussian(0.0, spec.imu_noise_sigma));
      }
      if (channel == Channel::Gravity) sample.values[2] += -9.81;
      if (channel == Channel::MagneticField)
        sample.values[3] = static_cast<double>(rng.below(4));
      look_samples.push_back(std::move(sample));
    }

    std::stable_sort(look_samples.begin(), look_samples.end(),
                     [](const SensorSample& a, const SensorSample& b) {
                       return a.time_s < b.time_s;
                     });
    for (auto& sample : look_samples)
      event.samples.push_back(std::move(sample));
  }
  return out;
}

inline std::string synth_file_id(std::size_t index) {
  std::string digits = detail::format_int(static_cast<long long>(index));
  while (digits.size() < 5) digits.insert(digits.begin(), '0');
  return "ev" + digits;
}

// The label sequence is drawn once from a dedicated stream and shuffled, so
// event i's content stream never depends on any other event.
inline std::vector<GroundTruthLabel> plan_labels(const SynthSpec& spec) {
  std::size_t n_coarse = static_cast<std::size_t>(
      std::llround(spec.grain_mix * static_cast<double>(spec.n_events)));
  std::size_t n_fine = spec.n_events - n_coarse;

  std::vector<GroundTruthLabel> labels;
  auto append_grain = [&](Grain grain, std::size_t count) {
    std::vector<double> values;
    std::vector<double> weights;
    for (const auto& [distance, weight] : spec.label_weights) {
      if (!is_valid_label(grain, distance)) continue;
      values.push_back(distance);
      weights.push_back(weight);
    }
    if (count > 0 && values.empty())
      raise(Errc::InvalidDataset, "label_weights covers no label of a grain");
    auto counts = detail::apportion(weights, count);
    for (std::size_t i = 0; i < values.size(); ++i) {
      for (std::size_t k = 0; k < counts[i]; ++k)
        labels.push_back({"", grain, values[i]});
    }
  };
  append_grain(Grain::Fine, n_fine);
  append_grain(Grain::Coarse, n_coarse);

  Rng assign_rng = Rng::for_stream(spec.seed, ~std::uint64_t{0});
  assign_rng.shuffle(labels);
  for (std::size_t i = 0; i < labels.size(); ++i)
    labels[i].file_id = synth_file_id(i);
  return labels;
}

inline std::vector<GeneratedEvent> generate_events(const SynthSpec& spec) {
  detail::check_spec(spec);
  auto labels = plan_labels(spec);
  std::vector<GeneratedEvent> events;
  events.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    Rng rng = Rng::for_stream(spec.seed, i);
    events.push_back(generate_event(spec, labels[i], rng));
  }
  return events;
}

// Writes event files, the key file, and a per-look debug TSV.
inline void generate_dataset(const SynthSpec& spec,
                             const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) raise(Errc::IoFailure, "cannot create " + out_dir.string());

  auto events = generate_events(spec);
  std::map<std::string, GroundTruthLabel> labels;
  std::string debug;
  for (const auto& generated : events) {
    const std::string& file_id = generated.event.metadata.file_id;
    write_text_file(out_dir / (file_id + std::string(kEventFileExtension)),
                    write_event_file(generated.event));
    labels.emplace(file_id, generated.label);
    debug += file_id;
    for (double d : generated.look_distances) {
      debug += '\t';
      debug += detail::format_double(d);
    }
    debug += '\n';
  }
  write_text_file(out_dir / "key.tsv", write_key_file(labels));
  write_text_file(out_dir / "looks_debug.tsv", debug);
}

}  // namespace tc4tl
