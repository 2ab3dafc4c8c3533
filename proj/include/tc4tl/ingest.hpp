#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "tc4tl/detail/parallel.hpp"
#include "tc4tl/detail/text.hpp"
#include "tc4tl/error.hpp"
#include "tc4tl/event.hpp"

namespace tc4tl {

using Warnings = std::vector<std::string>;

inline constexpr std::string_view kEventFileExtension = ".evt";

namespace detail {

inline void warn(Warnings* sink, std::string message) {
  if (sink) sink->push_back(std::move(message));
}

// Header keys in canonical write order.
inline constexpr std::array<std::string_view, 9> kHeaderKeys = {
    "fileID", "Grain",   "TXDevice", "RXDevice", "TXPower",
    "TXCarry", "RXCarry", "TXPose",   "RXPose"};

}  // namespace detail

// ---------------------------------------------------------------------------
// Event files

inline Event parse_event_file(std::string_view content,
                              Warnings* warnings = nullptr) {
  Event event;
  std::array<bool, detail::kHeaderKeys.size()> seen{};
  bool out_of_order = false;
  double prev_time = 0.0;
  std::size_t line_no = 0;

  for (std::string_view line : detail::split(content, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    std::string where = "line " + detail::format_int(line_no);

    if (line.front() == '#') {
      auto comma = line.find(',');
      if (comma == std::string_view::npos)
        raise(Errc::MalformedHeader, where + ": header without value");
      std::string_view key = line.substr(1, comma - 1);
      std::string_view value = line.substr(comma + 1);
      std::size_t key_index = detail::kHeaderKeys.size();
      for (std::size_t i = 0; i < detail::kHeaderKeys.size(); ++i) {
        if (detail::kHeaderKeys[i] == key) key_index = i;
      }
      if (key_index == detail::kHeaderKeys.size()) {
        detail::warn(warnings,
                     where + ": ignoring unknown header key '" +
                         std::string(key) + "'");
        continue;
      }
      if (seen[key_index])
        raise(Errc::MalformedHeader,
              where + ": duplicate header '" + std::string(key) + "'");
      seen[key_index] = true;

      auto& meta = event.metadata;
      if (key == "fileID") {
        meta.file_id = std::string(value);
      } else if (key == "Grain") {
        auto grain = parse_grain(value);
        if (!grain)
          raise(Errc::MalformedHeader,
                where + ": Grain must be F or C, got '" + std::string(value) +
                    "'");
        meta.grain = *grain;
      } else if (key == "TXDevice") {
        meta.tx_device = std::string(value);
      } else if (key == "RXDevice") {
        meta.rx_device = std::string(value);
      } else if (key == "TXPower") {
        if (value == kUnknown) {
          meta.tx_power_dbm.reset();
        } else {
          auto power = detail::parse_int(value);
          if (!power)
            raise(Errc::MalformedHeader,
                  where + ": TXPower must be an integer or UNKNOWN");
          meta.tx_power_dbm = static_cast<int>(*power);
        }
      } else if (key == "TXCarry") {
        meta.tx_carry = std::string(value);
      } else if (key == "RXCarry") {
        meta.rx_carry = std::string(value);
      } else if (key == "TXPose") {
        meta.tx_pose = std::string(value);
      } else if (key == "RXPose") {
        meta.rx_pose = std::string(value);
      }
      continue;
    }

    auto fields = detail::split(line, ',');
    if (fields.size() < 2)
      raise(Errc::MalformedLine, where + ": expected time,Channel,values");
    auto time = detail::parse_double(fields[0]);
    if (!time || !std::isfinite(*time))
      raise(Errc::MalformedLine,
            where + ": bad time '" + std::string(fields[0]) + "'");
    auto channel = parse_channel_tag(fields[1]);
    if (!channel)
      raise(Errc::UnknownChannelTag,
            where + ": '" + std::string(fields[1]) + "'");
    std::size_t arity = channel_arity(*channel);
    if (fields.size() - 2 != arity)
      raise(Errc::ArityMismatch,
            where + ": " + std::string(fields[1]) + " expects " +
                detail::format_int(static_cast<long long>(arity)) +
                " values, got " +
                detail::format_int(static_cast<long long>(fields.size() - 2)));
    SensorSample sample;
    sample.time_s = *time;
    sample.channel = *channel;
    sample.values.reserve(arity);
    for (std::size_t i = 2; i < fields.size(); ++i) {
      auto v = detail::parse_double(fields[i]);
      if (!v || !std::isfinite(*v))
        raise(Errc::MalformedLine,
              where + ": bad value '" + std::string(fields[i]) + "'");
      sample.values.push_back(*v);
    }
    if (!event.samples.empty() && sample.time_s < prev_time)
      out_of_order = true;
    prev_time = sample.time_s;
    event.samples.push_back(std::move(sample));
  }

  for (std::size_t i = 0; i < detail::kHeaderKeys.size(); ++i) {
    if (!seen[i])
      raise(Errc::MalformedHeader,
            "missing required header '" + std::string(detail::kHeaderKeys[i]) +
                "'");
  }
  if (out_of_order) {
    detail::warn(warnings, "samples out of order; re-sorted by time");
    std::stable_sort(event.samples.begin(), event.samples.end(),
                     [](const SensorSample& a, const SensorSample& b) {
                       return a.time_s < b.time_s;
                     });
  }
  bool has_bluetooth = false;
  for (const auto& sample : event.samples) {
    if (sample.channel == Channel::Bluetooth) has_bluetooth = true;
  }
  if (!has_bluetooth)
    raise(Errc::NoBluetoothSamples, "event has no Bluetooth sample");
  return event;
}

inline std::string write_event_file(const Event& event) {
  std::string out;
  const auto& meta = event.metadata;
  out += "#fileID,";
  out += meta.file_id;
  out += "\n#Grain,";
  out += grain_code(meta.grain);
  out += "\n#TXDevice,";
  out += meta.tx_device;
  out += "\n#RXDevice,";
  out += meta.rx_device;
  out += "\n#TXPower,";
  out += meta.tx_power_dbm
             ? detail::format_int(*meta.tx_power_dbm)
             : std::string(kUnknown);
  out += "\n#TXCarry,";
  out += meta.tx_carry;
  out += "\n#RXCarry,";
  out += meta.rx_carry;
  out += "\n#TXPose,";
  out += meta.tx_pose;
  out += "\n#RXPose,";
  out += meta.rx_pose;
  out += "\n";
  for (const auto& sample : event.samples) {
    out += detail::format_double(sample.time_s);
    out += ',';
    out += channel_tag(sample.channel);
    for (double v : sample.values) {
      out += ',';
      out += detail::format_double(v);
    }
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Key files

inline std::map<std::string, GroundTruthLabel> parse_key_file(
    std::string_view content) {
  std::map<std::string, GroundTruthLabel> labels;
  std::size_t line_no = 0;
  for (std::string_view line : detail::split(content, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    std::string where = "line " + detail::format_int(line_no);
    auto fields = detail::split(line, '\t');
    if (fields.size() != 3)
      raise(Errc::MalformedLine, where + ": expected file_id<TAB>F|C<TAB>distance");
    auto grain = parse_grain(fields[1]);
    if (!grain)
      raise(Errc::MalformedLine,
            where + ": grain must be F or C, got '" + std::string(fields[1]) +
                "'");
    double distance = 0.0;
    if (fields[2] == "1.2") distance = 1.2;
    else if (fields[2] == "1.8") distance = 1.8;
    else if (fields[2] == "3.0") distance = 3.0;
    else if (fields[2] == "4.5") distance = 4.5;
    else
      raise(Errc::MalformedLine,
            where + ": distance must be one of 1.2|1.8|3.0|4.5");
    if (!is_valid_label(*grain, distance))
      raise(Errc::InvalidDistanceForGrain,
            where + ": " + std::string(fields[2]) + " is not a valid " +
                (*grain == Grain::Fine ? std::string("fine") : std::string("coarse")) +
                " grain distance");
    GroundTruthLabel label;
    label.file_id = std::string(fields[0]);
    label.grain = *grain;
    label.max_distance_m = distance;
    auto [it, inserted] = labels.emplace(label.file_id, label);
    if (!inserted)
      raise(Errc::DuplicateFileId, where + ": '" + label.file_id + "'");
  }
  return labels;
}

inline std::string write_key_file(
    const std::map<std::string, GroundTruthLabel>& labels) {
  std::string out;
  for (const auto& [file_id, label] : labels) {
    out += file_id;
    out += '\t';
    out += grain_code(label.grain);
    out += '\t';
    out += label_token(label.max_distance_m);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// System output files (file_id <TAB> predicted distance in meters)

inline std::map<std::string, double> parse_system_output(
    std::string_view content) {
  std::map<std::string, double> predictions;
  std::size_t line_no = 0;
  for (std::string_view line : detail::split(content, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    std::string where = "line " + detail::format_int(line_no);
    auto fields = detail::split(line, '\t');
    if (fields.size() != 2)
      raise(Errc::MalformedLine,
            where + ": expected file_id<TAB>predicted_distance");
    auto distance = detail::parse_double(fields[1]);
    if (!distance || !std::isfinite(*distance))
      raise(Errc::MalformedLine,
            where + ": bad distance '" + std::string(fields[1]) + "'");
    auto [it, inserted] =
        predictions.emplace(std::string(fields[0]), *distance);
    if (!inserted)
      raise(Errc::DuplicateFileId, where + ": '" + std::string(fields[0]) + "'");
  }
  return predictions;
}

inline std::string write_system_output(
    const std::map<std::string, double>& predictions) {
  std::string out;
  for (const auto& [file_id, distance] : predictions) {
    out += file_id;
    out += '\t';
    out += detail::format_double(distance);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Look segmentation

// Windows are [4i, 4i+4) through the last sample's time. The trailing window
// extends past the final sample and is flagged partial.
inline std::vector<LookWindow> segment_looks(const Event& event) {
  std::vector<LookWindow> looks;
  if (event.samples.empty()) return looks;
  double last_time = event.samples.back().time_s;
  auto count = static_cast<std::size_t>(std::floor(last_time / kLookSeconds)) + 1;
  looks.reserve(count);
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < count; ++i) {
    LookWindow window;
    window.index = i;
    window.start_s = static_cast<double>(i) * kLookSeconds;
    window.end_s = window.start_s + kLookSeconds;
    window.begin = cursor;
    while (cursor < event.samples.size() &&
           event.samples[cursor].time_s < window.end_s) {
      ++cursor;
    }
    window.end = cursor;
    window.partial = window.end_s > last_time;
    looks.push_back(window);
  }
  return looks;
}

// ---------------------------------------------------------------------------
// Whole-dataset loading

struct Dataset {
  std::vector<Event> events;
  std::map<std::string, GroundTruthLabel> labels;  // may be empty (test sets)
};

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::IoFailure, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) raise(Errc::IoFailure, "cannot read " + path.string());
  return std::move(buffer).str();
}

inline void write_text_file(const std::filesystem::path& path,
                            std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(Errc::IoFailure, "cannot open " + path.string() + " for write");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) raise(Errc::IoFailure, "cannot write " + path.string());
}

// Loads every event file (sorted by filename) plus an optional key file.
// Files are parsed in parallel; warnings come back in filename order.
inline Dataset load_dataset(const std::filesystem::path& dir,
                            const std::optional<std::filesystem::path>& key_path,
                            unsigned jobs = 1, Warnings* warnings = nullptr) {
  if (!std::filesystem::is_directory(dir))
    raise(Errc::IoFailure, dir.string() + " is not a directory");
  std::vector<std::filesystem::path> paths;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() &&
        entry.path().extension() == kEventFileExtension)
      paths.push_back(entry.path());
  }
  std::sort(paths.begin(), paths.end());

  Dataset dataset;
  dataset.events.resize(paths.size());
  std::vector<Warnings> per_file(paths.size());
  detail::parallel_for(paths.size(), jobs, [&](std::size_t i) {
    dataset.events[i] = parse_event_file(read_text_file(paths[i]), &per_file[i]);
  });
  for (std::size_t i = 0; i < paths.size(); ++i) {
    for (auto& message : per_file[i]) {
      detail::warn(warnings, paths[i].filename().string() + ": " + message);
    }
  }

  std::map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < dataset.events.size(); ++i) {
    auto [it, inserted] =
        by_id.emplace(dataset.events[i].metadata.file_id, i);
    if (!inserted)
      raise(Errc::DuplicateFileId,
            "event file_id '" + dataset.events[i].metadata.file_id +
                "' appears in " + paths[it->second].filename().string() +
                " and " + paths[i].filename().string());
  }

  if (key_path) {
    dataset.labels = parse_key_file(read_text_file(*key_path));
    for (const auto& [file_id, label] : dataset.labels) {
      auto it = by_id.find(file_id);
      if (it == by_id.end())
        raise(Errc::InvalidDataset,
              "label refers to missing event '" + file_id + "'");
      if (dataset.events[it->second].metadata.grain != label.grain)
        raise(Errc::InvalidDataset,
              "grain mismatch between key and event '" + file_id + "'");
    }
  }
  return dataset;
}

}  // namespace tc4tl
