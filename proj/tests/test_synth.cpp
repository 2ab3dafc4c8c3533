#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

#include "tc4tl/ingest.hpp"
#include "tc4tl/synth.hpp"

using namespace tc4tl;

namespace {

std::filesystem::path fresh_dir(const std::string& leaf) {
  auto dir = std::filesystem::temp_directory_path() / "tc4tl_tests" / leaf;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

SynthSpec small_spec() {
  SynthSpec spec;
  spec.n_events = 24;
  spec.grain_mix = 0.5;
  spec.looks_per_event = {2, 4};
  spec.samples_per_look = {5, 10};
  spec.seed = 7101;
  return spec;
}

}  // namespace

TEST_CASE("generator specs are validated up front") {
  auto bad = [](auto&& tweak) {
    SynthSpec spec = small_spec();
    tweak(spec);
    CHECK_THROWS_AS(generate_events(spec), Error);
  };
  bad([](SynthSpec& s) { s.grain_mix = -0.1; });
  bad([](SynthSpec& s) { s.grain_mix = 1.1; });
  bad([](SynthSpec& s) { s.noise_sigma_db = -1.0; });
  bad([](SynthSpec& s) { s.looks_per_event = {0, 3}; });
  bad([](SynthSpec& s) { s.looks_per_event = {4, 2}; });
  bad([](SynthSpec& s) { s.samples_per_look = {0, 3}; });
}

TEST_CASE("file ids are fixed-width and ordinal") {
  CHECK(synth_file_id(0) == "ev00000");
  CHECK(synth_file_id(7) == "ev00007");
  CHECK(synth_file_id(12345) == "ev12345");
  auto events = generate_events(small_spec());
  REQUIRE(events.size() == 24);
  for (std::size_t i = 0; i < events.size(); ++i) {
    CHECK(events[i].event.metadata.file_id == synth_file_id(i));
    CHECK(events[i].label.file_id == events[i].event.metadata.file_id);
  }
}

TEST_CASE("label planning apportions counts exactly") {
  SECTION("integral shares need no remainder step") {
    SynthSpec spec = small_spec();
    spec.n_events = 8;
    spec.grain_mix = 0.0;
    spec.label_weights = {{1.2, 2.0}, {1.8, 1.0}, {3.0, 1.0}, {4.5, 0.0}};
    std::map<double, std::size_t> counts;
    for (const auto& label : plan_labels(spec)) counts[label.max_distance_m]++;
    CHECK(counts[1.2] == 4);
    CHECK(counts[1.8] == 2);
    CHECK(counts[3.0] == 2);
    CHECK(counts.count(4.5) == 0);
  }

  SECTION("leftover slots go to the largest remainders in label order") {
    SynthSpec spec = small_spec();
    spec.n_events = 20;
    spec.grain_mix = 0.5;
    // Fine: 10 events over four equal weights -> 2.5 each; the two extra
    // slots land on the two smallest labels.
    std::map<std::pair<Grain, double>, std::size_t> counts;
    for (const auto& label : plan_labels(spec))
      counts[{label.grain, label.max_distance_m}]++;
    CHECK(counts[{Grain::Fine, 1.2}] == 3);
    CHECK(counts[{Grain::Fine, 1.8}] == 3);
    CHECK(counts[{Grain::Fine, 3.0}] == 2);
    CHECK(counts[{Grain::Fine, 4.5}] == 2);
    CHECK(counts[{Grain::Coarse, 1.8}] == 5);
    CHECK(counts[{Grain::Coarse, 4.5}] == 5);
  }

  SECTION("the coarse share rounds half away from zero") {
    SynthSpec spec = small_spec();
    spec.n_events = 10;
    spec.grain_mix = 0.25;  // 2.5 coarse events -> 3
    std::size_t n_coarse = 0;
    for (const auto& label : plan_labels(spec))
      n_coarse += label.grain == Grain::Coarse ? 1 : 0;
    CHECK(n_coarse == 3);
  }

  SECTION("weights covering no label of a planned grain raise") {
    SynthSpec spec = small_spec();
    spec.n_events = 4;
    spec.grain_mix = 1.0;
    spec.label_weights = {{3.0, 1.0}};  // fine-only label, coarse events
    CHECK_THROWS_AS(plan_labels(spec), Error);
  }
}

TEST_CASE("labels inconsistent with the grain are rejected") {
  SynthSpec spec = small_spec();
  Rng rng(1);
  try {
    generate_event(spec, {"x", Grain::Coarse, 1.2}, rng);
    FAIL("expected InconsistentLabel");
  } catch (const Error& error) {
    CHECK(error.code() == Errc::InconsistentLabel);
  }
}

TEST_CASE("every event pins one look at the labeled distance") {
  auto events = generate_events(small_spec());
  for (const auto& generated : events) {
    double max_d = generated.label.max_distance_m;
    double low = std::max(kMinLookDistanceM,
                          max_d - look_variation(generated.label.grain));
    REQUIRE(!generated.look_distances.empty());
    double seen_max = 0.0;
    for (double d : generated.look_distances) {
      CHECK(d >= low);
      CHECK(d <= max_d);
      seen_max = std::max(seen_max, d);
    }
    CHECK(seen_max == max_d);  // the pinned look, exactly
    CHECK(generated.look_distances.size() >= 2);
    CHECK(generated.look_distances.size() <= 4);
  }

  SECTION("coarse contacts never dip below the distance floor") {
    SynthSpec spec = small_spec();
    spec.grain_mix = 1.0;
    spec.label_weights = {{1.8, 1.0}};
    for (const auto& generated : generate_events(spec)) {
      for (double d : generated.look_distances) CHECK(d >= 0.3);
    }
  }
}

TEST_CASE("each look of each event carries the full channel set") {
  auto events = generate_events(small_spec());
  for (const auto& generated : events) {
    std::size_t n_looks = generated.look_distances.size();
    // Per look: Bluetooth sample count within the configured range, every
    // other channel exactly once.
    std::vector<std::map<Channel, std::size_t>> per_look(n_looks);
    for (const auto& sample : generated.event.samples) {
      auto look = static_cast<std::size_t>(sample.time_s / kLookSeconds);
      REQUIRE(look < n_looks);
      per_look[look][sample.channel]++;
      if (sample.channel == Channel::MagneticField) {
        double flag = sample.values[3];
        CHECK(flag == std::floor(flag));
        CHECK(flag >= 0.0);
        CHECK(flag <= 3.0);
      }
      if (sample.channel == Channel::Gravity) {
        CHECK(sample.values[2] < -9.0);
      }
    }
    for (const auto& counts : per_look) {
      REQUIRE(counts.size() == kChannelCount);
      for (const auto& [channel, count] : counts) {
        if (channel == Channel::Bluetooth) {
          CHECK(count >= 5);
          CHECK(count <= 10);
        } else {
          CHECK(count == 1);
        }
      }
    }

    auto looks = segment_looks(generated.event);
    CHECK(looks.size() == n_looks);
    CHECK(looks.back().partial);

    CHECK(std::is_sorted(generated.event.samples.begin(),
                         generated.event.samples.end(),
                         [](const SensorSample& a, const SensorSample& b) {
                           return a.time_s < b.time_s;
                         }));
  }
}

TEST_CASE("rssi noise has the configured scale around the path loss curve") {
  SynthSpec spec;
  spec.n_events = 60;
  spec.grain_mix = 0.5;
  spec.looks_per_event = {2, 4};
  spec.samples_per_look = {10, 20};
  spec.noise_sigma_db = 4.0;
  spec.seed = 515;
  auto events = generate_events(spec);

  double sum = 0.0, sum_sq = 0.0;
  std::size_t n = 0;
  for (const auto& generated : events) {
    for (const auto& sample : generated.event.samples) {
      if (sample.channel != Channel::Bluetooth) continue;
      auto look = static_cast<std::size_t>(sample.time_s / kLookSeconds);
      double d = generated.look_distances[look];
      double clean = spec.tx_true_dbm - 10.0 * spec.n_true * std::log10(d);
      double residual = sample.values[0] - clean;
      sum += residual;
      sum_sq += residual * residual;
      ++n;
    }
  }
  REQUIRE(n > 2000);
  double mean = sum / static_cast<double>(n);
  double stddev = std::sqrt(sum_sq / static_cast<double>(n) - mean * mean);
  CHECK_THAT(mean, Catch::Matchers::WithinAbs(0.0, 0.5));
  CHECK_THAT(stddev, Catch::Matchers::WithinAbs(4.0, 0.5));
}

TEST_CASE("event streams are independent of the batch") {
  SynthSpec spec = small_spec();
  auto events = generate_events(spec);
  auto labels = plan_labels(spec);
  REQUIRE(labels.size() == events.size());
  // Regenerating one event from its own stream reproduces the batch copy.
  std::size_t i = 13;
  Rng rng = Rng::for_stream(spec.seed, i);
  auto lone = generate_event(spec, labels[i], rng);
  CHECK(write_event_file(lone.event) == write_event_file(events[i].event));
  CHECK(lone.look_distances == events[i].look_distances);
}

TEST_CASE("dataset generation is reproducible byte for byte") {
  SynthSpec spec = small_spec();
  auto dir_a = fresh_dir("synth_a");
  auto dir_b = fresh_dir("synth_b");
  generate_dataset(spec, dir_a);
  generate_dataset(spec, dir_b);

  CHECK(read_text_file(dir_a / "key.tsv") == read_text_file(dir_b / "key.tsv"));
  CHECK(read_text_file(dir_a / "looks_debug.tsv") ==
        read_text_file(dir_b / "looks_debug.tsv"));
  for (std::size_t i = 0; i < spec.n_events; ++i) {
    auto name = synth_file_id(i) + std::string(kEventFileExtension);
    CHECK(read_text_file(dir_a / name) == read_text_file(dir_b / name));
  }

  SECTION("and loads back as a labeled dataset") {
    auto dataset = load_dataset(dir_a, dir_a / "key.tsv");
    REQUIRE(dataset.events.size() == spec.n_events);
    CHECK(dataset.labels.size() == spec.n_events);
    for (const auto& event : dataset.events) {
      const auto& label = dataset.labels.at(event.metadata.file_id);
      CHECK(label.grain == event.metadata.grain);
      CHECK(is_valid_label(label.grain, label.max_distance_m));
    }
  }

  SECTION("the look debug table lists one line per event") {
    auto debug = read_text_file(dir_a / "looks_debug.tsv");
    auto lines = detail::split(debug, '\n');
    REQUIRE(lines.size() == spec.n_events + 1);  // trailing newline
    CHECK(lines.back().empty());
    auto first = detail::split(lines[0], '\t');
    CHECK(first[0] == "ev00000");
    CHECK(first.size() >= 3);  // id plus at least two looks
  }
}
