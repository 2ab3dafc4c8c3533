#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "tc4tl/detail/parallel.hpp"
#include "tc4tl/detail/text.hpp"
#include "tc4tl/error.hpp"
#include "tc4tl/event.hpp"
#include "tc4tl/ingest.hpp"
#include "tc4tl/scorer.hpp"

namespace tc4tl {

struct CalibrationParams {
  double tx_ref_dbm = -61.02;  // expected RSSI at 1 m
  double n_exponent = 2.187;   // environment decay factor
  Grain grain = Grain::Fine;
};

// Ungrained starting constants and the stock per-grain calibrations.
inline constexpr CalibrationParams kGlobalParams{-61.02, 2.187, Grain::Fine};
inline constexpr CalibrationParams kDefaultFineParams{-54.0, 2.1, Grain::Fine};
inline constexpr CalibrationParams kDefaultCoarseParams{-52.0, 2.6,
                                                        Grain::Coarse};

struct ParamsByGrain {
  CalibrationParams fine = kDefaultFineParams;
  CalibrationParams coarse = kDefaultCoarseParams;

  const CalibrationParams& for_grain(Grain grain) const {
    return grain == Grain::Fine ? fine : coarse;
  }
};

inline ParamsByGrain global_params_by_grain() {
  ParamsByGrain params;
  params.fine = kGlobalParams;
  params.fine.grain = Grain::Fine;
  params.coarse = kGlobalParams;
  params.coarse.grain = Grain::Coarse;
  return params;
}

inline double mean_rssi(const Event& event) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& sample : event.samples) {
    if (sample.channel != Channel::Bluetooth) continue;
    sum += sample.values[0];
    ++count;
  }
  if (count == 0)
    raise(Errc::NoBluetoothSamples,
          "event '" + event.metadata.file_id + "' has no Bluetooth sample");
  return sum / static_cast<double>(count);
}

// Inverse log-distance model: distance in meters from a mean RSSI.
inline double estimate_distance(const CalibrationParams& params,
                                double rssi_dbm) {
  return std::pow(10.0,
                  (params.tx_ref_dbm - rssi_dbm) / (10.0 * params.n_exponent));
}

inline std::map<std::string, double> formula_predict(
    const ParamsByGrain& params, const Dataset& dataset) {
  std::map<std::string, double> predictions;
  for (const auto& event : dataset.events) {
    const auto& cal = params.for_grain(event.metadata.grain);
    predictions[event.metadata.file_id] =
        estimate_distance(cal, mean_rssi(event));
  }
  return predictions;
}

// ---------------------------------------------------------------------------
// Grid-search calibration

struct GridSpec {
  double tx_min = -80.0;
  double tx_max = -30.0;
  double tx_step = 1.0;
  double n_min = 2.0;
  double n_max = 4.0;
  double n_step = 0.1;

  std::size_t tx_count() const {
    return static_cast<std::size_t>(
               std::floor((tx_max - tx_min) / tx_step + 1e-9)) +
           1;
  }
  std::size_t n_count() const {
    return static_cast<std::size_t>(
               std::floor((n_max - n_min) / n_step + 1e-9)) +
           1;
  }
  double tx_value(std::size_t i) const {
    return tx_min + static_cast<double>(i) * tx_step;
  }
  double n_value(std::size_t j) const {
    return n_min + static_cast<double>(j) * n_step;
  }
  void validate() const {
    if (tx_step <= 0.0 || n_step <= 0.0 || tx_max < tx_min || n_max < n_min)
      raise(Errc::DegenerateGrid,
            "grid requires positive steps and max >= min");
  }
};

struct GridCell {
  double tx_ref_dbm = 0.0;
  double n_exponent = 0.0;
  double objective = 0.0;
};

struct GridSearchResult {
  CalibrationParams best;
  double objective = 0.0;
  std::vector<GridCell> surface;  // row-major: tx outer, n inner
};

namespace detail {

// Total nDCF of the formula at one grid cell, over one grain's subsets.
// Rows with an empty reference class are skipped.
inline double grid_objective(const std::vector<RefHyp>& scratch,
                             const std::vector<double>& subsets) {
  double total = 0.0;
  for (double d : subsets) {
    std::size_t positives = 0, missed = 0, negatives = 0, flagged = 0;
    for (const auto& pair : scratch) {
      if (decide_tc4tl(pair.ref, d)) {
        ++positives;
        if (!decide_tc4tl(pair.hyp, d)) ++missed;
      } else {
        ++negatives;
        if (decide_tc4tl(pair.hyp, d)) ++flagged;
      }
    }
    if (positives == 0 || negatives == 0) continue;
    total += static_cast<double>(missed) / static_cast<double>(positives) +
             static_cast<double>(flagged) / static_cast<double>(negatives);
  }
  return total;
}

}  // namespace detail

// Exhaustive search for the (tx, n) pair minimizing total nDCF of the
// formula over the labeled events of one grain. Ties break to the largest
// tx, then the smallest n: the noiseless objective is flat on a plateau
// that extends toward smaller tx and larger n, and only this corner of the
// plateau coincides with the generating constants.
inline GridSearchResult calibrate_grid(const Dataset& train, Grain grain,
                                       const GridSpec& grid = {},
                                       unsigned jobs = 1,
                                       const ScoreConfig& config = {}) {
  grid.validate();
  std::vector<double> rssi;
  std::vector<double> refs;
  for (const auto& event : train.events) {
    if (event.metadata.grain != grain) continue;
    auto it = train.labels.find(event.metadata.file_id);
    if (it == train.labels.end()) continue;
    rssi.push_back(mean_rssi(event));
    refs.push_back(it->second.max_distance_m);
  }
  if (rssi.empty())
    raise(Errc::EmptyGrain, grain == Grain::Fine
                                ? "no labeled fine-grain events"
                                : "no labeled coarse-grain events");

  const auto& subsets =
      grain == Grain::Fine ? config.fine_subsets : config.coarse_subsets;
  std::size_t tx_count = grid.tx_count();
  std::size_t n_count = grid.n_count();

  GridSearchResult result;
  result.surface.resize(tx_count * n_count);
  detail::parallel_for(tx_count * n_count, jobs, [&](std::size_t cell) {
    std::size_t i = cell / n_count;
    std::size_t j = cell % n_count;
    CalibrationParams params{grid.tx_value(i), grid.n_value(j), grain};
    std::vector<RefHyp> pairs(rssi.size());
    for (std::size_t k = 0; k < rssi.size(); ++k) {
      pairs[k] = {refs[k], estimate_distance(params, rssi[k])};
    }
    result.surface[cell] = {params.tx_ref_dbm, params.n_exponent,
                            detail::grid_objective(pairs, subsets)};
  });

  // Deterministic reduction in canonical cell order, independent of the
  // parallel evaluation order above.
  std::size_t best_cell = 0;
  for (std::size_t cell = 1; cell < result.surface.size(); ++cell) {
    const auto& candidate = result.surface[cell];
    const auto& incumbent = result.surface[best_cell];
    bool better = candidate.objective < incumbent.objective;
    if (!better && candidate.objective == incumbent.objective) {
      better = candidate.tx_ref_dbm > incumbent.tx_ref_dbm ||
               (candidate.tx_ref_dbm == incumbent.tx_ref_dbm &&
                candidate.n_exponent < incumbent.n_exponent);
    }
    if (better) best_cell = cell;
  }
  result.best = {result.surface[best_cell].tx_ref_dbm,
                 result.surface[best_cell].n_exponent, grain};
  result.objective = result.surface[best_cell].objective;
  return result;
}

// ---------------------------------------------------------------------------
// Calibration persistence (one grain per file)

inline std::string write_calibration(const CalibrationParams& params,
                                     double objective) {
  std::string out;
  out += "grain=";
  out += grain_code(params.grain);
  out += "\ntx_ref_dbm=" + detail::format_double(params.tx_ref_dbm);
  out += "\nn_exponent=" + detail::format_double(params.n_exponent);
  out += "\nobjective=" + detail::format_double(objective);
  out += "\n";
  return out;
}

inline std::pair<CalibrationParams, double> parse_calibration(
    std::string_view content) {
  CalibrationParams params;
  double objective = 0.0;
  bool saw_grain = false, saw_tx = false, saw_n = false;
  for (std::string_view line : detail::split(content, '\n')) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos)
      raise(Errc::MalformedLine, "calibration line lacks '='");
    std::string_view key = line.substr(0, eq);
    std::string_view value = line.substr(eq + 1);
    if (key == "grain") {
      auto grain = parse_grain(value);
      if (!grain) raise(Errc::MalformedLine, "bad calibration grain");
      params.grain = *grain;
      saw_grain = true;
    } else if (key == "tx_ref_dbm" || key == "n_exponent" ||
               key == "objective") {
      auto parsed = detail::parse_double(value);
      if (!parsed)
        raise(Errc::MalformedLine,
              "bad calibration value for '" + std::string(key) + "'");
      if (key == "tx_ref_dbm") {
        params.tx_ref_dbm = *parsed;
        saw_tx = true;
      } else if (key == "n_exponent") {
        params.n_exponent = *parsed;
        saw_n = true;
      } else {
        objective = *parsed;
      }
    }
  }
  if (!saw_grain || !saw_tx || !saw_n)
    raise(Errc::MalformedLine, "calibration file missing required keys");
  return {params, objective};
}

}  // namespace tc4tl
