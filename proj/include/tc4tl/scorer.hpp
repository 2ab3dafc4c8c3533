#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tc4tl/detail/text.hpp"
#include "tc4tl/error.hpp"
#include "tc4tl/event.hpp"
#include "tc4tl/ingest.hpp"

namespace tc4tl {

struct ScoreConfig {
  double w_miss = 1.0;
  double w_fa = 1.0;
  std::vector<double> fine_subsets{1.2, 1.8, 3.0};
  std::vector<double> coarse_subsets{1.8};
};

// Contact iff the distance is at or inside the subset distance. The label set
// includes exact subset distances, so the boundary counts as contact.
inline bool decide_tc4tl(double distance_m, double subset_d) noexcept {
  return distance_m <= subset_d;
}

struct RefHyp {
  double ref = 0.0;
  double hyp = 0.0;
};

inline double compute_pmiss(std::span<const RefHyp> pairs, double subset_d) {
  std::size_t positives = 0;
  std::size_t missed = 0;
  for (const auto& pair : pairs) {
    if (!decide_tc4tl(pair.ref, subset_d)) continue;
    ++positives;
    if (!decide_tc4tl(pair.hyp, subset_d)) ++missed;
  }
  if (positives == 0)
    raise(Errc::NoPositives,
          "no reference contact at D=" + detail::format_double(subset_d));
  return static_cast<double>(missed) / static_cast<double>(positives);
}

inline double compute_pfa(std::span<const RefHyp> pairs, double subset_d) {
  std::size_t negatives = 0;
  std::size_t flagged = 0;
  for (const auto& pair : pairs) {
    if (decide_tc4tl(pair.ref, subset_d)) continue;
    ++negatives;
    if (decide_tc4tl(pair.hyp, subset_d)) ++flagged;
  }
  if (negatives == 0)
    raise(Errc::NoNegatives,
          "no reference non-contact at D=" + detail::format_double(subset_d));
  return static_cast<double>(flagged) / static_cast<double>(negatives);
}

inline double compute_ndcf(double p_miss, double p_fa,
                           const ScoreConfig& config = {}) {
  return (config.w_miss * p_miss + config.w_fa * p_fa) /
         std::min(config.w_miss, config.w_fa);
}

struct ScoreRow {
  Grain grain = Grain::Fine;
  double subset_d = 0.0;
  double p_miss = 0.0;
  double p_fa = 0.0;
  double ndcf = 0.0;
  bool defined = true;  // false when a side of the count is empty
};

struct ScoreReport {
  std::vector<ScoreRow> rows;
  double total_p_miss = 0.0;
  double total_p_fa = 0.0;
  double total_ndcf = 0.0;
  double average_ndcf = 0.0;  // total over defined rows / defined row count
};

// Scores a run against a key. Row order is fixed: fine subsets ascending,
// then coarse. Undefined rows stay in the report but are excluded from the
// totals, with a warning.
inline ScoreReport score_run(const std::map<std::string, double>& system_output,
                             const std::map<std::string, GroundTruthLabel>& key,
                             const ScoreConfig& config = {},
                             Warnings* warnings = nullptr) {
  std::vector<RefHyp> fine_pairs;
  std::vector<RefHyp> coarse_pairs;
  for (const auto& [file_id, label] : key) {
    auto it = system_output.find(file_id);
    if (it == system_output.end())
      raise(Errc::MissingPrediction, "no prediction for '" + file_id + "'");
    auto& pairs = label.grain == Grain::Fine ? fine_pairs : coarse_pairs;
    pairs.push_back({label.max_distance_m, it->second});
  }
  for (const auto& [file_id, distance] : system_output) {
    if (!key.count(file_id))
      detail::warn(warnings,
                   "prediction for unknown file '" + file_id + "' ignored");
  }

  ScoreReport report;
  std::size_t defined_rows = 0;
  auto add_row = [&](Grain grain, std::span<const RefHyp> pairs, double d) {
    ScoreRow row;
    row.grain = grain;
    row.subset_d = d;
    try {
      row.p_miss = compute_pmiss(pairs, d);
      row.p_fa = compute_pfa(pairs, d);
      row.ndcf = compute_ndcf(row.p_miss, row.p_fa, config);
    } catch (const Error&) {
      row.defined = false;
      detail::warn(warnings,
                   std::string(grain == Grain::Fine ? "fine" : "coarse") +
                       " D=" + detail::format_double(d) +
                       " has an empty reference class; row excluded from totals");
    }
    if (row.defined) {
      report.total_p_miss += row.p_miss;
      report.total_p_fa += row.p_fa;
      report.total_ndcf += row.ndcf;
      ++defined_rows;
    }
    report.rows.push_back(row);
  };

  if (!fine_pairs.empty()) {
    for (double d : config.fine_subsets) add_row(Grain::Fine, fine_pairs, d);
  }
  if (!coarse_pairs.empty()) {
    for (double d : config.coarse_subsets)
      add_row(Grain::Coarse, coarse_pairs, d);
  }
  if (defined_rows > 0)
    report.average_ndcf =
        report.total_ndcf / static_cast<double>(defined_rows);
  return report;
}

namespace detail {

inline std::string fixed2(double value) {
  long long scaled = static_cast<long long>(
      value < 0 ? value * 100.0 - 0.5 : value * 100.0 + 0.5);
  std::string digits = format_int(scaled < 0 ? -scaled : scaled);
  while (digits.size() < 3) digits.insert(digits.begin(), '0');
  std::string out = scaled < 0 ? "-" : "";
  out += digits.substr(0, digits.size() - 2);
  out += '.';
  out += digits.substr(digits.size() - 2);
  return out;
}

inline void pad_to(std::string& line, std::size_t width) {
  while (line.size() < width) line.push_back(' ');
}

}  // namespace detail

// Human-readable table: Subset, D, P_miss, P_fa, nDCF plus total_error and
// average rows, two decimal places.
inline std::string format_score_table(const ScoreReport& report) {
  constexpr std::size_t kSubsetWidth = 14;
  constexpr std::size_t kColWidth = 8;
  std::string out;
  {
    std::string line = "Subset";
    detail::pad_to(line, kSubsetWidth);
    line += "D";
    detail::pad_to(line, kSubsetWidth + kColWidth);
    line += "P_miss";
    detail::pad_to(line, kSubsetWidth + 2 * kColWidth);
    line += "P_fa";
    detail::pad_to(line, kSubsetWidth + 3 * kColWidth);
    line += "nDCF";
    out += line;
    out += '\n';
  }
  for (const auto& row : report.rows) {
    std::string line =
        row.grain == Grain::Fine ? "fine_grain" : "coarse_grain";
    detail::pad_to(line, kSubsetWidth);
    line += detail::fixed2(row.subset_d);
    detail::pad_to(line, kSubsetWidth + kColWidth);
    if (row.defined) {
      line += detail::fixed2(row.p_miss);
      detail::pad_to(line, kSubsetWidth + 2 * kColWidth);
      line += detail::fixed2(row.p_fa);
      detail::pad_to(line, kSubsetWidth + 3 * kColWidth);
      line += detail::fixed2(row.ndcf);
    } else {
      line += "undefined";
    }
    out += line;
    out += '\n';
  }
  {
    std::string line = "total_error";
    detail::pad_to(line, kSubsetWidth + 3 * kColWidth);
    line += detail::fixed2(report.total_ndcf);
    out += line;
    out += '\n';
  }
  {
    std::string line = "average_nDCF";
    detail::pad_to(line, kSubsetWidth + 3 * kColWidth);
    line += detail::fixed2(report.average_ndcf);
    out += line;
    out += '\n';
  }
  return out;
}

// Machine-readable key=value form at full precision.
inline std::string write_score_report(const ScoreReport& report) {
  std::string out;
  for (const auto& row : report.rows) {
    std::string prefix =
        std::string(row.grain == Grain::Fine ? "fine" : "coarse") + "." +
        std::string(label_token(row.subset_d));
    if (!row.defined) {
      out += prefix + ".defined=0\n";
      continue;
    }
    out += prefix + ".p_miss=" + detail::format_double(row.p_miss) + "\n";
    out += prefix + ".p_fa=" + detail::format_double(row.p_fa) + "\n";
    out += prefix + ".ndcf=" + detail::format_double(row.ndcf) + "\n";
  }
  out += "total_p_miss=" + detail::format_double(report.total_p_miss) + "\n";
  out += "total_p_fa=" + detail::format_double(report.total_p_fa) + "\n";
  out += "total_ndcf=" + detail::format_double(report.total_ndcf) + "\n";
  out += "average_ndcf=" + detail::format_double(report.average_ndcf) + "\n";
  return out;
}

}  // namespace tc4tl
