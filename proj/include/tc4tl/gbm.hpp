#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "tc4tl/detail/text.hpp"
#include "tc4tl/error.hpp"
#include "tc4tl/random.hpp"

namespace tc4tl {

enum class GbmTask { Binary, MultiClass4 };

struct GbmConfig {
  int ntrees = 50;
  int max_depth = 5;
  double col_sample_rate = 1.0;  // fraction of features per tree
  double sample_rate = 1.0;      // fraction of rows per tree, no replacement
  double learning_rate = 0.1;
  int early_stopping_rounds = 5;
  double early_stopping_tolerance = 1e-3;
  double validation_fraction = 0.2;
  std::uint64_t seed = 1;
};

struct FeatureSpec {
  std::string name;
  bool categorical = false;
  int n_levels = 0;  // categorical only
};

using FeatureRow = std::vector<double>;  // categorical cells hold level codes

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  bool categorical = false;
  double threshold = 0.0;           // numeric: x < threshold goes left
  std::uint32_t category_mask = 0;  // categorical: level bit set goes left
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf output
};

struct Tree {
  std::vector<TreeNode> nodes;  // node 0 is the root

  double predict(const FeatureRow& row) const {
    int at = 0;
    while (nodes[static_cast<std::size_t>(at)].feature >= 0) {
      const auto& node = nodes[static_cast<std::size_t>(at)];
      double x = row[static_cast<std::size_t>(node.feature)];
      bool go_left;
      if (node.categorical) {
        auto level = static_cast<std::uint32_t>(x);
        go_left = (node.category_mask >> level) & 1u;
      } else {
        go_left = x < node.threshold;
      }
      at = go_left ? node.left : node.right;
    }
    return nodes[static_cast<std::size_t>(at)].value;
  }
};

struct GbmModel {
  GbmTask task = GbmTask::Binary;
  std::vector<FeatureSpec> schema;
  // Binary: one tree per round. Multiclass: four per round, class-minor
  // (trees[round * 4 + k] belongs to class k).
  std::vector<Tree> trees;
  double base_score = 0.0;              // binary log-odds
  std::array<double, 4> base_scores{};  // multiclass log-priors
  double learning_rate = 0.1;
  double binary_threshold = 0.56;
  double multiclass_45_threshold = 0.28;
  std::array<double, 4> class_labels = {1.2, 1.8, 3.0, 4.5};
  std::size_t kept_rounds = 0;
  GbmConfig config;
};

inline constexpr double kBinaryPositiveLabel = 1.8;  // the contact class
inline constexpr double kBinaryNegativeLabel = 4.5;

// ---------------------------------------------------------------------------
// Tree fitting

namespace detail {

inline constexpr double kMinSplitGain = 1e-12;
inline constexpr double kLeafEpsilon = 1e-6;

struct SplitChoice {
  bool found = false;
  int feature = -1;
  bool categorical = false;
  double threshold = 0.0;
  std::uint32_t mask = 0;
  double gain = 0.0;
  std::vector<std::size_t> left_rows;
  std::vector<std::size_t> right_rows;
};

// Variance-reduction gain of a candidate partition of the node's targets.
inline double split_gain(double sum_left, std::size_t n_left,
                         double sum_right, std::size_t n_right) {
  double sum_parent = sum_left + sum_right;
  auto n_parent = static_cast<double>(n_left + n_right);
  return sum_left * sum_left / static_cast<double>(n_left) +
         sum_right * sum_right / static_cast<double>(n_right) -
         sum_parent * sum_parent / n_parent;
}

struct TreeBuilder {
  const std::vector<FeatureRow>& rows;
  const std::vector<double>& targets;   // negative gradients
  const std::vector<double>& hessians;  // curvature per row
  const std::vector<FeatureSpec>& schema;
  const std::vector<int>& features;  // sampled feature ids, ascending
  int max_depth;
  Tree tree;

  double leaf_value(const std::vector<std::size_t>& node_rows) const {
    double sum_t = 0.0;
    double sum_h = 0.0;
    for (auto r : node_rows) {
      sum_t += targets[r];
      sum_h += hessians[r];
    }
    return sum_t / (sum_h + kLeafEpsilon);
  }

  // Best split at one node. Candidates are examined in schema order with
  // thresholds ascending (numeric) and mean-ordered prefixes ascending
  // (categorical); strict improvement keeps the earliest candidate on ties.
  SplitChoice best_split(const std::vector<std::size_t>& node_rows) const {
    SplitChoice best;
    for (int f : features) {
      const auto& spec = schema[static_cast<std::size_t>(f)];
      if (spec.categorical) {
        scan_categorical(f, node_rows, best);
      } else {
        scan_numeric(f, node_rows, best);
      }
    }
    return best;
  }

  void scan_numeric(int f, const std::vector<std::size_t>& node_rows,
                    SplitChoice& best) const {
    std::vector<std::pair<double, std::size_t>> ordered;
    ordered.reserve(node_rows.size());
    double sum_total = 0.0;
    for (auto r : node_rows) {
      ordered.push_back({rows[r][static_cast<std::size_t>(f)], r});
      sum_total += targets[r];
    }
    std::sort(ordered.begin(), ordered.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    double sum_left = 0.0;
    for (std::size_t m = 1; m < ordered.size(); ++m) {
      sum_left += targets[ordered[m - 1].second];
      if (ordered[m - 1].first == ordered[m].first) continue;
      double gain = split_gain(sum_left, m, sum_total - sum_left,
                               ordered.size() - m);
      if ((!best.found && gain > kMinSplitGain) ||
          (best.found && gain > best.gain)) {
        best.found = true;
        best.feature = f;
        best.categorical = false;
        best.threshold = (ordered[m - 1].first + ordered[m].first) / 2.0;
        best.mask = 0;
        best.gain = gain;
        best.left_rows.clear();
        best.right_rows.clear();
        for (std::size_t i = 0; i < ordered.size(); ++i) {
          (i < m ? best.left_rows : best.right_rows)
              .push_back(ordered[i].second);
        }
      }
    }
  }

  void scan_categorical(int f, const std::vector<std::size_t>& node_rows,
                        SplitChoice& best) const {
    struct LevelStats {
      std::uint32_t level = 0;
      double sum = 0.0;
      std::size_t count = 0;
      std::size_t first_row = 0;  // stable under level re-coding
    };
    std::vector<LevelStats> stats;
    for (auto r : node_rows) {
      auto level =
          static_cast<std::uint32_t>(rows[r][static_cast<std::size_t>(f)]);
      auto it = std::find_if(stats.begin(), stats.end(), [&](const auto& s) {
        return s.level == level;
      });
      if (it == stats.end()) {
        stats.push_back({level, targets[r], 1, r});
      } else {
        it->sum += targets[r];
        it->count += 1;
        it->first_row = std::min(it->first_row, r);
      }
    }
    if (stats.size() < 2) return;
    std::sort(stats.begin(), stats.end(), [](const auto& a, const auto& b) {
      double mean_a = a.sum / static_cast<double>(a.count);
      double mean_b = b.sum / static_cast<double>(b.count);
      if (mean_a != mean_b) return mean_a < mean_b;
      return a.first_row < b.first_row;
    });
    double sum_total = 0.0;
    std::size_t n_total = 0;
    for (const auto& s : stats) {
      sum_total += s.sum;
      n_total += s.count;
    }
    double sum_left = 0.0;
    std::size_t n_left = 0;
    std::uint32_t mask = 0;
    for (std::size_t t = 0; t + 1 < stats.size(); ++t) {
      sum_left += stats[t].sum;
      n_left += stats[t].count;
      mask |= 1u << stats[t].level;
      double gain = split_gain(sum_left, n_left, sum_total - sum_left,
                               n_total - n_left);
      if ((!best.found && gain > kMinSplitGain) ||
          (best.found && gain > best.gain)) {
        best.found = true;
        best.feature = f;
        best.categorical = true;
        best.threshold = 0.0;
        best.mask = mask;
        best.gain = gain;
        best.left_rows.clear();
        best.right_rows.clear();
        for (auto r : node_rows) {
          auto level = static_cast<std::uint32_t>(
              rows[r][static_cast<std::size_t>(f)]);
          ((mask >> level) & 1u ? best.left_rows : best.right_rows)
              .push_back(r);
        }
      }
    }
  }

  int build(const std::vector<std::size_t>& node_rows, int depth) {
    int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    if (depth >= max_depth || node_rows.size() < 2) {
      tree.nodes[static_cast<std::size_t>(id)].value = leaf_value(node_rows);
      return id;
    }
    SplitChoice split = best_split(node_rows);
    if (!split.found) {
      tree.nodes[static_cast<std::size_t>(id)].value = leaf_value(node_rows);
      return id;
    }
    // Children keep ascending row order so sums are reproducible.
    std::sort(split.left_rows.begin(), split.left_rows.end());
    std::sort(split.right_rows.begin(), split.right_rows.end());
    int left = build(split.left_rows, depth + 1);
    int right = build(split.right_rows, depth + 1);
    auto& node = tree.nodes[static_cast<std::size_t>(id)];
    node.feature = split.feature;
    node.categorical = split.categorical;
    node.threshold = split.threshold;
    node.category_mask = split.mask;
    node.left = left;
    node.right = right;
    return id;
  }
};

}  // namespace detail

// Greedy depth-limited regression tree over the given targets (negative
// gradients), with Newton leaf values from the hessians. Row and column
// sampling draw from rng only when the corresponding rate is below 1.
inline Tree fit_tree(const std::vector<FeatureRow>& rows,
                     const std::vector<double>& targets,
                     const std::vector<double>& hessians,
                     const std::vector<FeatureSpec>& schema,
                     const GbmConfig& config, Rng& rng) {
  if (rows.empty()) raise(Errc::EmptyTrainingSet, "tree over zero rows");

  std::vector<std::size_t> row_ids(rows.size());
  for (std::size_t i = 0; i < row_ids.size(); ++i) row_ids[i] = i;
  if (config.sample_rate < 1.0) {
    auto keep = static_cast<std::size_t>(std::llround(
        config.sample_rate * static_cast<double>(rows.size())));
    keep = std::max<std::size_t>(1, std::min(keep, rows.size()));
    rng.shuffle(row_ids);
    row_ids.resize(keep);
    std::sort(row_ids.begin(), row_ids.end());
  }

  std::vector<int> feature_ids(schema.size());
  for (std::size_t i = 0; i < schema.size(); ++i)
    feature_ids[i] = static_cast<int>(i);
  if (config.col_sample_rate < 1.0) {
    auto keep = static_cast<std::size_t>(std::llround(
        config.col_sample_rate * static_cast<double>(schema.size())));
    keep = std::max<std::size_t>(1, std::min(keep, schema.size()));
    rng.shuffle(feature_ids);
    feature_ids.resize(keep);
    std::sort(feature_ids.begin(), feature_ids.end());
  }

  detail::TreeBuilder builder{rows,        targets,
                              hessians,    schema,
                              feature_ids, std::max(1, config.max_depth),
                              Tree{}};
  builder.build(row_ids, 0);
  return std::move(builder.tree);
}

// ---------------------------------------------------------------------------
// Metrics

// Rank-based AUC with tie-averaged ranks; requires both classes present.
inline double compute_auc(const std::vector<double>& scores,
                          const std::vector<int>& positives) {
  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });
  std::vector<double> ranks(scores.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() &&
           scores[order[j + 1]] == scores[order[i]]) {
      ++j;
    }
    double avg_rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 +
                      1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg_rank;
    i = j + 1;
  }
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    if (positives[k]) {
      rank_sum += ranks[k];
      ++n_pos;
    }
  }
  std::size_t n_neg = scores.size() - n_pos;
  if (n_pos == 0 || n_neg == 0)
    raise(Errc::SingleClassValidation, "AUC needs both classes");
  double np = static_cast<double>(n_pos);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

// ---------------------------------------------------------------------------
// Boosting

struct GbmTrainResult {
  GbmModel model;
  std::vector<double> metric_log;  // per-round validation metric
  double best_metric = 0.0;
  std::size_t n_train = 0;
  std::size_t n_val = 0;
  std::vector<std::size_t> val_indices;  // into the caller's row order
};

namespace detail {

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

inline std::array<double, 4> softmax4(const std::array<double, 4>& z) {
  double max = std::max(std::max(z[0], z[1]), std::max(z[2], z[3]));
  std::array<double, 4> out{};
  double sum = 0.0;
  for (std::size_t k = 0; k < 4; ++k) {
    out[k] = std::exp(z[k] - max);
    sum += out[k];
  }
  for (auto& v : out) v /= sum;
  return out;
}

// Argmax with ties toward the larger distance (higher index).
inline std::size_t argmax_larger(const std::array<double, 4>& probs) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < 4; ++k) {
    if (probs[k] >= probs[best]) best = k;
  }
  return best;
}

}  // namespace detail

inline GbmTrainResult train_gbm(const std::vector<FeatureRow>& rows,
                                const std::vector<double>& labels,
                                GbmTask task,
                                const std::vector<FeatureSpec>& schema,
                                const GbmConfig& config = {}) {
  if (rows.empty()) raise(Errc::EmptyTrainingSet, "no training rows");
  if (rows.size() != labels.size())
    raise(Errc::ShapeMismatch, "rows and labels differ in length");

  GbmTrainResult result;
  auto& model = result.model;
  model.task = task;
  model.schema = schema;
  model.learning_rate = config.learning_rate;
  model.config = config;

  // Class indices per row.
  std::size_t n_classes = task == GbmTask::Binary ? 2 : 4;
  std::vector<std::size_t> y(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (task == GbmTask::Binary) {
      if (labels[r] == kBinaryPositiveLabel) {
        y[r] = 1;
      } else if (labels[r] == kBinaryNegativeLabel) {
        y[r] = 0;
      } else {
        raise(Errc::TaskMismatch,
              "binary task saw label " + detail::format_double(labels[r]));
      }
    } else {
      bool found = false;
      for (std::size_t k = 0; k < model.class_labels.size(); ++k) {
        if (labels[r] == model.class_labels[k]) {
          y[r] = k;
          found = true;
        }
      }
      if (!found)
        raise(Errc::TaskMismatch,
              "multiclass task saw label " + detail::format_double(labels[r]));
    }
  }

  Rng rng = Rng::for_stream(config.seed, 0);
  std::vector<std::size_t> order(rows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  auto n_val = static_cast<std::size_t>(std::llround(
      config.validation_fraction * static_cast<double>(rows.size())));
  if (n_val >= rows.size()) n_val = rows.size() - 1;
  std::size_t n_train = rows.size() - n_val;
  std::vector<std::size_t> train_idx(order.begin(), order.begin() + n_train);
  std::vector<std::size_t> val_idx(order.begin() + n_train, order.end());
  result.n_train = n_train;
  result.n_val = n_val;
  result.val_indices = val_idx;

  std::vector<std::size_t> class_counts(n_classes, 0);
  for (auto r : train_idx) class_counts[y[r]] += 1;
  std::size_t classes_present = 0;
  for (auto c : class_counts) classes_present += c > 0 ? 1 : 0;
  if (classes_present < 2)
    raise(Errc::SingleClassTraining,
          "training split holds a single class");

  std::vector<FeatureRow> train_rows;
  train_rows.reserve(n_train);
  for (auto r : train_idx) train_rows.push_back(rows[r]);

  bool track_metric = n_val > 0;
  bool metric_higher_better = task == GbmTask::Binary;
  double best_metric =
      metric_higher_better ? -std::numeric_limits<double>::infinity()
                           : std::numeric_limits<double>::infinity();
  double stop_reference = best_metric;
  std::size_t best_round = 0;
  int rounds_since_gain = 0;

  if (task == GbmTask::Binary) {
    double pos = static_cast<double>(class_counts[1]);
    double neg = static_cast<double>(class_counts[0]);
    model.base_score = std::log(pos / neg);
    std::vector<double> f_train(n_train, model.base_score);
    std::vector<double> f_val(n_val, model.base_score);

    std::vector<double> targets(n_train);
    std::vector<double> hessians(n_train);
    for (int round = 0; round < config.ntrees; ++round) {
      for (std::size_t i = 0; i < n_train; ++i) {
        double p = detail::sigmoid(f_train[i]);
        targets[i] = static_cast<double>(y[train_idx[i]]) - p;
        hessians[i] = p * (1.0 - p);
      }
      Tree tree = fit_tree(train_rows, targets, hessians, schema, config, rng);
      for (std::size_t i = 0; i < n_train; ++i)
        f_train[i] += config.learning_rate * tree.predict(train_rows[i]);
      for (std::size_t i = 0; i < n_val; ++i)
        f_val[i] += config.learning_rate * tree.predict(rows[val_idx[i]]);
      model.trees.push_back(std::move(tree));

      if (!track_metric) continue;
      std::vector<int> val_pos(n_val);
      for (std::size_t i = 0; i < n_val; ++i)
        val_pos[i] = y[val_idx[i]] == 1 ? 1 : 0;
      double metric = compute_auc(f_val, val_pos);
      result.metric_log.push_back(metric);
      // Argbest of the metric log; ties keep the later, better-cooked round.
      if (metric >= best_metric) {
        best_metric = metric;
        best_round = static_cast<std::size_t>(round) + 1;
      }
      if (metric > stop_reference + config.early_stopping_tolerance) {
        stop_reference = metric;
        rounds_since_gain = 0;
      } else {
        ++rounds_since_gain;
        if (config.early_stopping_rounds > 0 &&
            rounds_since_gain >= config.early_stopping_rounds)
          break;
      }
    }
    if (track_metric) {
      model.trees.resize(best_round);
      result.best_metric = best_metric;
    } else {
      result.best_metric = 0.0;
    }
    model.kept_rounds = model.trees.size();
  } else {
    constexpr std::size_t K = 4;
    double total = static_cast<double>(n_train);
    for (std::size_t k = 0; k < K; ++k) {
      // Additive smoothing keeps empty-class priors finite.
      model.base_scores[k] =
          std::log((static_cast<double>(class_counts[k]) + 0.5) /
                   (total + 0.5 * static_cast<double>(K)));
    }
    std::vector<std::array<double, 4>> f_train(n_train, model.base_scores);
    std::vector<std::array<double, 4>> f_val(n_val, model.base_scores);

    std::vector<double> targets(n_train);
    std::vector<double> hessians(n_train);
    for (int round = 0; round < config.ntrees; ++round) {
      std::vector<std::array<double, 4>> probs(n_train);
      for (std::size_t i = 0; i < n_train; ++i)
        probs[i] = detail::softmax4(f_train[i]);
      std::array<Tree, K> round_trees;
      for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t i = 0; i < n_train; ++i) {
          double target = y[train_idx[i]] == k ? 1.0 : 0.0;
          targets[i] = target - probs[i][k];
          hessians[i] = probs[i][k] * (1.0 - probs[i][k]);
        }
        Tree tree =
            fit_tree(train_rows, targets, hessians, schema, config, rng);
        // Friedman's multiclass leaf scale.
        for (auto& node : tree.nodes) {
          if (node.feature < 0)
            node.value *= static_cast<double>(K - 1) / static_cast<double>(K);
        }
        round_trees[k] = std::move(tree);
      }
      for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t i = 0; i < n_train; ++i)
          f_train[i][k] +=
              config.learning_rate * round_trees[k].predict(train_rows[i]);
        for (std::size_t i = 0; i < n_val; ++i)
          f_val[i][k] +=
              config.learning_rate * round_trees[k].predict(rows[val_idx[i]]);
        model.trees.push_back(std::move(round_trees[k]));
      }

      if (!track_metric) continue;
      std::array<std::size_t, K> seen{};
      std::array<std::size_t, K> wrong{};
      for (std::size_t i = 0; i < n_val; ++i) {
        auto p = detail::softmax4(f_val[i]);
        std::size_t predicted = detail::argmax_larger(p);
        std::size_t actual = y[val_idx[i]];
        seen[actual] += 1;
        if (predicted != actual) wrong[actual] += 1;
      }
      double error_sum = 0.0;
      std::size_t class_rows = 0;
      for (std::size_t k = 0; k < K; ++k) {
        if (seen[k] == 0) continue;
        error_sum += static_cast<double>(wrong[k]) /
                     static_cast<double>(seen[k]);
        ++class_rows;
      }
      if (class_rows == 0)
        raise(Errc::SingleClassValidation, "validation split is empty");
      double metric = error_sum / static_cast<double>(class_rows);
      result.metric_log.push_back(metric);
      if (metric <= best_metric) {
        best_metric = metric;
        best_round = static_cast<std::size_t>(round) + 1;
      }
      if (metric < stop_reference - config.early_stopping_tolerance) {
        stop_reference = metric;
        rounds_since_gain = 0;
      } else {
        ++rounds_since_gain;
        if (config.early_stopping_rounds > 0 &&
            rounds_since_gain >= config.early_stopping_rounds)
          break;
      }
    }
    if (track_metric) {
      model.trees.resize(best_round * K);
      result.best_metric = best_metric;
    }
    model.kept_rounds = model.trees.size() / K;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Prediction

inline double predict_binary_prob(const GbmModel& model,
                                  const FeatureRow& row) {
  if (model.task != GbmTask::Binary)
    raise(Errc::TaskMismatch, "model is not a binary classifier");
  double f = model.base_score;
  for (const auto& tree : model.trees)
    f += model.learning_rate * tree.predict(row);
  return detail::sigmoid(f);
}

// Probability above the threshold means contact at 1.8 m; at or below it,
// 4.5 m. The boundary itself is deliberately non-contact.
inline double predict_binary(const GbmModel& model, const FeatureRow& row) {
  return predict_binary_prob(model, row) > model.binary_threshold
             ? kBinaryPositiveLabel
             : kBinaryNegativeLabel;
}

inline std::array<double, 4> predict_multiclass_probs(const GbmModel& model,
                                                      const FeatureRow& row) {
  if (model.task != GbmTask::MultiClass4)
    raise(Errc::TaskMismatch, "model is not a multiclass classifier");
  std::array<double, 4> f = model.base_scores;
  for (std::size_t t = 0; t < model.trees.size(); ++t) {
    f[t % 4] += model.learning_rate * model.trees[t].predict(row);
  }
  return detail::softmax4(f);
}

// The far class wins outright above its override threshold; otherwise the
// most probable class, ties toward the larger distance.
inline double predict_multiclass(const GbmModel& model, const FeatureRow& row) {
  auto probs = predict_multiclass_probs(model, row);
  if (probs[3] > model.multiclass_45_threshold) return model.class_labels[3];
  return model.class_labels[detail::argmax_larger(probs)];
}

// ---------------------------------------------------------------------------
// Threshold tuning

// Scans the distinct predicted probabilities as thresholds under the rule
// p >= t, maximizing f1 of the contact class; ties prefer the smaller
// threshold.
inline double tune_binary_threshold(const GbmModel& model,
                                    const std::vector<FeatureRow>& rows,
                                    const std::vector<double>& labels) {
  if (model.task != GbmTask::Binary)
    raise(Errc::TaskMismatch, "threshold tuning needs a binary model");
  std::size_t n_pos = 0, n_neg = 0;
  std::vector<double> probs(rows.size());
  std::vector<int> is_pos(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    probs[r] = predict_binary_prob(model, rows[r]);
    is_pos[r] = labels[r] == kBinaryPositiveLabel ? 1 : 0;
    (is_pos[r] ? n_pos : n_neg) += 1;
  }
  if (n_pos == 0 || n_neg == 0)
    raise(Errc::SingleClassValidation,
          "threshold tuning needs both classes");

  std::vector<double> candidates = probs;
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()),
                   candidates.end());

  double best_threshold = candidates.front();
  double best_f1 = -1.0;
  for (double t : candidates) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      bool predicted_pos = probs[r] >= t;
      if (predicted_pos && is_pos[r]) ++tp;
      if (predicted_pos && !is_pos[r]) ++fp;
      if (!predicted_pos && is_pos[r]) ++fn;
    }
    double denom = static_cast<double>(2 * tp + fp + fn);
    double f1 = denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(tp) / denom;
    if (f1 > best_f1) {
      best_f1 = f1;
      best_threshold = t;
    }
  }
  return best_threshold;
}

// ---------------------------------------------------------------------------
// Grid search

struct GbmGrid {
  std::vector<int> ntrees{50, 100, 200};
  std::vector<int> max_depth{3, 5, 7};
  std::vector<double> col_sample_rate{0.8, 1.0};
  std::vector<double> sample_rate{0.8, 1.0};
};

struct LeaderboardEntry {
  GbmConfig config;
  double metric = 0.0;
  std::size_t kept_rounds = 0;
};

struct GbmGridResult {
  GbmConfig best_config;
  std::vector<LeaderboardEntry> leaderboard;  // sorted best-first
  GbmTrainResult final_result;                // retrained on all rows
};

// Trains every grid combination on the seeded split, ranks by the
// validation metric (grid order breaks ties), then retrains the winner on
// 100% of the rows with the winning round count and no validation split.
inline GbmGridResult grid_search_gbm(const std::vector<FeatureRow>& rows,
                                     const std::vector<double>& labels,
                                     GbmTask task,
                                     const std::vector<FeatureSpec>& schema,
                                     const GbmGrid& grid = {},
                                     const GbmConfig& base = {}) {
  if (grid.ntrees.empty() || grid.max_depth.empty() ||
      grid.col_sample_rate.empty() || grid.sample_rate.empty())
    raise(Errc::EmptyGrid, "every grid dimension needs at least one value");

  bool higher_better = task == GbmTask::Binary;
  GbmGridResult result;
  for (int ntrees : grid.ntrees) {
    for (int depth : grid.max_depth) {
      for (double csr : grid.col_sample_rate) {
        for (double sr : grid.sample_rate) {
          GbmConfig config = base;
          config.ntrees = ntrees;
          config.max_depth = depth;
          config.col_sample_rate = csr;
          config.sample_rate = sr;
          auto trained = train_gbm(rows, labels, task, schema, config);
          result.leaderboard.push_back(
              {config, trained.best_metric, trained.model.kept_rounds});
        }
      }
    }
  }
  std::stable_sort(result.leaderboard.begin(), result.leaderboard.end(),
                   [&](const LeaderboardEntry& a, const LeaderboardEntry& b) {
                     return higher_better ? a.metric > b.metric
                                          : a.metric < b.metric;
                   });
  result.best_config = result.leaderboard.front().config;

  GbmConfig final_config = result.best_config;
  final_config.ntrees =
      static_cast<int>(std::max<std::size_t>(
          1, result.leaderboard.front().kept_rounds));
  final_config.validation_fraction = 0.0;
  result.final_result = train_gbm(rows, labels, task, schema, final_config);
  return result;
}

inline std::string write_leaderboard(
    const std::vector<LeaderboardEntry>& leaderboard, GbmTask task) {
  std::string out =
      "ntrees\tmax_depth\tcol_sample_rate\tsample_rate\tkept_rounds\t";
  out += task == GbmTask::Binary ? "val_auc" : "val_mean_per_class_error";
  out += '\n';
  for (const auto& entry : leaderboard) {
    out += detail::format_int(entry.config.ntrees);
    out += '\t';
    out += detail::format_int(entry.config.max_depth);
    out += '\t';
    out += detail::format_double(entry.config.col_sample_rate);
    out += '\t';
    out += detail::format_double(entry.config.sample_rate);
    out += '\t';
    out += detail::format_int(static_cast<long long>(entry.kept_rounds));
    out += '\t';
    out += detail::format_double(entry.metric);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

inline std::string write_gbm(const GbmModel& model) {
  std::string out = "gbm\n";
  out += "task=";
  out += model.task == GbmTask::Binary ? "binary" : "multiclass4";
  out += "\nlearning_rate=" + detail::format_double(model.learning_rate);
  out += "\nbinary_threshold=" + detail::format_double(model.binary_threshold);
  out += "\nmulticlass_45_threshold=" +
         detail::format_double(model.multiclass_45_threshold);
  out += "\nbase_score=" + detail::format_double(model.base_score);
  out += "\nbase_scores=";
  for (std::size_t k = 0; k < model.base_scores.size(); ++k) {
    if (k) out += ',';
    out += detail::format_double(model.base_scores[k]);
  }
  out += "\nkept_rounds=" +
         detail::format_int(static_cast<long long>(model.kept_rounds));
  out += "\nfeatures=" +
         detail::format_int(static_cast<long long>(model.schema.size())) +
         "\n";
  for (const auto& spec : model.schema) {
    out += "feature " + spec.name + " ";
    out += spec.categorical ? "categorical" : "numeric";
    out += " " + detail::format_int(spec.n_levels) + "\n";
  }
  out += "trees=" +
         detail::format_int(static_cast<long long>(model.trees.size())) + "\n";
  for (const auto& tree : model.trees) {
    out += "tree " +
           detail::format_int(static_cast<long long>(tree.nodes.size())) +
           "\n";
    for (const auto& node : tree.nodes) {
      out += "node " + detail::format_int(node.feature) + " " +
             (node.categorical ? "1" : "0") + " " +
             detail::format_double(node.threshold) + " " +
             detail::format_int(static_cast<long long>(node.category_mask)) +
             " " + detail::format_int(node.left) + " " +
             detail::format_int(node.right) + " " +
             detail::format_double(node.value) + "\n";
    }
  }
  return out;
}

inline GbmModel parse_gbm(std::string_view content) {
  auto lines = detail::split(content, '\n');
  std::size_t cursor = 0;
  auto next_line = [&]() -> std::string_view {
    while (cursor < lines.size()) {
      std::string_view line = lines[cursor++];
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      if (!line.empty()) return line;
    }
    raise(Errc::MalformedLine, "truncated model text");
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
  auto as_int = [&](std::string_view text) {
    auto value = detail::parse_int(text);
    if (!value) raise(Errc::MalformedLine, "bad integer field");
    return *value;
  };

  if (next_line() != "gbm") raise(Errc::MalformedLine, "not a gbm model");
  GbmModel model;
  std::string_view task = expect_kv("task");
  if (task == "binary") {
    model.task = GbmTask::Binary;
  } else if (task == "multiclass4") {
    model.task = GbmTask::MultiClass4;
  } else {
    raise(Errc::MalformedLine, "unknown task");
  }
  model.learning_rate = as_double(expect_kv("learning_rate"));
  model.binary_threshold = as_double(expect_kv("binary_threshold"));
  model.multiclass_45_threshold =
      as_double(expect_kv("multiclass_45_threshold"));
  model.base_score = as_double(expect_kv("base_score"));
  auto scores = detail::split(expect_kv("base_scores"), ',');
  if (scores.size() != 4) raise(Errc::MalformedLine, "expected 4 base scores");
  for (std::size_t k = 0; k < 4; ++k)
    model.base_scores[k] = as_double(scores[k]);
  model.kept_rounds =
      static_cast<std::size_t>(as_int(expect_kv("kept_rounds")));
  long long n_features = as_int(expect_kv("features"));
  for (long long i = 0; i < n_features; ++i) {
    auto fields = detail::split(next_line(), ' ');
    if (fields.size() != 4 || fields[0] != "feature")
      raise(Errc::MalformedLine, "bad feature line");
    FeatureSpec spec;
    spec.name = std::string(fields[1]);
    if (fields[2] == "categorical") {
      spec.categorical = true;
    } else if (fields[2] != "numeric") {
      raise(Errc::MalformedLine, "bad feature kind");
    }
    spec.n_levels = static_cast<int>(as_int(fields[3]));
    model.schema.push_back(std::move(spec));
  }
  long long n_trees = as_int(expect_kv("trees"));
  for (long long t = 0; t < n_trees; ++t) {
    auto header = detail::split(next_line(), ' ');
    if (header.size() != 2 || header[0] != "tree")
      raise(Errc::MalformedLine, "bad tree header");
    long long n_nodes = as_int(header[1]);
    Tree tree;
    for (long long n = 0; n < n_nodes; ++n) {
      auto fields = detail::split(next_line(), ' ');
      if (fields.size() != 8 || fields[0] != "node")
        raise(Errc::MalformedLine, "bad node line");
      TreeNode node;
      node.feature = static_cast<int>(as_int(fields[1]));
      node.categorical = fields[2] == "1";
      node.threshold = as_double(fields[3]);
      node.category_mask = static_cast<std::uint32_t>(as_int(fields[4]));
      node.left = static_cast<int>(as_int(fields[5]));
      node.right = static_cast<int>(as_int(fields[6]));
      node.value = as_double(fields[7]);
      tree.nodes.push_back(node);
    }
    model.trees.push_back(std::move(tree));
  }
  return model;
}

}  // namespace tc4tl
