// Acceptance gate for the proximity pipeline. Each numbered check prints one
// [PASS]/[FAIL] line; the process exits nonzero if any check fails. All
// tolerances are pinned here, next to the values they guard.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "tc4tl/model_io.hpp"
#include "tc4tl/scorer.hpp"
#include "tc4tl/synth.hpp"

using namespace tc4tl;

namespace {

std::vector<std::string> g_errors;

void expect(bool ok, const std::string& what) {
  if (!ok) g_errors.push_back(what);
}

std::string fmt(double value) { return detail::format_double(value); }

Dataset to_dataset(const std::vector<GeneratedEvent>& generated) {
  Dataset ds;
  for (const auto& g : generated) {
    ds.events.push_back(g.event);
    ds.labels[g.label.file_id] = g.label;
  }
  return ds;
}

std::filesystem::path fresh_dir(const std::string& leaf) {
  auto dir = std::filesystem::temp_directory_path() / "tc4tl_accept" / leaf;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// ---------------------------------------------------------------------------
// C1: the pinned reference score tables recompute through compute_ndcf.

struct ReferenceRow {
  const char* subset;
  double p_miss;
  double p_fa;
  double ndcf;  // printed at two decimals in the reference
};

struct ReferenceRun {
  const char* name;
  std::array<ReferenceRow, 4> rows;
  double total_ndcf;
};

void check_c1() {
  const std::array<ReferenceRun, 3> runs = {{
      {"global constants",
       {{{"fine 1.2", 0.29, 0.45, 0.74},
         {"fine 1.8", 0.22, 0.62, 0.84},
         {"fine 3.0", 0.14, 0.64, 0.78},
         {"coarse 1.8", 0.25, 0.63, 0.88}}},
       3.24},
      {"calibrated constants",
       {{{"fine 1.2", 0.56, 0.10, 0.66},
         {"fine 1.8", 0.47, 0.15, 0.62},
         {"fine 3.0", 0.29, 0.25, 0.54},
         {"coarse 1.8", 0.53, 0.11, 0.64}}},
       2.46},
      {"network classifier",
       {{{"fine 1.2", 0.43, 0.19, 0.61},
         {"fine 1.8", 0.33, 0.14, 0.48},
         {"fine 3.0", 0.35, 0.20, 0.55},
         {"coarse 1.8", 0.30, 0.14, 0.44}}},
       2.08},
  }};
  // The reference prints two decimals, so recomputed rows can differ by up
  // to half a unit in the last place on each input; 0.01 total.
  const double tol = 0.01 + 1e-12;
  for (const auto& run : runs) {
    double total = 0.0;
    for (const auto& row : run.rows) {
      double ndcf = compute_ndcf(row.p_miss, row.p_fa);
      expect(std::fabs(ndcf - row.ndcf) <= tol,
             std::string(run.name) + " " + row.subset + ": ndcf " +
                 fmt(ndcf) + " vs reference " + fmt(row.ndcf));
      total += ndcf;
    }
    expect(std::fabs(total - run.total_ndcf) <= tol,
           std::string(run.name) + ": total " + fmt(total) +
               " vs reference " + fmt(run.total_ndcf));
  }
}

// ---------------------------------------------------------------------------
// C2: the distance estimate against analytic cases and a long-double oracle.

void check_c2() {
  // Exponent 0: rssi equals the 1 m reference.
  double at_ref = estimate_distance({-54.0, 2.1, Grain::Fine}, -54.0);
  expect(std::fabs(at_ref - 1.0) <= 1e-12,
         "estimate at the 1 m reference: " + fmt(at_ref));
  // Exponent 1: 20 dB below the reference at n = 2.
  double decade = estimate_distance({-50.0, 2.0, Grain::Fine}, -70.0);
  expect(std::fabs(decade - 10.0) <= 1e-11,
         "estimate one decade out: " + fmt(decade));

  Rng rng(20260819);
  std::size_t bad = 0;
  for (int i = 0; i < 1000; ++i) {
    double tx = rng.uniform(-80.0, -30.0);
    double n = rng.uniform(2.0, 4.0);
    double rssi = rng.uniform(-100.0, -30.0);
    double got = estimate_distance({tx, n, Grain::Fine}, rssi);
    long double want =
        powl(10.0L, (static_cast<long double>(tx) - rssi) / (10.0L * n));
    long double rel = fabsl(static_cast<long double>(got) - want) / want;
    if (rel > 1e-10L) ++bad;
  }
  expect(bad == 0, std::to_string(bad) +
                       " of 1000 random triples off the high-precision"
                       " oracle by more than 1e-10 relative");
}

// ---------------------------------------------------------------------------
// C3: grid calibration recovery, exact at zero noise and bounded at 4 dB.

void check_c3() {
  // Zero noise, grid-aligned truth, 200 events per grain, two full looks
  // per event so no mean lands on a pow() knife edge.
  SynthSpec clean;
  clean.n_events = 400;
  clean.grain_mix = 0.5;
  clean.looks_per_event = {2, 2};
  clean.tx_true_dbm = -50.0;
  clean.n_true = 2.5;
  clean.noise_sigma_db = 0.0;
  clean.seed = 402;
  Dataset ds = to_dataset(generate_events(clean));

  auto fine = calibrate_grid(ds, Grain::Fine, {}, 1);
  expect(fine.best.tx_ref_dbm == -50.0 && fine.best.n_exponent == 2.5,
         "fine recovery: got (" + fmt(fine.best.tx_ref_dbm) + ", " +
             fmt(fine.best.n_exponent) + "), want exactly (-50, 2.5)");
  expect(fine.objective == 0.0,
         "fine objective at the optimum: " + fmt(fine.objective));

  // Coarse grain has a single decision boundary, so every cell separating
  // the two labels scores zero and the argmin is a plateau, not a point.
  // Recovery here means the truth cell sits on that zero plateau and the
  // returned cell scores exactly zero too.
  auto coarse = calibrate_grid(ds, Grain::Coarse, {}, 1);
  expect(coarse.objective == 0.0,
         "coarse objective at the optimum: " + fmt(coarse.objective));
  GridSpec grid;
  std::size_t truth_at = 30 * grid.n_count() + 5;  // tx -50, n 2.5
  expect(truth_at < coarse.surface.size() &&
             coarse.surface[truth_at].tx_ref_dbm == -50.0 &&
             coarse.surface[truth_at].n_exponent == 2.5,
         "surface layout: truth cell not at the expected index");
  expect(coarse.surface[truth_at].objective == 0.0,
         "coarse truth cell objective: " +
             fmt(coarse.surface[truth_at].objective));

  // 4 dB of noise, 1000 events, recovery within +/-2 dBm and +/-0.3.
  SynthSpec noisy;
  noisy.n_events = 1000;
  noisy.grain_mix = 0.0;
  noisy.looks_per_event = {2, 3};
  noisy.tx_true_dbm = -54.0;
  noisy.n_true = 2.1;
  noisy.noise_sigma_db = 4.0;
  noisy.seed = 312;
  Dataset noisy_ds = to_dataset(generate_events(noisy));
  auto recovered = calibrate_grid(noisy_ds, Grain::Fine, {}, 1);
  expect(std::fabs(recovered.best.tx_ref_dbm - (-54.0)) <= 2.0,
         "noisy tx recovery: " + fmt(recovered.best.tx_ref_dbm) +
             " vs truth -54 (tolerance 2)");
  expect(std::fabs(recovered.best.n_exponent - 2.1) <= 0.3,
         "noisy n recovery: " + fmt(recovered.best.n_exponent) +
             " vs truth 2.1 (tolerance 0.3)");
}

// ---------------------------------------------------------------------------
// C4: analytic network gradients against central finite differences, and
// softmax normalization in bulk.

void check_c4() {
  const double step = 1e-5;
  const double tol = 1e-4;
  for (int trial = 0; trial < 20; ++trial) {
    std::size_t input = 2 + static_cast<std::size_t>(trial % 5);
    std::vector<std::size_t> hidden =
        trial % 2 ? std::vector<std::size_t>{4, 3}
                  : std::vector<std::size_t>{3 + static_cast<std::size_t>(
                                                     trial % 4)};
    LossKind loss = trial % 3 ? LossKind::CrossEntropy : LossKind::MseSoftmax;
    MlpModel model =
        make_mlp(input, hidden, 4, 9100 + static_cast<std::uint64_t>(trial));

    Rng rng(7500 + static_cast<std::uint64_t>(trial));
    std::size_t n_rows = 3 + static_cast<std::size_t>(trial % 3);
    std::vector<std::vector<double>> rows(n_rows);
    std::vector<std::size_t> targets(n_rows);
    for (std::size_t r = 0; r < n_rows; ++r) {
      for (std::size_t i = 0; i < input; ++i)
        rows[r].push_back(rng.uniform(-2.0, 2.0));
      targets[r] = r % 4;
    }

    MlpGradients grads = mlp_batch_gradients(model, rows, targets, loss);
    std::size_t checked = 0, off = 0;
    auto probe = [&](std::size_t layer, bool is_bias, std::size_t i,
                     double analytic) {
      MlpModel bumped = model;
      auto& cell = is_bias ? bumped.layers[layer].bias[i]
                           : bumped.layers[layer].weights[i];
      cell += step;
      double up = mlp_batch_loss(bumped, rows, targets, loss);
      cell -= 2.0 * step;
      double down = mlp_batch_loss(bumped, rows, targets, loss);
      double fd = (up - down) / (2.0 * step);
      if (std::fabs(analytic) < 1e-10 && std::fabs(fd) < 1e-10) return;
      ++checked;
      double gap =
          std::fabs(analytic - fd) /
          std::max({std::fabs(analytic), std::fabs(fd), 1e-8});
      if (gap > tol) ++off;
    };
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
      for (std::size_t i = 0; i < model.layers[l].weights.size(); ++i)
        probe(l, false, i, grads.weights[l][i]);
      for (std::size_t i = 0; i < model.layers[l].bias.size(); ++i)
        probe(l, true, i, grads.bias[l][i]);
    }
    expect(off == 0, "trial " + std::to_string(trial) + ": " +
                         std::to_string(off) + " of " +
                         std::to_string(checked) +
                         " gradients off finite differences");
  }

  MlpModel model = make_mlp(5, {16, 16}, 4, 12345);
  Rng rng(777);
  std::size_t off_sum = 0;
  for (int i = 0; i < 10000; ++i) {
    std::vector<double> x(5);
    for (auto& v : x) v = rng.uniform(-5.0, 5.0);
    auto probs = forward(model, x);
    double sum = probs[0] + probs[1] + probs[2] + probs[3];
    if (std::fabs(sum - 1.0) > 1e-6) ++off_sum;
  }
  expect(off_sum == 0,
         std::to_string(off_sum) +
             " of 10000 softmax outputs off unit sum by more than 1e-6");
}

// ---------------------------------------------------------------------------
// C5: depth-1 splits against exhaustive enumeration, bit for bit.

double oracle_best_gain(const std::vector<FeatureRow>& rows,
                        const std::vector<double>& targets,
                        const std::vector<FeatureSpec>& schema) {
  double best = 0.0;
  bool found = false;
  auto offer = [&](double gain) {
    if (!found || gain > best) {
      best = gain;
      found = true;
    }
  };
  for (std::size_t f = 0; f < schema.size(); ++f) {
    if (!schema[f].categorical) {
      std::vector<std::pair<double, double>> ordered;
      for (std::size_t r = 0; r < rows.size(); ++r)
        ordered.push_back({rows[r][f], targets[r]});
      std::sort(ordered.begin(), ordered.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      double sum_total = 0.0;
      for (const auto& [value, target] : ordered) sum_total += target;
      double sum_left = 0.0;
      for (std::size_t m = 1; m < ordered.size(); ++m) {
        sum_left += ordered[m - 1].second;
        if (ordered[m - 1].first == ordered[m].first) continue;
        offer(detail::split_gain(sum_left, m, sum_total - sum_left,
                                 ordered.size() - m));
      }
    } else {
      std::vector<std::uint32_t> levels;
      std::vector<double> level_sum;
      std::vector<std::size_t> level_count;
      for (std::size_t r = 0; r < rows.size(); ++r) {
        auto level = static_cast<std::uint32_t>(rows[r][f]);
        std::size_t at = levels.size();
        for (std::size_t i = 0; i < levels.size(); ++i)
          if (levels[i] == level) at = i;
        if (at == levels.size()) {
          levels.push_back(level);
          level_sum.push_back(targets[r]);
          level_count.push_back(1);
        } else {
          level_sum[at] += targets[r];
          level_count[at] += 1;
        }
      }
      std::size_t p = levels.size();
      if (p < 2) continue;
      for (std::uint32_t mask = 1; mask + 1 < (1u << p); ++mask) {
        double sum_left = 0.0, sum_right = 0.0;
        std::size_t n_left = 0, n_right = 0;
        for (std::size_t i = 0; i < p; ++i) {
          if ((mask >> i) & 1u) {
            sum_left += level_sum[i];
            n_left += level_count[i];
          } else {
            sum_right += level_sum[i];
            n_right += level_count[i];
          }
        }
        offer(detail::split_gain(sum_left, n_left, sum_right, n_right));
      }
    }
  }
  return found ? best : 0.0;
}

void check_c5() {
  GbmConfig config;
  config.max_depth = 1;
  Rng data_rng(2605);
  for (int trial = 0; trial < 60; ++trial) {
    std::size_t n = static_cast<std::size_t>(data_rng.uniform_int(4, 12));
    int n_levels = 2 + trial % 7;  // 2..8 categorical levels
    std::vector<FeatureSpec> schema = {{"num", false, 0},
                                       {"cat", true, n_levels}};
    std::vector<FeatureRow> rows;
    std::vector<double> targets;
    std::vector<double> hessians(n, 1.0);
    for (std::size_t r = 0; r < n; ++r) {
      // Dyadic targets keep every partial sum exact, so the implementation
      // and the oracle see bit-identical split_gain inputs.
      rows.push_back({static_cast<double>(data_rng.uniform_int(0, 8)),
                      static_cast<double>(data_rng.below(
                          static_cast<std::uint64_t>(n_levels)))});
      targets.push_back(static_cast<double>(data_rng.uniform_int(-64, 64)) /
                        8.0);
    }

    double expected = oracle_best_gain(rows, targets, schema);
    Rng tree_rng(1);
    Tree tree = fit_tree(rows, targets, hessians, schema, config, tree_rng);

    if (expected <= detail::kMinSplitGain) {
      expect(tree.nodes.size() == 1,
             "trial " + std::to_string(trial) +
                 ": split below the gain floor was not refused");
      continue;
    }
    if (tree.nodes.size() != 3) {
      expect(false, "trial " + std::to_string(trial) +
                        ": expected a single split, got " +
                        std::to_string(tree.nodes.size()) + " nodes");
      continue;
    }
    const auto& root = tree.nodes[0];
    double sum_left = 0.0, sum_right = 0.0;
    std::size_t n_left = 0, n_right = 0;
    for (std::size_t r = 0; r < n; ++r) {
      double x = rows[r][static_cast<std::size_t>(root.feature)];
      bool go_left =
          root.categorical
              ? (root.category_mask >> static_cast<std::uint32_t>(x)) & 1u
              : x < root.threshold;
      if (go_left) {
        sum_left += targets[r];
        ++n_left;
      } else {
        sum_right += targets[r];
        ++n_right;
      }
    }
    double got = detail::split_gain(sum_left, n_left, sum_right, n_right);
    expect(got == expected, "trial " + std::to_string(trial) +
                                ": chosen gain " + fmt(got) +
                                " != exhaustive best " + fmt(expected));
  }
}

// ---------------------------------------------------------------------------
// C6: the decision thresholds, strictly greater-than at both boundaries.

void check_c6() {
  // This logit lands on 0.56 exactly in double arithmetic.
  const double logit_56 = 0.24116205681688824;
  expect(detail::sigmoid(logit_56) == 0.56,
         "pinned logit no longer maps to exactly 0.56");

  GbmModel binary;
  binary.task = GbmTask::Binary;
  binary.base_score = logit_56;
  expect(predict_binary(binary, {}) == 4.5,
         "probability exactly 0.56 must not be a contact");
  binary.base_score = logit_56 + 1e-9;
  expect(predict_binary(binary, {}) == 1.8,
         "probability just above 0.56 must be a contact");
  binary.base_score = -2.0;
  expect(predict_binary(binary, {}) == 4.5, "low probability must be 4.5");
  binary.base_score = 2.0;
  expect(predict_binary(binary, {}) == 1.8, "high probability must be 1.8");

  // This far-class logit lands on 0.28 exactly with flat other classes.
  const double logit_28_flat = 0.15415067982725836;
  expect(detail::softmax4({0.0, 0.0, 0.0, logit_28_flat})[3] == 0.28,
         "pinned flat logit no longer maps to exactly 0.28");

  // And this pair lands on {0.36, 0.18, 0.18, 0.28}: the far class sits at
  // the override boundary while another class holds the argmax, so the
  // boundary behavior is observable in the predicted label.
  const double ln2 = 0.6931471805599453;
  const double logit_28_skew = 0.44183275227903923;
  GbmModel multi;
  multi.task = GbmTask::MultiClass4;
  multi.base_scores = {ln2, 0.0, 0.0, logit_28_skew};
  auto probs = predict_multiclass_probs(multi, {});
  expect(probs[3] == 0.28 && probs[0] > probs[3],
         "pinned skew logits no longer hit the 0.28 boundary under argmax 0");
  expect(predict_multiclass(multi, {}) == 1.2,
         "far-class probability exactly 0.28 must not trigger the override");
  multi.base_scores[3] = logit_28_skew + 1e-9;
  expect(predict_multiclass(multi, {}) == 4.5,
         "far-class probability above 0.28 must trigger the override");

  // Dominant classes map to their own labels when the override is quiet.
  for (std::size_t k = 0; k < 4; ++k) {
    GbmModel dominant;
    dominant.task = GbmTask::MultiClass4;
    dominant.base_scores = {};
    dominant.base_scores[k] = 9.0;
    double want = dominant.class_labels[k];
    double got = predict_multiclass(dominant, {});
    expect(got == want, "dominant class " + std::to_string(k) +
                            " predicted " + fmt(got) + ", want " + fmt(want));
  }
}

// ---------------------------------------------------------------------------
// C7: trained classifiers beat the calibrated formula, which beats the
// single global constants, on the default synthetic benchmark.

void check_c7() {
  SynthSpec train_spec;
  train_spec.n_events = 2000;
  train_spec.seed = 13000;
  SynthSpec test_spec;
  test_spec.n_events = 500;
  test_spec.seed = 13001;
  Dataset train = to_dataset(generate_events(train_spec));
  Dataset test = to_dataset(generate_events(test_spec));

  auto total_of = [&](const std::map<std::string, double>& preds) {
    return score_run(preds, test.labels).total_ndcf;
  };

  double global = total_of(formula_predict(global_params_by_grain(), test));

  ParamsByGrain calibrated;
  calibrated.fine = calibrate_grid(train, Grain::Fine, {}, 4).best;
  calibrated.coarse = calibrate_grid(train, Grain::Coarse, {}, 4).best;
  double formula = total_of(formula_predict(calibrated, test));

  TrainBundleOptions mlp_options;
  mlp_options.kind = ModelKind::Mlp;
  mlp_options.mlp.epochs = 40;
  mlp_options.mlp.loss = LossKind::CrossEntropy;
  mlp_options.jobs = 4;
  double mlp = total_of(
      bundle_predict(train_bundle(train, mlp_options).bundle, test));

  TrainBundleOptions gbm_options;
  gbm_options.kind = ModelKind::Gbm;
  gbm_options.jobs = 4;
  double gbm = total_of(
      bundle_predict(train_bundle(train, gbm_options).bundle, test));

  expect(formula < global, "calibrated formula " + fmt(formula) +
                               " not below global constants " + fmt(global));
  expect(mlp < formula, "network total " + fmt(mlp) +
                            " not below calibrated formula " + fmt(formula));
  expect(gbm < formula, "tree total " + fmt(gbm) +
                            " not below calibrated formula " + fmt(formula));
}

// ---------------------------------------------------------------------------
// C8: byte-identical artifacts across reruns of every stage.

void check_c8() {
  SynthSpec train_spec;
  train_spec.n_events = 80;
  train_spec.seed = 88;
  SynthSpec test_spec;
  test_spec.n_events = 40;
  test_spec.seed = 89;

  // Stage 1: dataset files.
  auto dir_a = fresh_dir("rerun_a");
  auto dir_b = fresh_dir("rerun_b");
  generate_dataset(train_spec, dir_a);
  generate_dataset(train_spec, dir_b);
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir_a))
    files.push_back(entry.path().filename());
  std::sort(files.begin(), files.end());
  expect(files.size() == train_spec.n_events + 2,
         "dataset run wrote " + std::to_string(files.size()) + " files");
  std::size_t different = 0;
  for (const auto& name : files) {
    if (read_text_file(dir_a / name) != read_text_file(dir_b / name))
      ++different;
  }
  expect(different == 0,
         std::to_string(different) + " dataset files differ between reruns");

  Dataset train = to_dataset(generate_events(train_spec));
  Dataset test = to_dataset(generate_events(test_spec));

  // Stage 2: models, both kinds.
  TrainBundleOptions mlp_options;
  mlp_options.kind = ModelKind::Mlp;
  TrainBundleOptions gbm_options;
  gbm_options.kind = ModelKind::Gbm;
  gbm_options.gbm.ntrees = 20;
  auto mlp_a = train_bundle(train, mlp_options).bundle;
  auto mlp_b = train_bundle(train, mlp_options).bundle;
  auto gbm_a = train_bundle(train, gbm_options).bundle;
  auto gbm_b = train_bundle(train, gbm_options).bundle;
  expect(write_bundle(mlp_a) == write_bundle(mlp_b),
         "network model bytes differ between training reruns");
  expect(write_bundle(gbm_a) == write_bundle(gbm_b),
         "tree model bytes differ between training reruns");

  // Stage 3: predictions, through independently trained bundles.
  std::string preds_a = write_system_output(bundle_predict(gbm_a, test));
  std::string preds_b = write_system_output(bundle_predict(gbm_b, test));
  expect(preds_a == preds_b, "prediction bytes differ between reruns");

  // Stage 4: score reports.
  std::string report_a =
      write_score_report(score_run(parse_system_output(preds_a), test.labels));
  std::string report_b =
      write_score_report(score_run(parse_system_output(preds_b), test.labels));
  expect(report_a == report_b, "score report bytes differ between reruns");
}

// ---------------------------------------------------------------------------
// C9: write-parse-write byte identity over the golden corpus.

void check_c9() {
  SynthSpec spec;
  spec.n_events = 24;
  spec.seed = 9001;
  auto corpus = generate_events(spec);
  expect(corpus.size() >= 20, "corpus holds fewer than 20 files");

  std::set<Channel> channels_seen;
  bool unknown_power = false;
  bool unknown_device = false;
  bool partial_look = false;
  std::size_t unstable = 0;
  for (const auto& generated : corpus) {
    const Event& event = generated.event;
    std::string text = write_event_file(event);
    Warnings warnings;
    Event reparsed = parse_event_file(text, &warnings);
    if (write_event_file(reparsed) != text || !warnings.empty()) ++unstable;

    for (const auto& sample : event.samples) channels_seen.insert(sample.channel);
    unknown_power |= !event.metadata.tx_power_dbm.has_value();
    unknown_device |= event.metadata.tx_device == kUnknown ||
                      event.metadata.rx_device == kUnknown;
    for (const auto& look : segment_looks(event)) partial_look |= look.partial;
  }
  expect(unstable == 0,
         std::to_string(unstable) + " corpus files not byte-stable");
  expect(channels_seen.size() == kChannelCount,
         "corpus covers " + std::to_string(channels_seen.size()) + " of " +
             std::to_string(kChannelCount) + " channels");
  expect(unknown_power, "corpus lacks an unknown transmit power");
  expect(unknown_device, "corpus lacks an unknown device");
  expect(partial_look, "corpus lacks a partial look");
}

// ---------------------------------------------------------------------------

struct Criterion {
  const char* name;
  const char* label;
  std::function<void()> body;
  double budget_s;  // 0 disables the runtime check
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"C1", "reference score tables recompute through the cost function",
       check_c1, 1.0},
      {"C2", "distance estimate matches analytic cases and a 1e-10 oracle",
       check_c2, 0.0},
      {"C3", "grid calibration recovers generator constants", check_c3,
       120.0},
      {"C4", "network gradients match finite differences; softmax stays"
             " normalized",
       check_c4, 0.0},
      {"C5", "depth-1 splits equal exhaustive enumeration exactly", check_c5,
       0.0},
      {"C6", "decision thresholds are strict at the 0.56 and 0.28 boundaries",
       check_c6, 0.0},
      {"C7", "trained models beat the calibrated formula, which beats global"
             " constants",
       check_c7, 300.0},
      {"C8", "rerunning every stage yields byte-identical artifacts",
       check_c8, 0.0},
      {"C9", "write-parse-write is byte-identical over the golden corpus",
       check_c9, 0.0},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    g_errors.clear();
    auto start = std::chrono::steady_clock::now();
    try {
      criterion.body();
    } catch (const std::exception& error) {
      g_errors.push_back(std::string("unexpected exception: ") + error.what());
    }
    double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    if (criterion.budget_s > 0.0 && elapsed > criterion.budget_s) {
      g_errors.push_back("runtime " + fmt(elapsed) + " s exceeds budget " +
                         fmt(criterion.budget_s) + " s");
    }
    if (g_errors.empty()) {
      std::printf("[PASS] %s %s (%.2f s)\n", criterion.name, criterion.label,
                  elapsed);
    } else {
      ++failures;
      std::printf("[FAIL] %s %s (%.2f s)\n", criterion.name, criterion.label,
                  elapsed);
      for (const auto& message : g_errors)
        std::printf("       - %s\n", message.c_str());
    }
  }
  if (failures > 0) {
    std::printf("%d of %zu acceptance checks failed\n", failures,
                criteria.size());
    return 1;
  }
  std::printf("all %zu acceptance checks passed\n", criteria.size());
  return 0;
}
