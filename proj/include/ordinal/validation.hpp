#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ordinal/metrics.hpp"
#include "ordinal/network.hpp"
#include "ordinal/outcome.hpp"

namespace ordinal {

// One train/test split of a repeated cross-validation design.
struct PartitionPlan {
    int repeat = 0; // 0-based
    int fold = 0;   // 0-based
    std::vector<std::string> train_ids;
    std::vector<std::string> test_ids;
};

// Repeated stratified k-fold partitioning.  Within every repeat each class is
// shuffled and split into folds whose per-class sizes differ by at most one;
// the folds receiving a remainder patient rotate across classes so overall
// fold sizes stay balanced.  Plans are ordered repeat-major.
// Throws TooFewPerClass when any class has fewer members than `folds`.
std::vector<PartitionPlan> stratified_repeated_kfold(const std::vector<std::string>& ids,
                                                     const std::vector<int>& labels, int repeats,
                                                     int folds, std::uint64_t seed);

// Single stratified split (e.g. tuning-validation carve-out).  Per-class
// validation counts follow the largest-remainder rule for the requested
// fraction; at least one member of every class stays in the first part.
// Returns {remainder_ids, held_out_ids}.
std::pair<std::vector<std::string>, std::vector<std::string>> stratified_shuffle_split(
    const std::vector<std::string>& ids, const std::vector<int>& labels, double fraction,
    std::uint64_t seed);

// One pooled out-of-fold prediction.
struct PooledPrediction {
    std::string patient;
    int repeat = 0;
    ThresholdProfile profile;
    int label = 0;
};

// All out-of-fold predictions of one model configuration across a repeated
// cross-validation run; each patient appears once per repeat.
struct PredictionPool {
    std::vector<PooledPrediction> entries;

    PredictionSet to_set() const;
    // unique patient ids in first-appearance order
    std::vector<std::string> patients() const;
};

// Pooled-prediction CSV: config_id, patient_id, repeat, q1..q6, true_category.
void save_pools_csv(const std::string& path,
                    const std::vector<std::pair<std::string, PredictionPool>>& pools);
std::vector<std::pair<std::string, PredictionPool>> load_pools_csv(const std::string& path);

using MetricFn = std::function<double(const PredictionSet&)>;

struct MetricReport {
    std::string metric;
    std::optional<int> threshold;
    double estimate = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    int n_resamples = 0; // resamples the metric was computed on
    int n_skipped = 0;   // resamples skipped as degenerate
};

void to_json(nlohmann::json& j, const MetricReport& r);
void from_json(const nlohmann::json& j, MetricReport& r);

enum class BootstrapMode { in_bag, out_of_bag };

// Patient-level bootstrap of a pooled-prediction metric: B resamples of the
// unique patients with replacement (each drawn patient contributes all of its
// pooled entries), percentile 2.5/97.5 interval, estimate = mean over
// resamples.  In out-of-bag mode the metric is evaluated on the patients NOT
// drawn.  Resamples where the metric is undefined are skipped and counted.
MetricReport bootstrap_ci(const PredictionPool& pool, const MetricFn& metric,
                          const std::string& metric_name, int n_resamples, std::uint64_t seed,
                          BootstrapMode mode = BootstrapMode::in_bag);

// Bootstrap bias correction for configuration selection: per resample the
// best configuration on the in-bag patients is scored on the out-of-bag
// patients.  `chosen` is the configuration that wins on the full pool; the
// report carries the bias-corrected estimate and interval.  Resamples whose
// out-of-bag set is empty are skipped and counted.
struct BbcResult {
    std::size_t chosen = 0;
    MetricReport report;
    int n_empty_out_of_bag = 0;
};
BbcResult bbc_select(const std::vector<PredictionPool>& pools, const MetricFn& metric,
                     const std::string& metric_name, int n_resamples, std::uint64_t seed);

// Configuration dropout: a configuration survives when its metric is at
// least the full-pool optimum's metric in at least `alpha * B` of B patient
// resamples.  The optimum always survives; indices return ascending.
std::vector<std::size_t> bbcd_dropout(const std::vector<PredictionPool>& pools,
                                      const MetricFn& metric, double alpha, int n_resamples,
                                      std::uint64_t seed);

// Hyperparameter grids: every combination of per-layer widths (layers choose
// widths independently), network depth, and dropout in {0, 0.2}.
//   paper grid: widths {128, 256, 512}, depths 1..6 -> 2184 configurations
//   desk grid:  widths {8, 16, 32},    depths 1..3 -> 78 configurations
enum class GridProfile { paper, desk };

GridProfile grid_profile_from_string(const std::string& s);
std::string to_string(GridProfile p);

std::vector<MlpConfig> build_grid(GridProfile profile, HeadKind head);

} // namespace ordinal
