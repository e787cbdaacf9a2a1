#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ordinal/cohort.hpp"
#include "ordinal/metrics.hpp"
#include "ordinal/model_io.hpp"
#include "ordinal/preprocess.hpp"
#include "ordinal/validation.hpp"

namespace ordinal {

inline constexpr const char* kPipelineVersion = "0.1.0";

// Rows keep their order; predictors outside `groups` are dropped.
CohortTable select_predictor_groups(const CohortTable& table,
                                    const std::vector<std::string>& groups);

// "concise" -> {concise}; "extended" -> {concise, extended}
std::vector<std::string> tabular_groups(const std::string& predictor_set);

// One named evaluation metric over a prediction set.
struct MetricSpec {
    std::string name;
    std::optional<int> threshold;
    MetricFn fn;
};

// Discrimination and calibration battery: ORC, Somers' Dxy, generalised c,
// then per-threshold c-index, calibration slope and ICI.
std::vector<MetricSpec> default_metrics();

// Selection metric used for configuration choice and dropout (ORC over the
// non-empty category pairs of the resample).
MetricFn selection_metric();

struct RunOptions {
    std::string cohort_csv;
    std::string schema_json;
    std::string out_dir;

    std::vector<ModelKind> families{ModelKind::polr};
    std::string predictor_set = "concise"; // tabular families: concise | extended

    std::uint64_t seed = 1;
    int repeats = 2;
    int folds = 5;
    double val_frac = 0.15;
    int n_boot = 1000;
    double alpha = 0.05;

    bool grid_search = false; // network families: search the grid (else one fixed config)
    GridProfile grid = GridProfile::desk;
    int dropout_rounds = 2;          // configuration-dropout rounds during the search
    std::vector<int> single_widths{16}; // fixed configuration when not searching
    double single_dropout = 0.0;

    double ridge = 1e-4; // regression families
    int max_epochs = 200;
    int patience = 10;
    int batch_size = 128;

    PmmConfig pmm;
    int jobs = 1;
    bool train_final = true; // refit the chosen configuration on the full cohort

    void validate() const;
};

// Everything one model family produces during a cross-validated run.
struct FamilyOutcome {
    ModelKind kind = ModelKind::polr;
    std::string label;

    std::vector<MlpConfig> configs;        // network families
    std::vector<std::size_t> survivors;    // config indices alive after dropout
    std::vector<std::size_t> round_counts; // survivor count after each dropout round
    std::size_t chosen = 0;                // chosen config index

    int n_trained = 0;
    int n_failed = 0;
    std::vector<std::string> failures; // one line per failed task

    PredictionPool test_pool;                            // chosen config
    std::vector<std::pair<std::string, PredictionPool>> validation_pools; // survivors

    std::vector<MetricReport> test_reports;          // plain bootstrap on the test pool
    std::optional<MetricReport> selection_report;    // BBC over validation pools
    std::optional<MetricReport> test_bbc_report;     // BBC over survivor test pools
    int selection_skipped = 0;

    ModelBundle final_model;
    bool has_final_model = false;
};

// Cross-validates one family over the shared partition plans.  Throws
// ConfigError/TooFewPerClass on unusable inputs; individual training
// failures are recorded and skipped.
FamilyOutcome run_family(const CohortTable& cohort, ModelKind kind, const RunOptions& opt,
                         const std::vector<PartitionPlan>& plans, std::ostream& log);

// Command implementations.  Return process exit codes: 0 success, 1 when any
// training task failed (outputs for the rest are still written).  Usage and
// configuration problems throw (ConfigError, IoError, ...); the CLI maps
// those to exit code 2.
int cmd_run(const RunOptions& opt, std::ostream& log);

struct SynthOptions {
    std::string out_dir;
    int n = 0; // 0 = keep the generating recipe's size
    std::uint64_t seed = 1;
    std::string spec_path; // optional generating-spec JSON; default desk cohort
};
int cmd_synth(const SynthOptions& opt, std::ostream& log);

struct ReportOptions {
    // either a literal six-probability profile ...
    std::vector<double> profile;
    // ... or a model applied to one patient row
    std::string model_path;
    std::string cohort_csv;
    std::string schema_json;
    std::string patient_id;

    std::string lower;                // threshold label, e.g. ">1"
    std::vector<std::string> higher;  // labels above `lower`
    bool as_json = false;
};
int cmd_report(const ReportOptions& opt, std::ostream& out);

struct ImportanceOptions {
    std::string model_path;
    std::string cohort_csv;
    std::string schema_json;
    std::string out_dir;
    int permutations = 2000; // sampled estimator; patients with <= 12 tokens use enumeration
    std::uint64_t seed = 1;
};
int cmd_importance(const ImportanceOptions& opt, std::ostream& log);

// Creates `dir` when missing (parent must exist); throws IoError otherwise.
void ensure_output_dir(const std::string& dir);

} // namespace ordinal
