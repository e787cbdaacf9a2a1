#include "ordinal/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

#include "ordinal/csv.hpp"
#include "ordinal/errors.hpp"
#include "ordinal/importance.hpp"
#include "ordinal/linear.hpp"
#include "ordinal/rng.hpp"
#include "ordinal/synthetic.hpp"

namespace ordinal {

namespace fs = std::filesystem;

std::vector<std::string> tabular_groups(const std::string& predictor_set) {
    if (predictor_set == "concise") return {"concise"};
    if (predictor_set == "extended") return {"concise", "extended"};
    throw ConfigError("unknown predictor set '" + predictor_set +
                      "' (expected concise or extended)");
}

CohortTable select_predictor_groups(const CohortTable& table,
                                    const std::vector<std::string>& groups) {
    CohortTable out;
    out.ids = table.ids;
    out.outcomes = table.outcomes;
    std::vector<std::size_t> cols;
    for (std::size_t c = 0; c < table.n_cols(); ++c)
        if (std::find(groups.begin(), groups.end(), table.predictors[c].group) != groups.end()) {
            cols.push_back(c);
            out.predictors.push_back(table.predictors[c]);
        }
    if (out.predictors.empty())
        throw ConfigError("no predictors belong to the requested groups");
    out.cells.reserve(table.n_rows());
    for (std::size_t r = 0; r < table.n_rows(); ++r) {
        std::vector<std::string> row;
        row.reserve(cols.size());
        for (std::size_t c : cols) row.push_back(table.cells[r][c]);
        out.cells.push_back(std::move(row));
    }
    return out;
}

std::vector<MetricSpec> default_metrics() {
    std::vector<MetricSpec> out;
    out.push_back({"orc", std::nullopt, [](const PredictionSet& s) { return orc(s, true); }});
    out.push_back({"somers_dxy", std::nullopt, [](const PredictionSet& s) { return somers_dxy(s); }});
    out.push_back(
        {"generalized_c", std::nullopt, [](const PredictionSet& s) { return generalized_c(s); }});
    for (int t = 0; t < OutcomeScale::n_thresholds; ++t)
        out.push_back({"threshold_c", t, [t](const PredictionSet& s) { return threshold_c(s, t); }});
    for (int t = 0; t < OutcomeScale::n_thresholds; ++t)
        out.push_back({"calibration_slope", t,
                       [t](const PredictionSet& s) { return calibration_slope(s, t).slope; }});
    for (int t = 0; t < OutcomeScale::n_thresholds; ++t)
        out.push_back({"ici", t, [t](const PredictionSet& s) { return ici(calibration_curve(s, t)); }});
    return out;
}

MetricFn selection_metric() {
    return [](const PredictionSet& s) { return orc(s, true); };
}

void RunOptions::validate() const {
    if (families.empty()) throw ConfigError("run: no model families requested");
    tabular_groups(predictor_set);
    if (repeats < 1 || folds < 2) throw ConfigError("run: need repeats >= 1 and folds >= 2");
    if (!(val_frac > 0.0 && val_frac < 0.5))
        throw ConfigError("run: validation fraction must be in (0, 0.5)");
    if (n_boot < 1) throw ConfigError("run: need at least one bootstrap resample");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("run: alpha must be in (0, 1)");
    if (dropout_rounds < 0) throw ConfigError("run: dropout rounds must be non-negative");
    if (single_widths.empty()) throw ConfigError("run: fixed configuration needs widths");
    for (int w : single_widths)
        if (w < 1) throw ConfigError("run: widths must be positive");
    if (!(single_dropout >= 0.0 && single_dropout < 1.0))
        throw ConfigError("run: dropout must be in [0, 1)");
    if (ridge < 0.0) throw ConfigError("run: ridge must be non-negative");
    if (max_epochs < 1 || patience < 1 || batch_size < 1)
        throw ConfigError("run: epochs, patience and batch size must be positive");
    if (pmm.donors < 1 || pmm.sweeps < 1)
        throw ConfigError("run: imputation donors and sweeps must be positive");
    if (jobs < 1) throw ConfigError("run: jobs must be positive");
}

void ensure_output_dir(const std::string& dir) {
    std::error_code ec;
    if (fs::is_directory(dir, ec)) return;
    if (!fs::create_directory(dir, ec) || ec)
        throw IoError("cannot create output directory " + dir +
                      (ec ? ": " + ec.message() : std::string{}));
}

namespace {

// runs body(0..n-1) on up to `jobs` threads; body must not throw
template <typename F>
void parallel_for(std::size_t n, int jobs, F&& body) {
    if (jobs <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            body(i);
        }
    };
    std::vector<std::thread> pool;
    std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
}

// per-partition data for the design-matrix families
struct TabularData {
    Eigen::MatrixXd X_fit, X_val, X_side, X_test; // side = fit rows then validation rows
    std::vector<int> y_fit, y_val, y_side, y_test;
    std::vector<std::string> val_ids, test_ids;
    DesignEncoder encoder;
};

// per-partition data for the token families
struct TokenData {
    std::vector<TokenisedPatient> fit, val, test;
    std::vector<int> y_fit, y_val, y_test;
    TokenDictionary dict;
    std::map<std::string, BinEdges> bins;
};

template <typename T>
struct Prepared {
    std::optional<T> data;
    std::string error;
};

std::pair<std::vector<std::string>, std::vector<std::string>> split_train_side(
    const CohortTable& view, const PartitionPlan& plan, double frac, std::uint64_t base_seed) {
    CohortTable side = view.subset_by_id(plan.train_ids);
    return stratified_shuffle_split(
        plan.train_ids, side.outcomes, frac,
        derive_seed(base_seed, "valsplit", static_cast<std::uint64_t>(plan.repeat),
                    static_cast<std::uint64_t>(plan.fold)));
}

TabularData prepare_tabular(const CohortTable& view, const PartitionPlan& plan,
                            const RunOptions& opt) {
    auto [fit_ids, val_ids] = split_train_side(view, plan, opt.val_frac, opt.seed);
    CohortTable fit = view.subset_by_id(fit_ids);
    CohortTable val = view.subset_by_id(val_ids);
    CohortTable test = view.subset_by_id(plan.test_ids);

    Rng pmm_rng(derive_seed(opt.seed, "pmm", static_cast<std::uint64_t>(plan.repeat),
                            static_cast<std::uint64_t>(plan.fold)));
    PmmImputer imputer = PmmImputer::fit(fit, opt.pmm, pmm_rng);
    CohortTable fit_c = imputer.impute(fit, pmm_rng);
    CohortTable val_c = imputer.impute(val, pmm_rng);
    CohortTable test_c = imputer.impute(test, pmm_rng);

    TabularData d;
    d.encoder = DesignEncoder::fit(fit_c);
    d.X_fit = d.encoder.transform(fit_c);
    d.X_val = d.encoder.transform(val_c);
    d.X_test = d.encoder.transform(test_c);
    d.y_fit = fit_c.outcomes;
    d.y_val = val_c.outcomes;
    d.y_test = test_c.outcomes;
    d.val_ids = val.ids;
    d.test_ids = test.ids;

    d.X_side.resize(d.X_fit.rows() + d.X_val.rows(), d.X_fit.cols());
    d.X_side.topRows(d.X_fit.rows()) = d.X_fit;
    d.X_side.bottomRows(d.X_val.rows()) = d.X_val;
    d.y_side = d.y_fit;
    d.y_side.insert(d.y_side.end(), d.y_val.begin(), d.y_val.end());
    return d;
}

TokenData prepare_tokens(const CohortTable& view, const PartitionPlan& plan,
                         const RunOptions& opt) {
    auto [fit_ids, val_ids] = split_train_side(view, plan, opt.val_frac, opt.seed);
    CohortTable fit = view.subset_by_id(fit_ids);
    CohortTable val = view.subset_by_id(val_ids);
    CohortTable test = view.subset_by_id(plan.test_ids);

    TokenData d;
    d.bins = fit_table_bins(fit);
    auto fit_tokens = tokenize_table(fit, d.bins);
    d.dict = TokenDictionary::fit(fit_tokens);

    auto encode_all = [&](const CohortTable& part, const std::vector<std::vector<std::string>>& toks,
                          std::vector<TokenisedPatient>& into) {
        into.reserve(part.n_rows());
        for (std::size_t r = 0; r < part.n_rows(); ++r)
            into.push_back(encode_patient(part.ids[r], toks[r], d.dict));
    };
    encode_all(fit, fit_tokens, d.fit);
    encode_all(val, tokenize_table(val, d.bins), d.val);
    encode_all(test, tokenize_table(test, d.bins), d.test);
    d.y_fit = fit.outcomes;
    d.y_val = val.outcomes;
    d.y_test = test.outcomes;
    return d;
}

struct TaskOutput {
    bool ok = false;
    std::string error;
    std::vector<PooledPrediction> val_entries, test_entries;
};

TaskOutput run_regression_task(const TabularData& d, ModelKind kind, double ridge, int repeat) {
    TaskOutput out;
    try {
        std::vector<ThresholdProfile> profiles;
        if (kind == ModelKind::mnlr) {
            MnlrModel m = train_mnlr(d.X_side, d.y_side, ridge);
            for (Eigen::Index r = 0; r < d.X_test.rows(); ++r)
                profiles.push_back(m.predict(d.X_test.row(r)));
        } else {
            PolrModel m = train_polr(d.X_side, d.y_side, ridge);
            for (Eigen::Index r = 0; r < d.X_test.rows(); ++r)
                profiles.push_back(m.predict(d.X_test.row(r)));
        }
        for (std::size_t r = 0; r < profiles.size(); ++r)
            out.test_entries.push_back({d.test_ids[r], repeat, profiles[r], d.y_test[r]});
        out.ok = true;
    } catch (const std::exception& e) {
        out.error = e.what();
    }
    return out;
}

TaskOutput run_deep_task(const TabularData& d, const MlpConfig& cfg, std::uint64_t task_seed,
                         int repeat) {
    TaskOutput out;
    try {
        ClassWeights w = class_weights(d.y_fit);
        Rng rng(task_seed);
        DeepModel model(static_cast<int>(d.X_fit.cols()), cfg, rng);
        train_deep(model, d.X_fit, d.y_fit, d.X_val, d.y_val, w, rng);
        for (Eigen::Index r = 0; r < d.X_val.rows(); ++r)
            out.val_entries.push_back(
                {d.val_ids[static_cast<std::size_t>(r)], repeat, model.predict(d.X_val.row(r)),
                 d.y_val[static_cast<std::size_t>(r)]});
        for (Eigen::Index r = 0; r < d.X_test.rows(); ++r)
            out.test_entries.push_back(
                {d.test_ids[static_cast<std::size_t>(r)], repeat, model.predict(d.X_test.row(r)),
                 d.y_test[static_cast<std::size_t>(r)]});
        out.ok = true;
    } catch (const std::exception& e) {
        out.error = e.what();
    }
    return out;
}

TaskOutput run_apm_task(const TokenData& d, const MlpConfig& cfg, std::uint64_t task_seed,
                        int repeat) {
    TaskOutput out;
    try {
        ClassWeights w = class_weights(d.y_fit);
        Rng rng(task_seed);
        ApmModel model(static_cast<int>(d.dict.size()), cfg, rng);
        train_apm(model, d.fit, d.y_fit, d.val, d.y_val, w, rng);
        for (std::size_t r = 0; r < d.val.size(); ++r)
            out.val_entries.push_back(
                {d.val[r].id, repeat, model.predict(d.val[r].indices), d.y_val[r]});
        for (std::size_t r = 0; r < d.test.size(); ++r)
            out.test_entries.push_back(
                {d.test[r].id, repeat, model.predict(d.test[r].indices), d.y_test[r]});
        out.ok = true;
    } catch (const std::exception& e) {
        out.error = e.what();
    }
    return out;
}

std::string partition_name(const PartitionPlan& plan) {
    return "repeat " + std::to_string(plan.repeat + 1) + " fold " + std::to_string(plan.fold + 1);
}

std::string config_id(std::size_t index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "cfg%03zu", index);
    return buf;
}

MlpConfig make_single_config(const RunOptions& opt, HeadKind head) {
    MlpConfig cfg;
    cfg.widths = opt.single_widths;
    cfg.dropout = opt.single_dropout;
    cfg.head = head;
    return cfg;
}

// final-model training on the complete cohort
ModelBundle train_final_model(const CohortTable& view, ModelKind kind, const MlpConfig* cfg,
                              const RunOptions& opt) {
    ModelBundle bundle;
    bundle.kind = kind;
    bundle.metadata["family"] = to_string(kind);
    bundle.metadata["seed"] = opt.seed;
    bundle.metadata["n_patients"] = view.n_rows();

    std::uint64_t seed = derive_seed(opt.seed, "final");
    if (!is_network_kind(kind)) {
        Rng pmm_rng(derive_seed(seed, "pmm"));
        PmmImputer imputer = PmmImputer::fit(view, opt.pmm, pmm_rng);
        CohortTable full = imputer.impute(view, pmm_rng);
        bundle.encoder = DesignEncoder::fit(full);
        Eigen::MatrixXd X = bundle.encoder.transform(full);
        if (kind == ModelKind::mnlr) {
            bundle.mnlr = train_mnlr(X, full.outcomes, opt.ridge);
            bundle.metadata["iterations"] = bundle.mnlr.iterations;
        } else {
            bundle.polr = train_polr(X, full.outcomes, opt.ridge);
            bundle.metadata["iterations"] = bundle.polr.iterations;
        }
        bundle.metadata["ridge"] = opt.ridge;
        return bundle;
    }

    auto [fit_ids, val_ids] = stratified_shuffle_split(view.ids, view.outcomes, opt.val_frac,
                                                       derive_seed(seed, "valsplit"));
    CohortTable fit = view.subset_by_id(fit_ids);
    CohortTable val = view.subset_by_id(val_ids);
    ClassWeights w = class_weights(fit.outcomes);
    Rng rng(derive_seed(seed, "train"));
    TrainingTrace trace;

    if (is_token_kind(kind)) {
        bundle.bins = fit_table_bins(fit);
        auto fit_tokens = tokenize_table(fit, bundle.bins);
        bundle.dictionary = TokenDictionary::fit(fit_tokens);
        std::vector<TokenisedPatient> fit_enc, val_enc;
        for (std::size_t r = 0; r < fit.n_rows(); ++r)
            fit_enc.push_back(encode_patient(fit.ids[r], fit_tokens[r], bundle.dictionary));
        auto val_tokens = tokenize_table(val, bundle.bins);
        for (std::size_t r = 0; r < val.n_rows(); ++r)
            val_enc.push_back(encode_patient(val.ids[r], val_tokens[r], bundle.dictionary));
        bundle.apm = ApmModel(static_cast<int>(bundle.dictionary.size()), *cfg, rng);
        trace = train_apm(bundle.apm, fit_enc, fit.outcomes, val_enc, val.outcomes, w, rng);
    } else {
        Rng pmm_rng(derive_seed(seed, "pmm"));
        PmmImputer imputer = PmmImputer::fit(fit, opt.pmm, pmm_rng);
        CohortTable fit_c = imputer.impute(fit, pmm_rng);
        CohortTable val_c = imputer.impute(val, pmm_rng);
        bundle.encoder = DesignEncoder::fit(fit_c);
        Eigen::MatrixXd X_fit = bundle.encoder.transform(fit_c);
        Eigen::MatrixXd X_val = bundle.encoder.transform(val_c);
        bundle.deep = DeepModel(static_cast<int>(X_fit.cols()), *cfg, rng);
        trace = train_deep(bundle.deep, X_fit, fit_c.outcomes, X_val, val_c.outcomes, w, rng);
    }
    bundle.metadata["stopping_epoch"] = trace.best_epoch;
    bundle.metadata["best_validation_loss"] = trace.best_val_loss;
    bundle.metadata["epochs_run"] = trace.train_loss.size();
    return bundle;
}

} // namespace

FamilyOutcome run_family(const CohortTable& cohort, ModelKind kind, const RunOptions& opt,
                         const std::vector<PartitionPlan>& plans, std::ostream& log) {
    FamilyOutcome fam;
    fam.kind = kind;
    fam.label = to_string(kind);
    const bool token_family = is_token_kind(kind);
    const bool network_family = is_network_kind(kind);

    CohortTable view = token_family
                           ? cohort
                           : select_predictor_groups(cohort, tabular_groups(opt.predictor_set));
    view.validate();

    HeadKind head = (kind == ModelKind::deep_mn || kind == ModelKind::apm_mn)
                        ? HeadKind::multinomial
                        : HeadKind::ordinal;
    if (network_family) {
        fam.configs = opt.grid_search ? build_grid(opt.grid, head)
                                      : std::vector<MlpConfig>{make_single_config(opt, head)};
        for (auto& cfg : fam.configs) {
            cfg.max_epochs = opt.max_epochs;
            cfg.patience = opt.patience;
            cfg.batch_size = opt.batch_size;
        }
    }
    const std::size_t n_cfg = network_family ? fam.configs.size() : 1;

    // per-partition preprocessing (shared by every configuration)
    std::vector<Prepared<TabularData>> tabular(plans.size());
    std::vector<Prepared<TokenData>> tokens(plans.size());
    parallel_for(plans.size(), opt.jobs, [&](std::size_t i) {
        try {
            if (token_family)
                tokens[i].data = prepare_tokens(view, plans[i], opt);
            else
                tabular[i].data = prepare_tabular(view, plans[i], opt);
        } catch (const std::exception& e) {
            (token_family ? tokens[i].error : tabular[i].error) = e.what();
        }
    });
    std::vector<char> partition_ok(plans.size(), 1);
    for (std::size_t i = 0; i < plans.size(); ++i) {
        const std::string& err = token_family ? tokens[i].error : tabular[i].error;
        if (!err.empty()) {
            partition_ok[i] = 0;
            ++fam.n_failed;
            fam.failures.push_back(partition_name(plans[i]) + ": preprocessing: " + err);
        }
    }

    // configuration-dropout schedule: partition counts after which a round runs
    std::vector<std::size_t> boundaries;
    if (network_family && n_cfg > 1 && opt.dropout_rounds > 0) {
        for (int r = 1; r <= opt.dropout_rounds; ++r) {
            std::size_t cut = (plans.size() * static_cast<std::size_t>(r)) /
                              static_cast<std::size_t>(opt.dropout_rounds + 1);
            if (cut > 0 && cut < plans.size() &&
                (boundaries.empty() || cut > boundaries.back()))
                boundaries.push_back(cut);
        }
    }

    std::vector<PredictionPool> val_pools(n_cfg), test_pools(n_cfg);
    std::vector<char> alive(n_cfg, 1);
    std::size_t block_start = 0;
    std::size_t boundary_index = 0;

    while (block_start < plans.size()) {
        std::size_t block_end = boundary_index < boundaries.size() ? boundaries[boundary_index]
                                                                   : plans.size();
        std::vector<std::size_t> live;
        for (std::size_t c = 0; c < n_cfg; ++c)
            if (alive[c]) live.push_back(c);

        struct Task {
            std::size_t partition, config;
        };
        std::vector<Task> tasks;
        for (std::size_t p = block_start; p < block_end; ++p) {
            if (!partition_ok[p]) continue;
            for (std::size_t c : live) tasks.push_back({p, c});
        }
        std::vector<TaskOutput> results(tasks.size());
        parallel_for(tasks.size(), opt.jobs, [&](std::size_t i) {
            const auto& t = tasks[i];
            const auto& plan = plans[t.partition];
            std::uint64_t task_seed = SeedSequence(opt.seed)
                                          .with("train")
                                          .with(fam.label)
                                          .with(t.config)
                                          .with(static_cast<std::uint64_t>(plan.repeat))
                                          .with(static_cast<std::uint64_t>(plan.fold))
                                          .seed();
            if (token_family)
                results[i] = run_apm_task(*tokens[t.partition].data, fam.configs[t.config],
                                          task_seed, plan.repeat);
            else if (network_family)
                results[i] = run_deep_task(*tabular[t.partition].data, fam.configs[t.config],
                                           task_seed, plan.repeat);
            else
                results[i] = run_regression_task(*tabular[t.partition].data, kind, opt.ridge,
                                                 plan.repeat);
        });

        // a partition enters the pools only when every live configuration
        // succeeded on it, so the pools stay aligned across configurations
        std::vector<char> merge(plans.size(), 1);
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            ++fam.n_trained;
            if (!results[i].ok) {
                ++fam.n_failed;
                merge[tasks[i].partition] = 0;
                fam.failures.push_back(partition_name(plans[tasks[i].partition]) + " " +
                                       (network_family ? config_id(tasks[i].config) : fam.label) +
                                       ": " + results[i].error);
            }
        }
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            if (!results[i].ok || !merge[tasks[i].partition]) continue;
            auto& vp = val_pools[tasks[i].config].entries;
            auto& tp = test_pools[tasks[i].config].entries;
            vp.insert(vp.end(), results[i].val_entries.begin(), results[i].val_entries.end());
            tp.insert(tp.end(), results[i].test_entries.begin(), results[i].test_entries.end());
        }
        for (std::size_t p = block_start; p < block_end; ++p)
            if (partition_ok[p] && !merge[p]) partition_ok[p] = 0;

        block_start = block_end;
        if (boundary_index < boundaries.size() && block_end == boundaries[boundary_index]) {
            ++boundary_index;
            std::vector<std::size_t> live_now;
            for (std::size_t c = 0; c < n_cfg; ++c)
                if (alive[c]) live_now.push_back(c);
            if (live_now.size() > 1 && !val_pools[live_now.front()].entries.empty()) {
                std::vector<PredictionPool> live_pools;
                live_pools.reserve(live_now.size());
                for (std::size_t c : live_now) live_pools.push_back(val_pools[c]);
                auto kept = bbcd_dropout(live_pools, selection_metric(), opt.alpha, opt.n_boot,
                                         SeedSequence(opt.seed)
                                             .with("bbcd")
                                             .with(fam.label)
                                             .with(boundary_index)
                                             .seed());
                std::vector<char> next_alive(n_cfg, 0);
                for (std::size_t k : kept) next_alive[live_now[k]] = 1;
                for (std::size_t c = 0; c < n_cfg; ++c) {
                    if (alive[c] && !next_alive[c]) {
                        val_pools[c].entries.clear();
                        val_pools[c].entries.shrink_to_fit();
                        test_pools[c].entries.clear();
                        test_pools[c].entries.shrink_to_fit();
                    }
                    alive[c] = next_alive[c];
                }
                fam.round_counts.push_back(kept.size());
                log << "  " << fam.label << " dropout round " << boundary_index << ": "
                    << live_now.size() << " -> " << kept.size() << " configurations\n";
            } else {
                fam.round_counts.push_back(live_now.size());
            }
        }
    }

    for (std::size_t c = 0; c < n_cfg; ++c)
        if (alive[c]) fam.survivors.push_back(c);

    if (network_family && n_cfg > 1) {
        std::vector<PredictionPool> live_val, live_test;
        for (std::size_t c : fam.survivors) {
            live_val.push_back(val_pools[c]);
            live_test.push_back(test_pools[c]);
        }
        if (live_val.empty() || live_val.front().entries.empty()) {
            fam.failures.push_back("no pooled validation predictions; family aborted");
            ++fam.n_failed;
            return fam;
        }
        BbcResult selection =
            bbc_select(live_val, selection_metric(), "orc", opt.n_boot,
                       SeedSequence(opt.seed).with("bbc").with(fam.label).seed());
        fam.chosen = fam.survivors[selection.chosen];
        fam.selection_report = selection.report;
        fam.selection_skipped = selection.n_empty_out_of_bag;
        if (!live_test.front().entries.empty()) {
            BbcResult test_bbc =
                bbc_select(live_test, selection_metric(), "orc", opt.n_boot,
                           SeedSequence(opt.seed).with("bbc_test").with(fam.label).seed());
            fam.test_bbc_report = test_bbc.report;
        }
    } else {
        fam.chosen = 0;
    }

    fam.test_pool = test_pools[fam.chosen];
    for (std::size_t c : fam.survivors)
        if (network_family && !val_pools[c].entries.empty())
            fam.validation_pools.emplace_back(config_id(c), std::move(val_pools[c]));

    if (fam.test_pool.entries.empty()) {
        fam.failures.push_back("no pooled test predictions; family aborted");
        ++fam.n_failed;
        return fam;
    }

    for (const auto& spec : default_metrics()) {
        std::uint64_t seed = SeedSequence(opt.seed)
                                 .with("metric")
                                 .with(fam.label)
                                 .with(spec.name)
                                 .with(static_cast<std::uint64_t>(spec.threshold.value_or(-1) + 1))
                                 .seed();
        try {
            MetricReport report =
                bootstrap_ci(fam.test_pool, spec.fn, spec.name, opt.n_boot, seed);
            report.threshold = spec.threshold;
            fam.test_reports.push_back(report);
        } catch (const Error& e) {
            fam.failures.push_back("metric " + spec.name + ": " + e.what());
        }
    }

    if (opt.train_final) {
        try {
            const MlpConfig* cfg = network_family ? &fam.configs[fam.chosen] : nullptr;
            fam.final_model = train_final_model(view, kind, cfg, opt);
            if (network_family) {
                fam.final_model.metadata["config_index"] = fam.chosen;
                fam.final_model.metadata["config"] = fam.configs[fam.chosen];
            }
            if (!token_family) fam.final_model.metadata["predictor_set"] = opt.predictor_set;
            fam.has_final_model = true;
        } catch (const std::exception& e) {
            ++fam.n_failed;
            fam.failures.push_back(std::string("final model: ") + e.what());
        }
    }
    return fam;
}

namespace {

std::string threshold_file_tag(int t) {
    std::string label = OutcomeScale::threshold_labels()[static_cast<std::size_t>(t)];
    return "above" + label.substr(1);
}

void write_family_outputs(const std::string& out_dir, const FamilyOutcome& fam,
                          std::vector<std::string>& files, std::ostream& log) {
    const fs::path dir(out_dir);
    auto emit = [&](const fs::path& p) { files.push_back(p.filename().string()); };

    nlohmann::json metrics{{"family", fam.label},
                           {"n_trained", fam.n_trained},
                           {"n_failed", fam.n_failed},
                           {"failures", fam.failures},
                           {"reports", fam.test_reports}};
    if (!fam.configs.empty()) {
        metrics["configs"] = fam.configs;
        metrics["survivors"] = fam.survivors;
        metrics["dropout_round_survivors"] = fam.round_counts;
        metrics["chosen"] = fam.chosen;
    }
    if (fam.selection_report) {
        metrics["selection"] = *fam.selection_report;
        metrics["selection_skipped_resamples"] = fam.selection_skipped;
    }
    if (fam.test_bbc_report) metrics["test_bbc"] = *fam.test_bbc_report;
    fs::path metrics_path = dir / (fam.label + "_metrics.json");
    write_json_file(metrics, metrics_path.string());
    emit(metrics_path);

    if (!fam.test_pool.entries.empty()) {
        fs::path pool_path = dir / (fam.label + "_test_pool.csv");
        std::string id = fam.configs.empty() ? fam.label : config_id(fam.chosen);
        save_pools_csv(pool_path.string(), {{id, fam.test_pool}});
        emit(pool_path);

        PredictionSet set = fam.test_pool.to_set();
        for (int t = 0; t < OutcomeScale::n_thresholds; ++t) {
            try {
                CalibrationCurve curve = calibration_curve(set, t);
                fs::path curve_path =
                    dir / (fam.label + "_calibration_" + threshold_file_tag(t) + ".csv");
                std::ofstream csv(curve_path);
                if (!csv) throw IoError("cannot write " + curve_path.string());
                write_csv_row(csv, {"predicted", "observed"});
                for (std::size_t i = 0; i < curve.predicted.size(); ++i) {
                    char a[32], b[32];
                    std::snprintf(a, sizeof a, "%.17g", curve.predicted[i]);
                    std::snprintf(b, sizeof b, "%.17g", curve.observed[i]);
                    write_csv_row(csv, {a, b});
                }
                emit(curve_path);
            } catch (const Error& e) {
                log << "  " << fam.label << ": calibration curve at "
                    << OutcomeScale::threshold_labels()[static_cast<std::size_t>(t)]
                    << " skipped: " << e.what() << '\n';
            }
        }
    }

    if (!fam.validation_pools.empty()) {
        fs::path vpath = dir / (fam.label + "_validation_pools.csv");
        save_pools_csv(vpath.string(), fam.validation_pools);
        emit(vpath);
    }

    if (fam.has_final_model) {
        fs::path mpath = dir / (fam.label + "_model.json");
        save_model(fam.final_model, mpath.string());
        emit(mpath);
    }
}

nlohmann::json options_to_json(const RunOptions& opt) {
    std::vector<std::string> family_names;
    for (ModelKind k : opt.families) family_names.push_back(to_string(k));
    return nlohmann::json{{"cohort", opt.cohort_csv},
                          {"schema", opt.schema_json},
                          {"out", opt.out_dir},
                          {"families", family_names},
                          {"predictor_set", opt.predictor_set},
                          {"seed", opt.seed},
                          {"repeats", opt.repeats},
                          {"folds", opt.folds},
                          {"val_frac", opt.val_frac},
                          {"bootstrap", opt.n_boot},
                          {"alpha", opt.alpha},
                          {"grid_search", opt.grid_search},
                          {"grid", to_string(opt.grid)},
                          {"dropout_rounds", opt.dropout_rounds},
                          {"single_widths", opt.single_widths},
                          {"single_dropout", opt.single_dropout},
                          {"ridge", opt.ridge},
                          {"max_epochs", opt.max_epochs},
                          {"patience", opt.patience},
                          {"batch_size", opt.batch_size},
                          {"pmm_donors", opt.pmm.donors},
                          {"pmm_sweeps", opt.pmm.sweeps},
                          {"jobs", opt.jobs},
                          {"train_final", opt.train_final}};
}

} // namespace

int cmd_run(const RunOptions& opt, std::ostream& log) {
    opt.validate();
    if (opt.cohort_csv.empty() || opt.schema_json.empty() || opt.out_dir.empty())
        throw ConfigError("run needs --cohort, --schema and --out");
    CohortTable cohort = load_cohort(opt.cohort_csv, opt.schema_json);
    ensure_output_dir(opt.out_dir);
    const fs::path dir(opt.out_dir);

    auto plans = stratified_repeated_kfold(cohort.ids, cohort.outcomes, opt.repeats, opt.folds,
                                           derive_seed(opt.seed, "partitions"));
    nlohmann::json plans_json = nlohmann::json::array();
    for (const auto& plan : plans)
        plans_json.push_back({{"repeat", plan.repeat},
                              {"fold", plan.fold},
                              {"train", plan.train_ids},
                              {"test", plan.test_ids}});
    write_json_file(nlohmann::json{{"repeats", opt.repeats},
                                   {"folds", opt.folds},
                                   {"plans", std::move(plans_json)}},
                    (dir / "partitions.json").string());

    std::vector<std::string> files{"partitions.json"};
    bool any_failed = false;
    for (ModelKind kind : opt.families) {
        log << "family " << to_string(kind) << ": " << plans.size() << " partitions\n";
        FamilyOutcome fam = run_family(cohort, kind, opt, plans, log);
        write_family_outputs(opt.out_dir, fam, files, log);
        for (const auto& f : fam.failures) log << "  failure: " << f << '\n';
        for (const auto& report : fam.test_reports)
            if (report.metric == "orc")
                log << "  " << fam.label << " orc " << report.estimate << " [" << report.ci_low
                    << ", " << report.ci_high << "]\n";
        any_failed = any_failed || fam.n_failed > 0;
    }

    nlohmann::json manifest{{"version", kPipelineVersion},
                            {"command", "run"},
                            {"options", options_to_json(opt)},
                            {"n_patients", cohort.n_rows()},
                            {"n_partitions", plans.size()},
                            {"outputs", files}};
    write_json_file(manifest, (dir / "manifest.json").string());
    return any_failed ? 1 : 0;
}

int cmd_synth(const SynthOptions& opt, std::ostream& log) {
    if (opt.out_dir.empty()) throw ConfigError("synth needs --out");
    CohortSpec spec = opt.spec_path.empty() ? default_cohort_spec()
                                            : read_json_file(opt.spec_path).get<CohortSpec>();
    if (opt.n > 0) spec.n = opt.n;
    spec.validate();
    ensure_output_dir(opt.out_dir);
    const fs::path dir(opt.out_dir);

    GeneratedCohort g = generate_cohort(spec, opt.seed);
    save_cohort(g.observed, (dir / "cohort.csv").string(), (dir / "schema.json").string());
    save_cohort(g.complete, (dir / "complete.csv").string(),
                (dir / "complete_schema.json").string());
    write_json_file(nlohmann::json{{"seed", opt.seed}, {"spec", spec}},
                    (dir / "truth.json").string());

    std::size_t missing = 0, cells = 0;
    for (const auto& row : g.observed.cells)
        for (const auto& cell : row) {
            ++cells;
            if (cell.empty()) ++missing;
        }
    log << "wrote " << g.observed.n_rows() << " patients, " << g.observed.n_cols()
        << " predictors, " << missing << "/" << cells << " cells missing\n";
    return 0;
}

namespace {

std::string percent(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * v);
    return buf;
}

std::string raw(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

// accept both ">3" and the bare "3" on the command line
std::string as_threshold_label(const std::string& s) {
    if (!s.empty() && s.front() != '>') return ">" + s;
    return s;
}

} // namespace

int cmd_report(const ReportOptions& opt, std::ostream& out) {
    ThresholdProfile profile;
    if (!opt.profile.empty()) {
        if (!opt.model_path.empty())
            throw ConfigError("report takes either --profile or --model, not both");
        if (opt.profile.size() != 6)
            throw ConfigError("--profile needs exactly six probabilities");
        std::copy(opt.profile.begin(), opt.profile.end(), profile.q.begin());
        profile.validate();
    } else {
        if (opt.model_path.empty() || opt.cohort_csv.empty() || opt.schema_json.empty() ||
            opt.patient_id.empty())
            throw ConfigError(
                "report needs --profile, or --model with --cohort, --schema and --patient");
        ModelBundle model = load_model(opt.model_path);
        CohortTable cohort = load_cohort(opt.cohort_csv, opt.schema_json);
        auto it = std::find(cohort.ids.begin(), cohort.ids.end(), opt.patient_id);
        if (it == cohort.ids.end())
            throw ConfigError("patient " + opt.patient_id + " is not in the cohort");
        profile = model.predict_row(cohort,
                                    static_cast<std::size_t>(it - cohort.ids.begin()));
    }

    const auto& labels = OutcomeScale::threshold_labels();
    int lower = OutcomeScale::threshold_index(
        opt.lower.empty() ? labels[0] : as_threshold_label(opt.lower));
    std::vector<int> higher;
    for (const auto& h : opt.higher) {
        int t = OutcomeScale::threshold_index(as_threshold_label(h));
        if (t <= lower)
            throw ConfigError("threshold " + h + " does not lie above " +
                              labels[static_cast<std::size_t>(lower)]);
        higher.push_back(t);
    }

    if (opt.as_json) {
        nlohmann::json j{{"profile", profile},
                         {"lower", labels[static_cast<std::size_t>(lower)]},
                         {"unconditional", profile.q[static_cast<std::size_t>(lower)]}};
        nlohmann::json chain = nlohmann::json::array();
        for (int t : higher) {
            nlohmann::json entry{{"higher", labels[static_cast<std::size_t>(t)]},
                                 {"given", labels[static_cast<std::size_t>(lower)]}};
            try {
                entry["probability"] = conditional_exceedance(profile, lower, t);
            } catch (const ZeroDenominator&) {
                entry["undefined"] = true;
            }
            chain.push_back(std::move(entry));
        }
        j["conditionals"] = std::move(chain);
        out << j.dump(2) << '\n';
        return 0;
    }

    out << "Threshold profile:\n";
    for (int t = 0; t < OutcomeScale::n_thresholds; ++t)
        out << "  Pr(" << labels[static_cast<std::size_t>(t)]
            << ") = " << percent(profile.q[static_cast<std::size_t>(t)]) << " ("
            << raw(profile.q[static_cast<std::size_t>(t)]) << ")\n";

    const std::string& low_label = labels[static_cast<std::size_t>(lower)];
    if (higher.empty()) {
        out << "Unconditional:\n  Pr(" << low_label
            << ") = " << percent(profile.q[static_cast<std::size_t>(lower)]) << " ("
            << raw(profile.q[static_cast<std::size_t>(lower)]) << ")\n";
        return 0;
    }
    out << "Conditional on " << low_label << ":\n";
    for (int t : higher) {
        const std::string& high_label = labels[static_cast<std::size_t>(t)];
        try {
            double c = conditional_exceedance(profile, lower, t);
            out << "  Pr(" << high_label << " | " << low_label << ") = " << percent(c) << " ("
                << raw(c) << ")\n";
        } catch (const ZeroDenominator&) {
            out << "  Pr(" << high_label << " | " << low_label << ") = [undefined: Pr("
                << low_label << ") = 0]\n";
        }
    }
    return 0;
}

int cmd_importance(const ImportanceOptions& opt, std::ostream& log) {
    if (opt.model_path.empty() || opt.cohort_csv.empty() || opt.schema_json.empty() ||
        opt.out_dir.empty())
        throw ConfigError("importance needs --model, --cohort, --schema and --out");
    ModelBundle model = load_model(opt.model_path);
    if (!is_token_kind(model.kind))
        throw ConfigError("importance needs a token model (apm_mn or apm_or)");
    CohortTable cohort = load_cohort(opt.cohort_csv, opt.schema_json);
    if (cohort.n_rows() == 0) throw EmptyTrainingSet("importance: empty cohort");
    ensure_output_dir(opt.out_dir);

    HeadKind head = model.apm.config().head;
    const int n_nodes =
        head == HeadKind::multinomial ? OutcomeScale::n_categories : OutcomeScale::n_thresholds;

    std::vector<TokenAttribution> attributions(cohort.n_rows());
    std::size_t n_exact = 0;
    for (std::size_t r = 0; r < cohort.n_rows(); ++r) {
        TokenAttribution a;
        a.patient = cohort.ids[r];
        a.tokens = model.encode_tokens(cohort, r);
        const bool exact = a.tokens.size() <= 12;
        if (!exact && opt.permutations < 1)
            throw ConfigError("patient " + a.patient + " carries " +
                              std::to_string(a.tokens.size()) +
                              " tokens; sampling needs --permutations >= 1");
        if (exact) ++n_exact;
        a.abs_phi.resize(static_cast<Eigen::Index>(a.tokens.size()), n_nodes);
        for (int node = 0; node < n_nodes; ++node) {
            std::vector<double> phi =
                exact ? exact_shapley(model.apm, a.tokens, node)
                      : sampled_shapley(model.apm, a.tokens, node, opt.permutations,
                                        SeedSequence(opt.seed)
                                            .with("shapley")
                                            .with(r)
                                            .with(static_cast<std::uint64_t>(node))
                                            .seed());
            for (std::size_t i = 0; i < phi.size(); ++i)
                a.abs_phi(static_cast<Eigen::Index>(i), node) = std::fabs(phi[i]);
        }
        attributions[r] = std::move(a);
    }

    ImportanceTable table = aggregate_importance({attributions}, model.dictionary, head);
    const fs::path dir(opt.out_dir);
    save_importance_csv((dir / "importance.csv").string(), table);

    auto ranked = [](const std::map<std::string, double>& scores) {
        std::vector<std::pair<std::string, double>> v(scores.begin(), scores.end());
        std::stable_sort(v.begin(), v.end(),
                         [](const auto& a, const auto& b) { return a.second > b.second; });
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& [name, score] : v) arr.push_back({{"name", name}, {"score", score}});
        return arr;
    };
    write_json_file(nlohmann::json{{"family", to_string(model.kind)},
                                   {"predictors", ranked(table.predictor_score)},
                                   {"tokens", ranked(table.token_score)}},
                    (dir / "importance.json").string());

    log << "attributed " << cohort.n_rows() << " patients (" << n_exact << " by enumeration, "
        << cohort.n_rows() - n_exact << " by sampling)\n";
    return 0;
}

} // namespace ordinal
