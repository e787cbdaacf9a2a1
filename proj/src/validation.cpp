#include "ordinal/validation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "ordinal/csv.hpp"
#include "ordinal/errors.hpp"
#include "ordinal/rng.hpp"
#include "ordinal/stats.hpp"

namespace ordinal {

namespace {

void check_id_labels(const std::vector<std::string>& ids, const std::vector<int>& labels) {
    if (ids.size() != labels.size())
        throw DimensionMismatch("partitioning: ids and labels differ in length");
    if (ids.empty()) throw EmptyTrainingSet("partitioning: no patients");
    std::unordered_set<std::string> seen;
    for (const auto& id : ids)
        if (!seen.insert(id).second) throw DegenerateInput("partitioning: duplicate id " + id);
    for (int y : labels)
        if (y < 0 || y >= OutcomeScale::n_categories)
            throw UnknownCategory("partitioning: label out of range");
}

std::array<std::vector<std::size_t>, 7> members_by_class(const std::vector<int>& labels) {
    std::array<std::vector<std::size_t>, 7> members;
    for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(i);
    return members;
}

} // namespace

std::vector<PartitionPlan> stratified_repeated_kfold(const std::vector<std::string>& ids,
                                                     const std::vector<int>& labels, int repeats,
                                                     int folds, std::uint64_t seed) {
    check_id_labels(ids, labels);
    if (repeats < 1 || folds < 2)
        throw ConfigError("stratified_repeated_kfold: need repeats >= 1 and folds >= 2");
    auto members = members_by_class(labels);
    for (int k = 0; k < 7; ++k)
        if (!members[k].empty() && static_cast<int>(members[k].size()) < folds)
            throw TooFewPerClass("stratified_repeated_kfold: category " +
                                 OutcomeScale::category_labels()[k] + " has " +
                                 std::to_string(members[k].size()) + " patients but needs >= " +
                                 std::to_string(folds));

    std::vector<PartitionPlan> plans;
    plans.reserve(static_cast<std::size_t>(repeats) * folds);

    for (int r = 0; r < repeats; ++r) {
        Rng rng(derive_seed(seed, "kfold", static_cast<std::uint64_t>(r)));
        std::vector<int> fold_of(ids.size(), -1);
        int offset = 0; // rotates which folds receive each class's remainder
        for (int k = 0; k < 7; ++k) {
            std::vector<std::size_t> rows = members[k];
            if (rows.empty()) continue;
            rng.shuffle(rows);
            const int n = static_cast<int>(rows.size());
            const int base = n / folds, extra = n % folds;
            std::vector<int> size_of(folds, base);
            for (int e = 0; e < extra; ++e) ++size_of[(offset + e) % folds];
            offset = (offset + extra) % folds;
            std::size_t pos = 0;
            for (int f = 0; f < folds; ++f)
                for (int c = 0; c < size_of[f]; ++c) fold_of[rows[pos++]] = f;
        }
        for (int f = 0; f < folds; ++f) {
            PartitionPlan plan;
            plan.repeat = r;
            plan.fold = f;
            for (std::size_t i = 0; i < ids.size(); ++i)
                (fold_of[i] == f ? plan.test_ids : plan.train_ids).push_back(ids[i]);
            plans.push_back(std::move(plan));
        }
    }
    return plans;
}

std::pair<std::vector<std::string>, std::vector<std::string>> stratified_shuffle_split(
    const std::vector<std::string>& ids, const std::vector<int>& labels, double fraction,
    std::uint64_t seed) {
    check_id_labels(ids, labels);
    if (!(fraction > 0.0 && fraction < 1.0))
        throw ConfigError("stratified_shuffle_split: fraction must be in (0, 1)");
    auto members = members_by_class(labels);

    // largest-remainder apportionment of the held-out count across classes
    const double n = static_cast<double>(ids.size());
    int target = static_cast<int>(std::lround(fraction * n));
    std::array<int, 7> take{};
    std::vector<std::pair<double, int>> rema;
    int assigned = 0;
    for (int k = 0; k < 7; ++k) {
        double quota = fraction * static_cast<double>(members[k].size());
        take[k] = static_cast<int>(std::floor(quota));
        assigned += take[k];
        rema.push_back({quota - std::floor(quota), k});
    }
    std::stable_sort(rema.begin(), rema.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (int i = 0; assigned < target && i < 7; ++i) {
        int k = rema[i].second;
        if (take[k] + 1 < static_cast<int>(members[k].size())) {
            ++take[k];
            ++assigned;
        }
    }
    // never empty a class out of the main part
    for (int k = 0; k < 7; ++k)
        if (!members[k].empty() && take[k] >= static_cast<int>(members[k].size()))
            take[k] = static_cast<int>(members[k].size()) - 1;

    Rng rng(derive_seed(seed, "shuffle-split"));
    std::vector<char> held(ids.size(), 0);
    for (int k = 0; k < 7; ++k) {
        std::vector<std::size_t> rows = members[k];
        if (rows.empty()) continue;
        rng.shuffle(rows);
        for (int c = 0; c < take[k]; ++c) held[rows[static_cast<std::size_t>(c)]] = 1;
    }
    std::vector<std::string> main_ids, held_ids;
    for (std::size_t i = 0; i < ids.size(); ++i)
        (held[i] ? held_ids : main_ids).push_back(ids[i]);
    return {std::move(main_ids), std::move(held_ids)};
}

// --- prediction pools ------------------------------------------------------------

PredictionSet PredictionPool::to_set() const {
    PredictionSet set;
    set.profiles.reserve(entries.size());
    set.labels.reserve(entries.size());
    for (const auto& e : entries) {
        set.profiles.push_back(e.profile);
        set.labels.push_back(e.label);
    }
    return set;
}

std::vector<std::string> PredictionPool::patients() const {
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    for (const auto& e : entries)
        if (seen.insert(e.patient).second) out.push_back(e.patient);
    return out;
}

void save_pools_csv(const std::string& path,
                    const std::vector<std::pair<std::string, PredictionPool>>& pools) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write pooled predictions: " + path);
    out.precision(17);
    write_csv_row(out, {"config_id", "patient_id", "repeat", "q1", "q2", "q3", "q4", "q5", "q6",
                        "true_category"});
    for (const auto& [config_id, pool] : pools) {
        for (const auto& e : pool.entries) {
            std::vector<std::string> row{config_id, e.patient, std::to_string(e.repeat)};
            for (double q : e.profile.q) {
                char buf[32];
                std::snprintf(buf, sizeof buf, "%.17g", q);
                row.push_back(buf);
            }
            row.push_back(OutcomeScale::category_labels()[e.label]);
            write_csv_row(out, row);
        }
    }
}

std::vector<std::pair<std::string, PredictionPool>> load_pools_csv(const std::string& path) {
    auto rows = read_csv_file(path);
    if (rows.empty()) throw IoError("pooled predictions file is empty: " + path);
    const std::vector<std::string> expect{"config_id", "patient_id", "repeat", "q1", "q2",
                                          "q3",        "q4",         "q5",     "q6", "true_category"};
    if (rows.front() != expect)
        throw IoError("pooled predictions file has an unexpected header: " + path);

    std::vector<std::pair<std::string, PredictionPool>> pools;
    std::unordered_map<std::string, std::size_t> where;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& row = rows[i];
        if (row.size() != expect.size())
            throw IoError("pooled predictions row " + std::to_string(i) + " has wrong width");
        auto it = where.find(row[0]);
        if (it == where.end()) {
            where.emplace(row[0], pools.size());
            pools.push_back({row[0], {}});
            it = where.find(row[0]);
        }
        PooledPrediction e;
        e.patient = row[1];
        e.repeat = std::stoi(row[2]);
        for (int t = 0; t < 6; ++t) e.profile.q[t] = std::stod(row[3 + t]);
        e.label = OutcomeScale::category_index(row[9]);
        pools[it->second].second.entries.push_back(std::move(e));
    }
    return pools;
}

void to_json(nlohmann::json& j, const MetricReport& r) {
    j = nlohmann::json{{"metric", r.metric},
                       {"estimate", r.estimate},
                       {"ci_low", r.ci_low},
                       {"ci_high", r.ci_high},
                       {"n_resamples", r.n_resamples},
                       {"n_skipped", r.n_skipped}};
    if (r.threshold) j["threshold"] = OutcomeScale::threshold_labels()[*r.threshold];
}

void from_json(const nlohmann::json& j, MetricReport& r) {
    r.metric = j.at("metric").get<std::string>();
    r.estimate = j.at("estimate").get<double>();
    r.ci_low = j.at("ci_low").get<double>();
    r.ci_high = j.at("ci_high").get<double>();
    r.n_resamples = j.at("n_resamples").get<int>();
    r.n_skipped = j.value("n_skipped", 0);
    if (j.contains("threshold"))
        r.threshold = OutcomeScale::threshold_index(j.at("threshold").get<std::string>());
}

// --- bootstrap machinery -----------------------------------------------------------

namespace {

struct PoolIndex {
    std::vector<std::string> patients;
    std::vector<std::vector<std::size_t>> entries_of; // entry rows per patient
};

PoolIndex index_pool(const PredictionPool& pool) {
    if (pool.entries.empty()) throw EmptyTrainingSet("bootstrap: empty prediction pool");
    PoolIndex idx;
    std::unordered_map<std::string, std::size_t> where;
    for (std::size_t e = 0; e < pool.entries.size(); ++e) {
        const auto& id = pool.entries[e].patient;
        auto it = where.find(id);
        if (it == where.end()) {
            where.emplace(id, idx.patients.size());
            idx.patients.push_back(id);
            idx.entries_of.push_back({e});
        } else {
            idx.entries_of[it->second].push_back(e);
        }
    }
    return idx;
}

PredictionSet gather(const PredictionPool& pool, const PoolIndex& idx,
                     const std::vector<std::size_t>& patient_rows) {
    PredictionSet set;
    for (std::size_t p : patient_rows) {
        for (std::size_t e : idx.entries_of[p]) {
            set.profiles.push_back(pool.entries[e].profile);
            set.labels.push_back(pool.entries[e].label);
        }
    }
    return set;
}

MetricReport summarise(const std::string& name, std::vector<double> values, int skipped) {
    MetricReport report;
    report.metric = name;
    report.n_resamples = static_cast<int>(values.size());
    report.n_skipped = skipped;
    if (values.empty())
        throw DegenerateInput("bootstrap: every resample was degenerate for metric " + name);
    report.estimate = mean(values);
    report.ci_low = quantile(values, 0.025);
    report.ci_high = quantile(values, 0.975);
    return report;
}

} // namespace

MetricReport bootstrap_ci(const PredictionPool& pool, const MetricFn& metric,
                          const std::string& metric_name, int n_resamples, std::uint64_t seed,
                          BootstrapMode mode) {
    if (n_resamples < 1) throw ConfigError("bootstrap_ci: need at least one resample");
    PoolIndex idx = index_pool(pool);
    const std::size_t n = idx.patients.size();
    Rng rng(derive_seed(seed, "resample"));

    std::vector<double> values;
    values.reserve(n_resamples);
    int skipped = 0;
    std::vector<std::size_t> draw(n);
    std::vector<char> in_bag(n);
    for (int b = 0; b < n_resamples; ++b) {
        std::fill(in_bag.begin(), in_bag.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            draw[i] = rng.index(n);
            in_bag[draw[i]] = 1;
        }
        std::vector<std::size_t> rows;
        if (mode == BootstrapMode::in_bag) {
            rows = draw;
        } else {
            for (std::size_t p = 0; p < n; ++p)
                if (!in_bag[p]) rows.push_back(p);
            if (rows.empty()) {
                ++skipped;
                continue;
            }
        }
        try {
            values.push_back(metric(gather(pool, idx, rows)));
        } catch (const Error&) {
            ++skipped;
        }
    }
    return summarise(metric_name, std::move(values), skipped);
}

BbcResult bbc_select(const std::vector<PredictionPool>& pools, const MetricFn& metric,
                     const std::string& metric_name, int n_resamples, std::uint64_t seed) {
    if (pools.empty()) throw ConfigError("bbc_select: no configurations");
    if (n_resamples < 1) throw ConfigError("bbc_select: need at least one resample");
    std::vector<PoolIndex> idx;
    idx.reserve(pools.size());
    for (const auto& pool : pools) idx.push_back(index_pool(pool));
    const std::size_t n = idx.front().patients.size();
    for (const auto& i : idx)
        if (i.patients.size() != n)
            throw DimensionMismatch("bbc_select: configurations cover different patient sets");

    // configuration chosen on the full pooled data
    BbcResult result;
    double best_full = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < pools.size(); ++c) {
        double v = metric(pools[c].to_set());
        if (v > best_full) {
            best_full = v;
            result.chosen = c;
        }
    }

    Rng rng(derive_seed(seed, "resample"));
    std::vector<double> values;
    values.reserve(n_resamples);
    int skipped = 0;
    std::vector<std::size_t> draw(n);
    std::vector<char> in_bag(n);
    for (int b = 0; b < n_resamples; ++b) {
        std::fill(in_bag.begin(), in_bag.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            draw[i] = rng.index(n);
            in_bag[draw[i]] = 1;
        }
        std::vector<std::size_t> oob;
        for (std::size_t p = 0; p < n; ++p)
            if (!in_bag[p]) oob.push_back(p);
        if (oob.empty()) {
            ++result.n_empty_out_of_bag;
            continue;
        }
        try {
            // winner on the in-bag patients, scored on the out-of-bag patients
            std::size_t winner = 0;
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < pools.size(); ++c) {
                double v = metric(gather(pools[c], idx[c], draw));
                if (v > best) {
                    best = v;
                    winner = c;
                }
            }
            values.push_back(metric(gather(pools[winner], idx[winner], oob)));
        } catch (const Error&) {
            ++skipped;
        }
    }
    result.report = summarise(metric_name, std::move(values), skipped);
    return result;
}

std::vector<std::size_t> bbcd_dropout(const std::vector<PredictionPool>& pools,
                                      const MetricFn& metric, double alpha, int n_resamples,
                                      std::uint64_t seed) {
    if (pools.empty()) throw ConfigError("bbcd_dropout: no configurations");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("bbcd_dropout: alpha must be in (0, 1]");
    if (n_resamples < 1) throw ConfigError("bbcd_dropout: need at least one resample");
    std::vector<PoolIndex> idx;
    idx.reserve(pools.size());
    for (const auto& pool : pools) idx.push_back(index_pool(pool));
    const std::size_t n = idx.front().patients.size();
    for (const auto& i : idx)
        if (i.patients.size() != n)
            throw DimensionMismatch("bbcd_dropout: configurations cover different patient sets");

    // the optimum on the full pooled data always survives
    std::size_t optimal = 0;
    double best_full = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < pools.size(); ++c) {
        double v = metric(pools[c].to_set());
        if (v > best_full) {
            best_full = v;
            optimal = c;
        }
    }

    Rng rng(derive_seed(seed, "resample"));
    std::vector<int> wins(pools.size(), 0);
    int effective = 0;
    std::vector<std::size_t> draw(n);
    for (int b = 0; b < n_resamples; ++b) {
        for (std::size_t i = 0; i < n; ++i) draw[i] = rng.index(n);
        double opt_value;
        try {
            opt_value = metric(gather(pools[optimal], idx[optimal], draw));
        } catch (const Error&) {
            continue; // resample unusable even for the optimum; skip entirely
        }
        ++effective;
        for (std::size_t c = 0; c < pools.size(); ++c) {
            if (c == optimal) {
                ++wins[c];
                continue;
            }
            try {
                if (metric(gather(pools[c], idx[c], draw)) >= opt_value) ++wins[c];
            } catch (const Error&) {
                // undefined counts as a loss for this configuration
            }
        }
    }
    if (effective == 0) throw DegenerateInput("bbcd_dropout: every resample was degenerate");

    const double needed = alpha * static_cast<double>(effective);
    std::vector<std::size_t> survivors;
    for (std::size_t c = 0; c < pools.size(); ++c)
        if (c == optimal || static_cast<double>(wins[c]) >= needed) survivors.push_back(c);
    return survivors;
}

// --- hyperparameter grid --------------------------------------------------------------

GridProfile grid_profile_from_string(const std::string& s) {
    if (s == "paper") return GridProfile::paper;
    if (s == "desk") return GridProfile::desk;
    throw ConfigError("unknown grid profile: " + s);
}

std::string to_string(GridProfile p) { return p == GridProfile::paper ? "paper" : "desk"; }

std::vector<MlpConfig> build_grid(GridProfile profile, HeadKind head) {
    const std::vector<int> widths =
        profile == GridProfile::paper ? std::vector<int>{128, 256, 512} : std::vector<int>{8, 16, 32};
    const int max_depth = profile == GridProfile::paper ? 6 : 3;
    const std::array<double, 2> dropouts{0.0, 0.2};

    std::vector<MlpConfig> grid;
    for (int depth = 1; depth <= max_depth; ++depth) {
        // odometer over width choices, leftmost layer slowest
        std::vector<std::size_t> pick(depth, 0);
        while (true) {
            for (double dropout : dropouts) {
                MlpConfig cfg;
                cfg.widths.reserve(depth);
                for (int l = 0; l < depth; ++l) cfg.widths.push_back(widths[pick[l]]);
                cfg.dropout = dropout;
                cfg.head = head;
                grid.push_back(std::move(cfg));
            }
            int pos = depth - 1;
            while (pos >= 0 && ++pick[pos] == widths.size()) {
                pick[pos] = 0;
                --pos;
            }
            if (pos < 0) break;
        }
    }
    return grid;
}

} // namespace ordinal
