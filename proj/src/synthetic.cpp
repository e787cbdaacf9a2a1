#include "ordinal/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "ordinal/errors.hpp"
#include "ordinal/rng.hpp"
#include "ordinal/stats.hpp"

namespace ordinal {

void SyntheticPredictor::validate() const {
    spec.validate();
    if (spec.kind == PredictorKind::text)
        throw ConfigError("synthetic: free-text predictors are not generated");
    if (spec.kind == PredictorKind::categorical) {
        if (level_probs.size() != spec.levels.size() ||
            level_effects.size() != spec.levels.size())
            throw ConfigError("synthetic: predictor " + spec.name +
                              " needs one probability and one effect per level");
        double sum = 0.0;
        for (double p : level_probs) {
            if (p < 0.0) throw ConfigError("synthetic: negative level probability in " + spec.name);
            sum += p;
        }
        if (std::fabs(sum - 1.0) > 1e-9)
            throw ConfigError("synthetic: level probabilities of " + spec.name +
                              " do not sum to 1");
    } else if (stddev <= 0.0) {
        throw ConfigError("synthetic: predictor " + spec.name + " needs a positive stddev");
    }
    if (!(missing_rate >= 0.0 && missing_rate < 1.0))
        throw ConfigError("synthetic: missing rate of " + spec.name + " must be in [0, 1)");
}

void CohortSpec::validate() const {
    if (n < 1) throw ConfigError("synthetic: cohort size must be positive");
    for (int t = 1; t < 6; ++t)
        if (!(theta[t] > theta[t - 1]))
            throw ConfigError("synthetic: theta must be strictly ascending");
    if (predictors.empty()) throw ConfigError("synthetic: no predictors");
    for (const auto& p : predictors) {
        p.validate();
        if (!p.mar_driver.empty()) {
            auto it = std::find_if(predictors.begin(), predictors.end(), [&](const auto& q) {
                return q.spec.name == p.mar_driver;
            });
            if (it == predictors.end())
                throw ConfigError("synthetic: unknown missingness driver " + p.mar_driver);
            if (it->spec.kind != PredictorKind::continuous || it->missing_rate > 0.0)
                throw ConfigError("synthetic: missingness driver " + p.mar_driver +
                                  " must be continuous and fully observed");
        }
    }
}

namespace {

std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

} // namespace

GeneratedCohort generate_cohort(const CohortSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng value_rng(derive_seed(seed, "values"));
    Rng outcome_rng(derive_seed(seed, "outcomes"));
    Rng missing_rng(derive_seed(seed, "missingness"));

    const std::size_t p = spec.predictors.size();
    GeneratedCohort out;
    out.complete.predictors.reserve(p);
    for (const auto& pred : spec.predictors) out.complete.predictors.push_back(pred.spec);
    out.observed.predictors = out.complete.predictors;

    int id_width = static_cast<int>(std::to_string(spec.n).size());

    std::vector<double> latent_z(p); // standardised continuous value per column, this row
    for (int i = 0; i < spec.n; ++i) {
        std::vector<std::string> cells(p);
        double s = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            const auto& pred = spec.predictors[j];
            if (pred.spec.kind == PredictorKind::continuous) {
                double v = value_rng.normal(pred.mean, pred.stddev);
                latent_z[j] = (v - pred.mean) / pred.stddev;
                s += pred.slope * latent_z[j];
                cells[j] = format_number(v);
            } else {
                double u = value_rng.uniform();
                std::size_t level = 0;
                double cum = 0.0;
                for (; level + 1 < pred.level_probs.size(); ++level) {
                    cum += pred.level_probs[level];
                    if (u < cum) break;
                }
                latent_z[j] = 0.0;
                s += pred.level_effects[level];
                cells[j] = pred.spec.levels[level];
            }
        }

        // ordered logit: category = number of thresholds below the noisy latent
        double u = outcome_rng.uniform();
        u = std::min(std::max(u, 1e-15), 1.0 - 1e-15);
        double z = s + logit(u);
        int category = 0;
        while (category < 6 && z > spec.theta[category]) ++category;

        std::string id = std::to_string(i + 1);
        id.insert(0, static_cast<std::size_t>(id_width) - id.size(), '0');
        id = "P" + id;

        out.complete.ids.push_back(id);
        out.complete.outcomes.push_back(category);
        out.complete.cells.push_back(cells);

        // apply missingness on a copy of the complete row
        for (std::size_t j = 0; j < p; ++j) {
            const auto& pred = spec.predictors[j];
            if (pred.missing_rate <= 0.0) continue;
            double rate = pred.missing_rate;
            if (!pred.mar_driver.empty()) {
                std::size_t dj = 0;
                while (spec.predictors[dj].spec.name != pred.mar_driver) ++dj;
                rate = sigmoid(logit(pred.missing_rate) + latent_z[dj]);
            }
            if (missing_rng.uniform() < rate) cells[j].clear();
        }
        out.observed.ids.push_back(id);
        out.observed.outcomes.push_back(category);
        out.observed.cells.push_back(std::move(cells));
    }

    out.complete.validate();
    out.observed.validate();
    return out;
}

double oracle_latent(const CohortSpec& spec, const std::vector<std::string>& cells) {
    if (cells.size() != spec.predictors.size())
        throw DimensionMismatch("oracle_latent: row width mismatch");
    double s = 0.0;
    for (std::size_t j = 0; j < cells.size(); ++j) {
        const auto& pred = spec.predictors[j];
        if (cells[j].empty())
            throw DegenerateInput("oracle_latent: row has a missing value in " + pred.spec.name);
        if (pred.spec.kind == PredictorKind::continuous) {
            double v = std::stod(cells[j]);
            s += pred.slope * (v - pred.mean) / pred.stddev;
        } else {
            auto it = std::find(pred.spec.levels.begin(), pred.spec.levels.end(), cells[j]);
            if (it == pred.spec.levels.end())
                throw UnknownCategory("oracle_latent: '" + cells[j] + "' is not a level of " +
                                      pred.spec.name);
            s += pred.level_effects[static_cast<std::size_t>(it - pred.spec.levels.begin())];
        }
    }
    return s;
}

ThresholdProfile oracle_profile(const CohortSpec& spec, const std::vector<std::string>& cells) {
    double s = oracle_latent(spec, cells);
    ThresholdProfile out;
    for (int t = 0; t < 6; ++t) out.q[t] = sigmoid(s - spec.theta[t]);
    return out;
}

void to_json(nlohmann::json& j, const CohortSpec& s) {
    nlohmann::json preds = nlohmann::json::array();
    for (const auto& p : s.predictors) {
        nlohmann::json e{{"name", p.spec.name},
                         {"kind", to_string(p.spec.kind)},
                         {"group", p.spec.group},
                         {"missing_rate", p.missing_rate}};
        if (!p.mar_driver.empty()) e["mar_driver"] = p.mar_driver;
        if (p.spec.kind == PredictorKind::categorical) {
            e["levels"] = p.spec.levels;
            e["level_probs"] = p.level_probs;
            e["level_effects"] = p.level_effects;
        } else {
            e["mean"] = p.mean;
            e["stddev"] = p.stddev;
            e["slope"] = p.slope;
        }
        preds.push_back(std::move(e));
    }
    j = nlohmann::json{{"n", s.n}, {"theta", s.theta}, {"predictors", std::move(preds)}};
}

void from_json(const nlohmann::json& j, CohortSpec& s) {
    s.n = j.at("n").get<int>();
    auto theta = j.at("theta").get<std::vector<double>>();
    if (theta.size() != 6) throw ConfigError("cohort spec: theta needs 6 entries");
    std::copy(theta.begin(), theta.end(), s.theta.begin());
    s.predictors.clear();
    for (const auto& e : j.at("predictors")) {
        SyntheticPredictor p;
        p.spec.name = e.at("name").get<std::string>();
        p.spec.kind = predictor_kind_from_string(e.at("kind").get<std::string>());
        p.spec.group = e.value("group", "concise");
        p.missing_rate = e.value("missing_rate", 0.0);
        p.mar_driver = e.value("mar_driver", std::string{});
        if (p.spec.kind == PredictorKind::categorical) {
            p.spec.levels = e.at("levels").get<std::vector<std::string>>();
            p.level_probs = e.at("level_probs").get<std::vector<double>>();
            p.level_effects = e.at("level_effects").get<std::vector<double>>();
        } else {
            p.mean = e.value("mean", 0.0);
            p.stddev = e.value("stddev", 1.0);
            p.slope = e.value("slope", 0.0);
        }
        s.predictors.push_back(std::move(p));
    }
    s.validate();
}

CohortSpec default_cohort_spec() {
    CohortSpec spec;
    spec.n = 1550;
    // cut points matching a realistic seven-category case mix at latent 0
    spec.theta = {-1.3556, -0.5151, -0.1967, 0.3930, 0.9744, 1.8070};

    auto continuous = [](std::string name, double mean, double sd, double slope, double miss,
                         std::string driver, std::string group) {
        SyntheticPredictor p;
        p.spec.name = std::move(name);
        p.spec.kind = PredictorKind::continuous;
        p.spec.group = std::move(group);
        p.mean = mean;
        p.stddev = sd;
        p.slope = slope;
        p.missing_rate = miss;
        p.mar_driver = std::move(driver);
        return p;
    };
    auto categorical = [](std::string name, std::vector<std::string> levels,
                          std::vector<double> probs, std::vector<double> effects, double miss,
                          std::string group) {
        SyntheticPredictor p;
        p.spec.name = std::move(name);
        p.spec.kind = PredictorKind::categorical;
        p.spec.levels = std::move(levels);
        p.spec.group = std::move(group);
        p.level_probs = std::move(probs);
        p.level_effects = std::move(effects);
        p.missing_rate = miss;
        return p;
    };

    // concise clinical set
    spec.predictors.push_back(continuous("Age", 47.0, 19.0, -0.55, 0.0, "", "concise"));
    spec.predictors.push_back(categorical(
        "MotorScore", {"1", "2", "3", "4", "5", "6"}, {0.18, 0.08, 0.09, 0.15, 0.30, 0.20},
        {-0.90, -0.55, -0.30, 0.0, 0.25, 0.50}, 0.05, "concise"));
    spec.predictors.push_back(categorical("Pupils", {"both", "one", "none"}, {0.70, 0.12, 0.18},
                                          {0.60, 0.0, -0.80}, 0.04, "concise"));
    spec.predictors.push_back(categorical("Hypoxia", {"no", "yes"}, {0.75, 0.25}, {0.15, -0.35},
                                          0.08, "concise"));
    spec.predictors.push_back(categorical("Hypotension", {"no", "yes"}, {0.80, 0.20},
                                          {0.20, -0.50}, 0.08, "concise"));
    spec.predictors.push_back(categorical(
        "CtClass", {"I", "II", "III", "IV", "V", "VI"}, {0.08, 0.42, 0.18, 0.10, 0.12, 0.10},
        {0.50, 0.25, -0.10, -0.45, -0.20, -0.60}, 0.06, "concise"));
    spec.predictors.push_back(continuous("Glucose", 8.0, 2.6, -0.30, 0.07, "Age", "concise"));
    spec.predictors.push_back(continuous("Haemoglobin", 13.2, 2.0, 0.20, 0.07, "Age", "concise"));

    // extended markers: strong signal beyond the concise set
    spec.predictors.push_back(categorical("MarkerAlpha", {"L1", "L2", "L3", "L4", "L5"},
                                          {0.2, 0.2, 0.2, 0.2, 0.2},
                                          {-1.10, -0.50, 0.0, 0.50, 1.10}, 0.03, "extended"));
    spec.predictors.push_back(continuous("MarkerBeta", 0.0, 1.0, 0.80, 0.03, "", "extended"));

    // token-only markers: signal visible to token models alone
    spec.predictors.push_back(categorical("MarkerGamma", {"G1", "G2", "G3", "G4"},
                                          {0.25, 0.25, 0.25, 0.25},
                                          {-1.20, -0.40, 0.40, 1.20}, 0.02, "token-only"));
    spec.predictors.push_back(continuous("MarkerDelta", 0.0, 1.0, 0.90, 0.02, "", "token-only"));

    return spec;
}

} // namespace ordinal
