#include "ordinal/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ordinal/errors.hpp"

namespace ordinal {

std::vector<double> one_hot(const PredictorSpec& spec, const std::string& value) {
    if (spec.kind != PredictorKind::categorical)
        throw ConfigError("one_hot: predictor " + spec.name + " is not categorical");
    auto it = std::find(spec.levels.begin(), spec.levels.end(), value);
    if (it == spec.levels.end())
        throw UnknownCategory("one_hot: '" + value + "' is not a level of " + spec.name);
    std::vector<double> v(spec.levels.size(), 0.0);
    v[static_cast<std::size_t>(it - spec.levels.begin())] = 1.0;
    return v;
}

StandardScaler StandardScaler::fit(const Eigen::MatrixXd& X) {
    if (X.rows() == 0) throw EmptyTrainingSet("StandardScaler: no rows");
    StandardScaler s;
    s.mean = X.colwise().mean();
    s.scale.resize(X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        double var = (X.col(j).array() - s.mean(j)).square().mean();
        double sd = std::sqrt(var);
        s.scale(j) = sd > 0.0 ? sd : 1.0;
    }
    return s;
}

Eigen::MatrixXd StandardScaler::transform(const Eigen::MatrixXd& X) const {
    if (X.cols() != mean.size())
        throw DimensionMismatch("StandardScaler: column count mismatch");
    return (X.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
}

void to_json(nlohmann::json& j, const StandardScaler& s) {
    j = nlohmann::json{{"mean", std::vector<double>(s.mean.begin(), s.mean.end())},
                       {"scale", std::vector<double>(s.scale.begin(), s.scale.end())}};
}

void from_json(const nlohmann::json& j, StandardScaler& s) {
    auto m = j.at("mean").get<std::vector<double>>();
    auto sc = j.at("scale").get<std::vector<double>>();
    s.mean = Eigen::Map<Eigen::VectorXd>(m.data(), static_cast<Eigen::Index>(m.size()));
    s.scale = Eigen::Map<Eigen::VectorXd>(sc.data(), static_cast<Eigen::Index>(sc.size()));
}

// --- design encoder ----------------------------------------------------------

DesignEncoder DesignEncoder::fit(const CohortTable& train) {
    if (train.n_rows() == 0) throw EmptyTrainingSet("DesignEncoder: empty training table");
    DesignEncoder enc;
    enc.predictors_ = train.predictors;
    for (const auto& spec : enc.predictors_)
        if (spec.kind == PredictorKind::text)
            throw ConfigError("DesignEncoder: free-text predictor " + spec.name +
                              " cannot enter a tabular design matrix");

    Eigen::MatrixXd cont = enc.raw_matrix(train);
    enc.scaler_ = cont.cols() > 0 ? StandardScaler::fit(cont) : StandardScaler{};

    for (const auto& spec : enc.predictors_)
        if (spec.kind == PredictorKind::continuous) enc.names_.push_back(spec.name);
    for (const auto& spec : enc.predictors_)
        if (spec.kind == PredictorKind::categorical)
            for (std::size_t l = 1; l < spec.levels.size(); ++l)
                enc.names_.push_back(spec.name + "=" + spec.levels[l]);
    return enc;
}

Eigen::MatrixXd DesignEncoder::raw_matrix(const CohortTable& table) const {
    std::vector<std::size_t> cont_cols;
    for (std::size_t j = 0; j < predictors_.size(); ++j)
        if (predictors_[j].kind == PredictorKind::continuous) cont_cols.push_back(j);
    Eigen::MatrixXd X(table.n_rows(), cont_cols.size());
    for (std::size_t i = 0; i < table.n_rows(); ++i)
        for (std::size_t jj = 0; jj < cont_cols.size(); ++jj) {
            auto v = table.numeric(i, cont_cols[jj]);
            if (!v)
                throw DegenerateInput("design matrix requires a complete table; " +
                                      predictors_[cont_cols[jj]].name + " is missing in row " +
                                      std::to_string(i));
            X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(jj)) = *v;
        }
    return X;
}

Eigen::MatrixXd DesignEncoder::transform(const CohortTable& table) const {
    if (table.predictors.size() != predictors_.size())
        throw DimensionMismatch("DesignEncoder: table has a different predictor set");
    for (std::size_t j = 0; j < predictors_.size(); ++j)
        if (table.predictors[j].name != predictors_[j].name)
            throw DimensionMismatch("DesignEncoder: predictor order differs from training");

    Eigen::MatrixXd cont = raw_matrix(table);
    if (cont.cols() > 0) cont = scaler_.transform(cont);

    Eigen::MatrixXd X(table.n_rows(), names_.size());
    X.leftCols(cont.cols()) = cont;
    Eigen::Index col = cont.cols();
    for (std::size_t j = 0; j < predictors_.size(); ++j) {
        const auto& spec = predictors_[j];
        if (spec.kind != PredictorKind::categorical) continue;
        for (std::size_t i = 0; i < table.n_rows(); ++i) {
            const std::string& cell = table.cells[i][j];
            if (cell.empty())
                throw DegenerateInput("design matrix requires a complete table; " + spec.name +
                                      " is missing in row " + std::to_string(i));
            auto it = std::find(spec.levels.begin(), spec.levels.end(), cell);
            if (it == spec.levels.end())
                throw UnknownCategory("design matrix: '" + cell + "' is not a level of " +
                                      spec.name);
            std::size_t level = static_cast<std::size_t>(it - spec.levels.begin());
            for (std::size_t l = 1; l < spec.levels.size(); ++l)
                X(static_cast<Eigen::Index>(i), col + static_cast<Eigen::Index>(l - 1)) =
                    level == l ? 1.0 : 0.0;
        }
        col += static_cast<Eigen::Index>(spec.levels.size() - 1);
    }
    return X;
}

void to_json(nlohmann::json& j, const DesignEncoder& e) {
    nlohmann::json preds = nlohmann::json::array();
    for (const auto& spec : e.predictors_) {
        nlohmann::json p{{"name", spec.name}, {"kind", to_string(spec.kind)}};
        if (spec.kind == PredictorKind::categorical) p["levels"] = spec.levels;
        preds.push_back(std::move(p));
    }
    j = nlohmann::json{{"predictors", std::move(preds)},
                       {"scaler", e.scaler_},
                       {"columns", e.names_}};
}

void from_json(const nlohmann::json& j, DesignEncoder& e) {
    e.predictors_.clear();
    for (const auto& p : j.at("predictors")) {
        PredictorSpec spec;
        spec.name = p.at("name").get<std::string>();
        spec.kind = predictor_kind_from_string(p.at("kind").get<std::string>());
        if (p.contains("levels")) spec.levels = p.at("levels").get<std::vector<std::string>>();
        e.predictors_.push_back(std::move(spec));
    }
    e.scaler_ = j.at("scaler").get<StandardScaler>();
    e.names_ = j.at("columns").get<std::vector<std::string>>();
}

// --- predictive mean matching -------------------------------------------------

namespace {

constexpr double kRidge = 1e-8; // numerical stabiliser for the internal regressions

bool pmm_eligible(const PredictorSpec& spec) { return spec.kind != PredictorKind::text; }

// least-squares fit of Y on [1, X] with a small ridge penalty
Eigen::MatrixXd ridge_solve(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) {
    Eigen::MatrixXd Xi(X.rows(), X.cols() + 1);
    Xi.col(0).setOnes();
    Xi.rightCols(X.cols()) = X;
    Eigen::MatrixXd G = Xi.transpose() * Xi;
    G.diagonal().array() += kRidge;
    return G.ldlt().solve(Xi.transpose() * Y);
}

Eigen::RowVectorXd predict_scores(const Eigen::MatrixXd& coef, const Eigen::RowVectorXd& x) {
    Eigen::RowVectorXd xi(x.size() + 1);
    xi(0) = 1.0;
    xi.rightCols(x.size()) = x;
    return xi * coef;
}

} // namespace

double PmmImputer::numeric_value(const PredictorSpec& spec, const std::string& cell) const {
    if (spec.kind == PredictorKind::continuous) return std::stod(cell);
    auto it = std::find(spec.levels.begin(), spec.levels.end(), cell);
    if (it == spec.levels.end())
        throw UnknownCategory("pmm: '" + cell + "' is not a level of " + spec.name);
    return static_cast<double>(it - spec.levels.begin());
}

Eigen::RowVectorXd PmmImputer::predictor_row(const Eigen::RowVectorXd& numeric_row,
                                             std::size_t skip) const {
    Eigen::RowVectorXd x(numeric_row.size() - 1);
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < numeric_row.size(); ++j)
        if (j != static_cast<Eigen::Index>(skip)) x(k++) = numeric_row(j);
    return x;
}

std::size_t PmmImputer::draw_donor(const ColumnModel& model, const Eigen::RowVectorXd& score,
                                   Rng& rng) const {
    const std::size_t n = static_cast<std::size_t>(model.donor_scores.rows());
    std::vector<std::pair<double, std::size_t>> dist(n);
    for (std::size_t r = 0; r < n; ++r)
        dist[r] = {(model.donor_scores.row(static_cast<Eigen::Index>(r)) - score).squaredNorm(), r};
    // full sort with index tie-break keeps donor choice deterministic
    std::sort(dist.begin(), dist.end());
    std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(cfg_.donors), n);
    return dist[rng.index(k)].second;
}

PmmImputer PmmImputer::fit(const CohortTable& train, const PmmConfig& cfg, Rng& rng) {
    if (train.n_rows() == 0) throw EmptyTrainingSet("pmm: empty training table");
    if (cfg.donors < 1 || cfg.sweeps < 1) throw ConfigError("pmm: donors and sweeps must be >= 1");

    PmmImputer imp;
    imp.cfg_ = cfg;
    imp.predictors_ = train.predictors;

    const std::size_t n = train.n_rows();
    const std::size_t p = train.n_cols();
    std::vector<std::size_t> pmm_cols;
    for (std::size_t j = 0; j < p; ++j)
        if (pmm_eligible(train.predictors[j])) pmm_cols.push_back(j);

    // observed rows per pmm column, donor-count guard
    std::vector<std::vector<std::size_t>> observed(p);
    for (std::size_t j : pmm_cols) {
        for (std::size_t i = 0; i < n; ++i)
            if (!train.is_missing(i, j)) observed[j].push_back(i);
        if (static_cast<int>(observed[j].size()) < cfg.donors)
            throw InsufficientDonors("pmm: column " + train.predictors[j].name + " has " +
                                     std::to_string(observed[j].size()) +
                                     " observed values but needs at least " +
                                     std::to_string(cfg.donors));
    }

    // numeric working matrix over the pmm columns, initialised by random
    // draws from each column's observed values
    Eigen::MatrixXd M(n, pmm_cols.size());
    std::vector<std::vector<std::size_t>> missing(pmm_cols.size());
    for (std::size_t cc = 0; cc < pmm_cols.size(); ++cc) {
        std::size_t j = pmm_cols[cc];
        const auto& spec = train.predictors[j];
        for (std::size_t i = 0; i < n; ++i) {
            if (train.is_missing(i, j)) {
                missing[cc].push_back(i);
                std::size_t pick = observed[j][rng.index(observed[j].size())];
                M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(cc)) =
                    imp.numeric_value(spec, train.cells[pick][j]);
            } else {
                M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(cc)) =
                    imp.numeric_value(spec, train.cells[i][j]);
            }
        }
    }

    auto fit_column = [&](std::size_t cc) {
        std::size_t j = pmm_cols[cc];
        const auto& spec = train.predictors[j];
        const auto& obs = observed[j];
        const bool cat = spec.kind == PredictorKind::categorical;
        const Eigen::Index score_dim = cat ? static_cast<Eigen::Index>(spec.levels.size()) : 1;

        Eigen::MatrixXd Xo(obs.size(), pmm_cols.size() - 1);
        Eigen::MatrixXd Yo(obs.size(), score_dim);
        for (std::size_t r = 0; r < obs.size(); ++r) {
            Xo.row(static_cast<Eigen::Index>(r)) =
                imp.predictor_row(M.row(static_cast<Eigen::Index>(obs[r])), cc);
            if (cat) {
                Yo.row(static_cast<Eigen::Index>(r)).setZero();
                Yo(static_cast<Eigen::Index>(r),
                   static_cast<Eigen::Index>(M(static_cast<Eigen::Index>(obs[r]),
                                               static_cast<Eigen::Index>(cc)))) = 1.0;
            } else {
                Yo(static_cast<Eigen::Index>(r), 0) =
                    M(static_cast<Eigen::Index>(obs[r]), static_cast<Eigen::Index>(cc));
            }
        }
        return ridge_solve(Xo, Yo);
    };

    // chained-equation sweeps over the columns
    std::vector<Eigen::MatrixXd> coefs(pmm_cols.size());
    for (int sweep = 0; sweep < cfg.sweeps; ++sweep) {
        for (std::size_t cc = 0; cc < pmm_cols.size(); ++cc) {
            std::size_t j = pmm_cols[cc];
            const auto& spec = train.predictors[j];
            coefs[cc] = fit_column(cc);
            if (missing[cc].empty()) continue;

            ColumnModel tmp;
            tmp.categorical = spec.kind == PredictorKind::categorical;
            tmp.coef = coefs[cc];
            const auto& obs = observed[j];
            tmp.donor_scores.resize(obs.size(), coefs[cc].cols());
            tmp.donor_numeric.resize(obs.size());
            for (std::size_t r = 0; r < obs.size(); ++r) {
                tmp.donor_scores.row(static_cast<Eigen::Index>(r)) = predict_scores(
                    coefs[cc], imp.predictor_row(M.row(static_cast<Eigen::Index>(obs[r])), cc));
                tmp.donor_numeric[r] =
                    M(static_cast<Eigen::Index>(obs[r]), static_cast<Eigen::Index>(cc));
            }
            for (std::size_t i : missing[cc]) {
                Eigen::RowVectorXd score = predict_scores(
                    coefs[cc], imp.predictor_row(M.row(static_cast<Eigen::Index>(i)), cc));
                std::size_t donor = imp.draw_donor(tmp, score, rng);
                M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(cc)) =
                    tmp.donor_numeric[donor];
            }
        }
    }

    // freeze per-column models with final coefficients and donor pools
    imp.columns_.resize(p);
    for (std::size_t cc = 0; cc < pmm_cols.size(); ++cc) {
        std::size_t j = pmm_cols[cc];
        const auto& spec = train.predictors[j];
        const auto& obs = observed[j];
        ColumnModel& model = imp.columns_[j];
        model.categorical = spec.kind == PredictorKind::categorical;
        model.coef = fit_column(cc);
        model.donor_scores.resize(obs.size(), model.coef.cols());
        model.donor_numeric.resize(obs.size());
        model.donor_cells.resize(obs.size());
        for (std::size_t r = 0; r < obs.size(); ++r) {
            model.donor_scores.row(static_cast<Eigen::Index>(r)) = predict_scores(
                model.coef, imp.predictor_row(M.row(static_cast<Eigen::Index>(obs[r])), cc));
            model.donor_numeric[r] =
                M(static_cast<Eigen::Index>(obs[r]), static_cast<Eigen::Index>(cc));
            model.donor_cells[r] = train.cells[obs[r]][j];
        }
    }
    return imp;
}

CohortTable PmmImputer::impute(const CohortTable& table, Rng& rng) const {
    if (table.predictors.size() != predictors_.size())
        throw DimensionMismatch("pmm: table has a different predictor set");
    for (std::size_t j = 0; j < predictors_.size(); ++j)
        if (table.predictors[j].name != predictors_[j].name)
            throw DimensionMismatch("pmm: predictor order differs from training");

    std::vector<std::size_t> pmm_cols;
    for (std::size_t j = 0; j < predictors_.size(); ++j)
        if (pmm_eligible(predictors_[j])) pmm_cols.push_back(j);

    const std::size_t n = table.n_rows();
    Eigen::MatrixXd M(n, pmm_cols.size());
    std::vector<std::vector<std::size_t>> missing(pmm_cols.size());
    for (std::size_t cc = 0; cc < pmm_cols.size(); ++cc) {
        std::size_t j = pmm_cols[cc];
        const auto& model = columns_[j];
        for (std::size_t i = 0; i < n; ++i) {
            if (table.is_missing(i, j)) {
                missing[cc].push_back(i);
                M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(cc)) =
                    model.donor_numeric[rng.index(model.donor_numeric.size())];
            } else {
                M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(cc)) =
                    numeric_value(predictors_[j], table.cells[i][j]);
            }
        }
    }

    CohortTable out = table;
    for (int sweep = 0; sweep < cfg_.sweeps; ++sweep) {
        const bool last = sweep + 1 == cfg_.sweeps;
        for (std::size_t cc = 0; cc < pmm_cols.size(); ++cc) {
            std::size_t j = pmm_cols[cc];
            const auto& model = columns_[j];
            for (std::size_t i : missing[cc]) {
                Eigen::RowVectorXd score = predict_scores(
                    model.coef, predictor_row(M.row(static_cast<Eigen::Index>(i)), cc));
                std::size_t donor = draw_donor(model, score, rng);
                M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(cc)) =
                    model.donor_numeric[donor];
                if (last) out.cells[i][j] = model.donor_cells[donor];
            }
        }
    }
    return out;
}

} // namespace ordinal
