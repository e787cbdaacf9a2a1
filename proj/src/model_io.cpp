#include "ordinal/model_io.hpp"

#include <fstream>

#include "ordinal/errors.hpp"

namespace ordinal {

std::string to_string(ModelKind k) {
    switch (k) {
        case ModelKind::mnlr: return "mnlr";
        case ModelKind::polr: return "polr";
        case ModelKind::deep_mn: return "deep_mn";
        case ModelKind::deep_or: return "deep_or";
        case ModelKind::apm_mn: return "apm_mn";
        case ModelKind::apm_or: return "apm_or";
    }
    throw ConfigError("unknown model kind");
}

ModelKind model_kind_from_string(const std::string& s) {
    if (s == "mnlr") return ModelKind::mnlr;
    if (s == "polr") return ModelKind::polr;
    if (s == "deep_mn") return ModelKind::deep_mn;
    if (s == "deep_or") return ModelKind::deep_or;
    if (s == "apm_mn") return ModelKind::apm_mn;
    if (s == "apm_or") return ModelKind::apm_or;
    throw ConfigError("unknown model kind '" + s + "'");
}

bool is_token_kind(ModelKind k) { return k == ModelKind::apm_mn || k == ModelKind::apm_or; }

bool is_network_kind(ModelKind k) { return is_token_kind(k) || k == ModelKind::deep_mn ||
                                           k == ModelKind::deep_or; }

namespace {

// a scoring table may carry extra columns (e.g. the full cohort behind a
// concise-set model); keep the model's predictors, in training order
CohortTable project_columns(const std::vector<PredictorSpec>& wanted, const CohortTable& table) {
    CohortTable out;
    out.ids = table.ids;
    out.outcomes = table.outcomes;
    out.predictors = wanted;
    std::vector<std::size_t> cols;
    cols.reserve(wanted.size());
    for (const auto& spec : wanted) {
        int c = table.column_index(spec.name);
        if (c < 0)
            throw DimensionMismatch("model needs predictor '" + spec.name +
                                    "', which the table does not carry");
        cols.push_back(static_cast<std::size_t>(c));
    }
    out.cells.reserve(table.n_rows());
    for (std::size_t r = 0; r < table.n_rows(); ++r) {
        std::vector<std::string> row;
        row.reserve(cols.size());
        for (std::size_t c : cols) row.push_back(table.cells[r][c]);
        out.cells.push_back(std::move(row));
    }
    return out;
}

} // namespace

std::vector<int> ModelBundle::encode_tokens(const CohortTable& table, std::size_t row) const {
    if (!is_token_kind(kind)) throw ConfigError("model does not take token input");
    std::vector<std::string> tokens;
    tokens.reserve(table.n_cols());
    for (std::size_t c = 0; c < table.n_cols(); ++c) {
        const auto& spec = table.predictors[c];
        const BinEdges* edges = nullptr;
        if (spec.kind == PredictorKind::continuous && !table.is_missing(row, c)) {
            auto it = bins.find(spec.name);
            if (it == bins.end())
                throw ConfigError("model has no bin edges for predictor " + spec.name);
            edges = &it->second;
        }
        tokens.push_back(tokenize_value(spec, table.cells[row][c], edges));
    }
    return encode_patient(table.ids[row], tokens, dictionary).indices;
}

ThresholdProfile ModelBundle::predict_row(const CohortTable& table, std::size_t row) const {
    if (is_token_kind(kind)) return apm.predict(encode_tokens(table, row));
    Eigen::MatrixXd X = encoder.transform(project_columns(encoder.predictors(),
                                                          table.subset({row})));
    Eigen::VectorXd x = X.row(0);
    switch (kind) {
        case ModelKind::mnlr: return mnlr.predict(x);
        case ModelKind::polr: return polr.predict(x);
        default: return deep.predict(x);
    }
}

std::vector<ThresholdProfile> ModelBundle::predict_table(const CohortTable& table) const {
    std::vector<ThresholdProfile> out;
    out.reserve(table.n_rows());
    if (is_token_kind(kind)) {
        for (std::size_t r = 0; r < table.n_rows(); ++r)
            out.push_back(apm.predict(encode_tokens(table, r)));
        return out;
    }
    Eigen::MatrixXd X = encoder.transform(project_columns(encoder.predictors(), table));
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
        Eigen::VectorXd x = X.row(r);
        switch (kind) {
            case ModelKind::mnlr: out.push_back(mnlr.predict(x)); break;
            case ModelKind::polr: out.push_back(polr.predict(x)); break;
            default: out.push_back(deep.predict(x)); break;
        }
    }
    return out;
}

nlohmann::json model_to_json(const ModelBundle& m) {
    nlohmann::json j{{"format_version", 1},
                     {"kind", to_string(m.kind)},
                     {"scale", OutcomeScale::category_labels()},
                     {"metadata", m.metadata}};

    nlohmann::json params;
    switch (m.kind) {
        case ModelKind::mnlr: {
            std::vector<double> flat;
            flat.reserve(static_cast<std::size_t>(m.mnlr.weights.size()));
            for (Eigen::Index r = 0; r < m.mnlr.weights.rows(); ++r)
                for (Eigen::Index c = 0; c < m.mnlr.weights.cols(); ++c)
                    flat.push_back(m.mnlr.weights(r, c));
            params = {{"columns", m.mnlr.weights.cols()}, {"weights", std::move(flat)}};
            j["config"] = {{"ridge", m.mnlr.ridge}};
            j["metadata"]["loglik"] = m.mnlr.loglik;
            break;
        }
        case ModelKind::polr: {
            params = {{"beta", std::vector<double>(m.polr.beta.begin(), m.polr.beta.end())},
                      {"theta", m.polr.theta}};
            j["config"] = {{"ridge", m.polr.ridge}};
            j["metadata"]["loglik"] = m.polr.loglik;
            break;
        }
        case ModelKind::deep_mn:
        case ModelKind::deep_or: {
            nlohmann::json inner = m.deep;
            j["config"] = inner.at("config");
            params = {{"input_dim", inner.at("input_dim")},
                      {"values", std::move(inner.at("parameters"))}};
            break;
        }
        case ModelKind::apm_mn:
        case ModelKind::apm_or: {
            nlohmann::json inner = m.apm;
            j["config"] = inner.at("config");
            params = {{"vocab_size", inner.at("vocab_size")},
                      {"values", std::move(inner.at("parameters"))}};
            break;
        }
    }
    j["parameters"] = std::move(params);

    if (is_token_kind(m.kind)) {
        nlohmann::json bins = nlohmann::json::object();
        for (const auto& [name, edges] : m.bins) bins[name] = edges.cuts;
        j["preprocessing"] = {{"bins", std::move(bins)}, {"dictionary", m.dictionary}};
    } else {
        j["preprocessing"] = {{"design", m.encoder}};
    }
    return j;
}

ModelBundle model_from_json(const nlohmann::json& j) {
    if (j.at("format_version").get<int>() != 1)
        throw ConfigError("unsupported model format version");
    if (j.at("scale").get<std::vector<std::string>>() !=
        std::vector<std::string>(OutcomeScale::category_labels().begin(),
                                 OutcomeScale::category_labels().end()))
        throw ConfigError("model was fitted on a different outcome scale");

    ModelBundle m;
    m.kind = model_kind_from_string(j.at("kind").get<std::string>());
    m.metadata = j.value("metadata", nlohmann::json::object());
    const auto& params = j.at("parameters");

    switch (m.kind) {
        case ModelKind::mnlr: {
            auto flat = params.at("weights").get<std::vector<double>>();
            Eigen::Index cols = params.at("columns").get<Eigen::Index>();
            if (cols < 1 || flat.size() != static_cast<std::size_t>(6 * cols))
                throw DimensionMismatch("model file: weight array is not 6 x columns");
            m.mnlr.weights.resize(6, cols);
            for (Eigen::Index r = 0; r < 6; ++r)
                for (Eigen::Index c = 0; c < cols; ++c)
                    m.mnlr.weights(r, c) = flat[static_cast<std::size_t>(r * cols + c)];
            m.mnlr.ridge = j.at("config").value("ridge", 0.0);
            m.mnlr.loglik = m.metadata.value("loglik", 0.0);
            m.mnlr.converged = true;
            break;
        }
        case ModelKind::polr: {
            auto beta = params.at("beta").get<std::vector<double>>();
            m.polr.beta = Eigen::Map<Eigen::VectorXd>(beta.data(),
                                                      static_cast<Eigen::Index>(beta.size()));
            auto theta = params.at("theta").get<std::vector<double>>();
            if (theta.size() != 6) throw DimensionMismatch("model file: theta needs 6 entries");
            std::copy(theta.begin(), theta.end(), m.polr.theta.begin());
            m.polr.ridge = j.at("config").value("ridge", 0.0);
            m.polr.loglik = m.metadata.value("loglik", 0.0);
            m.polr.converged = true;
            break;
        }
        case ModelKind::deep_mn:
        case ModelKind::deep_or: {
            nlohmann::json inner{{"input_dim", params.at("input_dim")},
                                 {"config", j.at("config")},
                                 {"parameters", params.at("values")}};
            m.deep = inner.get<DeepModel>();
            break;
        }
        case ModelKind::apm_mn:
        case ModelKind::apm_or: {
            nlohmann::json inner{{"vocab_size", params.at("vocab_size")},
                                 {"config", j.at("config")},
                                 {"parameters", params.at("values")}};
            m.apm = inner.get<ApmModel>();
            break;
        }
    }

    const auto& pre = j.at("preprocessing");
    if (is_token_kind(m.kind)) {
        for (const auto& [name, cuts] : pre.at("bins").items()) {
            BinEdges edges;
            edges.predictor = name;
            edges.cuts = cuts.get<std::vector<double>>();
            m.bins.emplace(name, std::move(edges));
        }
        m.dictionary = pre.at("dictionary").get<TokenDictionary>();
    } else {
        m.encoder = pre.at("design").get<DesignEncoder>();
    }
    return m;
}

void write_json_file(const nlohmann::json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << j.dump(2) << '\n';
    if (!out) throw IoError("failed writing " + path);
}

nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path + ": " + e.what());
    }
}

void save_model(const ModelBundle& m, const std::string& path) {
    write_json_file(model_to_json(m), path);
}

ModelBundle load_model(const std::string& path) {
    try {
        return model_from_json(read_json_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path + ": " + e.what());
    }
}

} // namespace ordinal
