#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "ordinal/cohort.hpp"
#include "ordinal/rng.hpp"

namespace ordinal {

// Full one-hot encoding of one categorical value against the predictor's
// declared levels (unit vector of length levels.size()).  Throws UnknownCategory.
std::vector<double> one_hot(const PredictorSpec& spec, const std::string& value);

// Column-wise standardisation fitted on training data.  Constant columns map to 0.
struct StandardScaler {
    Eigen::VectorXd mean;
    Eigen::VectorXd scale; // population standard deviation; 1 where constant

    static StandardScaler fit(const Eigen::MatrixXd& X);
    Eigen::MatrixXd transform(const Eigen::MatrixXd& X) const;
};

void to_json(nlohmann::json& j, const StandardScaler& s);
void from_json(const nlohmann::json& j, StandardScaler& s);

// Maps a complete cohort table to a numeric design matrix: standardised
// continuous columns followed by reference-coded (first level dropped)
// indicator columns per categorical predictor.  The reference coding keeps
// the matrix full rank next to an intercept or ordinal threshold block.
class DesignEncoder {
public:
    static DesignEncoder fit(const CohortTable& train);

    // throws DegenerateInput when the table still contains missing values
    Eigen::MatrixXd transform(const CohortTable& table) const;

    const std::vector<std::string>& column_names() const { return names_; }
    const std::vector<PredictorSpec>& predictors() const { return predictors_; }

    friend void to_json(nlohmann::json& j, const DesignEncoder& e);
    friend void from_json(const nlohmann::json& j, DesignEncoder& e);

private:
    std::vector<PredictorSpec> predictors_;
    StandardScaler scaler_; // over the continuous block only
    std::vector<std::string> names_;

    Eigen::MatrixXd raw_matrix(const CohortTable& table) const;
};

// Predictive mean matching imputation fitted by chained equations.  Each
// column is regressed on all the others; missing entries are replaced by a
// value drawn from the k nearest observed training donors in predicted-mean
// space.  Categorical targets use a least-squares one-hot score and match
// donors by Euclidean distance between score vectors.
struct PmmConfig {
    int donors = 5;
    int sweeps = 10;
};

class PmmImputer {
public:
    // throws InsufficientDonors when a column has fewer observed training
    // values than cfg.donors, EmptyTrainingSet on an empty table
    static PmmImputer fit(const CohortTable& train, const PmmConfig& cfg, Rng& rng);

    // returns a copy of `table` with every missing cell replaced by an
    // observed training value of the same column
    CohortTable impute(const CohortTable& table, Rng& rng) const;

    const PmmConfig& config() const { return cfg_; }

private:
    struct ColumnModel {
        bool categorical = false;
        Eigen::MatrixXd coef;         // (1 + n_other) x score_dim
        Eigen::MatrixXd donor_scores; // n_observed x score_dim
        std::vector<double> donor_numeric;
        std::vector<std::string> donor_cells; // original string values
    };

    PmmConfig cfg_;
    std::vector<PredictorSpec> predictors_;
    std::vector<ColumnModel> columns_;

    Eigen::RowVectorXd predictor_row(const Eigen::RowVectorXd& numeric_row, std::size_t skip) const;
    std::size_t draw_donor(const ColumnModel& model, const Eigen::RowVectorXd& score,
                           Rng& rng) const;
    double numeric_value(const PredictorSpec& spec, const std::string& cell) const;
};

} // namespace ordinal
