#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "ordinal/outcome.hpp"
#include "ordinal/rng.hpp"
#include "ordinal/tokenizer.hpp"

namespace ordinal {

// --- output heads and losses --------------------------------------------------

// Softmax over 7 logits, stabilised by subtracting the maximum logit.
CategoryDistribution multinomial_head(const Eigen::VectorXd& logits);

// Monotone ordinal head over 6 raw outputs: c_0 = r_0, c_t = c_{t-1} +
// min(r_t, 0), q_t = sigmoid(c_t).  The construction makes q non-increasing
// for every raw input.
ThresholdProfile ordinal_head(const Eigen::VectorXd& raw);

// Class-weighted cross-entropy -w_y log(p_y + eps), eps = 1e-12.
double weighted_ce_loss(const CategoryDistribution& p, int y, const ClassWeights& w);

// Class-weighted sum of per-threshold binary cross-entropies against the
// cumulative targets 1{y > t}, with the same eps floor inside each log.
double weighted_bce_loss(const ThresholdProfile& q, int y, const ClassWeights& w);

// --- configuration --------------------------------------------------------------

enum class HeadKind { multinomial, ordinal };

std::string to_string(HeadKind h);
HeadKind head_kind_from_string(const std::string& s);

struct AdamSettings {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct MlpConfig {
    std::vector<int> widths;  // hidden widths; for token models widths[0] is the embedding dimension
    double dropout = 0.0;     // inverted dropout on dense hidden activations
    HeadKind head = HeadKind::multinomial;
    AdamSettings adam;
    int batch_size = 128;
    int max_epochs = 200;
    int patience = 10;

    void validate() const;
};

void to_json(nlohmann::json& j, const MlpConfig& c);
void from_json(const nlohmann::json& j, MlpConfig& c);

// --- dense tabular network -------------------------------------------------------

// Fully connected ReLU network on a fixed-length feature vector with a
// multinomial or ordinal output head.  All parameters live in one flat vector
// so the optimiser and finite-difference checks can treat them uniformly.
class DeepModel {
public:
    DeepModel() = default;
    DeepModel(int input_dim, MlpConfig cfg, Rng& init_rng);

    int input_dim() const { return input_dim_; }
    const MlpConfig& config() const { return cfg_; }
    const Eigen::VectorXd& parameters() const { return params_; }
    void set_parameters(const Eigen::VectorXd& p);

    // mean weighted loss over a batch; fills *grad (same length as
    // parameters) when given; draws dropout masks from *dropout_rng when
    // given, otherwise runs deterministically with dropout off
    double batch_loss(const Eigen::MatrixXd& X, const std::vector<int>& y, const ClassWeights& w,
                      Eigen::VectorXd* grad = nullptr, Rng* dropout_rng = nullptr) const;

    ThresholdProfile predict(const Eigen::VectorXd& x) const;
    // multinomial head only; throws ConfigError for ordinal-head models
    CategoryDistribution predict_distribution(const Eigen::VectorXd& x) const;

private:
    struct Layer {
        Eigen::Index in = 0, out = 0;
        Eigen::Index w_offset = 0, b_offset = 0;
    };

    int input_dim_ = 0;
    MlpConfig cfg_;
    std::vector<Layer> layers_; // hidden layers then output layer
    Eigen::VectorXd params_;

    void build_layout();
    Eigen::VectorXd head_input(const Eigen::VectorXd& x) const;

    friend void to_json(nlohmann::json& j, const DeepModel& m);
    friend void from_json(const nlohmann::json& j, DeepModel& m);
};

void to_json(nlohmann::json& j, const DeepModel& m);
void from_json(const nlohmann::json& j, DeepModel& m);

// --- token-embedding network -----------------------------------------------------

// All-predictor model: every token has an embedding vector and a significance
// logit; a patient is the significance-weighted average of its token
// embeddings (divided by the token count), followed by optional dense ReLU
// layers and an output head.
class ApmModel {
public:
    ApmModel() = default;
    ApmModel(int vocab_size, MlpConfig cfg, Rng& init_rng);

    int vocab_size() const { return vocab_; }
    int embedding_dim() const { return cfg_.widths.empty() ? 0 : cfg_.widths.front(); }
    const MlpConfig& config() const { return cfg_; }
    const Eigen::VectorXd& parameters() const { return params_; }
    void set_parameters(const Eigen::VectorXd& p);

    // significance-weighted average of the patient's token embeddings;
    // throws EmptyTokenSet on an empty token list
    Eigen::VectorXd embed_average(const std::vector<int>& tokens) const;

    // head outputs (7 category probabilities or 6 threshold probabilities)
    // for an arbitrary averaged embedding, e.g. a token coalition's average
    Eigen::VectorXd outputs_from_average(const Eigen::VectorXd& averaged) const;

    double batch_loss(const std::vector<TokenisedPatient>& patients, const std::vector<int>& y,
                      const ClassWeights& w, Eigen::VectorXd* grad = nullptr,
                      Rng* dropout_rng = nullptr) const;

    ThresholdProfile predict(const std::vector<int>& tokens) const;
    CategoryDistribution predict_distribution(const std::vector<int>& tokens) const;

private:
    struct Layer {
        Eigen::Index in = 0, out = 0;
        Eigen::Index w_offset = 0, b_offset = 0;
    };

    int vocab_ = 0;
    MlpConfig cfg_;
    std::vector<Layer> layers_; // dense layers after the embedding average
    Eigen::VectorXd params_;
    Eigen::Index sig_offset_ = 0, dense_offset_ = 0;

    void build_layout();
    Eigen::VectorXd head_input(const std::vector<int>& tokens) const;

    friend void to_json(nlohmann::json& j, const ApmModel& m);
    friend void from_json(const nlohmann::json& j, ApmModel& m);
};

void to_json(nlohmann::json& j, const ApmModel& m);
void from_json(const nlohmann::json& j, ApmModel& m);

// --- training ----------------------------------------------------------------------

struct TrainingTrace {
    std::vector<double> train_loss; // per epoch, mean over minibatches
    std::vector<double> val_loss;   // per epoch
    int best_epoch = 0;             // 1-based epoch whose weights were kept
    double best_val_loss = 0.0;
};

// Adam with minibatches, early stopping on validation loss (patience epochs
// without improvement) and restoration of the best-validation weights.
// Throws NonFiniteLoss as soon as a minibatch loss is not finite.
TrainingTrace train_deep(DeepModel& model, const Eigen::MatrixXd& X_train,
                         const std::vector<int>& y_train, const Eigen::MatrixXd& X_val,
                         const std::vector<int>& y_val, const ClassWeights& w, Rng& rng);

TrainingTrace train_apm(ApmModel& model, const std::vector<TokenisedPatient>& train,
                        const std::vector<int>& y_train,
                        const std::vector<TokenisedPatient>& val, const std::vector<int>& y_val,
                        const ClassWeights& w, Rng& rng);

} // namespace ordinal
