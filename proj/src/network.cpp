#include "ordinal/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ordinal/errors.hpp"
#include "ordinal/stats.hpp"

namespace ordinal {

namespace {
constexpr double kEps = 1e-12; // floor inside every loss logarithm
}

// --- heads and losses -----------------------------------------------------------

CategoryDistribution multinomial_head(const Eigen::VectorXd& logits) {
    if (logits.size() != 7) throw DimensionMismatch("multinomial_head: expected 7 logits");
    double zmax = logits.maxCoeff();
    Eigen::VectorXd e = (logits.array() - zmax).exp();
    double sum = e.sum();
    CategoryDistribution out;
    for (int k = 0; k < 7; ++k) out.p[k] = e(k) / sum;
    return out;
}

ThresholdProfile ordinal_head(const Eigen::VectorXd& raw) {
    if (raw.size() != 6) throw DimensionMismatch("ordinal_head: expected 6 raw outputs");
    ThresholdProfile out;
    double c = raw(0);
    out.q[0] = sigmoid(c);
    for (int t = 1; t < 6; ++t) {
        c += std::min(raw(t), 0.0); // non-positive increments keep q non-increasing
        out.q[t] = sigmoid(c);
    }
    return out;
}

double weighted_ce_loss(const CategoryDistribution& p, int y, const ClassWeights& w) {
    if (y < 0 || y >= OutcomeScale::n_categories)
        throw UnknownCategory("weighted_ce_loss: label out of range");
    return -w[y] * std::log(p.p[y] + kEps);
}

double weighted_bce_loss(const ThresholdProfile& q, int y, const ClassWeights& w) {
    if (y < 0 || y >= OutcomeScale::n_categories)
        throw UnknownCategory("weighted_bce_loss: label out of range");
    double loss = 0.0;
    for (int t = 0; t < 6; ++t) {
        if (y > t)
            loss -= std::log(q.q[t] + kEps);
        else
            loss -= std::log(1.0 - q.q[t] + kEps);
    }
    return w[y] * loss;
}

// --- configuration ----------------------------------------------------------------

std::string to_string(HeadKind h) {
    return h == HeadKind::multinomial ? "multinomial" : "ordinal";
}

HeadKind head_kind_from_string(const std::string& s) {
    if (s == "multinomial") return HeadKind::multinomial;
    if (s == "ordinal") return HeadKind::ordinal;
    throw ConfigError("unknown head kind: " + s);
}

void MlpConfig::validate() const {
    if (widths.empty()) throw ConfigError("mlp config: at least one hidden width required");
    for (int w : widths)
        if (w < 1) throw ConfigError("mlp config: widths must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("mlp config: dropout must be in [0, 1)");
    if (batch_size < 1 || max_epochs < 1 || patience < 1)
        throw ConfigError("mlp config: batch size, epochs and patience must be positive");
    if (adam.learning_rate <= 0.0) throw ConfigError("mlp config: learning rate must be positive");
}

void to_json(nlohmann::json& j, const MlpConfig& c) {
    j = nlohmann::json{{"widths", c.widths},
                       {"dropout", c.dropout},
                       {"head", to_string(c.head)},
                       {"learning_rate", c.adam.learning_rate},
                       {"beta1", c.adam.beta1},
                       {"beta2", c.adam.beta2},
                       {"epsilon", c.adam.epsilon},
                       {"batch_size", c.batch_size},
                       {"max_epochs", c.max_epochs},
                       {"patience", c.patience}};
}

void from_json(const nlohmann::json& j, MlpConfig& c) {
    c.widths = j.at("widths").get<std::vector<int>>();
    c.dropout = j.at("dropout").get<double>();
    c.head = head_kind_from_string(j.at("head").get<std::string>());
    c.adam.learning_rate = j.value("learning_rate", 1e-3);
    c.adam.beta1 = j.value("beta1", 0.9);
    c.adam.beta2 = j.value("beta2", 0.999);
    c.adam.epsilon = j.value("epsilon", 1e-8);
    c.batch_size = j.value("batch_size", 128);
    c.max_epochs = j.value("max_epochs", 200);
    c.patience = j.value("patience", 10);
}

// --- shared forward/backward helpers ----------------------------------------------

namespace {

int head_dim(HeadKind h) { return h == HeadKind::multinomial ? 7 : 6; }

// per-row loss and gradient with respect to the head inputs
double head_loss_grad(HeadKind head, const Eigen::RowVectorXd& z, int y, const ClassWeights& w,
                      Eigen::RowVectorXd* dz) {
    if (head == HeadKind::multinomial) {
        CategoryDistribution p = multinomial_head(z.transpose());
        if (dz) {
            double s = w[y] * p.p[y] / (p.p[y] + kEps);
            for (int k = 0; k < 7; ++k) (*dz)(k) = s * (p.p[k] - (k == y ? 1.0 : 0.0));
        }
        return weighted_ce_loss(p, y, w);
    }
    ThresholdProfile q = ordinal_head(z.transpose());
    if (dz) {
        // d loss / d c_t, then pushed through the cumulative-min construction
        Eigen::RowVectorXd dc(6);
        for (int t = 0; t < 6; ++t) {
            double dq = y > t ? -w[y] / (q.q[t] + kEps) : w[y] / (1.0 - q.q[t] + kEps);
            dc(t) = dq * q.q[t] * (1.0 - q.q[t]);
        }
        double suffix = 0.0;
        for (int t = 5; t >= 1; --t) {
            suffix += dc(t);
            (*dz)(t) = z(t) < 0.0 ? suffix : 0.0;
        }
        (*dz)(0) = suffix + dc(0);
    }
    return weighted_bce_loss(q, y, w);
}

struct DenseLayerView {
    Eigen::Map<const Eigen::MatrixXd> W;
    Eigen::Map<const Eigen::VectorXd> b;
};

struct DenseStack {
    // runs the dense ReLU chain with optional inverted dropout; caches
    // activations for backprop
    std::vector<Eigen::MatrixXd> activations; // activations[0] = input
    std::vector<Eigen::MatrixXd> masks;       // dropout-and-relu derivative per hidden layer
    Eigen::MatrixXd output;                   // head inputs, rows = batch
};

template <typename LayerSeq>
DenseStack dense_forward(const Eigen::MatrixXd& input, const Eigen::VectorXd& params,
                         const LayerSeq& layers, double dropout, Rng* dropout_rng) {
    DenseStack s;
    s.activations.push_back(input);
    const std::size_t n_layers = layers.size();
    for (std::size_t l = 0; l < n_layers; ++l) {
        Eigen::Map<const Eigen::MatrixXd> W(params.data() + layers[l].w_offset, layers[l].out,
                                            layers[l].in);
        Eigen::Map<const Eigen::VectorXd> b(params.data() + layers[l].b_offset, layers[l].out);
        Eigen::MatrixXd Z =
            (s.activations.back() * W.transpose()).rowwise() + b.transpose();
        if (l + 1 == n_layers) {
            s.output = std::move(Z); // output layer is linear; the head follows
            break;
        }
        Eigen::MatrixXd mask = (Z.array() > 0.0).cast<double>();
        if (dropout_rng && dropout > 0.0) {
            const double keep = 1.0 - dropout;
            for (Eigen::Index r = 0; r < mask.rows(); ++r)
                for (Eigen::Index c = 0; c < mask.cols(); ++c)
                    if (dropout_rng->uniform() < dropout)
                        mask(r, c) = 0.0;
                    else
                        mask(r, c) /= keep;
        }
        s.activations.push_back(Z.array().max(0.0).matrix().cwiseProduct(mask));
        s.masks.push_back(std::move(mask));
    }
    return s;
}

// backpropagates d loss / d output through the dense chain, writing weight
// gradients into grad and returning d loss / d input
template <typename LayerSeq>
Eigen::MatrixXd dense_backward(const DenseStack& s, const Eigen::MatrixXd& d_output,
                               const Eigen::VectorXd& params, const LayerSeq& layers,
                               Eigen::VectorXd& grad) {
    Eigen::MatrixXd delta = d_output;
    for (std::size_t li = layers.size(); li-- > 0;) {
        const auto& layer = layers[li];
        Eigen::Map<const Eigen::MatrixXd> W(params.data() + layer.w_offset, layer.out, layer.in);
        Eigen::Map<Eigen::MatrixXd> gW(grad.data() + layer.w_offset, layer.out, layer.in);
        Eigen::Map<Eigen::VectorXd> gb(grad.data() + layer.b_offset, layer.out);
        gW += delta.transpose() * s.activations[li];
        gb += delta.colwise().sum().transpose();
        Eigen::MatrixXd prev = delta * W;
        if (li > 0) prev = prev.cwiseProduct(s.masks[li - 1]);
        delta = std::move(prev);
    }
    return delta;
}

} // namespace

// --- DeepModel ---------------------------------------------------------------------

DeepModel::DeepModel(int input_dim, MlpConfig cfg, Rng& init_rng)
    : input_dim_(input_dim), cfg_(std::move(cfg)) {
    cfg_.validate();
    if (input_dim_ < 1) throw ConfigError("deep model: input dimension must be positive");
    build_layout();
    for (const auto& layer : layers_) {
        double sd = std::sqrt(2.0 / static_cast<double>(layer.in)); // He initialisation
        for (Eigen::Index i = 0; i < layer.out * layer.in; ++i)
            params_(layer.w_offset + i) = init_rng.normal(0.0, sd);
        for (Eigen::Index i = 0; i < layer.out; ++i) params_(layer.b_offset + i) = 0.0;
    }
}

void DeepModel::build_layout() {
    layers_.clear();
    Eigen::Index offset = 0, in = input_dim_;
    auto add_layer = [&](Eigen::Index out) {
        Layer l;
        l.in = in;
        l.out = out;
        l.w_offset = offset;
        offset += out * in;
        l.b_offset = offset;
        offset += out;
        layers_.push_back(l);
        in = out;
    };
    for (int wdt : cfg_.widths) add_layer(wdt);
    add_layer(head_dim(cfg_.head));
    params_ = Eigen::VectorXd::Zero(offset);
}

void DeepModel::set_parameters(const Eigen::VectorXd& p) {
    if (p.size() != params_.size())
        throw DimensionMismatch("deep model: parameter vector has wrong length");
    params_ = p;
}

double DeepModel::batch_loss(const Eigen::MatrixXd& X, const std::vector<int>& y,
                             const ClassWeights& w, Eigen::VectorXd* grad,
                             Rng* dropout_rng) const {
    if (X.rows() == 0) throw EmptyTrainingSet("deep model: empty batch");
    if (X.cols() != input_dim_) throw DimensionMismatch("deep model: feature width mismatch");
    if (static_cast<Eigen::Index>(y.size()) != X.rows())
        throw DimensionMismatch("deep model: labels and rows differ");

    DenseStack s = dense_forward(X, params_, layers_, cfg_.dropout, dropout_rng);
    const Eigen::Index B = X.rows();
    const int odim = head_dim(cfg_.head);
    Eigen::MatrixXd D;
    if (grad) {
        grad->setZero(params_.size());
        D.resize(B, odim);
    }

    double total = 0.0;
    Eigen::RowVectorXd dz(odim);
    for (Eigen::Index i = 0; i < B; ++i) {
        total += head_loss_grad(cfg_.head, s.output.row(i), y[i], w, grad ? &dz : nullptr);
        if (grad) D.row(i) = dz;
    }
    const double scale = 1.0 / static_cast<double>(B);
    if (grad) {
        D *= scale; // mean loss over the batch
        dense_backward(s, D, params_, layers_, *grad);
    }
    return total * scale;
}

Eigen::VectorXd DeepModel::head_input(const Eigen::VectorXd& x) const {
    if (x.size() != input_dim_) throw DimensionMismatch("deep model: feature width mismatch");
    DenseStack s = dense_forward(x.transpose(), params_, layers_, 0.0, nullptr);
    return s.output.row(0).transpose();
}

ThresholdProfile DeepModel::predict(const Eigen::VectorXd& x) const {
    Eigen::VectorXd z = head_input(x);
    if (cfg_.head == HeadKind::multinomial) return to_threshold_profile(multinomial_head(z));
    return ordinal_head(z);
}

CategoryDistribution DeepModel::predict_distribution(const Eigen::VectorXd& x) const {
    if (cfg_.head != HeadKind::multinomial)
        throw ConfigError("deep model: ordinal head does not yield category probabilities");
    return multinomial_head(head_input(x));
}

void to_json(nlohmann::json& j, const DeepModel& m) {
    j = nlohmann::json{{"input_dim", m.input_dim_},
                       {"config", m.cfg_},
                       {"parameters",
                        std::vector<double>(m.params_.begin(), m.params_.end())}};
}

void from_json(const nlohmann::json& j, DeepModel& m) {
    m.input_dim_ = j.at("input_dim").get<int>();
    m.cfg_ = j.at("config").get<MlpConfig>();
    m.cfg_.validate();
    m.build_layout();
    auto p = j.at("parameters").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(p.size()) != m.params_.size())
        throw DimensionMismatch("deep model: serialised parameter count mismatch");
    m.params_ = Eigen::Map<Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size()));
}

// --- ApmModel -----------------------------------------------------------------------

ApmModel::ApmModel(int vocab_size, MlpConfig cfg, Rng& init_rng)
    : vocab_(vocab_size), cfg_(std::move(cfg)) {
    cfg_.validate();
    if (vocab_ < 1) throw ConfigError("token model: vocabulary must be non-empty");
    build_layout();
    const int E = cfg_.widths.front();
    double sd = std::sqrt(1.0 / static_cast<double>(E));
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(vocab_) * E; ++i)
        params_(i) = init_rng.normal(0.0, sd);
    for (Eigen::Index i = 0; i < vocab_; ++i) params_(sig_offset_ + i) = 0.0;
    for (const auto& layer : layers_) {
        double lsd = std::sqrt(2.0 / static_cast<double>(layer.in));
        for (Eigen::Index i = 0; i < layer.out * layer.in; ++i)
            params_(layer.w_offset + i) = init_rng.normal(0.0, lsd);
        for (Eigen::Index i = 0; i < layer.out; ++i) params_(layer.b_offset + i) = 0.0;
    }
}

void ApmModel::build_layout() {
    layers_.clear();
    const Eigen::Index E = cfg_.widths.front();
    Eigen::Index offset = static_cast<Eigen::Index>(vocab_) * E; // embedding block
    sig_offset_ = offset;
    offset += vocab_; // significance logits
    dense_offset_ = offset;

    Eigen::Index in = E;
    auto add_layer = [&](Eigen::Index out) {
        Layer l;
        l.in = in;
        l.out = out;
        l.w_offset = offset;
        offset += out * in;
        l.b_offset = offset;
        offset += out;
        layers_.push_back(l);
        in = out;
    };
    for (std::size_t i = 1; i < cfg_.widths.size(); ++i) add_layer(cfg_.widths[i]);
    add_layer(head_dim(cfg_.head));
    params_ = Eigen::VectorXd::Zero(offset);
}

void ApmModel::set_parameters(const Eigen::VectorXd& p) {
    if (p.size() != params_.size())
        throw DimensionMismatch("token model: parameter vector has wrong length");
    params_ = p;
}

Eigen::VectorXd ApmModel::embed_average(const std::vector<int>& tokens) const {
    if (tokens.empty()) throw EmptyTokenSet("token model: patient has no tokens");
    const Eigen::Index E = cfg_.widths.front();
    Eigen::Map<const Eigen::MatrixXd> emb(params_.data(), E, vocab_);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(E);
    for (int t : tokens) {
        if (t < 0 || t >= vocab_) throw DimensionMismatch("token model: token index out of range");
        out += std::exp(params_(sig_offset_ + t)) * emb.col(t);
    }
    return out / static_cast<double>(tokens.size());
}

double ApmModel::batch_loss(const std::vector<TokenisedPatient>& patients,
                            const std::vector<int>& y, const ClassWeights& w,
                            Eigen::VectorXd* grad, Rng* dropout_rng) const {
    if (patients.empty()) throw EmptyTrainingSet("token model: empty batch");
    if (patients.size() != y.size())
        throw DimensionMismatch("token model: labels and patients differ");

    const Eigen::Index B = static_cast<Eigen::Index>(patients.size());
    const Eigen::Index E = cfg_.widths.front();
    Eigen::MatrixXd A0(B, E);
    for (Eigen::Index i = 0; i < B; ++i)
        A0.row(i) = embed_average(patients[i].indices).transpose();

    DenseStack s = dense_forward(A0, params_, layers_, cfg_.dropout, dropout_rng);
    const int odim = head_dim(cfg_.head);
    Eigen::MatrixXd D;
    if (grad) {
        grad->setZero(params_.size());
        D.resize(B, odim);
    }

    double total = 0.0;
    Eigen::RowVectorXd dz(odim);
    for (Eigen::Index i = 0; i < B; ++i) {
        total += head_loss_grad(cfg_.head, s.output.row(i), y[i], w, grad ? &dz : nullptr);
        if (grad) D.row(i) = dz;
    }
    const double scale = 1.0 / static_cast<double>(B);
    if (grad) {
        D *= scale;
        Eigen::MatrixXd dA0 = dense_backward(s, D, params_, layers_, *grad);
        // push the averaged-embedding gradient onto embeddings and logits
        Eigen::Map<const Eigen::MatrixXd> emb(params_.data(), E, vocab_);
        Eigen::Map<Eigen::MatrixXd> gEmb(grad->data(), E, vocab_);
        for (Eigen::Index i = 0; i < B; ++i) {
            const auto& toks = patients[i].indices;
            const double inv = 1.0 / static_cast<double>(toks.size());
            for (int t : toks) {
                double sig = std::exp(params_(sig_offset_ + t));
                gEmb.col(t) += sig * inv * dA0.row(i).transpose();
                (*grad)(sig_offset_ + t) += sig * inv * emb.col(t).dot(dA0.row(i));
            }
        }
    }
    return total * scale;
}

Eigen::VectorXd ApmModel::head_input(const std::vector<int>& tokens) const {
    Eigen::MatrixXd A0 = embed_average(tokens).transpose();
    DenseStack s = dense_forward(A0, params_, layers_, 0.0, nullptr);
    return s.output.row(0).transpose();
}

Eigen::VectorXd ApmModel::outputs_from_average(const Eigen::VectorXd& averaged) const {
    if (averaged.size() != cfg_.widths.front())
        throw DimensionMismatch("token model: averaged vector has wrong length");
    DenseStack s = dense_forward(averaged.transpose(), params_, layers_, 0.0, nullptr);
    Eigen::VectorXd z = s.output.row(0).transpose();
    if (cfg_.head == HeadKind::multinomial) {
        CategoryDistribution p = multinomial_head(z);
        return Eigen::Map<const Eigen::VectorXd>(p.p.data(), 7);
    }
    ThresholdProfile q = ordinal_head(z);
    return Eigen::Map<const Eigen::VectorXd>(q.q.data(), 6);
}

ThresholdProfile ApmModel::predict(const std::vector<int>& tokens) const {
    Eigen::VectorXd z = head_input(tokens);
    if (cfg_.head == HeadKind::multinomial) return to_threshold_profile(multinomial_head(z));
    return ordinal_head(z);
}

CategoryDistribution ApmModel::predict_distribution(const std::vector<int>& tokens) const {
    if (cfg_.head != HeadKind::multinomial)
        throw ConfigError("token model: ordinal head does not yield category probabilities");
    return multinomial_head(head_input(tokens));
}

void to_json(nlohmann::json& j, const ApmModel& m) {
    j = nlohmann::json{{"vocab_size", m.vocab_},
                       {"config", m.cfg_},
                       {"parameters",
                        std::vector<double>(m.params_.begin(), m.params_.end())}};
}

void from_json(const nlohmann::json& j, ApmModel& m) {
    m.vocab_ = j.at("vocab_size").get<int>();
    m.cfg_ = j.at("config").get<MlpConfig>();
    m.cfg_.validate();
    m.build_layout();
    auto p = j.at("parameters").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(p.size()) != m.params_.size())
        throw DimensionMismatch("token model: serialised parameter count mismatch");
    m.params_ = Eigen::Map<Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size()));
}

// --- training ------------------------------------------------------------------------

namespace {

template <typename BatchLoss, typename ValLoss, typename GetParams, typename SetParams>
TrainingTrace adam_train(std::size_t n_train, const MlpConfig& cfg, Rng& rng,
                         BatchLoss&& batch_loss, ValLoss&& val_loss, GetParams&& get_params,
                         SetParams&& set_params) {
    if (n_train == 0) throw EmptyTrainingSet("training: no training rows");

    Eigen::VectorXd params = get_params();
    Eigen::VectorXd m = Eigen::VectorXd::Zero(params.size());
    Eigen::VectorXd v = Eigen::VectorXd::Zero(params.size());
    Eigen::VectorXd grad(params.size());
    long step = 0;

    TrainingTrace trace;
    Eigen::VectorXd best_params = params;
    double best_val = std::numeric_limits<double>::infinity();
    int wait = 0;

    std::vector<std::size_t> order(n_train);
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        int n_batches = 0;
        for (std::size_t start = 0; start < n_train; start += cfg.batch_size) {
            std::size_t stop = std::min(n_train, start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<std::size_t> idx(order.begin() + start, order.begin() + stop);
            double loss = batch_loss(idx, grad, rng);
            if (!std::isfinite(loss))
                throw NonFiniteLoss("training: non-finite loss at epoch " +
                                    std::to_string(epoch) + ", batch " +
                                    std::to_string(n_batches + 1));
            ++step;
            const auto& a = cfg.adam;
            m = a.beta1 * m + (1.0 - a.beta1) * grad;
            v = a.beta2 * v.array().matrix() + (1.0 - a.beta2) * grad.array().square().matrix();
            double mc = 1.0 - std::pow(a.beta1, static_cast<double>(step));
            double vc = 1.0 - std::pow(a.beta2, static_cast<double>(step));
            params -= (a.learning_rate * (m / mc).array() /
                       ((v / vc).array().sqrt() + a.epsilon))
                          .matrix();
            set_params(params);
            epoch_loss += loss;
            ++n_batches;
        }
        trace.train_loss.push_back(epoch_loss / std::max(1, n_batches));

        double val = val_loss();
        if (!std::isfinite(val))
            throw NonFiniteLoss("training: non-finite validation loss at epoch " +
                                std::to_string(epoch));
        trace.val_loss.push_back(val);
        if (val < best_val) {
            best_val = val;
            best_params = params;
            trace.best_epoch = epoch;
            wait = 0;
        } else if (++wait >= cfg.patience) {
            break;
        }
    }

    set_params(best_params);
    trace.best_val_loss = best_val;
    return trace;
}

} // namespace

TrainingTrace train_deep(DeepModel& model, const Eigen::MatrixXd& X_train,
                         const std::vector<int>& y_train, const Eigen::MatrixXd& X_val,
                         const std::vector<int>& y_val, const ClassWeights& w, Rng& rng) {
    if (X_val.rows() == 0) throw EmptyTrainingSet("train_deep: empty validation set");
    const MlpConfig& cfg = model.config();
    return adam_train(
        static_cast<std::size_t>(X_train.rows()), cfg, rng,
        [&](const std::vector<std::size_t>& idx, Eigen::VectorXd& grad, Rng& r) {
            Eigen::MatrixXd Xb(idx.size(), X_train.cols());
            std::vector<int> yb(idx.size());
            for (std::size_t i = 0; i < idx.size(); ++i) {
                Xb.row(static_cast<Eigen::Index>(i)) = X_train.row(static_cast<Eigen::Index>(idx[i]));
                yb[i] = y_train[idx[i]];
            }
            return model.batch_loss(Xb, yb, w, &grad, cfg.dropout > 0.0 ? &r : nullptr);
        },
        [&] { return model.batch_loss(X_val, y_val, w, nullptr, nullptr); },
        [&] { return model.parameters(); },
        [&](const Eigen::VectorXd& p) { model.set_parameters(p); });
}

TrainingTrace train_apm(ApmModel& model, const std::vector<TokenisedPatient>& train,
                        const std::vector<int>& y_train,
                        const std::vector<TokenisedPatient>& val, const std::vector<int>& y_val,
                        const ClassWeights& w, Rng& rng) {
    if (val.empty()) throw EmptyTrainingSet("train_apm: empty validation set");
    const MlpConfig& cfg = model.config();
    return adam_train(
        train.size(), cfg, rng,
        [&](const std::vector<std::size_t>& idx, Eigen::VectorXd& grad, Rng& r) {
            std::vector<TokenisedPatient> batch(idx.size());
            std::vector<int> yb(idx.size());
            for (std::size_t i = 0; i < idx.size(); ++i) {
                batch[i] = train[idx[i]];
                yb[i] = y_train[idx[i]];
            }
            return model.batch_loss(batch, yb, w, &grad, cfg.dropout > 0.0 ? &r : nullptr);
        },
        [&] { return model.batch_loss(val, y_val, w, nullptr, nullptr); },
        [&] { return model.parameters(); },
        [&](const Eigen::VectorXd& p) { model.set_parameters(p); });
}

} // namespace ordinal
