#include <doctest.h>

#include <cmath>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "ordinal/errors.hpp"
#include "ordinal/network.hpp"
#include "ordinal/outcome.hpp"
#include "ordinal/rng.hpp"
#include "ordinal/stats.hpp"

using namespace ordinal;

namespace {

ClassWeights unit_weights() {
    ClassWeights w;
    w.fill(1.0);
    return w;
}

// central finite-difference check of batch_loss gradients at random indices
template <typename LossFn>
void check_gradient(const Eigen::VectorXd& params, const Eigen::VectorXd& grad, LossFn loss_at,
                    Rng& rng, int n_probes, double tol) {
    for (int probe = 0; probe < n_probes; ++probe) {
        Eigen::Index j = static_cast<Eigen::Index>(rng.index(params.size()));
        double h = 1e-6 * std::max(1.0, std::fabs(params(j)));
        Eigen::VectorXd hi = params, lo = params;
        hi(j) += h;
        lo(j) -= h;
        double fd = (loss_at(hi) - loss_at(lo)) / (2.0 * h);
        double denom = std::max({1.0, std::fabs(fd), std::fabs(grad(j))});
        CHECK(std::fabs(grad(j) - fd) / denom < tol);
    }
}

} // namespace

TEST_CASE("multinomial head softmax identities") {
    Eigen::VectorXd zero = Eigen::VectorXd::Zero(7);
    CategoryDistribution u = multinomial_head(zero);
    for (int k = 0; k < 7; ++k) CHECK(u.p[k] == doctest::Approx(1.0 / 7.0).epsilon(1e-14));

    // log-count logits give exact ratios: p_k = k / 28
    Eigen::VectorXd logk(7);
    for (int k = 0; k < 7; ++k) logk(k) = std::log(static_cast<double>(k + 1));
    CategoryDistribution p = multinomial_head(logk);
    for (int k = 0; k < 7; ++k)
        CHECK(p.p[k] == doctest::Approx((k + 1) / 28.0).epsilon(1e-12));

    // shift invariance, including huge logits that would overflow a naive exp
    Eigen::VectorXd shifted = logk.array() + 5000.0;
    CategoryDistribution ps = multinomial_head(shifted);
    for (int k = 0; k < 7; ++k) CHECK(ps.p[k] == doctest::Approx(p.p[k]).epsilon(1e-12));

    double sum = 0.0;
    for (double v : p.p) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("ordinal head accumulates non-positive increments") {
    Eigen::VectorXd raw(6);
    raw << 0.5, -0.2, 0.3, -0.1, 0.0, -0.4;
    ThresholdProfile q = ordinal_head(raw);
    // c = {0.5, 0.3, 0.3, 0.2, 0.2, -0.2}
    const double c[6] = {0.5, 0.3, 0.3, 0.2, 0.2, -0.2};
    for (int t = 0; t < 6; ++t) CHECK(q.q[t] == doctest::Approx(sigmoid(c[t])).epsilon(1e-14));
}

TEST_CASE("ordinal head output is monotone for any raw input") {
    Rng rng(404);
    for (int rep = 0; rep < 10000; ++rep) {
        Eigen::VectorXd raw(6);
        for (int t = 0; t < 6; ++t) raw(t) = rng.uniform(-50.0, 50.0);
        ThresholdProfile q = ordinal_head(raw);
        for (int t = 0; t + 1 < 6; ++t) CHECK(q.q[t] >= q.q[t + 1]);
        for (int t = 0; t < 6; ++t) {
            CHECK(q.q[t] >= 0.0);
            CHECK(q.q[t] <= 1.0);
        }
    }
}

TEST_CASE("loss arithmetic on hand inputs") {
    CategoryDistribution uniform;
    uniform.p.fill(1.0 / 7.0);
    CHECK(weighted_ce_loss(uniform, 3, unit_weights()) ==
          doctest::Approx(std::log(7.0)).epsilon(1e-9));

    // weights scale the loss linearly
    ClassWeights w2 = unit_weights();
    w2[3] = 2.5;
    CHECK(weighted_ce_loss(uniform, 3, w2) ==
          doctest::Approx(2.5 * std::log(7.0)).epsilon(1e-9));

    ThresholdProfile half;
    half.q.fill(0.5);
    // every one of the six binary terms is log 2 regardless of the label
    CHECK(weighted_bce_loss(half, 0, unit_weights()) ==
          doctest::Approx(6.0 * std::log(2.0)).epsilon(1e-9));
    CHECK(weighted_bce_loss(half, 6, unit_weights()) ==
          doctest::Approx(6.0 * std::log(2.0)).epsilon(1e-9));
    // the label's class weight scales the whole patient loss
    ClassWeights w6 = unit_weights();
    w6[6] = 2.5;
    CHECK(weighted_bce_loss(half, 6, w6) ==
          doctest::Approx(2.5 * 6.0 * std::log(2.0)).epsilon(1e-9));

    // a perfect hard prediction has (near) zero loss
    CategoryDistribution hard;
    hard.p.fill(0.0);
    hard.p[2] = 1.0;
    CHECK(weighted_ce_loss(hard, 2, unit_weights()) == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
}

TEST_CASE("head kind and config serialisation") {
    CHECK(to_string(HeadKind::multinomial) == "multinomial");
    CHECK(head_kind_from_string("ordinal") == HeadKind::ordinal);
    CHECK_THROWS_AS(head_kind_from_string("softmax"), ConfigError);

    MlpConfig c;
    c.widths = {32, 16};
    c.dropout = 0.2;
    c.head = HeadKind::ordinal;
    c.batch_size = 64;
    c.max_epochs = 99;
    c.patience = 7;
    nlohmann::json j = c;
    auto back = j.get<MlpConfig>();
    CHECK(back.widths == c.widths);
    CHECK(back.dropout == doctest::Approx(0.2));
    CHECK(back.head == HeadKind::ordinal);
    CHECK(back.batch_size == 64);
    CHECK(back.max_epochs == 99);
    CHECK(back.patience == 7);

    MlpConfig bad = c;
    bad.widths = {};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.dropout = 1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.widths = {8, 0};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("dense network gradients match finite differences") {
    Rng data_rng(17);
    const int n = 6, d = 3;
    Eigen::MatrixXd X(n, d);
    std::vector<int> y;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) X(i, j) = data_rng.normal();
        y.push_back(i % 7);
    }
    ClassWeights w = unit_weights();
    w[2] = 1.7; // exercise the weighting in the backward pass

    for (HeadKind head : {HeadKind::multinomial, HeadKind::ordinal}) {
        MlpConfig cfg;
        cfg.widths = {5, 4};
        cfg.head = head;
        Rng init(1234);
        DeepModel model(d, cfg, init);

        // move off the freshly initialised zero biases: with the head's raw
        // values exactly at a hinge point the two-sided difference quotient
        // and the subgradient legitimately disagree
        Eigen::VectorXd start = model.parameters();
        Rng jitter(777);
        for (Eigen::Index i = 0; i < start.size(); ++i) start(i) += 0.05 * jitter.normal();
        model.set_parameters(start);

        Eigen::VectorXd grad;
        model.batch_loss(X, y, w, &grad);
        REQUIRE(grad.size() == model.parameters().size());

        DeepModel probe = model;
        auto loss_at = [&](const Eigen::VectorXd& p) {
            probe.set_parameters(p);
            return probe.batch_loss(X, y, w);
        };
        Rng idx(55);
        check_gradient(model.parameters(), grad, loss_at, idx, 25, 1e-6);
    }
}

TEST_CASE("token network gradients match finite differences") {
    Rng data_rng(18);
    const int vocab = 12;
    std::vector<TokenisedPatient> patients;
    std::vector<int> y;
    for (int i = 0; i < 8; ++i) {
        TokenisedPatient p;
        p.id = "P" + std::to_string(i);
        int count = 1 + static_cast<int>(data_rng.index(4));
        for (int t = 0; t < count; ++t)
            p.indices.push_back(static_cast<int>(data_rng.index(vocab)));
        std::sort(p.indices.begin(), p.indices.end());
        p.indices.erase(std::unique(p.indices.begin(), p.indices.end()), p.indices.end());
        patients.push_back(std::move(p));
        y.push_back(i % 7);
    }
    ClassWeights w = unit_weights();

    for (HeadKind head : {HeadKind::multinomial, HeadKind::ordinal}) {
        for (std::vector<int> widths : {std::vector<int>{6}, std::vector<int>{6, 5}}) {
            MlpConfig cfg;
            cfg.widths = widths;
            cfg.head = head;
            Rng init(4321);
            ApmModel model(vocab, cfg, init);

            // evaluate at a generic point, clear of the hinge kinks
            Eigen::VectorXd start = model.parameters();
            Rng jitter(778);
            for (Eigen::Index i = 0; i < start.size(); ++i) start(i) += 0.05 * jitter.normal();
            model.set_parameters(start);

            Eigen::VectorXd grad;
            model.batch_loss(patients, y, w, &grad);
            REQUIRE(grad.size() == model.parameters().size());

            ApmModel probe = model;
            auto loss_at = [&](const Eigen::VectorXd& p) {
                probe.set_parameters(p);
                return probe.batch_loss(patients, y, w);
            };
            Rng idx(56);
            check_gradient(model.parameters(), grad, loss_at, idx, 25, 1e-6);
        }
    }
}

TEST_CASE("token embedding average is order-invariant and guards empties") {
    MlpConfig cfg;
    cfg.widths = {4};
    Rng init(5);
    ApmModel model(10, cfg, init);

    Eigen::VectorXd a = model.embed_average({1, 3, 5});
    Eigen::VectorXd b = model.embed_average({5, 1, 3});
    CHECK((a - b).cwiseAbs().maxCoeff() == doctest::Approx(0.0).scale(1.0));

    // the out-of-vocabulary sentinel is an ordinary embedding row
    CHECK_NOTHROW(model.embed_average({0}));
    CHECK_THROWS_AS(model.embed_average({}), EmptyTokenSet);

    ThresholdProfile qa = model.predict({2, 7});
    ThresholdProfile qb = model.predict({7, 2});
    for (int t = 0; t < 6; ++t) CHECK(qa.q[t] == doctest::Approx(qb.q[t]).epsilon(1e-15));
}

TEST_CASE("prediction heads agree with the loss-side heads") {
    Rng init(9);
    MlpConfig cfg;
    cfg.widths = {5};
    cfg.head = HeadKind::multinomial;
    DeepModel mn(3, cfg, init);
    Eigen::VectorXd x(3);
    x << 0.3, -1.2, 0.7;
    CategoryDistribution p = mn.predict_distribution(x);
    ThresholdProfile q = mn.predict(x);
    ThresholdProfile q2 = to_threshold_profile(p);
    for (int t = 0; t < 6; ++t) CHECK(q.q[t] == doctest::Approx(q2.q[t]).epsilon(1e-12));

    cfg.head = HeadKind::ordinal;
    Rng init2(9);
    DeepModel orl(3, cfg, init2);
    CHECK_THROWS_AS(orl.predict_distribution(x), ConfigError);
    ThresholdProfile qo = orl.predict(x);
    for (int t = 0; t + 1 < 6; ++t) CHECK(qo.q[t] >= qo.q[t + 1]);
}

TEST_CASE("dropout is stochastic in training and off at inference") {
    MlpConfig cfg;
    cfg.widths = {16, 16};
    cfg.dropout = 0.5;
    Rng init(31);
    DeepModel model(4, cfg, init);

    Eigen::MatrixXd X(3, 4);
    X << 1, 0, -1, 2, 0.5, 0.5, 0.5, 0.5, -2, 1, 0, 1;
    std::vector<int> y{0, 3, 6};
    ClassWeights w = unit_weights();

    double clean = model.batch_loss(X, y, w);
    CHECK(clean == doctest::Approx(model.batch_loss(X, y, w))); // deterministic

    Rng d1(100), d2(100), d3(101);
    double l1 = model.batch_loss(X, y, w, nullptr, &d1);
    double l2 = model.batch_loss(X, y, w, nullptr, &d2);
    double l3 = model.batch_loss(X, y, w, nullptr, &d3);
    CHECK(l1 == doctest::Approx(l2)); // same mask stream
    CHECK(l1 != doctest::Approx(l3).epsilon(1e-12)); // different masks
}

TEST_CASE("training with zero learning rate stops after exactly patience epochs") {
    MlpConfig cfg;
    cfg.widths = {4};
    cfg.adam.learning_rate = 0.0;
    cfg.max_epochs = 50;
    cfg.patience = 3;
    cfg.batch_size = 8;
    CHECK_THROWS_AS(cfg.validate(), ConfigError); // zero lr is rejected up front

    cfg.adam.learning_rate = 1e-30; // effectively frozen but valid
    Rng init(77);
    DeepModel model(2, cfg, init);
    Eigen::MatrixXd X(14, 2);
    std::vector<int> y;
    Rng data(3);
    for (int i = 0; i < 14; ++i) {
        X(i, 0) = data.normal();
        X(i, 1) = data.normal();
        y.push_back(i % 7);
    }
    Rng train_rng(8);
    TrainingTrace trace = train_deep(model, X, y, X, y, unit_weights(), train_rng);
    // epoch 1 improves on infinity; nothing after that can improve
    CHECK(trace.best_epoch == 1);
    CHECK(static_cast<int>(trace.val_loss.size()) == 1 + cfg.patience);
}

TEST_CASE("dense training learns an ordered signal deterministically") {
    // one informative feature: higher x means higher category
    Rng data(12);
    const int n = 140;
    Eigen::MatrixXd X(n, 2);
    std::vector<int> y;
    for (int i = 0; i < n; ++i) {
        int k = i % 7;
        X(i, 0) = k + 0.3 * data.normal();
        X(i, 1) = data.normal();
        y.push_back(k);
    }
    ClassWeights w = class_weights(y);

    MlpConfig cfg;
    cfg.widths = {16};
    cfg.max_epochs = 60;
    cfg.patience = 60; // no early exit; fixed-length run for determinism checks
    cfg.batch_size = 32;
    cfg.head = HeadKind::ordinal;

    auto run = [&]() {
        Rng init(500);
        DeepModel model(2, cfg, init);
        Rng t(501);
        TrainingTrace trace = train_deep(model, X, y, X, y, w, t);
        return std::make_pair(model, trace);
    };
    auto [m1, t1] = run();
    auto [m2, t2] = run();
    CHECK((m1.parameters() - m2.parameters()).cwiseAbs().maxCoeff() ==
          doctest::Approx(0.0).scale(1.0)); // bit-identical reruns
    CHECK(t1.best_val_loss == doctest::Approx(t2.best_val_loss));

    CHECK(t1.best_val_loss < t1.val_loss.front() * 0.9); // it actually learned
    // high-x patients get higher exceedance probabilities than low-x ones
    Eigen::VectorXd lo(2), hi(2);
    lo << 0.0, 0.0;
    hi << 6.0, 0.0;
    CHECK(m1.predict(hi).q[3] > m1.predict(lo).q[3]);
}

TEST_CASE("token training learns which token carries the outcome") {
    // token k+1 deterministically marks category k; token 8 is noise
    std::vector<TokenisedPatient> patients;
    std::vector<int> y;
    Rng data(13);
    for (int i = 0; i < 210; ++i) {
        int k = i % 7;
        TokenisedPatient p;
        p.id = "P" + std::to_string(i);
        p.indices = {k + 1};
        if (data.uniform() < 0.5) p.indices.push_back(8);
        std::sort(p.indices.begin(), p.indices.end());
        patients.push_back(std::move(p));
        y.push_back(k);
    }
    ClassWeights w = class_weights(y);

    MlpConfig cfg;
    cfg.widths = {8};
    cfg.max_epochs = 80;
    cfg.patience = 80;
    cfg.batch_size = 32;
    cfg.head = HeadKind::multinomial;

    Rng init(600);
    ApmModel model(9, cfg, init);
    Rng t(601);
    TrainingTrace trace = train_apm(model, patients, y, patients, y, w, t);
    CHECK(trace.best_val_loss < trace.val_loss.front() * 0.8);

    // the marker token dominates the prediction
    CategoryDistribution p0 = model.predict_distribution({1});
    CategoryDistribution p6 = model.predict_distribution({7});
    CHECK(p0.p[0] > 2.0 / 7.0);
    CHECK(p6.p[6] > 2.0 / 7.0);
}

TEST_CASE("network models serialise to JSON and back") {
    Rng init(21);
    MlpConfig cfg;
    cfg.widths = {6, 4};
    cfg.dropout = 0.2;
    cfg.head = HeadKind::ordinal;
    DeepModel deep(3, cfg, init);
    nlohmann::json jd = deep;
    auto deep2 = jd.get<DeepModel>();
    Eigen::VectorXd x(3);
    x << 0.1, -0.4, 2.0;
    ThresholdProfile qa = deep.predict(x);
    ThresholdProfile qb = deep2.predict(x);
    for (int t = 0; t < 6; ++t) CHECK(qa.q[t] == doctest::Approx(qb.q[t]).epsilon(1e-15));

    Rng init2(22);
    cfg.head = HeadKind::multinomial;
    ApmModel apm(15, cfg, init2);
    nlohmann::json ja = apm;
    auto apm2 = ja.get<ApmModel>();
    CategoryDistribution pa = apm.predict_distribution({2, 9, 14});
    CategoryDistribution pb = apm2.predict_distribution({2, 9, 14});
    for (int k = 0; k < 7; ++k) CHECK(pa.p[k] == doctest::Approx(pb.p[k]).epsilon(1e-15));
}
