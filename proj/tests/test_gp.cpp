#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <vector>

#include "fegp/gp.hpp"

using namespace fegp;

namespace {

FeatureVector rand_fv(std::mt19937& rng, int dim, std::int64_t idx, double scale = 1.0) {
    std::normal_distribution<double> g(0, scale);
    FeatureVector f;
    f.time_index = idx;
    f.values = Eigen::VectorXd::NullaryExpr(dim, [&](Eigen::Index) { return g(rng); });
    return f;
}

FeatureWeights rand_weights(std::mt19937& rng, int dim) {
    std::uniform_real_distribution<double> u(0.1, 1.0);
    FeatureWeights w;
    w.w = Eigen::VectorXd::NullaryExpr(dim, [&](Eigen::Index) { return u(rng); });
    w.w /= w.w.norm();
    return w;
}

TrainingWindow rand_window(std::mt19937& rng, int n, int dim) {
    std::normal_distribution<double> g(0, 1);
    TrainingWindow w;
    for (int i = 0; i < n; ++i) w.push_back(i, g(rng), rand_fv(rng, dim, i));
    return w;
}

}  // namespace

TEST_CASE("kernel basic values") {
    std::mt19937 rng(1);
    const FeatureWeights w = FeatureWeights::uniform(9);
    Hyperparams h{2.0, 1.5, 0.0};
    const FeatureVector a = rand_fv(rng, 9, 0);
    CHECK(kernel(a, a, w, h) == Catch::Approx(4.0));

    // weighted distance beta*sqrt(2) -> sigma^2 / e
    FeatureVector b = a;
    b.values[0] += h.beta * std::sqrt(2.0) / w.w[0];
    CHECK(kernel(a, b, w, h) == Catch::Approx(4.0 * std::exp(-1.0)));

    FeatureVector far = a;
    far.values.array() += 1e6;
    CHECK(kernel(a, far, w, h) >= 0.0);
    CHECK(kernel(a, far, w, h) < 1e-12);
}

TEST_CASE("naive kernel values and symmetry") {
    Hyperparams h{3.0, 4.0, 0.1};
    CHECK(naive_kernel(7, 7, h) == Catch::Approx(9.0));
    CHECK(naive_kernel(0, 5, h) == Catch::Approx(9.0 * std::exp(-25.0 / 32.0)));
    Hyperparams unit{1.0, 1.0 / std::sqrt(2.0), 0.0};  // |dt| = 1 is beta*sqrt(2)
    CHECK(naive_kernel(0, 1, unit) == Catch::Approx(std::exp(-1.0)));
    for (std::int64_t i : {0, 3, 11})
        for (std::int64_t j : {1, 5, 20}) CHECK(naive_kernel(i, j, h) == naive_kernel(j, i, h));
}

TEST_CASE("build_covariance n = 1") {
    TrainingWindow w;
    FeatureVector f;
    f.values = Eigen::VectorXd::Zero(9);
    w.push_back(0, 1.0, f);
    Hyperparams h{2.0, 1.0, 0.5};
    const Eigen::MatrixXd c = build_covariance(w, FeatureWeights::uniform(9), h, KernelKind::feature_embedded);
    REQUIRE(c.rows() == 1);
    CHECK(c(0, 0) == Catch::Approx(4.25));
}

TEST_CASE("duplicate rows with zero noise exercise the jitter ladder") {
    TrainingWindow w;
    FeatureVector f;
    f.values = Eigen::VectorXd::Ones(9);
    w.push_back(0, 1.0, f);
    w.push_back(1, 2.0, f);  // identical features -> singular K
    Hyperparams h{1.0, 1.0, 0.0};
    const Eigen::MatrixXd c = build_covariance(w, FeatureWeights::uniform(9), h, KernelKind::feature_embedded);
    const CholeskyResult ch = cholesky_with_jitter(c, h.sigma);
    CHECK(ch.jitter > 0.0);
    CHECK(ch.jitter <= 1e-6 * (1.0 + 1e-9));
}

TEST_CASE("build_covariance matches the element-wise kernel oracle") {
    std::mt19937 rng(8);
    const TrainingWindow w = rand_window(rng, 8, 9);
    const FeatureWeights fw = rand_weights(rng, 9);
    Hyperparams h{1.3, 0.9, 0.2};
    for (KernelKind kind : {KernelKind::feature_embedded, KernelKind::naive_time}) {
        const Eigen::MatrixXd c = build_covariance(w, fw, h, kind);
        CHECK((c - c.transpose()).cwiseAbs().maxCoeff() == 0.0);
        for (int i = 0; i < 8; ++i)
            for (int j = 0; j < 8; ++j) {
                double k = kind == KernelKind::feature_embedded
                               ? kernel(w.features[i], w.features[j], fw, h)
                               : naive_kernel(w.indices[i], w.indices[j], h);
                if (i == j) k += h.sigma_n * h.sigma_n;
                CHECK(c(i, j) == k);
            }
    }
}

TEST_CASE("nlml scalar cases") {
    Hyperparams h{2.0, 1.0, 1.0};
    const double c00 = h.sigma * h.sigma + h.sigma_n * h.sigma_n;  // 5

    TrainingWindow w;
    FeatureVector f;
    f.values = Eigen::VectorXd::Zero(9);
    w.push_back(0, 0.0, f);  // y = M = 0
    CHECK(nlml(w, FeatureWeights::uniform(9), h, KernelKind::feature_embedded) ==
          Catch::Approx(std::log(c00)));

    w.targets[0] = 3.0;  // r = 3
    CHECK(nlml(w, FeatureWeights::uniform(9), h, KernelKind::feature_embedded) ==
          Catch::Approx(9.0 / c00 + std::log(c00)));
}

TEST_CASE("nlml on a diagonal 2x2 covariance is the sum of scalar cases") {
    Hyperparams h{1.5, 0.7, 0.4};
    TrainingWindow w;
    FeatureVector f0, f1;
    f0.values = Eigen::VectorXd::Zero(9);
    f1.values = Eigen::VectorXd::Constant(9, 1e5);  // cross-kernel ~ 0
    w.push_back(0, 1.0, f0);
    w.push_back(1, -2.0, f1);
    const double joint = nlml(w, FeatureWeights::uniform(9), h, KernelKind::feature_embedded);

    const double c00 = h.sigma * h.sigma + h.sigma_n * h.sigma_n;
    const double expected = 1.0 / c00 + std::log(c00) + 4.0 / c00 + std::log(c00);
    CHECK(joint == Catch::Approx(expected).epsilon(1e-9));
}

TEST_CASE("analytic NLML gradient matches central finite differences") {
    std::mt19937 rng(33);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 3 + static_cast<int>(rng() % 10);
        const TrainingWindow w = rand_window(rng, n, 9);
        const FeatureWeights fw = rand_weights(rng, 9);
        const Eigen::MatrixXd d2 = squared_distances(w, fw, KernelKind::feature_embedded);
        Eigen::VectorXd r(n);
        for (int i = 0; i < n; ++i) r[i] = w.targets[i];

        Eigen::Vector3d logp(u(rng), u(rng), u(rng) - 1.0);
        auto value_at = [&](const Eigen::Vector3d& p) {
            Hyperparams h{std::exp(p[0]), std::exp(p[1]), std::exp(p[2])};
            return detail::nlml_with_grad(d2, r, h).value;
        };
        const Hyperparams h{std::exp(logp[0]), std::exp(logp[1]), std::exp(logp[2])};
        const Eigen::Vector3d analytic = detail::nlml_with_grad(d2, r, h).grad;
        for (int k = 0; k < 3; ++k) {
            Eigen::Vector3d pp = logp, pm = logp;
            pp[k] += 1e-5;
            pm[k] -= 1e-5;
            const double fd = (value_at(pp) - value_at(pm)) / 2e-5;
            CHECK(analytic[k] == Catch::Approx(fd).epsilon(1e-4).margin(1e-7));
        }
    }
}

TEST_CASE("gram matrices are positive semidefinite") {
    std::mt19937 rng(55);
    std::uniform_real_distribution<double> su(0.2, 3.0);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 2 + static_cast<int>(rng() % 19);
        const TrainingWindow w = rand_window(rng, n, 9);
        const FeatureWeights fw = rand_weights(rng, 9);
        Hyperparams h{su(rng), su(rng), 0.0};
        const Eigen::MatrixXd k = build_covariance(w, fw, h, KernelKind::feature_embedded);
        const double min_eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(k).eigenvalues().minCoeff();
        CHECK(min_eig >= -1e-8 * h.sigma * h.sigma);
    }
}

TEST_CASE("fit improves on the initialization heuristic and is reproducible") {
    std::mt19937 rng(66);
    const TrainingWindow w = rand_window(rng, 30, 9);
    const FeatureWeights fw = rand_weights(rng, 9);

    FitOptions opts;
    opts.restarts = 3;
    opts.max_iters = 100;
    const Hyperparams h = fit(w, fw, KernelKind::feature_embedded, opts);
    const Hyperparams again = fit(w, fw, KernelKind::feature_embedded, opts);
    CHECK(h.sigma == again.sigma);
    CHECK(h.beta == again.beta);
    CHECK(h.sigma_n == again.sigma_n);

    // descent: fitted objective no worse than a plausible starting guess
    Hyperparams start{1.0, 1.0, 0.3};
    CHECK(nlml(w, fw, h, KernelKind::feature_embedded) <=
          nlml(w, fw, start, KernelKind::feature_embedded) + 1e-9);
}

TEST_CASE("fit with fixed noise keeps sigma_n pinned") {
    std::mt19937 rng(67);
    const TrainingWindow w = rand_window(rng, 20, 9);
    FitOptions opts;
    opts.restarts = 2;
    opts.max_iters = 60;
    opts.fixed_sigma_n = 0.123;
    const Hyperparams h = fit(w, FeatureWeights::uniform(9), KernelKind::feature_embedded, opts);
    CHECK(h.sigma_n == 0.123);
}

TEST_CASE("fit rejects windows that are too small") {
    TrainingWindow w;
    FeatureVector f;
    f.values = Eigen::VectorXd::Zero(9);
    w.push_back(0, 1.0, f);
    CHECK_THROWS(fit(w, FeatureWeights::uniform(9), KernelKind::feature_embedded));
}

// ---------------------------------------------------------------------------
// prune

namespace {
std::vector<CategoryTag> tags_for(const std::vector<std::size_t>& extreme, std::size_t n) {
    std::vector<CategoryTag> tags;
    for (std::size_t i = 0; i < n; ++i) {
        CategoryTag t;
        t.index = i;
        t.category = std::find(extreme.begin(), extreme.end(), i) != extreme.end()
                         ? Category::A_extreme
                         : Category::B_typical;
        tags.push_back(t);
    }
    return tags;
}
}  // namespace

TEST_CASE("prune is the identity below the cap") {
    std::mt19937 rng(70);
    const TrainingWindow w = rand_window(rng, 10, 9);
    PrunePolicy p{20, 0.5};
    const TrainingWindow out = prune(w, tags_for({}, 10), p);
    CHECK(out.indices == w.indices);
}

TEST_CASE("prune with fraction zero is reverse-chronological truncation") {
    std::mt19937 rng(71);
    const TrainingWindow w = rand_window(rng, 30, 9);
    PrunePolicy p{12, 0.0};
    const TrainingWindow out = prune(w, tags_for({2, 5, 9}, 30), p);
    REQUIRE(out.size() == 12);
    for (std::size_t i = 0; i < 12; ++i) CHECK(out.indices[i] == static_cast<std::int64_t>(18 + i));
}

TEST_CASE("prune retains recent extremes plus recent typicals (30-point fixture)") {
    std::mt19937 rng(72);
    const TrainingWindow w = rand_window(rng, 30, 9);
    const auto tags = tags_for({2, 5, 9, 13, 17, 21, 25, 28}, 30);
    PrunePolicy p{10, 0.5};
    const TrainingWindow out = prune(w, tags, p);
    REQUIRE(out.size() == 10);
    // 5 most-recent A: {28,25,21,17,13}; 5 most-recent B: {29,27,26,24,23}
    const std::vector<std::int64_t> expected{13, 17, 21, 23, 24, 25, 26, 27, 28, 29};
    CHECK(out.indices == expected);
}

TEST_CASE("prune output is a subsequence with targets aligned") {
    std::mt19937 rng(73);
    const TrainingWindow w = rand_window(rng, 40, 9);
    const auto tags = tags_for({1, 7, 30, 35}, 40);
    PrunePolicy p{15, 0.3};
    const TrainingWindow out = prune(w, tags, p);
    REQUIRE(out.size() == 15);
    std::size_t cursor = 0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        while (cursor < w.size() && w.indices[cursor] != out.indices[i]) ++cursor;
        REQUIRE(cursor < w.size());
        CHECK(w.targets[cursor] == out.targets[i]);
    }
}
