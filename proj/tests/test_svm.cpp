#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>

#include "minids/svm.hpp"

using namespace minids;

namespace {

// Independent dual QP solver used as the training oracle: max-violating-pair
// coordinate ascent on the same objective, run to a far tighter stopping
// criterion than the trainer under test. Convexity makes the optimum unique,
// so agreement of the dual objectives certifies the trainer.
struct qp_oracle {
    std::vector<double> alpha;
    double objective = 0.0;
    bool converged = false;
};

qp_oracle solve_dual_qp(const LabeledDataset& ds, double C, double gamma, double eps = 1e-9,
                        size_t max_iter = 1000000) {
    const size_t n = ds.size();
    std::vector<double> y(n);
    for (size_t i = 0; i < n; ++i) y[i] = double(ds.y[i]);
    std::vector<double> K(n * n);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j) K[i * n + j] = rbf_kernel(ds.X[i], ds.X[j], gamma);

    qp_oracle out;
    out.alpha.assign(n, 0.0);
    std::vector<double>& a = out.alpha;
    // grad_i of (1/2 a'Qa - e'a) with Q_ij = y_i y_j K_ij
    std::vector<double> grad(n, -1.0);

    for (size_t iter = 0; iter < max_iter; ++iter) {
        double up_best = -1e300, low_best = 1e300;
        size_t i = n;
        for (size_t t = 0; t < n; ++t) {
            const bool in_up = (y[t] > 0 && a[t] < C) || (y[t] < 0 && a[t] > 0);
            const bool in_low = (y[t] > 0 && a[t] > 0) || (y[t] < 0 && a[t] < C);
            const double v = -y[t] * grad[t];
            if (in_up && v > up_best) {
                up_best = v;
                i = t;
            }
            if (in_low && v < low_best) low_best = v;
        }
        if (i == n || up_best - low_best < eps) {
            out.converged = (i == n || up_best - low_best < eps);
            break;
        }
        // second-order partner choice: maximize the guaranteed decrease
        size_t j = n;
        double best_gain = -1.0;
        for (size_t t = 0; t < n; ++t) {
            const bool in_low = (y[t] > 0 && a[t] > 0) || (y[t] < 0 && a[t] < C);
            if (!in_low) continue;
            const double diff = up_best - (-y[t] * grad[t]);
            if (diff <= 0) continue;
            double q = K[i * n + i] + K[t * n + t] - 2.0 * K[i * n + t];
            if (q < 1e-12) q = 1e-12;
            const double gain = diff * diff / q;
            if (gain > best_gain) {
                best_gain = gain;
                j = t;
            }
        }
        if (j == n) {
            out.converged = true;
            break;
        }

        // two-variable subproblem along the equality constraint
        const double s = y[i] * y[j];
        double L, H;
        if (s < 0) {
            L = std::max(0.0, a[j] - a[i]);
            H = std::min(C, C + a[j] - a[i]);
        } else {
            L = std::max(0.0, a[i] + a[j] - C);
            H = std::min(C, a[i] + a[j]);
        }
        double quad = K[i * n + i] + K[j * n + j] - 2.0 * K[i * n + j];
        if (quad < 1e-12) quad = 1e-12;
        // y_t * grad_t equals F_t - y_t, so the bias-free error difference is
        // (y_i grad_i - y_j grad_j)
        const double delta = y[j] * (y[i] * grad[i] - y[j] * grad[j]) / quad;
        // snap near-bound values exactly onto the bound; a 1-ulp shortfall
        // would otherwise leave a pair selectable with no representable step
        auto snap = [&](double v) {
            if (v < 1e-10) return 0.0;
            if (v > C - 1e-10) return C;
            return v;
        };
        const double aj_new = snap(std::clamp(a[j] + delta, L, H));
        const double ai_new = snap(a[i] + s * (a[j] - aj_new));
        const double di = y[i] * (ai_new - a[i]), dj = y[j] * (aj_new - a[j]);
        a[i] = ai_new;
        a[j] = aj_new;
        for (size_t t = 0; t < n; ++t) grad[t] += y[t] * (di * K[i * n + t] + dj * K[j * n + t]);
    }

    double sum = 0.0, quad_term = 0.0;
    for (size_t i = 0; i < n; ++i) {
        sum += a[i];
        for (size_t j = 0; j < n; ++j)
            quad_term += a[i] * a[j] * y[i] * y[j] * K[i * n + j];
    }
    out.objective = sum - 0.5 * quad_term;
    return out;
}

// worst KKT violation of a trained model over its training set
double max_kkt_violation(const SvmModel& m, const LabeledDataset& ds) {
    // recover alpha per training point by matching support vectors
    std::vector<double> alpha(ds.size(), 0.0);
    for (size_t s = 0; s < m.support_vectors.size(); ++s) {
        for (size_t i = 0; i < ds.size(); ++i) {
            if (alpha[i] == 0.0 && ds.X[i] == m.support_vectors[s] &&
                double(ds.y[i]) * m.coeffs[s] > 0) {
                alpha[i] = std::fabs(m.coeffs[s]);
                break;
            }
        }
    }
    double worst = 0.0;
    for (size_t i = 0; i < ds.size(); ++i) {
        const double yf = double(ds.y[i]) * decision_value(m, ds.X[i]);
        double v = 0.0;
        if (alpha[i] <= 1e-12) v = std::max(0.0, 1.0 - yf);
        else if (alpha[i] >= m.c_param - 1e-12) v = std::max(0.0, yf - 1.0);
        else v = std::fabs(yf - 1.0);
        worst = std::max(worst, v);
    }
    return worst;
}

LabeledDataset random_dataset(rng_t& rng, size_t n, size_t dim) {
    LabeledDataset ds;
    ds.schema_id = "test";
    for (size_t j = 0; j < dim; ++j) ds.feature_names.push_back("f" + std::to_string(j));
    while (true) {
        ds.X.clear();
        ds.y.clear();
        for (size_t i = 0; i < n; ++i) {
            FeatureVector v(dim);
            for (double& x : v) x = uniform01(rng);
            ds.X.push_back(v);
            ds.y.push_back(uniform01(rng) < 0.5 ? label_benign : label_malicious);
        }
        const long b = std::count(ds.y.begin(), ds.y.end(), label_benign);
        if (b > 0 && size_t(b) < n) return ds;
    }
}

} // namespace

TEST_CASE("rbf kernel satisfies its defining identities") {
    rng_t rng(5150);
    for (int trial = 0; trial < 2000; ++trial) {
        const size_t dim = 1 + uniform_index(rng, 6);
        FeatureVector a(dim), b(dim);
        for (double& x : a) x = uniform(rng, -5, 5);
        for (double& x : b) x = uniform(rng, -5, 5);
        const double gamma = uniform(rng, 0, 3);
        const double kab = rbf_kernel(a, b, gamma);
        REQUIRE(kab == rbf_kernel(b, a, gamma));
        REQUIRE(kab > 0.0);
        REQUIRE(kab <= 1.0);
        REQUIRE(rbf_kernel(a, a, gamma) == 1.0);
        REQUIRE(rbf_kernel(a, b, 0.0) == 1.0);
    }
    REQUIRE(rbf_kernel({0, 0}, {1, 1}, 0.5) == Catch::Approx(0.36787944117144233).epsilon(1e-12));
    REQUIRE_THROWS_AS(rbf_kernel({1, 2}, {1, 2, 3}, 0.1), dimension_mismatch);
}

TEST_CASE("two opposite points train to the known analytic solution") {
    LabeledDataset ds;
    ds.schema_id = "test";
    ds.feature_names = {"x"};
    ds.X = {{0.0}, {1.0}};
    ds.y = {label_benign, label_malicious};

    const SvmModel m = train_smo(ds, 10.0, 1.0, 1e-8);
    REQUIRE(m.support_vectors.size() == 2);

    // stationarity of 2a - a^2(1 - e^-1) gives alpha = 1 / (1 - e^-1)
    const double alpha_star = 1.0 / (1.0 - 0.36787944117144233);
    REQUIRE(std::fabs(m.coeffs[0]) == Catch::Approx(alpha_star).epsilon(1e-6));
    REQUIRE(std::fabs(m.coeffs[1]) == Catch::Approx(alpha_star).epsilon(1e-6));
    REQUIRE(m.coeffs[0] + m.coeffs[1] == Catch::Approx(0.0).margin(1e-6));

    REQUIRE(predict(m, {0.0}) == label_benign);
    REQUIRE(predict(m, {1.0}) == label_malicious);
    REQUIRE(std::fabs(decision_value(m, {0.5})) < 1e-9);

    const qp_oracle oracle = solve_dual_qp(ds, 10.0, 1.0);
    REQUIRE(oracle.converged);
    REQUIRE(svm_dual_objective(m) == Catch::Approx(oracle.objective).margin(1e-6));
}

TEST_CASE("XOR becomes separable under the RBF kernel") {
    LabeledDataset ds;
    ds.schema_id = "test";
    ds.feature_names = {"a", "b"};
    ds.X = {{0, 0}, {1, 1}, {0, 1}, {1, 0}};
    ds.y = {label_benign, label_benign, label_malicious, label_malicious};
    const SvmModel m = train_smo(ds, 10.0, 1.0, 1e-8);
    for (size_t i = 0; i < ds.size(); ++i) REQUIRE(predict(m, ds.X[i]) == ds.y[i]);
    const qp_oracle oracle = solve_dual_qp(ds, 10.0, 1.0);
    REQUIRE(svm_dual_objective(m) == Catch::Approx(oracle.objective).margin(1e-6));
}

TEST_CASE("degenerate inputs are rejected") {
    LabeledDataset ds;
    ds.X = {{0.0}, {1.0}};
    ds.y = {label_benign, label_benign};
    REQUIRE_THROWS_AS(train_smo(ds, 1.0, 0.1), single_class);

    ds.y = {label_benign, label_malicious};
    ds.X[1][0] = std::numeric_limits<double>::quiet_NaN();
    REQUIRE_THROWS_AS(train_smo(ds, 1.0, 0.1), non_finite_feature);

    ds.X[1][0] = 1.0;
    REQUIRE_THROWS_AS(train_smo(ds, -1.0, 0.1), minids::error);
}

TEST_CASE("trainer matches the QP oracle across random small problems") {
    rng_t rng(31337);
    const double cs[] = {0.5, 1.0, 10.0};
    const double gammas[] = {0.1, 1.0};
    for (int trial = 0; trial < 50; ++trial) {
        const size_t n = 4 + uniform_index(rng, 17); // 4..20
        const size_t dim = 1 + uniform_index(rng, 4);
        const LabeledDataset ds = random_dataset(rng, n, dim);
        const double C = cs[trial % 3];
        const double gamma = gammas[trial % 2];

        const SvmModel m = train_smo(ds, C, gamma, 1e-8);
        const qp_oracle oracle = solve_dual_qp(ds, C, gamma);
        REQUIRE(oracle.converged);

        INFO("trial " << trial << " n=" << n << " dim=" << dim << " C=" << C
                      << " gamma=" << gamma);
        REQUIRE(svm_dual_objective(m) == Catch::Approx(oracle.objective).margin(1e-6));
        REQUIRE(max_kkt_violation(m, ds) <= 1e-3);

        double coeff_sum = 0.0;
        for (size_t s = 0; s < m.coeffs.size(); ++s) {
            coeff_sum += m.coeffs[s];
            const double a = std::fabs(m.coeffs[s]);
            REQUIRE(a > 0.0);
            REQUIRE(a <= C + 1e-12);
        }
        REQUIRE(std::fabs(coeff_sum) < 1e-6);
    }
}

TEST_CASE("training is deterministic for identical inputs") {
    rng_t rng(2222);
    const LabeledDataset ds = random_dataset(rng, 40, 3);
    const SvmModel a = train_smo(ds, 1.0, 0.5);
    const SvmModel b = train_smo(ds, 1.0, 0.5);
    REQUIRE(a.coeffs == b.coeffs);
    REQUIRE(a.bias == b.bias);
    REQUIRE(a.support_vectors == b.support_vectors);
    for (int i = 0; i < 50; ++i) {
        FeatureVector probe(3);
        for (double& x : probe) x = uniform01(rng);
        REQUIRE(decision_value(a, probe) == decision_value(b, probe));
    }
}

TEST_CASE("free support vectors sit on the margin of a separable set") {
    LabeledDataset ds;
    ds.schema_id = "test";
    ds.feature_names = {"x", "y"};
    rng_t rng(606);
    for (int i = 0; i < 30; ++i) {
        const double cls = i % 2 ? 1.0 : 0.0;
        ds.X.push_back({cls * 3 + uniform01(rng) * 0.5, cls * 3 + uniform01(rng) * 0.5});
        ds.y.push_back(i % 2 ? label_malicious : label_benign);
    }
    const SvmModel m = train_smo(ds, 100.0, 0.5, 1e-8);
    for (size_t i = 0; i < ds.size(); ++i) {
        const double yf = double(ds.y[i]) * decision_value(m, ds.X[i]);
        REQUIRE(yf >= 1.0 - 1e-3);
    }
}

TEST_CASE("model JSON round-trips to identical predictions") {
    rng_t rng(4444);
    const LabeledDataset ds = random_dataset(rng, 30, 4);
    SvmModel m = train_smo(ds, 2.0, 0.7);
    m.norm_params.min = {0, 0, 0, 0};
    m.norm_params.max = {1, 1, 1, 1};

    const auto path = (std::filesystem::temp_directory_path() / "minids_svm_rt.json").string();
    save_svm(m, path);
    const SvmModel back = load_svm(path);

    REQUIRE(back.support_vectors == m.support_vectors);
    REQUIRE(back.coeffs == m.coeffs);
    REQUIRE(back.bias == m.bias);
    REQUIRE(back.gamma_rbf == m.gamma_rbf);
    REQUIRE(back.c_param == m.c_param);
    REQUIRE(back.schema_id == m.schema_id);
    REQUIRE(back.norm_params.min == m.norm_params.min);
    for (int i = 0; i < 100; ++i) {
        FeatureVector probe(4);
        for (double& x : probe) x = uniform01(rng);
        REQUIRE(decision_value(back, probe) == decision_value(m, probe));
    }
    std::remove(path.c_str());
}

TEST_CASE("model loader rejects foreign files") {
    namespace fs = std::filesystem;
    const auto path = (fs::temp_directory_path() / "minids_svm_bad.json").string();

    auto write = [&](const std::string& content) {
        std::ofstream out(path);
        out << content;
    };

    write("{\"version\": 2}");
    REQUIRE_THROWS_AS(load_svm(path), model_format_error);
    write("{\"version\": 1, \"model_kind\": \"cart\"}");
    REQUIRE_THROWS_AS(load_svm(path), model_format_error);
    write("{\"version\": 1, \"model_kind\": \"svm\"}");
    REQUIRE_THROWS_AS(load_svm(path), model_format_error);
    write("this is not json");
    REQUIRE_THROWS_AS(load_svm(path), model_format_error);
    REQUIRE_THROWS_AS(load_svm("/nonexistent/m.json"), io_failure);
    std::remove(path.c_str());
}
