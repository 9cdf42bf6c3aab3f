// Acceptance gate for the criteria that do not need the NSL-KDD files:
// analytic oracles, metric identities and run-to-run determinism. One line per
// criterion; exit status is the number of failures.

#include "infuse/autoenc.hpp"
#include "infuse/eval.hpp"
#include "infuse/meta.hpp"
#include "infuse/pipeline.hpp"
#include "infuse/rng.hpp"
#include "infuse/serialize.hpp"
#include "infuse/shift.hpp"
#include "infuse/svm.hpp"
#include "oracles/brute.hpp"
#include "oracles/finite_diff.hpp"
#include "support/small_run.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>

using namespace infuse;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(bool ok, const std::string& id, const std::string& detail) {
    std::printf("%s  %-4s %s\n", ok ? "PASS" : "FAIL", id.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

Matrix uniform_matrix(Rng& rng, Eigen::Index n, Eigen::Index d) {
    Matrix m(n, d);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform();
    return m;
}

void jitter_biases(DenseNet& net, Rng& rng) {
    for (auto& l : net.layers) {
        for (Eigen::Index i = 0; i < l.b.size(); ++i) l.b[i] = rng.uniform(-0.1, 0.1);
    }
}

void gradient_check() {
    constexpr int kSeeds = 24;
    constexpr double kTol = 1e-5;
    double worst_ae = 0.0, worst_meta = 0.0;
    for (int s = 1; s <= kSeeds; ++s) {
        const auto seed = static_cast<std::uint64_t>(s);
        Rng rng(seed * 7919);
        AeConfig ac;
        ac.encoder_widths = {10, 8, 6, 4};
        ac.weight_decay = 1e-4;
        ac.seed = seed;
        auto ae = make_autoencoder(ac, 12);
        jitter_biases(ae.net, rng);
        const Matrix x = uniform_matrix(rng, 9, 12);
        const auto num_ae = oracle::numeric_gradient(ae.net, [&](const DenseNet& net) {
            AeModel probe = ae;
            probe.net = net;
            return ae_loss(probe, x);
        });
        worst_ae = std::max(worst_ae, oracle::max_relative_error(ae_grad(ae, x).grad, num_ae));

        MetaNetConfig mc;
        mc.hidden = {12, 10, 8, 6, 4};
        mc.seed = seed;
        auto meta = make_meta(mc, 14);
        jitter_biases(meta.net, rng);
        const Matrix f = uniform_matrix(rng, 10, 14);
        Labels y(10);
        for (auto& v : y) v = static_cast<int>(rng.below(2));
        const auto num_meta = oracle::numeric_gradient(meta.net, [&](const DenseNet& net) {
            return meta_loss(MetaModel{net}, f, y);
        });
        worst_meta = std::max(worst_meta, oracle::max_relative_error(meta_grad(meta, f, y).grad, num_meta));
    }
    report(worst_ae < kTol && worst_meta < kTol, "5a",
           "backprop vs central differences, " + std::to_string(kSeeds) + " seeds each: autoencoder " + sci(worst_ae) +
               ", meta-learner " + sci(worst_meta) + " (tol " + sci(kTol) + " relative)");
}

void smo_check() {
    constexpr double kTol = 1e-3;
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        Rng rng(seed);
        const std::size_t n = 48;
        Matrix x(static_cast<Eigen::Index>(n), 3);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (Eigen::Index k = 0; k < 3; ++k) x(static_cast<Eigen::Index>(i), k) = rng.uniform();
            y[i] = x(static_cast<Eigen::Index>(i), 0) + 0.4 * rng.normal() > 0.5 ? 1 : -1;
        }
        const double c = seed % 2 ? 1.0 : 20.0, gamma = 1.5;
        std::vector<double> q(n * n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                q[i * n + j] = y[i] * y[j] *
                               rbf_kernel(row_span(x, static_cast<Eigen::Index>(i)), row_span(x, static_cast<Eigen::Index>(j)), gamma);
            }
        }
        const auto smo = solve_smo(x, y, c, gamma, 1e-6);
        const auto [alpha, obj] = oracle::solve_dual_qp(q, y, c);
        worst = std::max(worst, std::abs(smo.objective - obj) / std::max(1.0, std::abs(obj)));
    }
    report(worst < kTol, "5b", "SMO dual objective vs projected-gradient QP, 8 problems: worst relative gap " + sci(worst) +
                                   " (tol " + sci(kTol) + ")");
}

void ks_check() {
    std::size_t mismatches = 0, cases = 0;
    for (std::uint64_t seed = 1; seed <= 400; ++seed) {
        Rng rng(seed);
        const std::size_t n = 1 + rng.below(200), m = 1 + rng.below(200);
        std::vector<double> a(n), b(m);
        const bool discrete = seed % 3 == 0;
        for (auto& v : a) v = discrete ? static_cast<double>(rng.below(8)) : rng.normal();
        for (auto& v : b) v = discrete ? static_cast<double>(rng.below(8)) : rng.normal() + 0.2;
        ++cases;
        if (ks_two_sample(a, b).d != oracle::ks_statistic(a, b)) ++mismatches;
    }
    report(mismatches == 0, "5c",
           "two-sample KS vs brute-force ECDF scan, " + std::to_string(cases) + " cases with n, m <= 200: " +
               std::to_string(mismatches) + " mismatches (exact equality required)");
}

void auc_check() {
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 300; ++seed) {
        Rng rng(seed);
        const std::size_t n = 2 + rng.below(300);
        std::vector<int> y(n);
        std::vector<double> s(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = static_cast<int>(rng.below(2));
            s[i] = seed % 2 ? std::round(rng.uniform() * 10) / 10 + 0.1 * y[i] : rng.normal() + 0.5 * y[i];
        }
        y[0] = 0;
        y[1] = 1;
        worst = std::max(worst, std::abs(roc_points(y, s).auc - oracle::pairwise_auc(y, s)));
    }
    report(worst < 1e-12, "5d", "ROC AUC vs Mann-Whitney pair count, 300 fixtures with ties: worst gap " + sci(worst) +
                                    " (tol 1e-12)");
}

void identity_check() {
    Rng rng(11);
    double worst_sum = 0.0, worst_hm = 0.0;
    for (int t = 0; t < 5000; ++t) {
        const ConfusionCounts c{rng.below(5000) + 1, rng.below(5000), rng.below(5000) + 1, rng.below(5000)};
        const auto m = metrics(c);
        worst_sum = std::max(worst_sum, std::abs(m.recall + m.fnr - 1.0));
        worst_hm = std::max(worst_hm, std::abs(m.f_score - 2 * m.precision * m.recall / (m.precision + m.recall)));
    }
    report(worst_sum < 1e-12 && worst_hm < 1e-12, "6a",
           "recall + FNR = 1 and F = harmonic mean over 5000 tables: worst " + sci(std::max(worst_sum, worst_hm)) +
               " (tol 1e-12)");
    const double se_plus = binomial_se(0.91, 22544), se_21 = binomial_se(0.91, 11850);
    const bool ok = std::abs(se_plus - 0.003) <= 0.001 && std::abs(se_21 - 0.005) <= 0.001;
    report(ok, "6b", "F-score SE at F = 0.91: n = 22544 gives " + text::fixed(se_plus, 4) + " (reported 0.003), n = 11850 gives " +
                         text::fixed(se_21, 4) + " (reported 0.005), tol 0.001");
}

std::string prediction_bytes(const fs::path& out) {
    std::string all;
    for (const char* set : {"test_plus", "test21"}) {
        for (const char* file : {"predictions.csv", "predictions_svm_meta.csv"}) {
            all += read_file(out / "eval" / set / file);
        }
    }
    return all;
}

void determinism_check() {
    const auto root_a = support::fresh_dir("infuse_accept_a");
    const auto root_b = support::fresh_dir("infuse_accept_b");
    auto cfg_a = support::small_config(root_a);
    auto cfg_b = support::small_config(root_b);
    cfg_b.threads = 5;  // different chunk scheduling, same fixed chunk boundaries
    for (auto* cfg : {&cfg_a, &cfg_b}) {
        run_preprocess(*cfg);
        run_train(*cfg);
        run_evaluate(*cfg);
    }
    const auto a = prediction_bytes(cfg_a.out_dir), b = prediction_bytes(cfg_b.out_dir);
    const bool bundles = read_file(cfg_a.out_dir / "bundle" / "manifest.txt") == read_file(cfg_b.out_dir / "bundle" / "manifest.txt");
    report(a == b && bundles && !a.empty(), "7",
           "two full runs with seed 42 (2 vs 5 threads): prediction CSVs " + std::string(a == b ? "byte-identical" : "differ") +
               " (" + std::to_string(a.size()) + " bytes, hash " + fnv1a_hex(a) + "), bundle manifests " +
               (bundles ? "identical" : "differ"));

    auto cfg_c = support::small_config(support::fresh_dir("infuse_accept_c"), 43);
    run_preprocess(cfg_c);
    run_train(cfg_c);
    run_evaluate(cfg_c);
    report(prediction_bytes(cfg_c.out_dir) != a, "7b", "a different seed (43) changes the predictions");
}

} // namespace

int main() {
    try {
        gradient_check();
        smo_check();
        ks_check();
        auc_check();
        identity_check();
        determinism_check();
    } catch (const std::exception& e) {
        std::printf("FAIL  --   unexpected exception: %s\n", e.what());
        ++failures;
    }
    std::printf("%d failure(s)\n", failures);
    return failures == 0 ? 0 : 1;
}
