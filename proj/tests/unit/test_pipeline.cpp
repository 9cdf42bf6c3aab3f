#include "infuse/error.hpp"
#include "infuse/pipeline.hpp"
#include "infuse/serialize.hpp"
#include "support/small_run.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <sys/wait.h>

using namespace infuse;
namespace fs = std::filesystem;

namespace {

// Runs the CLI through the shell; returns its exit status.
int run_cli(const std::string& args) {
    const std::string cmd = std::string(std::getenv("INFUSE_CLI")) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string config_file(const ExperimentConfig& cfg, const fs::path& path) {
    std::ofstream(path) << cfg.to_text();
    return path.string();
}

} // namespace

TEST_CASE("manifest text round-trips") {
    const std::vector<ManifestEntry> e{{"svm", "svm.infb", "0123456789abcdef", 42}, {"knn", "knn.infb", "ff", 7}};
    const auto back = parse_manifest(manifest_text(e));
    REQUIRE(back.size() == 2);
    CHECK(back[0].file == "svm.infb");
    CHECK(back[1].bytes == 7);
    CHECK_THROWS_AS(parse_manifest("nope\n"), SchemaError);
    CHECK_THROWS_AS(parse_manifest("infuse-bundle 1\nsvm svm.infb\n"), SchemaError);
}

TEST_CASE("full pipeline on the synthetic corpus") {
    const auto root = support::fresh_dir("infuse_pipeline_unit");
    const auto cfg = support::small_config(root, 42, SyntheticSizes{1600, 700, 400});

    const auto pre = run_preprocess(cfg);
    CHECK(pre.tests.size() == 2);
    CHECK_FALSE(pre.unseen.empty());
    const auto pre_bytes = read_file(cfg.out_dir / "preprocess" / "train.infm");
    run_preprocess(cfg);
    CHECK(read_file(cfg.out_dir / "preprocess" / "train.infm") == pre_bytes);

    const auto bundle = run_train(cfg);
    CHECK(bundle.manifest.size() == 11);
    const auto loaded = load_bundle(cfg.out_dir / "bundle");
    CHECK(loaded.id() == bundle.id());
    const Hybrid h = hybrid_features(loaded, pre.tests[0].data.x);
    CHECK(h.layout.width[0] == 10);
    CHECK(h.layout.width[1] == pre.schema.width);
    CHECK(h.layout.width[2] == 8);
    CHECK(h.layout.width[3] == 6);

    const auto summary = run_evaluate(cfg);
    for (const auto& t : pre.tests) {
        const auto& rows = summary.metrics.at(t.name);
        CHECK(rows.size() == 10);
        CHECK(rows.front().first == "infuse");
        CHECK(rows.front().second.accuracy > 0.6);
        CHECK(fs::exists(cfg.out_dir / "eval" / t.name / "predictions.csv"));
        CHECK(summary.mcnemar.at(t.name).size() == 5);
    }

    const auto ablation = run_ablate(cfg);
    REQUIRE(ablation.size() == 5);
    // The full row reuses the headline meta-learner.
    const auto& full = ablation[full_block_set_index()];
    CHECK(full.by_set.at("test_plus").counts == summary.metrics.at("test_plus").front().second.counts);

    const auto shift = run_shift(cfg);
    CHECK(shift.size() == 2);
    CHECK(fs::exists(cfg.out_dir / "shift" / "projection_2d.csv"));
    run_report(cfg);
    CHECK(fs::exists(cfg.out_dir / "report" / "summary.md"));

    // A tampered model file is refused.
    {
        std::ofstream f(cfg.out_dir / "bundle" / "knn.infb", std::ios::app | std::ios::binary);
        f << "x";
    }
    CHECK_THROWS_AS(load_bundle(cfg.out_dir / "bundle"), SchemaError);
}

TEST_CASE("command-line exit codes") {
    if (std::getenv("INFUSE_CLI") == nullptr) {
        MESSAGE("INFUSE_CLI not set; command-line checks skipped");
        return;
    }
    const auto root = support::fresh_dir("infuse_pipeline_cli");
    auto cfg = support::small_config(root, 42, SyntheticSizes{400, 200, 100});
    const auto good = config_file(cfg, root / "good.cfg");

    CHECK(run_cli("preprocess --config " + good) == 0);
    CHECK(run_cli("train --config " + good + " --set ablation=maybe") == 3);
    CHECK(run_cli("train --config " + (root / "missing.cfg").string()) == 3);
    CHECK(run_cli("evaluate --config " + good + " --out " + (root / "empty").string()) == 2);

    auto broken = cfg;
    broken.train_path = root / "no_such_file.txt";
    broken.out_dir = root / "broken";
    CHECK(run_cli("preprocess --config " + config_file(broken, root / "broken.cfg")) == 2);

    // Training failure: a zero-width first encoder layer is rejected at
    // config time, so force a failure through an impossible SVM cap.
    CHECK(run_cli("train --config " + good + " --set svm.cap=1") == 4);
    CHECK(run_cli("bogus") != 0);
}
