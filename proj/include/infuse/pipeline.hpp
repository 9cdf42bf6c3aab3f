#pragma once

#include "infuse/autoenc.hpp"
#include "infuse/config.hpp"
#include "infuse/eval.hpp"
#include "infuse/ingest.hpp"
#include "infuse/meta.hpp"
#include "infuse/pool.hpp"
#include "infuse/shift.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace infuse {

using LogSink = std::function<void(const std::string&)>;

// Directory layout under the configured output directory.
struct OutputLayout {
    std::filesystem::path root;

    std::filesystem::path preprocess() const { return root / "preprocess"; }
    std::filesystem::path bundle() const { return root / "bundle"; }
    std::filesystem::path eval() const { return root / "eval"; }
    std::filesystem::path ablate() const { return root / "ablate"; }
    std::filesystem::path shift() const { return root / "shift"; }
    std::filesystem::path report() const { return root / "report"; }
};

struct TestSet {
    std::string name;  // "test_plus" or "test21"
    std::string title; // "Test+" or "Test-21"
    EncodedMatrix data;
};

struct Preprocessed {
    EncodingSchema schema;
    EncodedMatrix train;
    SplitPlan split;
    std::vector<TestSet> tests;
    std::set<std::string> unseen;  // unseen families flagged in reports
};

// Loads the raw files, fits the schema on train, encodes every split and
// writes the artifacts. Re-running with the same config rewrites identical
// bytes.
Preprocessed run_preprocess(const ExperimentConfig& cfg, const LogSink& log = {});
Preprocessed load_preprocessed(const ExperimentConfig& cfg);

struct ManifestEntry {
    std::string name;
    std::string file;
    std::string hash;
    std::uint64_t bytes = 0;
};

struct Bundle {
    EncodingSchema schema;
    BasePool pool;
    AeModel ae1;
    AeModel ae2;
    MetaModel meta;
    SvmModel svm_meta;
    std::vector<double> vote_weights;
    std::vector<ManifestEntry> manifest;

    // Hash of the manifest text; identifies a trained bundle.
    std::string id() const;
};

std::string manifest_text(const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> parse_manifest(std::string_view text);

// Hybrid features of `x` through the bundle's pool and encoders.
Hybrid hybrid_features(const Bundle& bundle, const Matrix& x);

Bundle run_train(const ExperimentConfig& cfg, const LogSink& log = {});
// Verifies every manifest hash before decoding.
Bundle load_bundle(const std::filesystem::path& dir);

struct EvaluationSummary {
    std::map<std::string, std::vector<std::pair<std::string, MetricsReport>>> metrics;  // set -> rows
    std::map<std::string, std::vector<std::pair<std::string, McnemarResult>>> mcnemar;  // set -> vs each base
    std::map<std::string, std::string> best_base;
    std::map<std::string, std::vector<AttackRate>> per_attack;
};

EvaluationSummary run_evaluate(const ExperimentConfig& cfg, const LogSink& log = {});

struct AblationRow {
    std::string blocks;
    std::size_t width = 0;
    std::uint64_t seed = 0;
    std::map<std::string, MetricsReport> by_set;
};

std::vector<AblationRow> run_ablate(const ExperimentConfig& cfg, const LogSink& log = {});

std::map<std::string, ShiftReport> run_shift(const ExperimentConfig& cfg, const LogSink& log = {});

// Renders summary.md (and SVG plots when enabled) from evaluate/ablate output.
void run_report(const ExperimentConfig& cfg, const LogSink& log = {});

// Per-sample predictions CSV: sample_index, y_true, attack_name, p_attack, z0..z9.
std::string predictions_csv(const EncodedMatrix& data, const Vector& p, const Matrix& z);

} // namespace infuse
