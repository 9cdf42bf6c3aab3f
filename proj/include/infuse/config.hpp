#pragma once

#include "infuse/autoenc.hpp"
#include "infuse/meta.hpp"
#include "infuse/pool.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace infuse {

// Offsets added to the master seed for each randomized component.
namespace seed_offset {
inline constexpr std::uint64_t split = 1;
inline constexpr std::uint64_t svm = 11;
inline constexpr std::uint64_t tree = 13;
inline constexpr std::uint64_t forest = 14;
inline constexpr std::uint64_t ae_holdout = 20;
inline constexpr std::uint64_t ae1 = 21;
inline constexpr std::uint64_t ae2 = 22;
inline constexpr std::uint64_t meta = 31;  // plus the ablation configuration index
inline constexpr std::uint64_t svm_meta = 41;
inline constexpr std::uint64_t projection = 51;
} // namespace seed_offset

struct ExperimentConfig {
    std::filesystem::path train_path = "data/KDDTrain+.txt";
    std::filesystem::path test_plus_path = "data/KDDTest+.txt";
    std::filesystem::path test21_path = "data/KDDTest-21.txt";
    std::filesystem::path out_dir = "infuse-out";
    std::uint64_t seed = 42;
    unsigned threads = 0;

    PoolParams pool;
    double ae_val_fraction = 0.1;
    AeConfig ae1 = AeConfig::ae1();
    AeConfig ae2 = AeConfig::ae2();
    MetaNetConfig meta;
    SvmParams svm_meta;
    bool ablation = true;
    bool svg = true;
    std::vector<std::string> unseen_attacks;

    std::uint64_t component_seed(std::uint64_t offset) const { return seed + offset; }
    // Seed of the meta-learner for ablation configuration `index`; the full
    // hybrid uses the last index, so the headline model is the full row.
    std::uint64_t meta_seed(std::size_t index) const { return seed + seed_offset::meta + index; }

    // Applies one `key = value` setting; throws ConfigError on an unknown key
    // or a malformed value.
    void set(std::string_view key, std::string_view value);
    // Effective settings, one `key = value` per line, in a stable order.
    std::string to_text() const;
    static std::vector<std::string> keys();
};

// Parses a flat key-value file: one `key = value` per line, `#` comments.
std::vector<std::pair<std::string, std::string>> parse_config_text(std::string_view text, const std::string& source);

// INFUSE_SVM_CAP -> svm.cap style mapping of the process environment. Only
// variables naming a known key are returned.
std::vector<std::pair<std::string, std::string>> environment_overrides(char** envp);

struct ConfigSources {
    std::filesystem::path file;  // empty: no file
    char** envp = nullptr;
    std::vector<std::pair<std::string, std::string>> flags;
};

// defaults < file < environment < flags.
ExperimentConfig resolve_config(const ConfigSources& sources);

} // namespace infuse
