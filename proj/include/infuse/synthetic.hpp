#pragma once

#include "infuse/ingest.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace infuse {

// Generates NSL-KDD-shaped traffic records for tests and offline runs. Each
// attack family has a fixed prototype; the test splits add the seven
// test-only families, a mild covariate shift and, for the hard split, records
// pulled towards the normal prototype.
enum class SyntheticSplit { train, test_plus, test21 };

std::vector<FlowRecord> synthetic_records(std::size_t n, SyntheticSplit split, std::uint64_t seed);

// One comma-separated line in the public file layout (41 features, label,
// difficulty).
std::string to_nslkdd_line(const FlowRecord& r);

struct SyntheticPaths {
    std::filesystem::path train;
    std::filesystem::path test_plus;
    std::filesystem::path test21;
};

struct SyntheticSizes {
    std::size_t train = 3000;
    std::size_t test_plus = 1200;
    std::size_t test21 = 600;
};

SyntheticPaths write_synthetic_dataset(const std::filesystem::path& dir, const SyntheticSizes& sizes, std::uint64_t seed);

} // namespace infuse
