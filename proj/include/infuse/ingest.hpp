#pragma once

#include "infuse/matrix.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace infuse {

inline constexpr std::size_t kFeatureCount = 41;
inline constexpr std::size_t kCategoricalCount = 3;
inline constexpr std::size_t kNumericCount = kFeatureCount - kCategoricalCount;

// Raw feature names in file order.
const std::array<std::string_view, kFeatureCount>& feature_names();

// Feature positions of protocol_type, service, flag.
inline constexpr std::array<std::size_t, kCategoricalCount> kCategoricalFeatures = {1, 2, 3};

struct FlowRecord {
    std::array<std::string, kCategoricalCount> categorical;
    std::array<double, kNumericCount> numeric{};
    std::string attack_label;
    int difficulty = -1;  // -1 when the file has no difficulty column
};

// Parses NSL-KDD text (42 or 43 comma-separated fields, no header). Blank
// lines are skipped. Throws SchemaError on a wrong field count and ParseError
// on an unparsable token, both naming the 1-based line number.
std::vector<FlowRecord> parse_records(std::istream& in, const std::string& source = "<stream>");
std::vector<FlowRecord> load_records(const std::filesystem::path& path);

struct CategoricalColumn {
    std::size_t feature = 0;
    std::size_t offset = 0;
    std::vector<std::string> categories;  // first-appearance order

    bool operator==(const CategoricalColumn&) const = default;
};

struct NumericColumn {
    std::size_t feature = 0;
    std::size_t offset = 0;
    double min = 0.0;
    double max = 0.0;

    bool operator==(const NumericColumn&) const = default;
};

// Encoded layout keeps raw feature order; each categorical expands in place
// into its one-hot block.
struct EncodingSchema {
    std::vector<CategoricalColumn> categorical;
    std::vector<NumericColumn> numeric;
    std::size_t width = 0;

    std::vector<std::string> column_names() const;
    std::vector<std::size_t> numeric_offsets() const;

    std::string to_text() const;
    static EncodingSchema from_text(std::string_view text);

    bool operator==(const EncodingSchema&) const = default;
};

// Width usually quoted for this encoding; one-hot of the public train file
// tends to give 122, so only larger gaps are worth a log line.
inline constexpr std::size_t kExpectedEncodedWidth = 121;

EncodingSchema fit_schema(std::span<const FlowRecord> train);

struct EncodedMatrix {
    Matrix x;
    Labels y;
    std::vector<std::string> attack;

    std::size_t rows() const { return static_cast<std::size_t>(x.rows()); }
};

inline int binarize_label(std::string_view attack_label) { return attack_label == "normal" ? 0 : 1; }

EncodedMatrix transform(std::span<const FlowRecord> records, const EncodingSchema& schema);

// Inverse of transform for in-vocabulary rows: categories from the hot index,
// numerics de-normalized.
std::vector<FlowRecord> decode(const EncodedMatrix& m, const EncodingSchema& schema);

struct SplitRatios {
    double base = 0.6;
    double meta_train_of_rest = 0.8;
};

struct SplitPlan {
    std::vector<std::size_t> base_train;
    std::vector<std::size_t> meta_train;
    std::vector<std::size_t> meta_val;
    std::uint64_t seed = 0;
    std::vector<std::string> warnings;

    std::string to_text() const;
    static SplitPlan from_text(std::string_view text);
};

// Per-class shuffle then proportional assignment; index sets come back sorted.
SplitPlan stratified_split(const Labels& y, const SplitRatios& ratios, std::uint64_t seed);
inline SplitPlan stratified_split(const EncodedMatrix& m, const SplitRatios& ratios, std::uint64_t seed) {
    return stratified_split(m.y, ratios, seed);
}

// Lower-cases and trims a label and maps the alternative spellings "sainl" and
// "apache" to the dataset's "saint" and "apache2".
std::string normalize_attack_name(std::string_view name);

// The seven attack families that occur only in the test files.
const std::vector<std::string>& default_unseen_attacks();

struct AttackTags {
    std::vector<std::string> names;        // normalized, one per record
    std::vector<bool> unseen;              // record belongs to an unseen family
    std::set<std::string> unseen_present;  // unseen families occurring in the records
};

AttackTags tag_attacks(std::span<const FlowRecord> records,
                       std::span<const std::string> unseen_families = default_unseen_attacks());

// Attack names present in test but never in train.
std::set<std::string> novel_attacks(std::span<const FlowRecord> train, std::span<const FlowRecord> test);

} // namespace infuse
