#pragma once

#include "infuse/matrix.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace infuse {

// Little-endian byte sink used by every binary container.
class ByteWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
    void f64(double v);
    void str(std::string_view s);
    void f64s(std::span<const double> v);
    void matrix(const Matrix& m);
    void labels(const Labels& y);
    void raw(std::string_view bytes) { buf_.append(bytes); }

    const std::string& bytes() const { return buf_; }

private:
    std::string buf_;
};

class ByteReader {
public:
    explicit ByteReader(std::string_view bytes) : data_(bytes) {}

    std::uint8_t u8();
    std::uint32_t u32();
    std::uint64_t u64();
    std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
    double f64();
    std::string str();
    std::vector<double> f64s();
    Matrix matrix();
    Labels labels();
    std::string_view raw(std::size_t n);

    bool done() const { return pos_ == data_.size(); }

private:
    void need(std::size_t n) const;

    std::string_view data_;
    std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temp file then renames over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

// 64-bit FNV-1a, hex encoded. Used for bundle manifests.
std::string fnv1a_hex(std::string_view bytes);

// Matrix container: "INFM", u32 rows, u32 cols, f64 row-major payload.
std::string encode_infm(const Matrix& m);
Matrix decode_infm(std::string_view bytes);
void save_matrix(const std::filesystem::path& path, const Matrix& m);
Matrix load_matrix(const std::filesystem::path& path);

// Model container: "INFB", u32 format version, u32 model type, u64 payload
// length, payload.
enum class ModelType : std::uint32_t {
    svm = 1,
    knn = 2,
    tree = 3,
    forest = 4,
    adaboost = 5,
    autoencoder = 6,
    meta_net = 7,
};

inline constexpr std::uint32_t kInfbVersion = 1;

std::string encode_infb(ModelType type, std::string_view payload);
// Returns the payload; throws SchemaError on a bad magic, version or type.
std::string decode_infb(std::string_view bytes, ModelType expected);

} // namespace infuse
