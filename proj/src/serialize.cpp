#include "infuse/serialize.hpp"

#include "infuse/error.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <system_error>

namespace infuse {

namespace {

constexpr std::string_view kInfmMagic = "INFM";
constexpr std::string_view kInfbMagic = "INFB";

template <typename T>
void put_le(std::string& buf, T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        buf.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF));
    }
}

template <typename T>
T get_le(const char* p) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    }
    return static_cast<T>(v);
}

} // namespace

void ByteWriter::u32(std::uint32_t v) { put_le(buf_, v); }
void ByteWriter::u64(std::uint64_t v) { put_le(buf_, v); }
void ByteWriter::f64(double v) { put_le(buf_, std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::str(std::string_view s) {
    u64(s.size());
    buf_.append(s);
}

void ByteWriter::f64s(std::span<const double> v) {
    u64(v.size());
    for (double d : v) f64(d);
}

void ByteWriter::matrix(const Matrix& m) {
    u64(static_cast<std::uint64_t>(m.rows()));
    u64(static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) f64(m.data()[i]);
}

void ByteWriter::labels(const Labels& y) {
    u64(y.size());
    for (int v : y) u8(static_cast<std::uint8_t>(v));
}

void ByteReader::need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw SchemaError("truncated binary payload");
}

std::uint8_t ByteReader::u8() {
    need(1);
    return static_cast<std::uint8_t>(data_[pos_++]);
}

std::uint32_t ByteReader::u32() {
    need(4);
    auto v = get_le<std::uint32_t>(data_.data() + pos_);
    pos_ += 4;
    return v;
}

std::uint64_t ByteReader::u64() {
    need(8);
    auto v = get_le<std::uint64_t>(data_.data() + pos_);
    pos_ += 8;
    return v;
}

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::string ByteReader::str() {
    const auto n = u64();
    return std::string(raw(n));
}

std::vector<double> ByteReader::f64s() {
    const auto n = u64();
    need(n * 8);
    std::vector<double> v(n);
    for (auto& d : v) d = f64();
    return v;
}

Matrix ByteReader::matrix() {
    const auto rows = u64();
    const auto cols = u64();
    need(rows * cols * 8);
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = f64();
    return m;
}

Labels ByteReader::labels() {
    const auto n = u64();
    need(n);
    Labels y(n);
    for (auto& v : y) v = u8();
    return y;
}

std::string_view ByteReader::raw(std::size_t n) {
    need(n);
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string fnv1a_hex(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char out[17];
    std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
    return out;
}

std::string encode_infm(const Matrix& m) {
    if (m.rows() > UINT32_MAX || m.cols() > UINT32_MAX) throw ShapeError("matrix too large for INFM");
    ByteWriter w;
    w.raw(kInfmMagic);
    w.u32(static_cast<std::uint32_t>(m.rows()));
    w.u32(static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) w.f64(m.data()[i]);
    return w.bytes();
}

Matrix decode_infm(std::string_view bytes) {
    ByteReader r(bytes);
    if (bytes.size() < 12 || r.raw(4) != kInfmMagic) throw SchemaError("not an INFM container");
    const auto rows = r.u32();
    const auto cols = r.u32();
    if (bytes.size() != 12 + static_cast<std::size_t>(rows) * cols * 8) {
        throw SchemaError("INFM payload size does not match header");
    }
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = r.f64();
    return m;
}

void save_matrix(const std::filesystem::path& path, const Matrix& m) {
    write_file_atomic(path, encode_infm(m));
}

Matrix load_matrix(const std::filesystem::path& path) { return decode_infm(read_file(path)); }

std::string encode_infb(ModelType type, std::string_view payload) {
    ByteWriter w;
    w.raw(kInfbMagic);
    w.u32(kInfbVersion);
    w.u32(static_cast<std::uint32_t>(type));
    w.u64(payload.size());
    w.raw(payload);
    return w.bytes();
}

std::string decode_infb(std::string_view bytes, ModelType expected) {
    ByteReader r(bytes);
    if (bytes.size() < 20 || r.raw(4) != kInfbMagic) throw SchemaError("not an INFB container");
    const auto version = r.u32();
    if (version != kInfbVersion) throw SchemaError("unsupported INFB version " + std::to_string(version));
    const auto type = r.u32();
    if (type != static_cast<std::uint32_t>(expected)) {
        throw SchemaError("INFB model type " + std::to_string(type) + ", expected " +
                          std::to_string(static_cast<std::uint32_t>(expected)));
    }
    const auto len = r.u64();
    auto payload = r.raw(len);
    if (!r.done()) throw SchemaError("trailing bytes after INFB payload");
    return std::string(payload);
}

} // namespace infuse
