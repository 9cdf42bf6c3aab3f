#include "infuse/synthetic.hpp"

#include "infuse/rng.hpp"
#include "infuse/serialize.hpp"
#include "infuse/text.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace infuse {

namespace {

enum class Kind { rate, count, bytes, binary, small, zero };

// Kind and upper bound of each raw numeric feature, indexed by
// position in FlowRecord::numeric.
struct FeatureKind {
    Kind kind;
    double max;
};

const std::array<FeatureKind, kNumericCount>& feature_kinds() {
    static const auto kinds = [] {
        std::array<FeatureKind, kNumericCount> k{};
        auto at = [&](std::size_t raw) -> FeatureKind& { return k[raw == 0 ? 0 : raw - 3]; };
        at(0) = {Kind::bytes, 40000};
        at(4) = {Kind::bytes, 1e6};
        at(5) = {Kind::bytes, 1e6};
        for (std::size_t f : {6, 11, 13, 20, 21}) at(f) = {Kind::binary, 1};
        for (std::size_t f : {7, 8, 14, 17}) at(f) = {Kind::small, 3};
        for (std::size_t f : {9, 12, 15}) at(f) = {Kind::small, 30};
        for (std::size_t f : {10, 16, 18}) at(f) = {Kind::small, 6};
        at(19) = {Kind::zero, 0};
        at(22) = {Kind::count, 511};
        at(23) = {Kind::count, 511};
        at(31) = {Kind::count, 255};
        at(32) = {Kind::count, 255};
        for (std::size_t f = 24; f <= 30; ++f) at(f) = {Kind::rate, 1};
        for (std::size_t f = 33; f <= 40; ++f) at(f) = {Kind::rate, 1};
        return k;
    }();
    return kinds;
}

double realize(double v, const FeatureKind& k) {
    v = std::clamp(v, 0.0, 1.0);
    switch (k.kind) {
    case Kind::rate:
        return std::round(v * 100.0) / 100.0;
    case Kind::count:
    case Kind::small:
        return std::round(v * k.max);
    case Kind::bytes:
        return std::round(std::expm1(v * std::log1p(k.max)));
    case Kind::binary:
        return v > 0.5 ? 1.0 : 0.0;
    case Kind::zero:
        return 0.0;
    }
    return 0.0;
}

struct Family {
    std::string name;
    bool unseen = false;
    double weight = 1.0;
    std::vector<std::string> protocols;
    std::vector<std::string> services;
    std::vector<std::string> flags;
    std::array<double, kNumericCount> prototype{};
};

std::vector<Family> make_families() {
    std::vector<Family> fams = {
        {"normal", false, 0, {"tcp", "tcp", "tcp", "udp", "icmp"}, {"http", "smtp", "ftp_data", "domain_u", "private", "ftp", "telnet", "ecr_i"}, {"SF", "SF", "SF", "SF", "REJ", "S1"}, {}},
        {"neptune", false, 6, {"tcp"}, {"private", "http", "telnet", "ftp"}, {"S0", "S0", "REJ"}, {}},
        {"smurf", false, 3, {"icmp"}, {"ecr_i"}, {"SF"}, {}},
        {"satan", false, 1.2, {"tcp", "udp"}, {"private", "other", "telnet"}, {"REJ", "RSTO", "SF"}, {}},
        {"ipsweep", false, 1.2, {"icmp"}, {"eco_i", "ecr_i"}, {"SF"}, {}},
        {"portsweep", false, 1.0, {"tcp"}, {"private", "other"}, {"RSTR", "REJ"}, {}},
        {"back", false, 0.6, {"tcp"}, {"http"}, {"SF", "RSTR"}, {}},
        {"guess_passwd", false, 0.3, {"tcp"}, {"telnet", "ftp"}, {"RSTO", "SF"}, {}},
        {"warezclient", false, 0.5, {"tcp"}, {"ftp_data", "ftp"}, {"SF"}, {}},
        {"teardrop", false, 0.4, {"udp"}, {"private"}, {"SF"}, {}},
        {"nmap", false, 0.6, {"tcp", "icmp", "udp"}, {"private", "eco_i"}, {"SF", "S0"}, {}},
        {"mscan", true, 1.2, {"tcp"}, {"private", "http", "ftp", "tftp_u"}, {"REJ", "S0", "SF"}, {}},
        {"processtable", true, 1.0, {"tcp"}, {"http", "smtp"}, {"SF", "S0"}, {}},
        {"snmpguess", true, 1.0, {"udp"}, {"snmp", "private"}, {"SF"}, {}},
        {"saint", true, 0.6, {"tcp"}, {"private", "other"}, {"REJ", "SF"}, {}},
        {"apache2", true, 1.0, {"tcp"}, {"http"}, {"SF", "RSTR"}, {}},
        {"httptunnel", true, 0.5, {"tcp"}, {"http", "telnet"}, {"SF"}, {}},
        {"mailbomb", true, 0.8, {"tcp"}, {"smtp"}, {"SF"}, {}},
    };

    // Prototypes are fixed by a constant seed so every split shares them.
    Rng rng(0x5EED'1AB5ULL);
    auto& normal = fams[0].prototype;
    for (std::size_t j = 0; j < kNumericCount; ++j) {
        const auto kind = feature_kinds()[j].kind;
        const bool rare = kind == Kind::binary || kind == Kind::small;
        normal[j] = rare ? rng.uniform(0.0, 0.15) : rng.uniform(0.15, 0.55);
    }
    std::vector<std::size_t> features(kNumericCount);
    std::iota(features.begin(), features.end(), std::size_t{0});
    std::vector<std::size_t> known_displaced;
    for (std::size_t f = 1; f < fams.size(); ++f) {
        auto& fam = fams[f];
        fam.prototype = normal;
        rng.shuffle(std::span<std::size_t>(features));
        const std::size_t moved = fam.unseen ? 5 : 7;
        const double lo = fam.unseen ? 0.25 : 0.35;
        const double hi = fam.unseen ? 0.45 : 0.6;
        for (std::size_t i = 0; i < moved; ++i) {
            const auto j = features[i];
            const double step = rng.uniform(lo, hi);
            fam.prototype[j] = normal[j] + (normal[j] < 0.5 ? step : -step);
            if (!fam.unseen) known_displaced.push_back(j);
        }
        if (fam.unseen) {
            // Borrow two displacements from a known family so the new attack
            // is partly recognisable.
            const auto& donor = fams[1 + rng.below(10)].prototype;
            for (int i = 0; i < 2; ++i) {
                const auto j = known_displaced[rng.below(known_displaced.size())];
                fam.prototype[j] = donor[j];
            }
        }
    }
    return fams;
}

const std::vector<Family>& families() {
    static const auto fams = make_families();
    return fams;
}

template <typename T>
const T& pick(const std::vector<T>& v, Rng& rng) {
    return v[rng.below(v.size())];
}

} // namespace

std::vector<FlowRecord> synthetic_records(std::size_t n, SyntheticSplit split, std::uint64_t seed) {
    const auto& fams = families();
    const double normal_share = split == SyntheticSplit::train ? 0.53 : split == SyntheticSplit::test_plus ? 0.43 : 0.18;
    const double unseen_share = split == SyntheticSplit::train ? 0.0 : split == SyntheticSplit::test_plus ? 0.3 : 0.4;
    const double noise = split == SyntheticSplit::test21 ? 0.13 : 0.1;
    const double pull = split == SyntheticSplit::test21 ? 0.3 : 0.0;

    double known_w = 0, unseen_w = 0;
    for (const auto& f : fams) (f.unseen ? unseen_w : known_w) += f.weight;

    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(split)));
    std::vector<FlowRecord> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Family* fam = &fams[0];
        if (rng.uniform() >= normal_share) {
            const bool unseen = rng.uniform() < unseen_share / (1.0 - normal_share);
            double u = rng.uniform() * (unseen ? unseen_w : known_w);
            for (const auto& f : fams) {
                if (f.name == "normal" || f.unseen != unseen) continue;
                fam = &f;
                if ((u -= f.weight) < 0) break;
            }
        }
        FlowRecord r;
        r.attack_label = fam->name;
        r.categorical = {pick(fam->protocols, rng), pick(fam->services, rng), pick(fam->flags, rng)};
        const bool attack = fam->name != "normal";
        for (std::size_t j = 0; j < kNumericCount; ++j) {
            double v = fam->prototype[j];
            if (attack && pull > 0) v += pull * (fams[0].prototype[j] - v);
            if (split != SyntheticSplit::train && (j == 19 || j == 20 || j == 28 || j == 29)) v += 0.06;
            r.numeric[j] = realize(v + noise * rng.normal(), feature_kinds()[j]);
        }
        r.difficulty = split == SyntheticSplit::test21 ? static_cast<int>(rng.below(21)) : 15 + static_cast<int>(rng.below(7));
        out.push_back(std::move(r));
    }
    return out;
}

std::string to_nslkdd_line(const FlowRecord& r) {
    std::ostringstream out;
    std::size_t num = 0;
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
        if (f > 0) out << ",";
        if (f >= 1 && f <= 3) {
            out << r.categorical[f - 1];
        } else {
            const double v = r.numeric[num++];
            if (v == std::floor(v) && std::abs(v) < 1e15) out << static_cast<long long>(v);
            else out << text::exact(v);
        }
    }
    out << "," << r.attack_label;
    if (r.difficulty >= 0) out << "," << r.difficulty;
    return out.str();
}

SyntheticPaths write_synthetic_dataset(const std::filesystem::path& dir, const SyntheticSizes& sizes, std::uint64_t seed) {
    std::filesystem::create_directories(dir);
    SyntheticPaths p{dir / "KDDTrain+.txt", dir / "KDDTest+.txt", dir / "KDDTest-21.txt"};
    auto write = [&](const std::filesystem::path& path, std::size_t n, SyntheticSplit split) {
        std::string body;
        for (const auto& r : synthetic_records(n, split, seed)) body += to_nslkdd_line(r) + "\n";
        write_file_atomic(path, body);
    };
    write(p.train, sizes.train, SyntheticSplit::train);
    write(p.test_plus, sizes.test_plus, SyntheticSplit::test_plus);
    write(p.test21, sizes.test21, SyntheticSplit::test21);
    return p;
}

} // namespace infuse
