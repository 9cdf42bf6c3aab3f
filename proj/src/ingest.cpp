#include "infuse/ingest.hpp"

#include "infuse/error.hpp"
#include "infuse/rng.hpp"
#include "infuse/text.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

namespace infuse {

const std::array<std::string_view, kFeatureCount>& feature_names() {
    static const std::array<std::string_view, kFeatureCount> names = {
        "duration",
        "protocol_type",
        "service",
        "flag",
        "src_bytes",
        "dst_bytes",
        "land",
        "wrong_fragment",
        "urgent",
        "hot",
        "num_failed_logins",
        "logged_in",
        "num_compromised",
        "root_shell",
        "su_attempted",
        "num_root",
        "num_file_creations",
        "num_shells",
        "num_access_files",
        "num_outbound_cmds",
        "is_host_login",
        "is_guest_login",
        "count",
        "srv_count",
        "serror_rate",
        "srv_serror_rate",
        "rerror_rate",
        "srv_rerror_rate",
        "same_srv_rate",
        "diff_srv_rate",
        "srv_diff_host_rate",
        "dst_host_count",
        "dst_host_srv_count",
        "dst_host_same_srv_rate",
        "dst_host_diff_srv_rate",
        "dst_host_same_src_port_rate",
        "dst_host_srv_diff_host_rate",
        "dst_host_serror_rate",
        "dst_host_srv_serror_rate",
        "dst_host_rerror_rate",
        "dst_host_srv_rerror_rate",
    };
    return names;
}

namespace {

bool is_categorical(std::size_t feature) {
    return std::find(kCategoricalFeatures.begin(), kCategoricalFeatures.end(), feature) != kCategoricalFeatures.end();
}

std::string where(const std::string& source, std::size_t line) {
    return source + ":" + std::to_string(line);
}

} // namespace

std::vector<FlowRecord> parse_records(std::istream& in, const std::string& source) {
    std::vector<FlowRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view = text::trim(line);
        if (view.empty()) continue;
        const auto fields = text::split(view, ',');
        if (fields.size() != kFeatureCount + 1 && fields.size() != kFeatureCount + 2) {
            throw SchemaError(where(source, line_no) + ": expected 42 or 43 fields, found " +
                              std::to_string(fields.size()));
        }
        FlowRecord rec;
        std::size_t cat = 0;
        std::size_t num = 0;
        for (std::size_t f = 0; f < kFeatureCount; ++f) {
            const auto token = text::trim(fields[f]);
            if (is_categorical(f)) {
                if (token.empty()) {
                    throw ParseError(where(source, line_no) + ": empty value for " + std::string(feature_names()[f]));
                }
                rec.categorical[cat++] = std::string(token);
            } else {
                const auto v = text::parse_double(token);
                if (!v) {
                    throw ParseError(where(source, line_no) + ": non-numeric value '" + std::string(token) +
                                     "' for " + std::string(feature_names()[f]));
                }
                rec.numeric[num++] = *v;
            }
        }
        rec.attack_label = std::string(text::trim(fields[kFeatureCount]));
        if (rec.attack_label.empty()) throw ParseError(where(source, line_no) + ": empty attack label");
        if (fields.size() == kFeatureCount + 2) {
            const auto d = text::parse_int<int>(fields[kFeatureCount + 1]);
            if (!d) throw ParseError(where(source, line_no) + ": bad difficulty value");
            rec.difficulty = *d;
        }
        records.push_back(std::move(rec));
    }
    return records;
}

std::vector<FlowRecord> load_records(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    return parse_records(in, path.string());
}

std::vector<std::string> EncodingSchema::column_names() const {
    std::vector<std::string> names(width);
    for (const auto& c : categorical) {
        for (std::size_t k = 0; k < c.categories.size(); ++k) {
            names[c.offset + k] = std::string(feature_names()[c.feature]) + "=" + c.categories[k];
        }
    }
    for (const auto& n : numeric) names[n.offset] = std::string(feature_names()[n.feature]);
    return names;
}

std::vector<std::size_t> EncodingSchema::numeric_offsets() const {
    std::vector<std::size_t> out;
    out.reserve(numeric.size());
    for (const auto& n : numeric) out.push_back(n.offset);
    return out;
}

std::string EncodingSchema::to_text() const {
    std::ostringstream out;
    out << "infuse-schema 1\n";
    out << "width " << width << "\n";
    for (const auto& c : categorical) {
        out << "categorical " << c.feature << " " << feature_names()[c.feature] << " " << c.offset << " "
            << c.categories.size();
        for (const auto& cat : c.categories) out << " " << cat;
        out << "\n";
    }
    for (const auto& n : numeric) {
        out << "numeric " << n.feature << " " << feature_names()[n.feature] << " " << n.offset << " "
            << text::exact(n.min) << " " << text::exact(n.max) << "\n";
    }
    return out.str();
}

EncodingSchema EncodingSchema::from_text(std::string_view body) {
    EncodingSchema s;
    bool header = false;
    std::size_t line_no = 0;
    for (auto line : text::split(body, '\n')) {
        ++line_no;
        const auto tok = text::tokens(line);
        if (tok.empty()) continue;
        auto fail = [&](const std::string& what) {
            return SchemaError("schema line " + std::to_string(line_no) + ": " + what);
        };
        auto as_size = [&](std::string_view t) {
            auto v = text::parse_int<std::size_t>(t);
            if (!v) throw fail("bad integer '" + std::string(t) + "'");
            return *v;
        };
        if (!header) {
            if (tok.size() != 2 || tok[0] != "infuse-schema" || tok[1] != "1") throw fail("missing header");
            header = true;
        } else if (tok[0] == "width" && tok.size() == 2) {
            s.width = as_size(tok[1]);
        } else if (tok[0] == "categorical" && tok.size() >= 5) {
            CategoricalColumn c;
            c.feature = as_size(tok[1]);
            c.offset = as_size(tok[3]);
            const auto count = as_size(tok[4]);
            if (tok.size() != 5 + count) throw fail("category count mismatch");
            for (std::size_t k = 0; k < count; ++k) c.categories.emplace_back(tok[5 + k]);
            s.categorical.push_back(std::move(c));
        } else if (tok[0] == "numeric" && tok.size() == 6) {
            NumericColumn n;
            n.feature = as_size(tok[1]);
            n.offset = as_size(tok[3]);
            auto lo = text::parse_double(tok[4]);
            auto hi = text::parse_double(tok[5]);
            if (!lo || !hi) throw fail("bad numeric range");
            n.min = *lo;
            n.max = *hi;
            if (n.min > n.max) throw fail("min > max");
            s.numeric.push_back(n);
        } else {
            throw fail("unrecognized entry '" + std::string(tok[0]) + "'");
        }
    }
    if (!header) throw SchemaError("empty schema");
    std::size_t expected = s.numeric.size();
    for (const auto& c : s.categorical) expected += c.categories.size();
    if (expected != s.width) throw SchemaError("schema width does not match its columns");
    return s;
}

EncodingSchema fit_schema(std::span<const FlowRecord> train) {
    if (train.empty()) throw DomainError("fit_schema needs at least one training record");
    std::array<std::vector<std::string>, kCategoricalCount> cats;
    std::array<std::unordered_map<std::string, std::size_t>, kCategoricalCount> seen;
    std::array<double, kNumericCount> lo;
    std::array<double, kNumericCount> hi;
    lo.fill(INFINITY);
    hi.fill(-INFINITY);
    for (std::size_t r = 0; r < train.size(); ++r) {
        const auto& rec = train[r];
        for (std::size_t c = 0; c < kCategoricalCount; ++c) {
            if (seen[c].emplace(rec.categorical[c], cats[c].size()).second) cats[c].push_back(rec.categorical[c]);
        }
        for (std::size_t k = 0; k < kNumericCount; ++k) {
            const double v = rec.numeric[k];
            if (!std::isfinite(v)) throw ParseError("record " + std::to_string(r) + ": non-finite numeric value");
            lo[k] = std::min(lo[k], v);
            hi[k] = std::max(hi[k], v);
        }
    }
    EncodingSchema s;
    std::size_t offset = 0;
    std::size_t cat = 0;
    std::size_t num = 0;
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
        if (is_categorical(f)) {
            s.categorical.push_back({f, offset, std::move(cats[cat])});
            offset += s.categorical.back().categories.size();
            ++cat;
        } else {
            s.numeric.push_back({f, offset, lo[num], hi[num]});
            ++offset;
            ++num;
        }
    }
    s.width = offset;
    return s;
}

EncodedMatrix transform(std::span<const FlowRecord> records, const EncodingSchema& schema) {
    if (schema.categorical.size() != kCategoricalCount || schema.numeric.size() != kNumericCount) {
        throw SchemaError("schema does not describe the 41-feature layout");
    }
    std::array<std::unordered_map<std::string_view, std::size_t>, kCategoricalCount> index;
    for (std::size_t c = 0; c < kCategoricalCount; ++c) {
        const auto& cats = schema.categorical[c].categories;
        for (std::size_t k = 0; k < cats.size(); ++k) index[c].emplace(cats[k], k);
    }
    EncodedMatrix out;
    out.x = Matrix::Zero(static_cast<Eigen::Index>(records.size()), static_cast<Eigen::Index>(schema.width));
    out.y.reserve(records.size());
    out.attack.reserve(records.size());
    for (std::size_t r = 0; r < records.size(); ++r) {
        const auto& rec = records[r];
        double* row = out.x.data() + r * schema.width;
        for (std::size_t c = 0; c < kCategoricalCount; ++c) {
            auto it = index[c].find(rec.categorical[c]);
            if (it != index[c].end()) row[schema.categorical[c].offset + it->second] = 1.0;
        }
        for (std::size_t k = 0; k < kNumericCount; ++k) {
            const auto& col = schema.numeric[k];
            const double range = col.max - col.min;
            row[col.offset] = range > 0.0 ? (rec.numeric[k] - col.min) / range : 0.0;
        }
        out.y.push_back(binarize_label(rec.attack_label));
        out.attack.push_back(rec.attack_label);
    }
    return out;
}

std::vector<FlowRecord> decode(const EncodedMatrix& m, const EncodingSchema& schema) {
    if (m.x.cols() != static_cast<Eigen::Index>(schema.width)) throw ShapeError("matrix width does not match schema");
    std::vector<FlowRecord> out(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const double* row = m.x.data() + r * schema.width;
        auto& rec = out[r];
        for (std::size_t c = 0; c < kCategoricalCount; ++c) {
            const auto& col = schema.categorical[c];
            for (std::size_t k = 0; k < col.categories.size(); ++k) {
                if (row[col.offset + k] == 1.0) rec.categorical[c] = col.categories[k];
            }
        }
        for (std::size_t k = 0; k < kNumericCount; ++k) {
            const auto& col = schema.numeric[k];
            rec.numeric[k] = row[col.offset] * (col.max - col.min) + col.min;
        }
        rec.attack_label = r < m.attack.size() ? m.attack[r] : (m.y[r] ? "attack" : "normal");
    }
    return out;
}

std::string SplitPlan::to_text() const {
    std::ostringstream out;
    out << "infuse-split 1\nseed " << seed << "\n";
    auto emit = [&](const char* name, const std::vector<std::size_t>& idx) {
        out << name << " " << idx.size();
        for (auto i : idx) out << " " << i;
        out << "\n";
    };
    emit("base_train", base_train);
    emit("meta_train", meta_train);
    emit("meta_val", meta_val);
    return out.str();
}

SplitPlan SplitPlan::from_text(std::string_view body) {
    SplitPlan plan;
    bool header = false;
    for (auto line : text::split(body, '\n')) {
        const auto tok = text::tokens(line);
        if (tok.empty()) continue;
        if (!header) {
            if (tok.size() != 2 || tok[0] != "infuse-split" || tok[1] != "1") throw SchemaError("bad split header");
            header = true;
            continue;
        }
        if (tok[0] == "seed" && tok.size() == 2) {
            auto v = text::parse_int<std::uint64_t>(tok[1]);
            if (!v) throw SchemaError("bad split seed");
            plan.seed = *v;
            continue;
        }
        std::vector<std::size_t>* dst = nullptr;
        if (tok[0] == "base_train") dst = &plan.base_train;
        else if (tok[0] == "meta_train") dst = &plan.meta_train;
        else if (tok[0] == "meta_val") dst = &plan.meta_val;
        if (dst == nullptr || tok.size() < 2) throw SchemaError("bad split entry");
        auto count = text::parse_int<std::size_t>(tok[1]);
        if (!count || tok.size() != 2 + *count) throw SchemaError("split count mismatch");
        for (std::size_t k = 0; k < *count; ++k) {
            auto v = text::parse_int<std::size_t>(tok[2 + k]);
            if (!v) throw SchemaError("bad split index");
            dst->push_back(*v);
        }
    }
    if (!header) throw SchemaError("empty split file");
    return plan;
}

SplitPlan stratified_split(const Labels& y, const SplitRatios& ratios, std::uint64_t seed) {
    SplitPlan plan;
    plan.seed = seed;
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < y.size(); ++i) by_class[y[i]].push_back(i);
    Rng rng(seed);
    for (auto& [label, idx] : by_class) {
        if (idx.size() < 3) {
            plan.warnings.push_back("class " + std::to_string(label) + " has " + std::to_string(idx.size()) +
                                    " members; assigned to base_train without stratification");
            plan.base_train.insert(plan.base_train.end(), idx.begin(), idx.end());
            continue;
        }
        rng.shuffle(std::span<std::size_t>(idx));
        const std::size_t n = idx.size();
        const auto n_base = static_cast<std::size_t>(std::floor(ratios.base * static_cast<double>(n) + 0.5));
        const std::size_t rest = n - n_base;
        const auto n_meta = static_cast<std::size_t>(std::floor(ratios.meta_train_of_rest * static_cast<double>(rest) + 0.5));
        plan.base_train.insert(plan.base_train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_base));
        plan.meta_train.insert(plan.meta_train.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_base),
                               idx.begin() + static_cast<std::ptrdiff_t>(n_base + n_meta));
        plan.meta_val.insert(plan.meta_val.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_base + n_meta), idx.end());
    }
    std::sort(plan.base_train.begin(), plan.base_train.end());
    std::sort(plan.meta_train.begin(), plan.meta_train.end());
    std::sort(plan.meta_val.begin(), plan.meta_val.end());
    return plan;
}

std::string normalize_attack_name(std::string_view name) {
    auto s = text::lower(text::trim(name));
    while (!s.empty() && s.back() == '.') s.pop_back();
    if (s == "sainl") return "saint";
    if (s == "apache") return "apache2";
    return s;
}

const std::vector<std::string>& default_unseen_attacks() {
    static const std::vector<std::string> names = {"mscan",   "processtable", "snmpguess", "saint",
                                                   "apache2", "httptunnel",   "mailbomb"};
    return names;
}

AttackTags tag_attacks(std::span<const FlowRecord> records, std::span<const std::string> unseen_families) {
    std::set<std::string> families;
    for (const auto& f : unseen_families) families.insert(normalize_attack_name(f));
    AttackTags tags;
    tags.names.reserve(records.size());
    tags.unseen.reserve(records.size());
    for (const auto& rec : records) {
        auto name = normalize_attack_name(rec.attack_label);
        const bool unseen = families.contains(name);
        if (unseen) tags.unseen_present.insert(name);
        tags.unseen.push_back(unseen);
        tags.names.push_back(std::move(name));
    }
    return tags;
}

std::set<std::string> novel_attacks(std::span<const FlowRecord> train, std::span<const FlowRecord> test) {
    std::set<std::string> known;
    for (const auto& r : train) known.insert(normalize_attack_name(r.attack_label));
    std::set<std::string> out;
    for (const auto& r : test) {
        auto name = normalize_attack_name(r.attack_label);
        if (name != "normal" && !known.contains(name)) out.insert(std::move(name));
    }
    return out;
}

} // namespace infuse
