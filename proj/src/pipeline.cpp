#include "infuse/pipeline.hpp"

#include "infuse/error.hpp"
#include "infuse/parallel.hpp"
#include "infuse/rng.hpp"
#include "infuse/serialize.hpp"
#include "infuse/svg.hpp"
#include "infuse/text.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <numeric>
#include <sstream>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace infuse {

namespace {

void emit(const LogSink& log, const std::string& msg) {
    if (log) log(msg);
}

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string labels_csv(const EncodedMatrix& m) {
    std::string out = "y,attack\n";
    for (std::size_t i = 0; i < m.rows(); ++i) out += std::to_string(m.y[i]) + "," + m.attack[i] + "\n";
    return out;
}

void read_labels_csv(std::string_view body, EncodedMatrix& m, const std::string& source) {
    m.y.clear();
    m.attack.clear();
    bool first = true;
    for (auto line : text::split(body, '\n')) {
        if (line.empty()) continue;
        if (first) {
            first = false;
            if (line != "y,attack") throw SchemaError(source + ": unexpected header");
            continue;
        }
        const auto fields = text::split(line, ',');
        const auto y = fields.size() == 2 ? text::parse_int<int>(fields[0]) : std::nullopt;
        if (!y || (*y != 0 && *y != 1)) throw SchemaError(source + ": malformed label row");
        m.y.push_back(*y);
        m.attack.emplace_back(fields[1]);
    }
    if (m.y.size() != m.rows()) throw SchemaError(source + ": label count does not match matrix rows");
}

EncodedMatrix encode_split(const fs::path& path, const EncodingSchema& schema, std::span<const std::string> unseen,
                           std::size_t& raw_count) {
    const auto records = load_records(path);
    raw_count = records.size();
    auto m = transform(records, schema);
    m.attack = tag_attacks(records, unseen).names;
    return m;
}

std::vector<std::string> unseen_list(const ExperimentConfig& cfg) {
    return cfg.unseen_attacks.empty() ? default_unseen_attacks() : cfg.unseen_attacks;
}

void save_encoded(const fs::path& dir, const std::string& name, const EncodedMatrix& m) {
    fs::create_directories(dir);
    save_matrix(dir / (name + ".infm"), m.x);
    write_file_atomic(dir / (name + ".labels.csv"), labels_csv(m));
}

EncodedMatrix load_encoded(const fs::path& dir, const std::string& name) {
    EncodedMatrix m;
    m.x = load_matrix(dir / (name + ".infm"));
    const auto path = dir / (name + ".labels.csv");
    read_labels_csv(read_file(path), m, path.string());
    return m;
}

std::string model_bytes(const Bundle& b, const std::string& name) {
    if (name == "schema") return b.schema.to_text();
    if (name == "svm") return b.pool.svm.serialize();
    if (name == "knn") return b.pool.knn.serialize();
    if (name == "tree") return b.pool.tree.serialize();
    if (name == "forest") return b.pool.forest.serialize();
    if (name == "adaboost") return b.pool.adaboost.serialize();
    if (name == "ae1") return b.ae1.serialize();
    if (name == "ae2") return b.ae2.serialize();
    if (name == "meta") return b.meta.serialize();
    if (name == "svm_meta") return b.svm_meta.serialize();
    if (name == "vote_weights") {
        std::string s;
        for (std::size_t c = 0; c < kBaseCount; ++c) s += std::string(kBaseNames[c]) + " " + text::exact(b.vote_weights[c]) + "\n";
        return s;
    }
    throw Error("unknown bundle component " + name);
}

struct ComponentFile {
    const char* name;
    const char* file;
};

// The schema, five base models, two encoders and the meta-learner form the
// stack; the SVM meta-learner and voting weights are comparison baselines.
constexpr std::array<ComponentFile, 11> kComponents = {{
    {"schema", "schema.txt"},
    {"svm", "svm.infb"},
    {"knn", "knn.infb"},
    {"tree", "tree.infb"},
    {"forest", "forest.infb"},
    {"adaboost", "adaboost.infb"},
    {"ae1", "ae1.infb"},
    {"ae2", "ae2.infb"},
    {"meta", "meta.infb"},
    {"svm_meta", "svm_meta.infb"},
    {"vote_weights", "vote_weights.txt"},
}};

std::vector<double> parse_vote_weights(std::string_view body) {
    std::vector<double> w;
    for (auto line : text::split(body, '\n')) {
        const auto tok = text::tokens(line);
        if (tok.empty()) continue;
        const auto v = tok.size() == 2 ? text::parse_double(tok[1]) : std::nullopt;
        if (!v || tok[0] != kBaseNames[w.size() % kBaseCount]) throw SchemaError("malformed vote_weights.txt");
        w.push_back(*v);
    }
    if (w.size() != kBaseCount) throw SchemaError("vote_weights.txt needs five weights");
    return w;
}

json metrics_json(const MetricsReport& m) {
    json j;
    j["n"] = m.n();
    j["tp"] = m.counts.tp;
    j["tn"] = m.counts.tn;
    j["fp"] = m.counts.fp;
    j["fn"] = m.counts.fn;
    j["accuracy"] = m.accuracy;
    j["f_score"] = m.f_score;
    j["f_score_se"] = m.f_score_se;
    j["recall"] = m.recall;
    j["specificity"] = m.specificity;
    j["fnr"] = m.fnr;
    j["precision"] = m.precision;
    j["auc_roc"] = m.auc_roc ? json(*m.auc_roc) : json(nullptr);
    j["auc_pr"] = m.auc_pr ? json(*m.auc_pr) : json(nullptr);
    j["degenerate"] = m.degenerate;
    return j;
}

// Row indices of base_train held out for autoencoder validation.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> ae_split(std::vector<std::size_t> rows, double fraction,
                                                                       std::uint64_t seed) {
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(rows));
    auto n_val = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(rows.size()) + 0.5));
    n_val = std::clamp<std::size_t>(n_val, 1, rows.size() > 1 ? rows.size() - 1 : 1);
    std::vector<std::size_t> val(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::size_t> fit(rows.begin() + static_cast<std::ptrdiff_t>(n_val), rows.end());
    std::sort(val.begin(), val.end());
    std::sort(fit.begin(), fit.end());
    return {fit, val};
}

template <typename F>
auto component(const std::string& name, F&& fn) {
    try {
        return fn();
    } catch (const TrainingError& e) {
        if (std::string_view(e.what()).starts_with(name + ":")) throw;
        throw TrainingError(name + ": " + e.what());
    } catch (const IoError&) {
        throw;
    } catch (const Error& e) {
        throw TrainingError(name + ": " + e.what());
    }
}

void check_bundle_schema(const Bundle& b, const Preprocessed& pre) {
    if (!(b.schema == pre.schema)) {
        throw SchemaError("bundle schema differs from the preprocessed schema; re-run train");
    }
}

struct HybridCache {
    fs::path dir;
    std::string bundle_id;

    fs::path path(const std::string& name) const { return dir / (name + ".infm"); }

    bool valid() const {
        const auto id = dir / "bundle_id.txt";
        return fs::exists(id) && read_file(id) == bundle_id;
    }

    void mark() const {
        fs::create_directories(dir);
        write_file_atomic(dir / "bundle_id.txt", bundle_id);
    }
};

Hybrid load_hybrid(const fs::path& path, const HybridLayout& layout) {
    Hybrid h{load_matrix(path), layout};
    if (static_cast<std::size_t>(h.f.cols()) != layout.total()) throw SchemaError(path.string() + ": width mismatch");
    return h;
}

HybridLayout bundle_layout(const Bundle& b) {
    HybridLayout l;
    l.width = {kPoolWidth, b.schema.width, b.ae1.latent_width(), b.ae2.latent_width()};
    std::size_t off = 0;
    for (std::size_t i = 0; i < 4; ++i) {
        l.offset[i] = off;
        off += l.width[i];
    }
    return l;
}

// Hybrid features for a named matrix, cached on disk against the bundle id.
Hybrid cached_hybrid(const HybridCache& cache, const std::string& name, const Bundle& b, const Matrix& x) {
    if (cache.valid() && fs::exists(cache.path(name))) {
        auto h = load_hybrid(cache.path(name), bundle_layout(b));
        if (h.f.rows() == x.rows()) return h;
    }
    auto h = hybrid_features(b, x);
    fs::create_directories(cache.dir);
    save_matrix(cache.path(name), h.f);
    cache.mark();
    return h;
}

struct SetPredictions {
    Hybrid hybrid;
    Matrix z;
    Vector p_infuse;
    Vector p_svm_meta;
};

std::vector<std::pair<std::string, Labels>> named_predictions(const SetPredictions& s, const Bundle& b,
                                                              std::vector<Vector>& scores) {
    std::vector<std::pair<std::string, Labels>> rows;
    scores.clear();
    rows.emplace_back("infuse", threshold_labels(s.p_infuse));
    scores.push_back(s.p_infuse);
    for (std::size_t c = 0; c < kBaseCount; ++c) {
        rows.emplace_back(std::string(kBaseNames[c]), base_predictions(s.z, c));
        scores.push_back(s.z.col(static_cast<Eigen::Index>(2 * c + 1)));
    }
    Vector mean_vote = Vector::Zero(s.z.rows()), frac_vote = Vector::Zero(s.z.rows()), weighted = Vector::Zero(s.z.rows());
    for (std::size_t c = 0; c < kBaseCount; ++c) {
        const auto col = s.z.col(static_cast<Eigen::Index>(2 * c + 1));
        mean_vote += col / static_cast<double>(kBaseCount);
        weighted += b.vote_weights[c] * col;
        const auto hard = base_predictions(s.z, c);
        for (Eigen::Index i = 0; i < s.z.rows(); ++i) frac_vote[i] += hard[static_cast<std::size_t>(i)] / 5.0;
    }
    rows.emplace_back("vote_majority", vote_majority(s.z));
    scores.push_back(frac_vote);
    rows.emplace_back("vote_average", vote_average(s.z));
    scores.push_back(mean_vote);
    rows.emplace_back("vote_max_weighted", vote_max_weighted(s.z, b.vote_weights));
    scores.push_back(weighted);
    rows.emplace_back("svm_meta", threshold_labels(s.p_svm_meta));
    scores.push_back(s.p_svm_meta);
    return rows;
}

json read_json(const fs::path& path) {
    try {
        return json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

std::string pct(double v) { return text::fixed(100.0 * v, 2); }

} // namespace

// --- preprocess --------------------------------------------------------------

Preprocessed run_preprocess(const ExperimentConfig& cfg, const LogSink& log) {
    const OutputLayout out{cfg.out_dir};
    Stopwatch clock;
    Preprocessed pre;
    const auto unseen = unseen_list(cfg);

    const auto train_records = load_records(cfg.train_path);
    if (train_records.empty()) throw ParseError(cfg.train_path.string() + ": no records");
    pre.schema = fit_schema(train_records);
    emit(log, "preprocess: " + std::to_string(train_records.size()) + " training records, encoded width " +
                  std::to_string(pre.schema.width));
    if (pre.schema.width + 2 < kExpectedEncodedWidth || pre.schema.width > kExpectedEncodedWidth + 2) {
        emit(log, "preprocess: note: encoded width " + std::to_string(pre.schema.width) + " differs from the usual " +
                      std::to_string(kExpectedEncodedWidth) + " by more than 2");
    }
    pre.train = transform(train_records, pre.schema);
    pre.train.attack = tag_attacks(train_records, unseen).names;
    pre.split = stratified_split(pre.train.y, SplitRatios{}, cfg.component_seed(seed_offset::split));
    for (const auto& w : pre.split.warnings) emit(log, "preprocess: warning: " + w);

    json counts;
    counts["train"] = train_records.size();
    std::vector<std::pair<std::string, std::vector<FlowRecord>>> test_records;
    const std::array<std::tuple<const char*, const char*, fs::path>, 2> tests = {{
        {"test_plus", "Test+", cfg.test_plus_path},
        {"test21", "Test-21", cfg.test21_path},
    }};
    for (const auto& [name, title, path] : tests) {
        if (path.empty()) continue;
        std::size_t raw = 0;
        TestSet t{name, title, encode_split(path, pre.schema, unseen, raw)};
        counts[name] = raw;
        emit(log, std::string("preprocess: ") + title + " " + std::to_string(raw) + " records");
        pre.tests.push_back(std::move(t));
    }
    for (const auto& t : pre.tests) {
        for (const auto& a : t.data.attack) {
            if (std::find(unseen.begin(), unseen.end(), a) != unseen.end()) pre.unseen.insert(a);
        }
    }

    const auto dir = out.preprocess();
    fs::create_directories(dir);
    write_file_atomic(dir / "schema.txt", pre.schema.to_text());
    write_file_atomic(dir / "split.txt", pre.split.to_text());
    save_encoded(dir, "train", pre.train);
    for (const auto& t : pre.tests) save_encoded(dir, t.name, t.data);

    json meta;
    meta["counts"] = counts;
    meta["encoded_width"] = pre.schema.width;
    meta["split"] = {{"base_train", pre.split.base_train.size()},
                     {"meta_train", pre.split.meta_train.size()},
                     {"meta_val", pre.split.meta_val.size()}};
    meta["split_warnings"] = pre.split.warnings;
    meta["tests"] = json::array();
    for (const auto& t : pre.tests) meta["tests"].push_back({{"name", t.name}, {"title", t.title}});
    meta["unseen_present"] = std::vector<std::string>(pre.unseen.begin(), pre.unseen.end());
    write_file_atomic(dir / "preprocess.json", meta.dump(2) + "\n");
    emit(log, "preprocess: done in " + text::fixed(clock.seconds(), 1) + " s");
    return pre;
}

Preprocessed load_preprocessed(const ExperimentConfig& cfg) {
    const auto dir = OutputLayout{cfg.out_dir}.preprocess();
    if (!fs::exists(dir / "preprocess.json")) {
        throw IoError("no preprocessed artifacts in " + dir.string() + "; run preprocess first");
    }
    Preprocessed pre;
    pre.schema = EncodingSchema::from_text(read_file(dir / "schema.txt"));
    pre.split = SplitPlan::from_text(read_file(dir / "split.txt"));
    pre.train = load_encoded(dir, "train");
    if (pre.train.x.cols() != static_cast<Eigen::Index>(pre.schema.width)) throw SchemaError("train matrix width differs from schema");
    const auto meta = read_json(dir / "preprocess.json");
    for (const auto& t : meta.at("tests")) {
        const auto name = t.at("name").get<std::string>();
        pre.tests.push_back({name, t.at("title").get<std::string>(), load_encoded(dir, name)});
    }
    for (const auto& u : meta.at("unseen_present")) pre.unseen.insert(u.get<std::string>());
    return pre;
}

// --- bundle ------------------------------------------------------------------

std::string Bundle::id() const { return fnv1a_hex(manifest_text(manifest)); }

std::string manifest_text(const std::vector<ManifestEntry>& entries) {
    std::string s = "infuse-bundle 1\n";
    for (const auto& e : entries) s += e.name + " " + e.file + " " + e.hash + " " + std::to_string(e.bytes) + "\n";
    return s;
}

std::vector<ManifestEntry> parse_manifest(std::string_view body) {
    const auto lines = text::split(body, '\n');
    if (lines.empty() || text::trim(lines[0]) != "infuse-bundle 1") throw SchemaError("manifest: bad header");
    std::vector<ManifestEntry> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto tok = text::tokens(lines[i]);
        if (tok.empty()) continue;
        const auto bytes = tok.size() == 4 ? text::parse_int<std::uint64_t>(tok[3]) : std::nullopt;
        if (!bytes) throw SchemaError("manifest: malformed line " + std::to_string(i + 1));
        out.push_back({std::string(tok[0]), std::string(tok[1]), std::string(tok[2]), *bytes});
    }
    return out;
}

Hybrid hybrid_features(const Bundle& b, const Matrix& x) {
    const Matrix z = pool_scores(b.pool, x);
    return build_hybrid(z, x, encode(b.ae1, x), encode(b.ae2, x));
}

Bundle run_train(const ExperimentConfig& cfg, const LogSink& log) {
    const auto pre = load_preprocessed(cfg);
    const OutputLayout out{cfg.out_dir};
    Stopwatch total;
    Bundle b;
    b.schema = pre.schema;

    const Matrix x_base = select_rows(pre.train.x, pre.split.base_train);
    const Labels y_base = select(pre.train.y, pre.split.base_train);
    PoolSeeds seeds{cfg.component_seed(seed_offset::svm), cfg.component_seed(seed_offset::tree),
                    cfg.component_seed(seed_offset::forest)};
    {
        Stopwatch clock;
        b.pool = train_pool(x_base, y_base, cfg.pool, seeds);
        emit(log, "train: base pool on " + std::to_string(x_base.rows()) + " rows (" +
                      std::to_string(b.pool.svm.support.rows()) + " support vectors) in " +
                      text::fixed(clock.seconds(), 1) + " s");
    }

    const auto [ae_fit_rows, ae_val_rows] =
        ae_split(pre.split.base_train, cfg.ae_val_fraction, cfg.component_seed(seed_offset::ae_holdout));
    const Matrix ae_train = select_rows(pre.train.x, ae_fit_rows);
    const Matrix ae_val = select_rows(pre.train.x, ae_val_rows);
    std::map<std::string, TrainingCurve> curves;
    for (const auto& [name, base_cfg, offset] :
         {std::tuple{"ae1", cfg.ae1, seed_offset::ae1}, std::tuple{"ae2", cfg.ae2, seed_offset::ae2}}) {
        Stopwatch clock;
        auto c = base_cfg;
        c.seed = cfg.component_seed(offset);
        auto fit = component(name, [&] { return ae_fit(c, ae_train, ae_val); });
        emit(log, std::string("train: ") + name + " best epoch " + std::to_string(fit.curve.best_epoch) + " of " +
                      std::to_string(fit.curve.epochs.size()) + " in " + text::fixed(clock.seconds(), 1) + " s");
        curves[name] = fit.curve;
        (std::string_view(name) == "ae1" ? b.ae1 : b.ae2) = std::move(fit.model);
    }

    const Matrix x_mt = select_rows(pre.train.x, pre.split.meta_train);
    const Matrix x_mv = select_rows(pre.train.x, pre.split.meta_val);
    const Labels y_mt = select(pre.train.y, pre.split.meta_train);
    const Labels y_mv = select(pre.train.y, pre.split.meta_val);
    const auto h_mt = component("hybrid", [&] { return hybrid_features(b, x_mt); });
    const auto h_mv = component("hybrid", [&] { return hybrid_features(b, x_mv); });

    {
        Stopwatch clock;
        auto mc = cfg.meta;
        mc.seed = cfg.meta_seed(full_block_set_index());
        auto fit = component("meta", [&] { return meta_fit(mc, h_mt.f, y_mt, h_mv.f, y_mv); });
        emit(log, "train: meta-learner best epoch " + std::to_string(fit.curve.best_epoch) + " (val F " +
                      text::fixed(fit.curve.epochs.at(fit.curve.best_epoch - 1).val_metric, 4) + ") in " +
                      text::fixed(clock.seconds(), 1) + " s");
        curves["meta"] = fit.curve;
        b.meta = std::move(fit.model);
    }
    b.vote_weights = accuracy_weights(slice_block(h_mv, Block::z), y_mv);
    {
        Stopwatch clock;
        b.svm_meta = component("svm_meta", [&] {
            return svm_meta_fit(h_mt.f, y_mt, cfg.svm_meta, cfg.component_seed(seed_offset::svm_meta));
        });
        emit(log, "train: SVM meta-learner in " + text::fixed(clock.seconds(), 1) + " s");
    }

    const auto dir = out.bundle();
    fs::create_directories(dir / "curves");
    for (const auto& comp : kComponents) {
        const auto bytes = model_bytes(b, comp.name);
        write_file_atomic(dir / comp.file, bytes);
        b.manifest.push_back({comp.name, comp.file, fnv1a_hex(bytes), bytes.size()});
    }
    write_file_atomic(dir / "manifest.txt", manifest_text(b.manifest));
    for (const auto& [name, curve] : curves) write_file_atomic(dir / "curves" / (name + ".csv"), curve.to_csv());
    write_file_atomic(dir / "config.txt", cfg.to_text());

    HybridCache cache{dir / "cache", b.id()};
    fs::create_directories(cache.dir);
    save_matrix(cache.path("meta_train"), h_mt.f);
    save_matrix(cache.path("meta_val"), h_mv.f);
    cache.mark();
    emit(log, "train: bundle " + b.id() + " written in " + text::fixed(total.seconds(), 1) + " s");
    return b;
}

Bundle load_bundle(const fs::path& dir) {
    const auto manifest_path = dir / "manifest.txt";
    if (!fs::exists(manifest_path)) throw IoError("no model bundle at " + dir.string() + "; run train first");
    Bundle b;
    b.manifest = parse_manifest(read_file(manifest_path));
    std::map<std::string, std::string> bytes;
    for (const auto& e : b.manifest) {
        auto body = read_file(dir / e.file);
        if (fnv1a_hex(body) != e.hash || body.size() != e.bytes) {
            throw SchemaError("bundle component " + e.name + " does not match its manifest hash");
        }
        bytes[e.name] = std::move(body);
    }
    auto need = [&](const std::string& name) -> const std::string& {
        const auto it = bytes.find(name);
        if (it == bytes.end()) throw SchemaError("bundle manifest lacks component " + name);
        return it->second;
    };
    b.schema = EncodingSchema::from_text(need("schema"));
    b.pool.svm = SvmModel::deserialize(need("svm"));
    b.pool.knn = KnnModel::deserialize(need("knn"));
    b.pool.tree = TreeModel::deserialize(need("tree"));
    b.pool.forest = ForestModel::deserialize(need("forest"));
    b.pool.adaboost = AdaboostModel::deserialize(need("adaboost"));
    b.ae1 = AeModel::deserialize(need("ae1"));
    b.ae2 = AeModel::deserialize(need("ae2"));
    b.meta = MetaModel::deserialize(need("meta"));
    b.svm_meta = SvmModel::deserialize(need("svm_meta"));
    b.vote_weights = parse_vote_weights(need("vote_weights"));
    return b;
}

// --- evaluate ----------------------------------------------------------------

std::string predictions_csv(const EncodedMatrix& data, const Vector& p, const Matrix& z) {
    std::string out = "sample_index,y_true,attack_name,p_attack";
    for (std::size_t c = 0; c < kPoolWidth; ++c) out += ",z" + std::to_string(c);
    out += "\n";
    for (std::size_t i = 0; i < data.rows(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        out += std::to_string(i) + "," + std::to_string(data.y[i]) + "," + data.attack[i] + "," + text::exact(p[r]);
        for (Eigen::Index c = 0; c < z.cols(); ++c) out += "," + text::exact(z(r, c));
        out += "\n";
    }
    return out;
}

EvaluationSummary run_evaluate(const ExperimentConfig& cfg, const LogSink& log) {
    const auto pre = load_preprocessed(cfg);
    const OutputLayout out{cfg.out_dir};
    const auto b = load_bundle(out.bundle());
    check_bundle_schema(b, pre);
    const HybridCache cache{out.eval() / "cache", b.id()};

    EvaluationSummary summary;
    json report;
    report["bundle"] = b.id();
    report["vote_weights"] = b.vote_weights;
    report["sets"] = json::array();
    for (const auto& t : pre.tests) {
        Stopwatch clock;
        SetPredictions s;
        s.hybrid = cached_hybrid(cache, t.name, b, t.data.x);
        s.z = slice_block(s.hybrid, Block::z);
        s.p_infuse = meta_predict(b.meta, s.hybrid.f);
        s.p_svm_meta = b.svm_meta.attack_probability(s.hybrid.f);

        std::vector<Vector> scores;
        const auto preds = named_predictions(s, b, scores);
        auto& rows = summary.metrics[t.name];
        std::string csv = metrics_csv_header();
        json set_json;
        set_json["name"] = t.name;
        set_json["title"] = t.title;
        set_json["n"] = t.data.rows();
        json metrics_obj;
        for (std::size_t k = 0; k < preds.size(); ++k) {
            const auto& [name, labels] = preds[k];
            const std::vector<double> sc(scores[k].data(), scores[k].data() + scores[k].size());
            auto m = metrics(confusion(t.data.y, labels));
            if (m.counts.tp + m.counts.fn > 0 && m.counts.tn + m.counts.fp > 0) {
                m = metrics(m.counts, t.data.y, sc);
            }
            csv += metrics_csv_row(name, m);
            metrics_obj[name] = metrics_json(m);
            rows.emplace_back(name, m);
        }
        set_json["metrics"] = metrics_obj;

        // Best base classifier by accuracy on this set.
        std::size_t best = 1;
        for (std::size_t k = 2; k <= kBaseCount; ++k) {
            if (rows[k].second.accuracy > rows[best].second.accuracy) best = k;
        }
        summary.best_base[t.name] = rows[best].first;
        json mc = json::object();
        for (std::size_t k = 1; k <= kBaseCount; ++k) {
            const auto r = mcnemar(t.data.y, preds[k].second, preds[0].second);
            summary.mcnemar[t.name].emplace_back(preds[k].first, r);
            mc[preds[k].first] = {{"b", r.b}, {"c", r.c}, {"chi2", r.chi2}, {"p_value", r.p_value}, {"degenerate", r.degenerate}};
        }
        set_json["mcnemar_infuse_vs"] = mc;
        set_json["best_base"] = rows[best].first;

        const auto per_attack = per_attack_rates(t.data.y, preds[0].second, t.data.attack, pre.unseen);
        summary.per_attack[t.name] = per_attack;
        json pa = json::array();
        for (const auto& r : per_attack) {
            pa.push_back({{"attack", r.attack}, {"total", r.total}, {"detected", r.detected}, {"rate", r.rate}, {"unseen", r.unseen}});
        }
        set_json["per_attack"] = pa;

        const auto dir = out.eval() / t.name;
        fs::create_directories(dir / "curves");
        write_file_atomic(dir / "predictions.csv", predictions_csv(t.data, s.p_infuse, s.z));
        write_file_atomic(dir / "predictions_svm_meta.csv", predictions_csv(t.data, s.p_svm_meta, s.z));
        write_file_atomic(dir / "metrics.csv", csv);
        write_file_atomic(dir / "per_attack.csv", per_attack_csv(per_attack));
        const bool two_classes = rows[0].second.auc_roc.has_value();
        if (two_classes) {
            for (std::size_t k = 0; k < preds.size(); ++k) {
                const std::vector<double> sc(scores[k].data(), scores[k].data() + scores[k].size());
                write_file_atomic(dir / "curves" / ("roc_" + preds[k].first + ".csv"), roc_points(t.data.y, sc).to_csv());
                write_file_atomic(dir / "curves" / ("pr_" + preds[k].first + ".csv"), pr_points(t.data.y, sc).to_csv());
            }
        }

        std::vector<std::size_t> numeric = pre.schema.numeric_offsets();
        std::vector<std::string> names;
        for (const auto& c : pre.schema.numeric) names.emplace_back(feature_names()[c.feature]);
        const auto shift = shift_report(pre.train.x, t.data.x, numeric, names, cfg.component_seed(seed_offset::projection));
        write_file_atomic(dir / "shift.csv", shift.to_csv());
        set_json["shift"] = json::parse(shift.to_json());

        report["sets"].push_back(set_json);
        const auto& inf = rows[0].second;
        emit(log, "evaluate: " + t.title + " INFUSE accuracy " + pct(inf.accuracy) + " F " + text::fixed(inf.f_score, 4) +
                      " (best base " + rows[best].first + " " + pct(rows[best].second.accuracy) + ") in " +
                      text::fixed(clock.seconds(), 1) + " s");
    }
    write_file_atomic(out.eval() / "summary.json", report.dump(2) + "\n");
    return summary;
}

// --- ablate ------------------------------------------------------------------

std::vector<AblationRow> run_ablate(const ExperimentConfig& cfg, const LogSink& log) {
    const auto pre = load_preprocessed(cfg);
    const OutputLayout out{cfg.out_dir};
    const auto b = load_bundle(out.bundle());
    check_bundle_schema(b, pre);

    const HybridCache train_cache{out.bundle() / "cache", b.id()};
    const HybridCache eval_cache{out.eval() / "cache", b.id()};
    const Hybrid h_mt = cached_hybrid(train_cache, "meta_train", b, select_rows(pre.train.x, pre.split.meta_train));
    const Hybrid h_mv = cached_hybrid(train_cache, "meta_val", b, select_rows(pre.train.x, pre.split.meta_val));
    const Labels y_mt = select(pre.train.y, pre.split.meta_train);
    const Labels y_mv = select(pre.train.y, pre.split.meta_val);
    std::vector<Hybrid> test_h;
    for (const auto& t : pre.tests) test_h.push_back(cached_hybrid(eval_cache, t.name, b, t.data.x));

    const auto& sets = ablation_block_sets();
    std::vector<AblationRow> rows(sets.size());
    std::vector<MetaModel> models(sets.size());
    // Configurations are independent and seeded by index, so they train in
    // parallel without changing results.
    parallel_chunks(sets.size(), 1, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            auto mc = cfg.meta;
            mc.seed = cfg.meta_seed(i);
            const Matrix f_mt = select_blocks(h_mt, sets[i].blocks);
            const Matrix f_mv = select_blocks(h_mv, sets[i].blocks);
            if (i == full_block_set_index()) {
                models[i] = b.meta;  // identical training run; reuse the bundle's model
            } else {
                models[i] = component("ablation " + sets[i].name, [&] { return meta_fit(mc, f_mt, y_mt, f_mv, y_mv).model; });
            }
            rows[i].blocks = sets[i].name;
            rows[i].width = static_cast<std::size_t>(f_mt.cols());
            rows[i].seed = mc.seed;
        }
    });

    json report = json::array();
    const auto dir = out.ablate();
    fs::create_directories(dir);
    for (std::size_t s = 0; s < pre.tests.size(); ++s) {
        const auto& t = pre.tests[s];
        std::string csv = "blocks,width,seed," + metrics_csv_header().substr(5);
        for (std::size_t i = 0; i < sets.size(); ++i) {
            const Vector p = meta_predict(models[i], select_blocks(test_h[s], sets[i].blocks));
            const std::vector<double> sc(p.data(), p.data() + p.size());
            auto m = metrics(confusion(t.data.y, threshold_labels(p)));
            if (m.counts.tp + m.counts.fn > 0 && m.counts.tn + m.counts.fp > 0) m = metrics(m.counts, t.data.y, sc);
            rows[i].by_set[t.name] = m;
            csv += rows[i].blocks + "," + std::to_string(rows[i].width) + "," + std::to_string(rows[i].seed) + "," +
                   metrics_csv_row("", m).substr(1);
            emit(log, "ablate: " + t.title + " " + rows[i].blocks + " F " + text::fixed(m.f_score, 4) + " FNR " +
                          text::fixed(m.fnr, 4));
        }
        write_file_atomic(dir / ("ablation_" + t.name + ".csv"), csv);
    }
    for (const auto& r : rows) {
        json j{{"blocks", r.blocks}, {"width", r.width}, {"seed", r.seed}};
        for (const auto& [set, m] : r.by_set) j[set] = metrics_json(m);
        report.push_back(j);
    }
    write_file_atomic(dir / "ablation.json", report.dump(2) + "\n");
    return rows;
}

// --- shift ---------------------------------------------------------------------

std::map<std::string, ShiftReport> run_shift(const ExperimentConfig& cfg, const LogSink& log) {
    const auto pre = load_preprocessed(cfg);
    const auto dir = OutputLayout{cfg.out_dir}.shift();
    fs::create_directories(dir);
    const auto seed = cfg.component_seed(seed_offset::projection);
    const std::vector<std::size_t> numeric = pre.schema.numeric_offsets();
    std::vector<std::string> names;
    for (const auto& c : pre.schema.numeric) names.emplace_back(feature_names()[c.feature]);

    std::map<std::string, ShiftReport> reports;
    const auto projection = fit_projection(pre.train.x, 2, seed);
    std::string coords = "set,sample_index,y_true,attack_name,pc1,pc2\n";
    auto add_coords = [&](const std::string& set, const EncodedMatrix& m) {
        const Matrix p = apply_projection(projection, m.x);
        for (std::size_t i = 0; i < m.rows(); ++i) {
            const auto r = static_cast<Eigen::Index>(i);
            coords += set + "," + std::to_string(i) + "," + std::to_string(m.y[i]) + "," + m.attack[i] + "," +
                      text::exact(p(r, 0)) + "," + text::exact(p(r, 1)) + "\n";
        }
    };
    add_coords("train", pre.train);
    json summary = json::object();
    for (const auto& t : pre.tests) {
        auto rep = shift_report(pre.train.x, t.data.x, numeric, names, seed);
        write_file_atomic(dir / ("shift_" + t.name + ".csv"), rep.to_csv());
        summary[t.name] = json::parse(rep.to_json());
        emit(log, "shift: " + t.title + " PC1 KS D " + text::fixed(rep.summary.d, 4) + " p " + text::sci(rep.summary.p_value, 3));
        add_coords(t.name, t.data);
        reports.emplace(t.name, std::move(rep));
    }
    write_file_atomic(dir / "projection_2d.csv", coords);
    if (cfg.svg) {
        // Every k-th row keeps the plot readable on the full corpus.
        auto thin = [&](const EncodedMatrix& m, int label) {
            const Matrix p = apply_projection(projection, m.x);
            const std::size_t stride = std::max<std::size_t>(1, m.rows() / 1500);
            std::vector<std::pair<double, double>> pts;
            for (std::size_t i = 0; i < m.rows(); i += stride) {
                if (m.y[i] == label) pts.emplace_back(p(static_cast<Eigen::Index>(i), 0), p(static_cast<Eigen::Index>(i), 1));
            }
            return pts;
        };
        for (const auto& t : pre.tests) {
            const std::vector<svg::Series> series = {{"train normal", thin(pre.train, 0)},
                                                     {"train attack", thin(pre.train, 1)},
                                                     {t.title + " normal", thin(t.data, 0)},
                                                     {t.title + " attack", thin(t.data, 1)}};
            write_file_atomic(dir / ("projection_" + t.name + ".svg"),
                              svg::scatter_chart(t.title + " vs train, first two principal components", "PC1", "PC2", series));
        }
    }
    write_file_atomic(dir / "shift.json", summary.dump(2) + "\n");
    return reports;
}

// --- report --------------------------------------------------------------------

void run_report(const ExperimentConfig& cfg, const LogSink& log) {
    const OutputLayout out{cfg.out_dir};
    const auto eval_path = out.eval() / "summary.json";
    if (!fs::exists(eval_path)) throw IoError("no evaluation summary at " + eval_path.string() + "; run evaluate first");
    const auto eval = read_json(eval_path);
    const auto dir = out.report();
    fs::create_directories(dir);

    std::ostringstream md;
    md << "# INFUSE evaluation report\n\nBundle `" << eval.at("bundle").get<std::string>() << "`.\n\n";
    auto metric_row = [&](const std::string& name, const json& m) {
        md << "| " << name << " | " << pct(m.at("accuracy").get<double>()) << " | " << text::fixed(m.at("f_score").get<double>(), 4)
           << " ± " << text::fixed(m.at("f_score_se").get<double>(), 4) << " | " << text::fixed(m.at("recall").get<double>(), 4)
           << " | " << text::fixed(m.at("specificity").get<double>(), 4) << " | " << text::fixed(m.at("fnr").get<double>(), 4)
           << " | " << (m.at("auc_roc").is_null() ? "" : text::fixed(m.at("auc_roc").get<double>(), 4)) << " |\n";
    };
    const std::string head = "| model | accuracy % | F-score ± SE | recall | specificity | FNR | ROC AUC |\n|---|---|---|---|---|---|---|\n";
    for (const auto& set : eval.at("sets")) {
        const auto title = set.at("title").get<std::string>();
        const auto& m = set.at("metrics");
        md << "## " << title << " (n = " << set.at("n").get<std::uint64_t>() << ")\n\n### Headline\n\n" << head;
        metric_row("INFUSE", m.at("infuse"));
        md << "\n### Base classifiers\n\n" << head;
        for (auto name : kBaseNames) metric_row(std::string(name), m.at(std::string(name)));
        md << "\n### Meta-learner alternatives\n\n" << head;
        for (const char* name : {"vote_majority", "vote_average", "vote_max_weighted", "svm_meta", "infuse"}) metric_row(name, m.at(name));
        md << "\n### McNemar, INFUSE against each base classifier\n\n| base | b | c | chi2 | p |\n|---|---|---|---|---|\n";
        for (auto& [name, r] : set.at("mcnemar_infuse_vs").items()) {
            md << "| " << name << (name == set.at("best_base").get<std::string>() ? " (best)" : "") << " | "
               << r.at("b").get<std::uint64_t>() << " | " << r.at("c").get<std::uint64_t>() << " | "
               << text::fixed(r.at("chi2").get<double>(), 2) << " | " << text::sci(r.at("p_value").get<double>(), 3) << " |\n";
        }
        md << "\n### Detection rate per attack family\n\n| attack | test-only | n | detected | rate |\n|---|---|---|---|---|\n";
        std::vector<std::pair<std::string, double>> unseen_bars;
        for (const auto& r : set.at("per_attack")) {
            const bool unseen = r.at("unseen").get<bool>();
            md << "| " << r.at("attack").get<std::string>() << " | " << (unseen ? "yes" : "") << " | "
               << r.at("total").get<std::uint64_t>() << " | " << r.at("detected").get<std::uint64_t>() << " | "
               << text::fixed(r.at("rate").get<double>(), 4) << " |\n";
            if (unseen) unseen_bars.emplace_back(r.at("attack").get<std::string>(), r.at("rate").get<double>());
        }
        const auto& shift = set.at("shift");
        md << "\nShift: first principal component KS D = " << text::fixed(shift.at("summary").at("D").get<double>(), 4)
           << ", p = " << text::sci(shift.at("summary").at("p_value").get<double>(), 3) << "; "
           << shift.at("features_shifted_p05").get<std::size_t>() << " of " << shift.at("features_tested").get<std::size_t>()
           << " numeric features shifted at p < 0.05.\n\n";

        if (cfg.svg) {
            const auto name = set.at("name").get<std::string>();
            const auto curve_dir = out.eval() / name / "curves";
            for (const std::string kind : {"roc", "pr"}) {
                std::vector<svg::Series> series;
                for (const char* model : {"infuse", "svm", "knn", "tree", "forest", "adaboost"}) {
                    const auto path = curve_dir / (kind + "_" + model + ".csv");
                    if (!fs::exists(path)) continue;
                    svg::Series s{model, {}};
                    bool header = true;
                    for (auto line : text::split(read_file(path), '\n')) {
                        if (header || line.empty()) {
                            header = false;
                            continue;
                        }
                        const auto f = text::split(line, ',');
                        if (f.size() == 3) s.points.emplace_back(*text::parse_double(f[1]), *text::parse_double(f[2]));
                    }
                    series.push_back(std::move(s));
                }
                if (series.empty()) continue;
                const auto file = kind + "_" + name + ".svg";
                write_file_atomic(dir / file, svg::line_chart(title + (kind == "roc" ? " ROC" : " precision-recall"),
                                                              kind == "roc" ? "false positive rate" : "recall",
                                                              kind == "roc" ? "true positive rate" : "precision", series));
                md << "![" << kind << "](" << file << ")\n";
            }
            if (!unseen_bars.empty()) {
                const auto file = "unseen_" + name + ".svg";
                write_file_atomic(dir / file, svg::bar_chart(title + ": detection rate of test-only attacks", unseen_bars));
                md << "![unseen](" << file << ")\n";
            }
            md << "\n";
        }
    }

    const auto ablation_path = out.ablate() / "ablation.json";
    if (fs::exists(ablation_path)) {
        const auto ab = read_json(ablation_path);
        for (const auto& set : eval.at("sets")) {
            const auto name = set.at("name").get<std::string>();
            md << "## Ablation, " << set.at("title").get<std::string>() << "\n\n| blocks | width | accuracy % | F-score ± SE | recall | FNR |\n|---|---|---|---|---|---|\n";
            for (const auto& r : ab) {
                if (!r.contains(name)) continue;
                const auto& m = r.at(name);
                md << "| " << r.at("blocks").get<std::string>() << " | " << r.at("width").get<std::size_t>() << " | "
                   << pct(m.at("accuracy").get<double>()) << " | " << text::fixed(m.at("f_score").get<double>(), 4) << " ± "
                   << text::fixed(m.at("f_score_se").get<double>(), 4) << " | " << text::fixed(m.at("recall").get<double>(), 4)
                   << " | " << text::fixed(m.at("fnr").get<double>(), 4) << " |\n";
            }
            md << "\n";
        }
    }

    if (cfg.svg) {
        const auto curve_dir = out.bundle() / "curves";
        for (const char* name : {"ae1", "ae2", "meta"}) {
            const auto path = curve_dir / (std::string(name) + ".csv");
            if (!fs::exists(path)) continue;
            svg::Series train{"train loss", {}}, val{"validation", {}};
            bool header = true;
            for (auto line : text::split(read_file(path), '\n')) {
                if (header || line.empty()) {
                    header = false;
                    continue;
                }
                const auto f = text::split(line, ',');
                if (f.size() != 3) continue;
                const double e = *text::parse_double(f[0]);
                train.points.emplace_back(e, *text::parse_double(f[1]));
                val.points.emplace_back(e, *text::parse_double(f[2]));
            }
            const std::string file = std::string("curve_") + name + ".svg";
            write_file_atomic(dir / file, svg::line_chart(std::string(name) + " training curve", "epoch", "value", {train, val}));
            md << "![" << name << "](" << file << ")\n";
        }
    }
    write_file_atomic(dir / "summary.md", md.str());
    emit(log, "report: wrote " + (dir / "summary.md").string());
}

} // namespace infuse
