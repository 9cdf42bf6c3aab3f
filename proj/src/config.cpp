#include "infuse/config.hpp"

#include "infuse/error.hpp"
#include "infuse/ingest.hpp"
#include "infuse/serialize.hpp"
#include "infuse/text.hpp"

#include <cctype>
#include <cmath>
#include <functional>
#include <sstream>

namespace infuse {

namespace {

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
    if constexpr (std::is_floating_point_v<T>) {
        if (auto v = text::parse_double(value)) return *v;
    } else {
        if (auto v = text::parse_int<T>(value)) return *v;
    }
    throw ConfigError("config key '" + std::string(key) + "': cannot parse '" + std::string(value) + "'");
}

bool parse_bool(std::string_view key, std::string_view value) {
    const auto v = text::lower(value);
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw ConfigError("config key '" + std::string(key) + "': expected a boolean, got '" + std::string(value) + "'");
}

std::vector<std::size_t> parse_widths(std::string_view key, std::string_view value) {
    std::vector<std::size_t> out;
    for (auto part : text::split(value, ',')) {
        const auto w = parse_number<std::size_t>(key, text::trim(part));
        if (w == 0) throw ConfigError("config key '" + std::string(key) + "': widths must be positive");
        out.push_back(w);
    }
    if (out.empty()) throw ConfigError("config key '" + std::string(key) + "': empty width list");
    return out;
}

std::string join_widths(const std::vector<std::size_t>& w) {
    std::string s;
    for (std::size_t i = 0; i < w.size(); ++i) s += (i ? "," : "") + std::to_string(w[i]);
    return s;
}

std::vector<std::string> parse_names(std::string_view value) {
    std::vector<std::string> out;
    for (auto part : text::split(value, ',')) {
        auto name = normalize_attack_name(part);
        if (!name.empty()) out.push_back(std::move(name));
    }
    return out;
}

std::string join_names(const std::vector<std::string>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
    return s;
}

struct Key {
    std::string name;
    std::function<void(ExperimentConfig&, std::string_view)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

// Table of every recognised key. Getter output round-trips through the setter.
const std::vector<Key>& key_table() {
    static const std::vector<Key> table = [] {
        std::vector<Key> t;
        auto path = [&](std::string name, std::filesystem::path ExperimentConfig::*member) {
            t.push_back({name, [member](ExperimentConfig& c, std::string_view v) { c.*member = std::string(v); },
                         [member](const ExperimentConfig& c) { return (c.*member).string(); }});
        };
        auto real = [&](std::string name, std::function<double&(ExperimentConfig&)> ref, bool positive = true) {
            t.push_back({name,
                         [name, ref, positive](ExperimentConfig& c, std::string_view v) {
                             const double x = parse_number<double>(name, v);
                             if (!std::isfinite(x) || (positive && x <= 0) || x < 0) {
                                 throw ConfigError("config key '" + name + "': out of range value '" + std::string(v) + "'");
                             }
                             ref(c) = x;
                         },
                         [ref](const ExperimentConfig& c) {
                             auto copy = c;
                             return text::exact(ref(copy));
                         }});
        };
        auto count = [&](std::string name, std::function<std::size_t&(ExperimentConfig&)> ref, bool allow_zero = false) {
            t.push_back({name,
                         [name, ref, allow_zero](ExperimentConfig& c, std::string_view v) {
                             const auto x = parse_number<std::size_t>(name, v);
                             if (x == 0 && !allow_zero) throw ConfigError("config key '" + name + "': must be positive");
                             ref(c) = x;
                         },
                         [ref](const ExperimentConfig& c) {
                             auto copy = c;
                             return std::to_string(ref(copy));
                         }});
        };
        auto flag = [&](std::string name, bool ExperimentConfig::*member) {
            t.push_back({name, [name, member](ExperimentConfig& c, std::string_view v) { c.*member = parse_bool(name, v); },
                         [member](const ExperimentConfig& c) { return std::string(c.*member ? "true" : "false"); }});
        };
        auto widths = [&](std::string name, std::function<std::vector<std::size_t>&(ExperimentConfig&)> ref) {
            t.push_back({name, [name, ref](ExperimentConfig& c, std::string_view v) { ref(c) = parse_widths(name, v); },
                         [ref](const ExperimentConfig& c) {
                             auto copy = c;
                             return join_widths(ref(copy));
                         }});
        };

        path("train_path", &ExperimentConfig::train_path);
        path("test_plus_path", &ExperimentConfig::test_plus_path);
        path("test21_path", &ExperimentConfig::test21_path);
        path("out", &ExperimentConfig::out_dir);
        t.push_back({"seed", [](ExperimentConfig& c, std::string_view v) { c.seed = parse_number<std::uint64_t>("seed", v); },
                     [](const ExperimentConfig& c) { return std::to_string(c.seed); }});
        t.push_back({"threads",
                     [](ExperimentConfig& c, std::string_view v) { c.threads = parse_number<unsigned>("threads", v); },
                     [](const ExperimentConfig& c) { return std::to_string(c.threads); }});

        real("svm.c", [](ExperimentConfig& c) -> double& { return c.pool.svm.c; });
        real("svm.gamma", [](ExperimentConfig& c) -> double& { return c.pool.svm.gamma; });
        real("svm.eps", [](ExperimentConfig& c) -> double& { return c.pool.svm.eps; });
        count("svm.cap", [](ExperimentConfig& c) -> std::size_t& { return c.pool.svm.cap; });
        real("svm.platt_holdout", [](ExperimentConfig& c) -> double& { return c.pool.svm.platt_holdout; }, false);
        count("svm.cache_mb", [](ExperimentConfig& c) -> std::size_t& { return c.pool.svm.cache_mb; });
        count("knn.k", [](ExperimentConfig& c) -> std::size_t& { return c.pool.knn_k; });
        count("tree.max_features", [](ExperimentConfig& c) -> std::size_t& { return c.pool.tree.max_features; });
        count("tree.min_leaf", [](ExperimentConfig& c) -> std::size_t& { return c.pool.tree.min_leaf; });
        count("forest.estimators", [](ExperimentConfig& c) -> std::size_t& { return c.pool.forest.estimators; });
        count("forest.max_features", [](ExperimentConfig& c) -> std::size_t& { return c.pool.forest.max_features; });
        count("adaboost.estimators", [](ExperimentConfig& c) -> std::size_t& { return c.pool.adaboost.estimators; });

        real("ae.val_fraction", [](ExperimentConfig& c) -> double& { return c.ae_val_fraction; });
        for (const std::string ae : {"ae1", "ae2"}) {
            auto pick = [ae](ExperimentConfig& c) -> AeConfig& { return ae == "ae1" ? c.ae1 : c.ae2; };
            widths(ae + ".widths", [pick](ExperimentConfig& c) -> std::vector<std::size_t>& { return pick(c).encoder_widths; });
            real(ae + ".lr", [pick](ExperimentConfig& c) -> double& { return pick(c).learning_rate; });
            real(ae + ".weight_decay", [pick](ExperimentConfig& c) -> double& { return pick(c).weight_decay; }, false);
            count(ae + ".batch", [pick](ExperimentConfig& c) -> std::size_t& { return pick(c).batch_size; });
            count(ae + ".epochs", [pick](ExperimentConfig& c) -> std::size_t& { return pick(c).max_epochs; });
            count(ae + ".patience", [pick](ExperimentConfig& c) -> std::size_t& { return pick(c).patience; }, true);
        }

        widths("meta.hidden", [](ExperimentConfig& c) -> std::vector<std::size_t>& { return c.meta.hidden; });
        real("meta.lr", [](ExperimentConfig& c) -> double& { return c.meta.learning_rate; });
        count("meta.batch", [](ExperimentConfig& c) -> std::size_t& { return c.meta.batch_size; });
        count("meta.epochs", [](ExperimentConfig& c) -> std::size_t& { return c.meta.max_epochs; });
        count("meta.patience", [](ExperimentConfig& c) -> std::size_t& { return c.meta.patience; }, true);

        real("svm_meta.c", [](ExperimentConfig& c) -> double& { return c.svm_meta.c; });
        real("svm_meta.gamma", [](ExperimentConfig& c) -> double& { return c.svm_meta.gamma; });
        count("svm_meta.cap", [](ExperimentConfig& c) -> std::size_t& { return c.svm_meta.cap; });

        flag("ablation", &ExperimentConfig::ablation);
        flag("svg", &ExperimentConfig::svg);
        t.push_back({"unseen_attacks",
                     [](ExperimentConfig& c, std::string_view v) { c.unseen_attacks = parse_names(v); },
                     [](const ExperimentConfig& c) { return join_names(c.unseen_attacks); }});
        return t;
    }();
    return table;
}

std::string env_name(std::string_view key) {
    std::string s = "INFUSE_";
    for (char ch : key) s += ch == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    return s;
}

} // namespace

void ExperimentConfig::set(std::string_view key, std::string_view value) {
    for (const auto& k : key_table()) {
        if (k.name == key) {
            k.set(*this, text::trim(value));
            return;
        }
    }
    throw ConfigError("unknown config key '" + std::string(key) + "'");
}

std::string ExperimentConfig::to_text() const {
    std::ostringstream out;
    for (const auto& k : key_table()) out << k.name << " = " << k.get(*this) << "\n";
    return out.str();
}

std::vector<std::string> ExperimentConfig::keys() {
    std::vector<std::string> out;
    for (const auto& k : key_table()) out.push_back(k.name);
    return out;
}

std::vector<std::pair<std::string, std::string>> parse_config_text(std::string_view body, const std::string& source) {
    std::vector<std::pair<std::string, std::string>> out;
    std::size_t line_no = 0;
    for (auto line : text::split(body, '\n')) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = text::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError(source + ":" + std::to_string(line_no) + ": expected 'key = value'");
        }
        const auto key = text::trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError(source + ":" + std::to_string(line_no) + ": empty key");
        out.emplace_back(std::string(key), std::string(text::trim(line.substr(eq + 1))));
    }
    return out;
}

std::vector<std::pair<std::string, std::string>> environment_overrides(char** envp) {
    std::vector<std::pair<std::string, std::string>> out;
    if (envp == nullptr) return out;
    for (const auto& k : key_table()) {
        const auto want = env_name(k.name);
        for (char** e = envp; *e != nullptr; ++e) {
            const std::string_view entry(*e);
            const auto eq = entry.find('=');
            if (eq != std::string_view::npos && entry.substr(0, eq) == want) {
                out.emplace_back(k.name, std::string(entry.substr(eq + 1)));
            }
        }
    }
    return out;
}

ExperimentConfig resolve_config(const ConfigSources& sources) {
    ExperimentConfig cfg;
    auto apply = [&](const std::vector<std::pair<std::string, std::string>>& kv, const std::string& origin) {
        for (const auto& [k, v] : kv) {
            try {
                cfg.set(k, v);
            } catch (const ConfigError& e) {
                throw ConfigError(origin + ": " + e.what());
            }
        }
    };
    if (!sources.file.empty()) {
        std::string body;
        try {
            body = read_file(sources.file);
        } catch (const IoError& e) {
            throw ConfigError(std::string("cannot read config file: ") + e.what());
        }
        apply(parse_config_text(body, sources.file.string()), sources.file.string());
    }
    apply(environment_overrides(sources.envp), "environment");
    apply(sources.flags, "command line");
    if (cfg.ae_val_fraction <= 0 || cfg.ae_val_fraction >= 1) throw ConfigError("ae.val_fraction must lie in (0, 1)");
    if (cfg.pool.svm.platt_holdout >= 1) throw ConfigError("svm.platt_holdout must be below 1");
    return cfg;
}

} // namespace infuse
