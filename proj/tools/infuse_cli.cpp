// Command-line front end: preprocess, train, evaluate, ablate, shift, report.

#include "infuse/config.hpp"
#include "infuse/error.hpp"
#include "infuse/parallel.hpp"
#include "infuse/pipeline.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <iostream>

extern char** environ;

namespace {

enum Exit : int { ok = 0, failure = 1, io = 2, config = 3, training = 4 };

void log_line(const std::string& msg) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%H:%M:%S", std::localtime(&now));
    std::cerr << "[" << stamp << "] " << msg << std::endl;
}

int fail(int code, const std::string& msg) {
    std::cerr << "infuse: error: " << msg << "\n";
    return code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stacked intrusion-detection ensemble on NSL-KDD traffic records"};
    app.require_subcommand(1, 1);

    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> overrides;
    app.add_option("--config", config_path, "key = value settings file");
    app.add_option("--seed", seed, "master seed (component seeds are fixed offsets from it)");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--set", overrides, "extra key=value override, repeatable");
    bool print_config = false;
    app.add_flag("--print-config", print_config, "print the effective settings and exit");

    struct Verb {
        const char* name;
        const char* help;
    };
    const std::vector<Verb> verbs = {
        {"preprocess", "encode the raw files, fit the schema and write the split plan"},
        {"train", "train the base pool, both autoencoders and the meta-learners"},
        {"evaluate", "score both test sets and write predictions, metrics and significance tests"},
        {"ablate", "retrain the meta-learner on each feature-block subset"},
        {"shift", "per-feature and first-component KS tests plus a 2-D projection export"},
        {"report", "render summary.md and SVG charts from evaluate/ablate output"},
    };
    for (const auto& v : verbs) {
        auto* sub = app.add_subcommand(v.name, v.help);
        // Allow the global flags after the verb as well.
        sub->fallthrough();
    }

    CLI11_PARSE(app, argc, argv);
    const std::string verb = app.get_subcommands().front()->get_name();

    infuse::ExperimentConfig cfg;
    try {
        infuse::ConfigSources sources;
        sources.file = config_path;
        sources.envp = environ;
        for (const auto& kv : overrides) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw infuse::ConfigError("--set expects key=value, got '" + kv + "'");
            sources.flags.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
        }
        if (seed) sources.flags.emplace_back("seed", std::to_string(*seed));
        if (!out_dir.empty()) sources.flags.emplace_back("out", out_dir);
        cfg = infuse::resolve_config(sources);
    } catch (const infuse::ConfigError& e) {
        return fail(config, e.what());
    }
    if (print_config) {
        std::cout << cfg.to_text();
        return ok;
    }
    infuse::set_thread_count(cfg.threads);

    try {
        if (verb == "preprocess") {
            infuse::run_preprocess(cfg, log_line);
        } else if (verb == "train") {
            infuse::run_train(cfg, log_line);
        } else if (verb == "evaluate") {
            infuse::run_evaluate(cfg, log_line);
        } else if (verb == "ablate") {
            if (!cfg.ablation) {
                log_line("ablate: disabled by config (ablation = false)");
                return ok;
            }
            infuse::run_ablate(cfg, log_line);
        } else if (verb == "shift") {
            infuse::run_shift(cfg, log_line);
        } else if (verb == "report") {
            infuse::run_report(cfg, log_line);
        }
    } catch (const infuse::ConfigError& e) {
        return fail(config, e.what());
    } catch (const infuse::IoError& e) {
        return fail(io, e.what());
    } catch (const infuse::ParseError& e) {
        return fail(io, e.what());
    } catch (const infuse::SchemaError& e) {
        return fail(io, e.what());
    } catch (const infuse::TrainingError& e) {
        return fail(training, e.what());
    } catch (const infuse::Error& e) {
        return fail(training, e.what());
    } catch (const std::filesystem::filesystem_error& e) {
        return fail(io, e.what());
    } catch (const std::exception& e) {
        return fail(failure, e.what());
    }
    return ok;
}
