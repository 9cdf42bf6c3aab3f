// Python bindings: the pipeline verbs, bundle scoring and the evaluation
// statistics, over numpy arrays.

#include "infuse/config.hpp"
#include "infuse/error.hpp"
#include "infuse/eval.hpp"
#include "infuse/ingest.hpp"
#include "infuse/pipeline.hpp"
#include "infuse/serialize.hpp"
#include "infuse/shift.hpp"
#include "infuse/synthetic.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <map>

namespace py = pybind11;
using namespace infuse;

namespace {

using Overrides = std::map<std::string, std::string>;

ExperimentConfig make_config(const Overrides& settings, const std::string& config_file) {
    ConfigSources s;
    s.file = config_file;
    for (const auto& kv : settings) s.flags.push_back(kv);
    return resolve_config(s);
}

py::dict metrics_dict(const MetricsReport& m) {
    py::dict d;
    d["n"] = m.n();
    d["tp"] = m.counts.tp;
    d["tn"] = m.counts.tn;
    d["fp"] = m.counts.fp;
    d["fn"] = m.counts.fn;
    d["accuracy"] = m.accuracy;
    d["f_score"] = m.f_score;
    d["f_score_se"] = m.f_score_se;
    d["recall"] = m.recall;
    d["specificity"] = m.specificity;
    d["fnr"] = m.fnr;
    d["precision"] = m.precision;
    d["auc_roc"] = m.auc_roc ? py::cast(*m.auc_roc) : py::none();
    d["auc_pr"] = m.auc_pr ? py::cast(*m.auc_pr) : py::none();
    return d;
}

struct PyBundle {
    Bundle bundle;

    // Attack probability of the meta-learner for already-encoded rows.
    Vector predict(const Matrix& x) const {
        const Hybrid h = hybrid_features(bundle, x);
        return meta_predict(bundle.meta, h.f);
    }
    Matrix pool(const Matrix& x) const { return pool_scores(bundle.pool, x); }
};

} // namespace

PYBIND11_MODULE(_infuse, m) {
    m.doc() = "Stacked intrusion-detection ensemble (C++ core)";

    // Translators are tried newest first, so the base class goes first.
    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);

    m.def("config_keys", &ExperimentConfig::keys);
    m.def(
        "effective_config",
        [](const Overrides& settings, const std::string& config_file) { return make_config(settings, config_file).to_text(); },
        py::arg("settings") = Overrides{}, py::arg("config_file") = "");

    m.def(
        "write_synthetic_dataset",
        [](const std::filesystem::path& dir, std::size_t train, std::size_t test_plus, std::size_t test21, std::uint64_t seed) {
            const auto p = write_synthetic_dataset(dir, SyntheticSizes{train, test_plus, test21}, seed);
            return py::dict(py::arg("train") = p.train, py::arg("test_plus") = p.test_plus, py::arg("test21") = p.test21);
        },
        py::arg("dir"), py::arg("train") = 3000, py::arg("test_plus") = 1200, py::arg("test21") = 600, py::arg("seed") = 7);

    m.def(
        "run",
        [](const std::string& verb, const Overrides& settings, const std::string& config_file) {
            const auto cfg = make_config(settings, config_file);
            py::gil_scoped_release release;
            if (verb == "preprocess") run_preprocess(cfg);
            else if (verb == "train") run_train(cfg);
            else if (verb == "evaluate") run_evaluate(cfg);
            else if (verb == "ablate") run_ablate(cfg);
            else if (verb == "shift") run_shift(cfg);
            else if (verb == "report") run_report(cfg);
            else throw ConfigError("unknown verb '" + verb + "'");
        },
        py::arg("verb"), py::arg("settings") = Overrides{}, py::arg("config_file") = "",
        "Runs one pipeline verb with `key = value` settings layered over the defaults.");

    py::class_<PyBundle>(m, "Bundle")
        .def_property_readonly("id", [](const PyBundle& b) { return b.bundle.id(); })
        .def_property_readonly("input_width", [](const PyBundle& b) { return b.bundle.schema.width; })
        .def("predict", &PyBundle::predict, py::arg("x"))
        .def("pool", &PyBundle::pool, py::arg("x"));
    m.def("load_bundle", [](const std::filesystem::path& dir) { return PyBundle{load_bundle(dir)}; });

    m.def(
        "encode_file",
        [](const std::filesystem::path& records, const std::filesystem::path& schema_file) {
            const auto schema = EncodingSchema::from_text(read_file(schema_file));
            const auto enc = transform(load_records(records), schema);
            return py::make_tuple(enc.x, enc.y, enc.attack);
        },
        py::arg("records"), py::arg("schema"), "Encodes an NSL-KDD text file with a saved schema: (x, y, attack).");

    m.def(
        "metrics",
        [](const std::vector<int>& y, const std::vector<int>& pred, std::optional<std::vector<double>> scores) {
            const auto c = confusion(y, pred);
            return metrics_dict(scores ? metrics(c, y, *scores) : metrics(c));
        },
        py::arg("y_true"), py::arg("y_pred"), py::arg("scores") = py::none());
    m.def("roc_auc", [](const std::vector<int>& y, const std::vector<double>& s) { return roc_points(y, s).auc; });
    m.def("mcnemar", [](const std::vector<int>& y, const std::vector<int>& a, const std::vector<int>& b) {
        const auto r = mcnemar(y, a, b);
        return py::dict(py::arg("b") = r.b, py::arg("c") = r.c, py::arg("chi2") = r.chi2, py::arg("p_value") = r.p_value);
    });
    m.def("ks_two_sample", [](const std::vector<double>& a, const std::vector<double>& b) {
        const auto r = ks_two_sample(a, b);
        return py::make_tuple(r.d, r.p_value);
    });
}
