#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "varest/cli.hpp"
#include "varest/ensemble.hpp"
#include "varest/error.hpp"
#include "varest/estimator.hpp"
#include "varest/metrics.hpp"
#include "varest/nn.hpp"
#include "varest/variation.hpp"

namespace py = pybind11;
using namespace varest;

namespace {

PVTable as_table(const std::vector<double>& pvs) {
    PVTable t;
    for (std::size_t i = 0; i < pvs.size(); ++i) t.rows.push_back({static_cast<std::int64_t>(i), pvs[i], {0.0}, 0.0});
    return t;
}

std::vector<double> flatten(const std::vector<std::vector<double>>& rows, std::size_t& width) {
    if (rows.empty()) throw UsageError("need at least one row");
    width = rows.front().size();
    std::vector<double> flat;
    for (const auto& r : rows) {
        if (r.size() != width) throw InputError("ragged rows");
        flat.insert(flat.end(), r.begin(), r.end());
    }
    return flat;
}

py::dict seed_bundle_dict(const SeedBundle& b) {
    py::dict d;
    d["init_seed"] = b.init_seed;
    d["shuffle_seed"] = b.shuffle_seed ? py::cast(*b.shuffle_seed) : py::none();
    d["jackknife_index"] = b.jackknife_index ? py::cast(*b.jackknife_index) : py::none();
    return d;
}

}  // namespace

PYBIND11_MODULE(_varest, m) {
    m.doc() = "Prediction variation of model ensembles and its estimation from neuron activations";

    static py::exception<Error> base(m, "VarestError", PyExc_RuntimeError);
    static py::exception<ConfigError> config_error(m, "ConfigError", base.ptr());
    static py::exception<InputError> input_error(m, "InputError", base.ptr());
    static py::exception<TrainingError> training_error(m, "TrainingError", base.ptr());
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const ConfigError& e) {
            py::set_error(config_error, e.what());
        } catch (const InputError& e) {
            py::set_error(input_error, e.what());
        } catch (const TrainingError& e) {
            py::set_error(training_error, e.what());
        } catch (const Error& e) {
            py::set_error(base, e.what());
        }
    });

    m.def("value_pv", [](const std::vector<double>& p) { return value_pv(p); }, py::arg("predictions"),
          "Sample standard deviation of member predictions.");
    m.def(
        "dist_pv",
        [](const std::vector<std::vector<double>>& dists) {
            std::size_t width = 0;
            const auto flat = flatten(dists, width);
            return dist_pv(flat, width);
        },
        py::arg("distributions"), "Sum of KL divergences of member distributions from their mean.");
    m.def("pearson", [](const std::vector<double>& a, const std::vector<double>& b) { return pearson(a, b); });
    m.def(
        "delta_ratio",
        [](const std::vector<double>& sub, const std::vector<double>& gt) {
            return delta_ratio(as_table(sub), as_table(gt));
        },
        py::arg("pv_sub"), py::arg("pv_gt"));
    m.def(
        "bucketize", [](const std::vector<double>& pvs, std::size_t k) { return bucketize(pvs, k).thresholds; },
        py::arg("train_pvs"), py::arg("k") = 5, "Percentile thresholds between buckets.");
    m.def(
        "assign_bucket",
        [](const std::vector<double>& thresholds, double pv) { return BucketScheme{thresholds}.assign(pv); },
        py::arg("thresholds"), py::arg("pv"));
    m.def(
        "auc",
        [](const std::vector<double>& scores, const std::vector<int>& labels) {
            std::vector<std::uint8_t> pos(labels.begin(), labels.end());
            return auc(scores, pos);
        },
        py::arg("scores"), py::arg("labels"), "Rank AUC; None when a class is absent.");
    m.def(
        "regression_metrics",
        [](const std::vector<double>& preds, const std::vector<double>& labels) {
            const auto r = regression_metrics(preds, labels);
            py::dict d;
            d["mse"] = r.mse;
            d["r2"] = r.r2 ? py::cast(*r.r2) : py::none();
            return d;
        },
        py::arg("predictions"), py::arg("labels"));
    m.def("round_rating", &round_rating);
    m.def(
        "seed_bundles",
        [](const std::string& setting, std::size_t n, std::uint64_t master_seed) {
            py::list out;
            for (const auto& b : make_seed_bundles(RandomnessSetting::from_code(setting), n, master_seed))
                out.append(seed_bundle_dict(b));
            return out;
        },
        py::arg("setting"), py::arg("n"), py::arg("master_seed"));
    m.def("setting_sources", [](const std::string& code) { return RandomnessSetting::from_code(code).sources(); });
    m.def(
        "grad_check",
        [](const std::string& task, std::vector<std::size_t> hidden, std::uint64_t seed) {
            ModelSpec spec;
            spec.task = parse_task_kind(task);
            spec.num_classes = spec.task == TaskKind::multiclass ? 3 : 1;
            spec.embeddings = {{"a", 4, 2}};
            spec.numeric_inputs = 2;
            spec.hidden_sizes = std::move(hidden);
            auto params = init_params(spec, seed);
            for (std::size_t i = 0; i < params.values.size(); ++i)
                params.values[i] += 0.05 * (static_cast<double>((i * 7919) % 13) / 13.0 - 0.5);
            Example ex{{1}, {0.3, -0.7}, spec.task == TaskKind::regression ? 3.0 : 1.0, 0};
            return grad_check(spec, params, ex, 1e-5, 1e-4).max_relative_error;
        },
        py::arg("task"), py::arg("hidden") = std::vector<std::size_t>{4, 3}, py::arg("seed") = 1,
        "Max relative error between analytic and finite-difference gradients.");
    m.def(
        "load_pv_table",
        [](const std::string& path) {
            const auto t = load_pv_table(path);
            py::dict d;
            d["task"] = to_string(t.task);
            d["row_id"] = t.row_ids();
            d["pv"] = t.pv_values();
            return d;
        },
        py::arg("path"));
    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            py::gil_scoped_release release;
            return run_cli(args);
        },
        py::arg("args"), "Run a varest command line in-process; returns the exit code.");
}
