#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "promptgate/cli/config.hpp"
#include "promptgate/embedding.hpp"
#include "promptgate/error.hpp"
#include "promptgate/federation.hpp"
#include "promptgate/synthetic.hpp"

namespace py = pybind11;
using namespace promptgate;

namespace {

SyntheticSpec spec_from(const py::dict& overrides) {
    SyntheticSpec s;
    for (const auto& [k, v] : overrides) {
        const auto key = k.cast<std::string>();
        if (key == "num_clients") s.num_clients = v.cast<int>();
        else if (key == "num_classes") s.num_classes = v.cast<int>();
        else if (key == "num_ood_modes") s.num_ood_modes = v.cast<int>();
        else if (key == "dimension") s.dimension = v.cast<int>();
        else if (key == "mean_separation") s.mean_separation = v.cast<double>();
        else if (key == "within_class_std") s.within_class_std = v.cast<double>();
        else if (key == "ood_std") s.ood_std = v.cast<double>();
        else if (key == "client_shift") s.client_shift = v.cast<double>();
        else if (key == "ood_id_affinity") s.ood_id_affinity = v.cast<double>();
        else if (key == "seed_labeled_per_class") s.seed_labeled_per_class = v.cast<int>();
        else if (key == "unlabeled_per_client") s.unlabeled_per_client = v.cast<int>();
        else if (key == "test_per_client") s.test_per_client = v.cast<int>();
        else if (key == "ood_ratio") s.ood_ratio = v.cast<std::vector<double>>();
        else if (key == "test_ood_ratio") s.test_ood_ratio = v.cast<double>();
        else if (key == "template_misalignment") s.template_misalignment = v.cast<double>();
        else if (key == "exclusive_ood_modes") s.exclusive_ood_modes = v.cast<bool>();
        else throw py::key_error("unknown synthetic field '" + key + "'");
    }
    return s;
}

py::dict dataset_dict(const FederatedDataset& data) {
    std::size_t n = 0;
    for (const auto& c : data.clients) n += c.labeled.size() + c.unlabeled.size() + c.test.size();
    const auto D = static_cast<py::ssize_t>(data.dimension);
    py::array_t<double> emb({static_cast<py::ssize_t>(n), D});
    py::array_t<std::int64_t> ids(static_cast<py::ssize_t>(n));
    py::array_t<int> client(static_cast<py::ssize_t>(n)), is_ood(static_cast<py::ssize_t>(n)),
        index(static_cast<py::ssize_t>(n));
    py::list split;
    auto e = emb.mutable_unchecked<2>();
    std::size_t row = 0;
    for (const auto& c : data.clients) {
        for (const auto* list : {&c.labeled, &c.unlabeled, &c.test}) {
            for (const auto& s : *list) {
                for (py::ssize_t d = 0; d < D; ++d) e(row, d) = s.embedding[d];
                ids.mutable_at(row) = s.sample_id;
                client.mutable_at(row) = s.client_id;
                is_ood.mutable_at(row) = s.truth.is_ood() ? 1 : 0;
                index.mutable_at(row) = s.truth.index;
                split.append(std::string(to_string(s.split)));
                ++row;
            }
        }
    }
    py::array_t<double> anchors({static_cast<py::ssize_t>(data.anchors.size()), D});
    auto a = anchors.mutable_unchecked<2>();
    for (std::size_t c = 0; c < data.anchors.size(); ++c) {
        for (py::ssize_t d = 0; d < D; ++d) a(c, d) = data.anchors[c][d];
    }
    py::dict out;
    out["embeddings"] = emb;
    out["sample_id"] = ids;
    out["client_id"] = client;
    out["is_ood"] = is_ood;
    out["label_index"] = index;
    out["split"] = split;
    out["anchors"] = anchors;
    out["num_classes"] = data.num_classes;
    return out;
}

py::object opt(std::optional<double> v) { return v ? py::object(py::float_(*v)) : py::none(); }

py::list rows(const ExperimentResult& result) {
    py::list out;
    for (const auto& r : result.rounds) {
        for (const auto& c : r.clients) {
            py::dict row;
            row["round"] = r.round;
            row["client"] = c.client_id;
            row["qp"] = opt(c.qp);
            row["aqr"] = opt(c.aqr);
            row["purity"] = opt(c.purity);
            row["bma"] = opt(c.bma);
            row["gate_binary_acc"] = opt(c.gate_binary_acc);
            row["ood_recall"] = opt(c.ood_recall);
            row["gated_size"] = c.gated_size;
            row["exploration_size"] = c.exploration_size;
            row["budget"] = c.budget;
            row["queries"] = c.queries.size();
            out.append(row);
        }
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_promptgate, m) {
    m.doc() = "Federated open-set active learning with prompt-gated pools";
    m.attr("__version__") = std::string(cli::kVersion);
    py::register_exception<Error>(m, "PromptgateError", PyExc_ValueError);

    m.def("l2_normalize", [](const std::vector<double>& v) { return l2_normalize(v); }, py::arg("v"));
    m.def("split_budget", [](int total, const std::vector<int>& pools) { return split_budget(total, pools); },
          py::arg("total"), py::arg("pool_sizes"));

    m.def(
        "generate_synthetic",
        [](std::uint64_t seed, const py::dict& spec) { return dataset_dict(generate_synthetic(spec_from(spec), seed)); },
        py::arg("seed") = 0, py::arg("spec") = py::dict(),
        "Synthetic federated dataset as numpy arrays; `spec` overrides generator fields.");

    m.def(
        "run_experiment",
        [](const std::string& mode, const std::string& strategy, std::uint64_t seed, int rounds, int budget,
           int warmup_shots, int client_threads, const py::dict& spec, std::optional<std::filesystem::path> out) {
            ExperimentConfig c;
            c.dataset = spec_from(spec);
            c.gate = cli::parse_mode(mode, StaticZeroShot{});
            c.strategy = parse_strategy(strategy);
            c.seed = seed;
            c.rounds = rounds;
            c.budget = budget;
            c.warmup_shots = warmup_shots;
            c.client_threads = client_threads;
            if (out) c.output_dir = *out;
            ExperimentResult result;
            {
                py::gil_scoped_release release;
                result = run_experiment(c);
            }
            return rows(result);
        },
        py::arg("mode") = "mixed", py::arg("strategy") = "random", py::arg("seed") = 0, py::arg("rounds") = 5,
        py::arg("budget") = 500, py::arg("warmup_shots") = 0, py::arg("client_threads") = 0,
        py::arg("spec") = py::dict(), py::arg("output_dir") = py::none(),
        "Runs one experiment and returns one dict per (round, client).");

    m.def(
        "validate_config",
        [](const std::string& text) {
            const auto matrix = cli::parse_config_text(text);
            py::dict out;
            out["name"] = matrix.name;
            out["experiments"] = matrix.entries.size();
            out["config_hash"] = matrix.config_hash;
            py::list dirs;
            for (const auto& e : matrix.entries) dirs.append(e.subdir);
            out["dirs"] = dirs;
            return out;
        },
        py::arg("yaml_text"));
}
