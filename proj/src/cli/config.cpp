#include "promptgate/cli/config.hpp"

#include <yaml-cpp/yaml.h>

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "promptgate/error.hpp"

namespace promptgate::cli {

namespace {

[[noreturn]] void schema_error(const std::string& path, const YAML::Node& node, const std::string& what) {
    std::string msg = what + " at '" + path + "'";
    if (node.IsDefined() && node.Mark().line >= 0) msg += " (line " + std::to_string(node.Mark().line + 1) + ")";
    throw Error(ErrorCode::SchemaError, msg);
}

std::string join(const std::string& parent, const std::string& key) {
    return parent.empty() ? key : parent + "." + key;
}

void check_keys(const YAML::Node& map, const std::string& path, const std::set<std::string>& allowed) {
    if (!map.IsMap()) schema_error(path.empty() ? "<root>" : path, map, "expected a mapping");
    for (const auto& kv : map) {
        const auto key = kv.first.as<std::string>();
        if (!allowed.contains(key)) schema_error(join(path, key), kv.first, "unknown key '" + key + "'");
    }
}

template <typename T>
T scalar(const YAML::Node& node, const std::string& path, const char* type_name) {
    if (!node.IsScalar()) schema_error(path, node, std::string("expected ") + type_name);
    try {
        return node.as<T>();
    } catch (const YAML::Exception&) {
        schema_error(path, node, std::string("expected ") + type_name);
    }
}

template <typename T>
void read(const YAML::Node& map, const std::string& parent, const char* key, T& out, const char* type_name) {
    const auto node = map[key];
    if (!node) return;
    out = scalar<T>(node, join(parent, key), type_name);
}

void read_int(const YAML::Node& map, const std::string& parent, const char* key, int& out) {
    read(map, parent, key, out, "integer");
}
void read_real(const YAML::Node& map, const std::string& parent, const char* key, double& out) {
    read(map, parent, key, out, "number");
}
void read_bool(const YAML::Node& map, const std::string& parent, const char* key, bool& out) {
    read(map, parent, key, out, "boolean");
}

template <typename T>
std::vector<T> read_list(const YAML::Node& node, const std::string& path, const char* type_name) {
    if (!node.IsSequence()) schema_error(path, node, "expected a list");
    std::vector<T> out;
    for (std::size_t i = 0; i < node.size(); ++i) {
        out.push_back(scalar<T>(node[i], path + "[" + std::to_string(i) + "]", type_name));
    }
    return out;
}

SyntheticSpec parse_synthetic(const YAML::Node& n, const std::string& path) {
    check_keys(n, path,
               {"num_clients", "num_classes", "num_ood_modes", "dimension", "mean_separation", "within_class_std",
                "ood_std", "client_shift", "ood_id_affinity", "seed_labeled_per_class", "unlabeled_per_client",
                "test_per_client", "ood_ratio", "test_ood_ratio", "template_misalignment", "exclusive_ood_modes"});
    SyntheticSpec s;
    read_int(n, path, "num_clients", s.num_clients);
    read_int(n, path, "num_classes", s.num_classes);
    read_int(n, path, "num_ood_modes", s.num_ood_modes);
    read_int(n, path, "dimension", s.dimension);
    read_real(n, path, "mean_separation", s.mean_separation);
    read_real(n, path, "within_class_std", s.within_class_std);
    read_real(n, path, "ood_std", s.ood_std);
    read_real(n, path, "client_shift", s.client_shift);
    read_real(n, path, "ood_id_affinity", s.ood_id_affinity);
    read_int(n, path, "seed_labeled_per_class", s.seed_labeled_per_class);
    read_int(n, path, "unlabeled_per_client", s.unlabeled_per_client);
    read_int(n, path, "test_per_client", s.test_per_client);
    read_real(n, path, "test_ood_ratio", s.test_ood_ratio);
    read_real(n, path, "template_misalignment", s.template_misalignment);
    read_bool(n, path, "exclusive_ood_modes", s.exclusive_ood_modes);
    if (const auto r = n["ood_ratio"]) {
        s.ood_ratio = read_list<double>(r, join(path, "ood_ratio"), "number");
    } else if (static_cast<int>(s.ood_ratio.size()) != s.num_clients) {
        // Default ratios cycle when the client count changes.
        const auto defaults = SyntheticSpec{}.ood_ratio;
        s.ood_ratio.clear();
        for (int k = 0; k < s.num_clients; ++k) s.ood_ratio.push_back(defaults[k % defaults.size()]);
    }
    try {
        s.validate();
    } catch (const Error& e) {
        schema_error(path, n, e.what());
    }
    return s;
}

DatasetSource parse_dataset(const YAML::Node& n, const std::string& path, const std::filesystem::path& base_dir) {
    check_keys(n, path, {"synthetic", "import"});
    if (n["synthetic"] && n["import"]) schema_error(path, n, "choose one of 'synthetic' or 'import'");
    if (const auto imp = n["import"]) {
        const auto ipath = join(path, "import");
        check_keys(imp, ipath, {"samples", "anchors"});
        if (!imp["samples"] || !imp["anchors"]) schema_error(ipath, imp, "import needs 'samples' and 'anchors'");
        ImportSource src;
        src.samples = scalar<std::string>(imp["samples"], join(ipath, "samples"), "path");
        src.anchors = scalar<std::string>(imp["anchors"], join(ipath, "anchors"), "path");
        if (src.samples.is_relative()) src.samples = base_dir / src.samples;
        if (src.anchors.is_relative()) src.anchors = base_dir / src.anchors;
        return src;
    }
    const auto syn = n["synthetic"];
    if (!syn || syn.IsNull()) return SyntheticSpec{};
    return parse_synthetic(syn, join(path, "synthetic"));
}

const std::vector<std::string>& mode_labels() {
    static const std::vector<std::string> labels = {"coldstart", "upper", "static", "mixed", "global", "local"};
    return labels;
}

std::string fmt_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string file_digest(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return "missing";
    std::ostringstream ss;
    ss << in.rdbuf();
    return hex64(fnv1a64(ss.str()));
}

}  // namespace

GateMode parse_mode(std::string_view label, const StaticZeroShot& static_settings) {
    if (label == "coldstart") return Coldstart{};
    if (label == "upper") return OracleUpperBound{};
    if (label == "static") return static_settings;
    if (label == "mixed") return DynamicPromptGate{PromptVariant::mixed()};
    if (label == "global") return DynamicPromptGate{PromptVariant::global_only()};
    if (label == "local") return DynamicPromptGate{PromptVariant::local_only()};
    throw Error(ErrorCode::SchemaError, "unknown mode '" + std::string(label) + "'");
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string canonical_experiment(const ExperimentConfig& c) {
    std::ostringstream o;
    if (const auto* s = std::get_if<SyntheticSpec>(&c.dataset)) {
        o << "dataset=synthetic\n"
          << "num_clients=" << s->num_clients << "\nnum_classes=" << s->num_classes
          << "\nnum_ood_modes=" << s->num_ood_modes << "\ndimension=" << s->dimension
          << "\nmean_separation=" << fmt_real(s->mean_separation)
          << "\nwithin_class_std=" << fmt_real(s->within_class_std) << "\nood_std=" << fmt_real(s->ood_std)
          << "\nclient_shift=" << fmt_real(s->client_shift) << "\nood_id_affinity=" << fmt_real(s->ood_id_affinity)
          << "\nseed_labeled_per_class=" << s->seed_labeled_per_class
          << "\nunlabeled_per_client=" << s->unlabeled_per_client << "\ntest_per_client=" << s->test_per_client
          << "\nood_ratio=";
        for (double r : s->ood_ratio) o << fmt_real(r) << ';';
        o << "\ntest_ood_ratio=" << fmt_real(s->test_ood_ratio)
          << "\ntemplate_misalignment=" << fmt_real(s->template_misalignment)
          << "\nexclusive_ood_modes=" << s->exclusive_ood_modes << '\n';
    } else {
        const auto& src = std::get<ImportSource>(c.dataset);
        o << "dataset=import\nsamples=" << file_digest(src.samples) << "\nanchors=" << file_digest(src.anchors)
          << '\n';
    }
    o << "gate=" << mode_name(c.gate) << '/' << variant_name(c.gate) << '\n';
    if (const auto* st = std::get_if<StaticZeroShot>(&c.gate)) {
        o << "ood_templates=" << st->num_ood_templates << "\ntemplate_spread=" << fmt_real(st->template_spread)
          << "\ntemplate_seed=" << st->template_seed << '\n';
    }
    o << "strategy=" << to_string(c.strategy) << "\nkmeans_max_iters=" << c.strategy.max_iters
      << "\nrounds=" << c.rounds << "\nbudget=" << c.budget << "\ntau=" << fmt_real(c.prompt.tau)
      << "\nprompt.lr=" << fmt_real(c.prompt.lr) << "\nprompt.momentum=" << fmt_real(c.prompt.momentum)
      << "\nprompt.weight_decay=" << fmt_real(c.prompt.weight_decay) << "\nprompt.epochs=" << c.prompt.epochs
      << "\nprompt.shot_cap=" << c.prompt.shot_cap << "\nprompt.batch_size=" << c.prompt.batch_size
      << "\nprobe.lr=" << fmt_real(c.probe.lr) << "\nprobe.epochs=" << c.probe.epochs
      << "\nprobe.batch_size=" << c.probe.batch_size << "\nwarmup_shots=" << c.warmup_shots
      << "\nood_warmup=" << c.ood_warmup
      << "\nprompt_aggregation=" << (c.prompt_aggregation == PromptAggregation::Weighted ? "weighted" : "uniform")
      << "\nredistribute_budget=" << c.redistribute_budget << "\nseed=" << c.seed << '\n';
    return o.str();
}

void rebuild(ExperimentMatrix& m) {
    m.entries.clear();
    std::string canonical = "name=" + m.name + "\n";
    for (const auto& mode : m.modes) {
        for (const auto& strategy : m.strategies) {
            for (auto seed : m.seeds) {
                MatrixEntry e;
                e.config = m.base;
                e.config.gate = parse_mode(mode, m.static_settings);
                e.config.strategy = parse_strategy(strategy);
                e.config.strategy.max_iters = m.base.strategy.max_iters;
                e.config.seed = seed;
                e.mode_label = mode;
                e.strategy_label = strategy;
                e.subdir = mode + "-" + strategy + "-seed" + std::to_string(seed);
                e.config.output_dir = m.output_root / e.subdir;
                canonical += "[" + e.subdir + "]\n" + canonical_experiment(e.config);
                m.entries.push_back(std::move(e));
            }
        }
    }
    m.canonical = std::move(canonical);
    m.config_hash = hex64(fnv1a64(m.canonical));
}

ExperimentMatrix parse_config_text(std::string_view text, const std::filesystem::path& base_dir) {
    YAML::Node root;
    try {
        root = YAML::Load(std::string(text));
    } catch (const YAML::Exception& e) {
        throw Error(ErrorCode::SchemaError,
                    "malformed YAML (line " + std::to_string(e.mark.line + 1) + "): " + e.msg);
    }
    if (root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
    check_keys(root, "",
               {"name", "rounds", "budget", "tau", "seeds", "modes", "strategies", "warmup_shots", "ood_warmup",
                "prompt_aggregation", "redistribute_budget", "kmeans_max_iters", "static", "prompt", "probe",
                "dataset", "output", "parallelism", "client_threads"});

    ExperimentMatrix m;
    m.name = "experiment";
    read(root, "", "name", m.name, "string");
    auto& b = m.base;
    read_int(root, "", "rounds", b.rounds);
    read_int(root, "", "budget", b.budget);
    read_real(root, "", "tau", b.prompt.tau);
    read_int(root, "", "warmup_shots", b.warmup_shots);
    read_bool(root, "", "ood_warmup", b.ood_warmup);
    read_bool(root, "", "redistribute_budget", b.redistribute_budget);
    read_int(root, "", "kmeans_max_iters", b.strategy.max_iters);
    read_int(root, "", "client_threads", b.client_threads);
    read_int(root, "", "parallelism", m.parallelism);
    if (const auto agg = root["prompt_aggregation"]) {
        const auto v = scalar<std::string>(agg, "prompt_aggregation", "string");
        if (v == "weighted") {
            b.prompt_aggregation = PromptAggregation::Weighted;
        } else if (v == "uniform") {
            b.prompt_aggregation = PromptAggregation::Uniform;
        } else {
            schema_error("prompt_aggregation", agg, "expected 'weighted' or 'uniform'");
        }
    }
    if (const auto p = root["prompt"]) {
        check_keys(p, "prompt", {"lr", "momentum", "weight_decay", "epochs", "shot_cap", "batch_size"});
        read_real(p, "prompt", "lr", b.prompt.lr);
        read_real(p, "prompt", "momentum", b.prompt.momentum);
        read_real(p, "prompt", "weight_decay", b.prompt.weight_decay);
        read_int(p, "prompt", "epochs", b.prompt.epochs);
        read_int(p, "prompt", "shot_cap", b.prompt.shot_cap);
        read_int(p, "prompt", "batch_size", b.prompt.batch_size);
    }
    if (const auto p = root["probe"]) {
        check_keys(p, "probe", {"lr", "epochs", "batch_size"});
        read_real(p, "probe", "lr", b.probe.lr);
        read_int(p, "probe", "epochs", b.probe.epochs);
        read_int(p, "probe", "batch_size", b.probe.batch_size);
    }
    if (const auto s = root["static"]) {
        check_keys(s, "static", {"ood_templates", "template_spread", "template_seed"});
        read_int(s, "static", "ood_templates", m.static_settings.num_ood_templates);
        read_real(s, "static", "template_spread", m.static_settings.template_spread);
        read(s, "static", "template_seed", m.static_settings.template_seed, "integer");
    }
    if (const auto d = root["dataset"]) b.dataset = parse_dataset(d, "dataset", base_dir);

    m.seeds = {0, 1, 2};
    if (const auto s = root["seeds"]) m.seeds = read_list<std::uint64_t>(s, "seeds", "non-negative integer");
    m.modes = {"mixed"};
    if (const auto s = root["modes"]) m.modes = read_list<std::string>(s, "modes", "string");
    m.strategies = {"random"};
    if (const auto s = root["strategies"]) m.strategies = read_list<std::string>(s, "strategies", "string");

    auto check_unique = [&](const std::vector<std::string>& values, const char* key,
                            const std::vector<std::string>* allowed) {
        std::set<std::string> seen;
        for (std::size_t i = 0; i < values.size(); ++i) {
            const auto path = std::string(key) + "[" + std::to_string(i) + "]";
            if (allowed && std::find(allowed->begin(), allowed->end(), values[i]) == allowed->end()) {
                schema_error(path, root[key][i], "unknown value '" + values[i] + "'");
            }
            if (!seen.insert(values[i]).second) schema_error(path, root[key][i], "duplicate value '" + values[i] + "'");
        }
        if (values.empty()) schema_error(key, root[key], "list must not be empty");
    };
    check_unique(m.modes, "modes", &mode_labels());
    static const std::vector<std::string> strategy_names = {"random", "entropy", "kmeans"};
    check_unique(m.strategies, "strategies", &strategy_names);
    if (m.seeds.empty()) schema_error("seeds", root["seeds"], "list must not be empty");
    if (std::set<std::uint64_t>(m.seeds.begin(), m.seeds.end()).size() != m.seeds.size()) {
        schema_error("seeds", root["seeds"], "duplicate seed");
    }
    if (m.parallelism < 1) schema_error("parallelism", root["parallelism"], "must be >= 1");

    std::string output = "results/" + m.name;
    read(root, "", "output", output, "path");
    m.output_root = output;

    // Numeric sanity that does not need the dataset.
    try {
        const int clients = std::holds_alternative<SyntheticSpec>(b.dataset)
                                ? std::get<SyntheticSpec>(b.dataset).num_clients
                                : 1;
        b.validate(clients);
        if (m.static_settings.num_ood_templates < 1) {
            throw Error(ErrorCode::InvalidConfig, "static.ood_templates must be >= 1");
        }
    } catch (const Error& e) {
        throw Error(ErrorCode::SchemaError, e.what());
    }
    rebuild(m);
    return m;
}

ExperimentMatrix parse_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot read config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path.parent_path());
}

}  // namespace promptgate::cli
