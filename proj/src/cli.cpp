#include "fedprism/cli.hpp"

#include <cstdlib>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <yaml-cpp/yaml.h>

#include "fedprism/errors.hpp"

namespace fedprism::cli {

namespace fs = std::filesystem;

namespace {

std::string join(const std::string& prefix, const std::string& key) {
    return prefix.empty() ? key : prefix + "." + key;
}

void check_keys(const YAML::Node& node, const std::string& path, const std::set<std::string>& allowed) {
    if (!node) return;
    if (!node.IsMap()) throw ConfigError(path.empty() ? "<root>" : path, "expected a mapping");
    for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        if (!allowed.count(key)) throw ConfigError(join(path, key), "unknown key");
    }
}

template <class T>
void read(const YAML::Node& node, const std::string& path, const std::string& key, T& out) {
    const YAML::Node v = node[key];
    if (!v || v.IsNull()) return;
    try {
        out = v.as<T>();
    } catch (const YAML::Exception&) {
        throw ConfigError(join(path, key), "invalid value '" + YAML::Dump(v) + "'");
    }
}

template <class T>
void read_optional(const YAML::Node& node, const std::string& path, const std::string& key, std::optional<T>& out) {
    const YAML::Node v = node[key];
    if (!v) return;
    if (v.IsNull()) {
        out.reset();
        return;
    }
    T value{};
    read(node, path, key, value);
    out = value;
}

void read_synthetic(const YAML::Node& n, SyntheticConfig& s) {
    const std::string p = "dataset.synthetic";
    check_keys(n, p,
               {"latent_clusters", "classes_per_cluster", "input_dim", "samples_per_client", "test_samples_per_client",
                "cluster_noise"});
    if (!n) return;
    read(n, p, "latent_clusters", s.latent_clusters);
    read(n, p, "classes_per_cluster", s.classes_per_cluster);
    read(n, p, "input_dim", s.input_dim);
    read(n, p, "samples_per_client", s.samples_per_client);
    read(n, p, "test_samples_per_client", s.test_samples_per_client);
    read(n, p, "cluster_noise", s.cluster_noise);
}

std::string resolve_path(const fs::path& base, const std::string& p) {
    if (p.empty()) return p;
    fs::path path(p);
    return path.is_absolute() ? path.string() : (base / path).lexically_normal().string();
}

void read_dataset(const YAML::Node& n, const fs::path& base, DatasetConfig& d) {
    check_keys(n, "dataset", {"kind", "synthetic", "idx"});
    if (!n) return;
    std::string kind = "synthetic";
    read(n, "dataset", "kind", kind);
    if (kind == "synthetic") {
        d.kind = DatasetKind::Synthetic;
    } else if (kind == "idx") {
        d.kind = DatasetKind::Idx;
    } else {
        throw ConfigError("dataset.kind", "expected synthetic|idx, got '" + kind + "'");
    }
    read_synthetic(n["synthetic"], d.synthetic);
    const YAML::Node idx = n["idx"];
    const std::string p = "dataset.idx";
    check_keys(idx, p, {"train_images", "train_labels", "test_images", "test_labels", "limit_train", "limit_test"});
    if (idx) {
        read(idx, p, "train_images", d.idx.train_images);
        read(idx, p, "train_labels", d.idx.train_labels);
        read(idx, p, "test_images", d.idx.test_images);
        read(idx, p, "test_labels", d.idx.test_labels);
        read(idx, p, "limit_train", d.idx.limit_train);
        read(idx, p, "limit_test", d.idx.limit_test);
        d.idx.train_images = resolve_path(base, d.idx.train_images);
        d.idx.train_labels = resolve_path(base, d.idx.train_labels);
        d.idx.test_images = resolve_path(base, d.idx.test_images);
        d.idx.test_labels = resolve_path(base, d.idx.test_labels);
    }
}

void read_partition(const YAML::Node& n, PartitionConfig& p) {
    check_keys(n, "partition", {"scheme", "alpha_dir", "shards_per_client"});
    if (!n) return;
    std::string scheme = to_string(p.kind);
    read(n, "partition", "scheme", scheme);
    if (scheme == "latent") {
        p.kind = PartitionKind::Latent;
    } else if (scheme == "dirichlet") {
        p.kind = PartitionKind::Dirichlet;
    } else if (scheme == "pathological") {
        p.kind = PartitionKind::Pathological;
    } else {
        throw ConfigError("partition.scheme", "expected latent|dirichlet|pathological, got '" + scheme + "'");
    }
    read(n, "partition", "alpha_dir", p.alpha_dir);
    read(n, "partition", "shards_per_client", p.shards_per_client);
}

void read_prism(const YAML::Node& n, PrismParams& a) {
    const std::string p = "prism";
    check_keys(n, p,
               {"K", "beta", "tau", "eta_cluster", "eta_alpha", "warmup_rounds", "recluster_every", "temperature",
                "kmeans_max_iters", "initial_alpha"});
    if (!n) return;
    read(n, p, "K", a.clusters);
    read(n, p, "beta", a.beta);
    read(n, p, "tau", a.tau);
    read(n, p, "eta_cluster", a.eta_cluster);
    read(n, p, "eta_alpha", a.eta_alpha);
    read(n, p, "warmup_rounds", a.warmup_rounds);
    read(n, p, "recluster_every", a.recluster_every);
    read(n, p, "temperature", a.temperature);
    read(n, p, "kmeans_max_iters", a.kmeans_max_iters);
    read(n, p, "initial_alpha", a.initial_alpha);
}

void read_training(const YAML::Node& n, SgdOptions& s) {
    check_keys(n, "training", {"epochs", "lr", "momentum", "batch_size"});
    if (!n) return;
    read(n, "training", "epochs", s.epochs);
    read(n, "training", "lr", s.lr);
    read(n, "training", "momentum", s.momentum);
    read(n, "training", "batch_size", s.batch_size);
}

void read_ablation(const YAML::Node& n, ExperimentConfig& c) {
    check_keys(n, "ablation", {"use_global", "use_cluster", "use_private", "inference_weight", "fixed_alpha"});
    if (!n) return;
    read(n, "ablation", "use_global", c.ablation.mask.global);
    read(n, "ablation", "use_cluster", c.ablation.mask.cluster);
    read(n, "ablation", "use_private", c.ablation.mask.private_part);
    read_optional(n, "ablation", "inference_weight", c.ablation.inference_weight);
    read_optional(n, "ablation", "fixed_alpha", c.prism.fixed_alpha);
}

void apply_override(YAML::Node& root, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError(assignment, "override must have the form key=value");
    const std::string key = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);
    std::vector<std::string> parts;
    std::stringstream ss(key);
    for (std::string part; std::getline(ss, part, '.');) {
        if (part.empty()) throw ConfigError(key, "empty path segment in override");
        parts.push_back(part);
    }
    YAML::Node parsed;
    try {
        parsed = YAML::Load(value);
    } catch (const YAML::Exception& e) {
        throw ConfigError(key, "cannot parse override value '" + value + "'");
    }
    YAML::Node cur;
    cur.reset(root);
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        if (!cur[parts[i]] || !cur[parts[i]].IsMap()) cur[parts[i]] = YAML::Node(YAML::NodeType::Map);
        YAML::Node child = cur[parts[i]];
        cur.reset(child);
    }
    cur[parts.back()] = parsed;
}

}  // namespace

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) {
        try {
            std::size_t used = 0;
            seeds.push_back(std::stoull(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError("seeds", "invalid seed '" + item + "'");
        }
    }
    if (seeds.empty()) throw ConfigError("seeds", "empty seed list");
    return seeds;
}

CliConfig load_config(const fs::path& path, const std::vector<std::string>& overrides) {
    if (!fs::exists(path)) throw ConfigError("config", "file not found: " + path.string());
    YAML::Node root;
    try {
        root = YAML::LoadFile(path.string());
    } catch (const YAML::Exception& e) {
        throw ConfigError("config", "cannot parse " + path.string() + ": " + e.what());
    }
    if (!root || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
    for (const auto& o : overrides) apply_override(root, o);

    check_keys(root, "",
               {"name", "seed", "seeds", "rounds", "client_fraction", "n_clients", "eval_every", "algorithm", "dataset",
                "partition", "model", "training", "prism", "ablation", "output_dir", "compare", "sweep"});

    const fs::path base = fs::absolute(path).parent_path();
    CliConfig out;
    ExperimentConfig& c = out.experiment;
    read(root, "", "name", c.name);
    read(root, "", "seed", c.seed);
    read(root, "", "rounds", c.rounds);
    read(root, "", "client_fraction", c.client_fraction);
    read(root, "", "n_clients", c.n_clients);
    read(root, "", "eval_every", c.eval_every);
    std::string algo = to_string(c.algorithm);
    read(root, "", "algorithm", algo);
    c.algorithm = parse_algorithm(algo);
    read_dataset(root["dataset"], base, c.dataset);
    read_partition(root["partition"], c.partition);
    const YAML::Node model = root["model"];
    check_keys(model, "model", {"hidden"});
    if (model) read(model, "model", "hidden", c.hidden);
    read_training(root["training"], c.prism.sgd);
    read_prism(root["prism"], c.prism);
    read_ablation(root["ablation"], c);

    if (root["seeds"]) {
        read(root, "", "seeds", out.seeds);
        if (out.seeds.empty()) throw ConfigError("seeds", "empty seed list");
    }
    if (root["output_dir"] && !root["output_dir"].IsNull()) {
        std::string dir;
        read(root, "", "output_dir", dir);
        out.output_dir = resolve_path(base, dir);
    }

    const YAML::Node compare = root["compare"];
    check_keys(compare, "compare", {"algorithms"});
    if (compare) {
        out.has_compare = true;
        std::vector<std::string> names;
        read(compare, "compare", "algorithms", names);
        for (const auto& n : names) {
            try {
                out.compare_algorithms.push_back(parse_algorithm(n));
            } catch (const ConfigError& e) {
                throw ConfigError("compare.algorithms", e.what());
            }
        }
    }

    const YAML::Node sweep = root["sweep"];
    check_keys(sweep, "sweep", {"kind", "values"});
    if (sweep) {
        out.has_sweep = true;
        std::string kind = "alpha";
        read(sweep, "sweep", "kind", kind);
        if (kind == "alpha") {
            out.sweep_kind = SweepKind::Alpha;
        } else if (kind == "inference_weight") {
            out.sweep_kind = SweepKind::InferenceWeight;
        } else {
            throw ConfigError("sweep.kind", "expected alpha|inference_weight, got '" + kind + "'");
        }
        read(sweep, "sweep", "values", out.sweep_values);
    }

    c.validate();
    return out;
}

fs::path resolve_output_dir(const CommandOptions& opts, const CliConfig& cfg) {
    if (opts.out) return *opts.out;
    if (cfg.output_dir) return *cfg.output_dir;
    if (const char* env = std::getenv("FEDPRISM_OUT"); env && *env) return env;
    return "fedprism_out";
}

namespace {

// With no seed list, `count` consecutive seeds starting at the config seed.
std::vector<std::uint64_t> effective_seeds(const CommandOptions& opts, const CliConfig& cfg, std::size_t count = 1) {
    if (opts.seeds) return parse_seed_list(*opts.seeds);
    if (!cfg.seeds.empty()) return cfg.seeds;
    std::vector<std::uint64_t> out;
    for (std::size_t i = 0; i < count; ++i) out.push_back(cfg.experiment.seed + i);
    return out;
}

std::string pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
    return buf;
}

template <class Fn>
int guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

}  // namespace

int cmd_run(const CommandOptions& opts) {
    return guarded([&] {
        const CliConfig cfg = load_config(opts.config_path, opts.overrides);
        const auto seeds = effective_seeds(opts, cfg);
        const fs::path dir = resolve_output_dir(opts, cfg);
        for (auto seed : seeds) {
            ExperimentConfig c = cfg.experiment;
            c.seed = seed;
            const auto result = run_experiment(c);
            const auto files = write_reports(result, dir);
            std::cout << files.csv.string() << "\n" << files.json.string() << "\n";
            std::cout << c.name << " seed " << seed << ": Glob " << pct(result.summary.final_global_acc) << " Loc "
                      << pct(result.summary.final_local_acc) << "\n";
        }
        return kExitOk;
    });
}

int cmd_compare(const CommandOptions& opts) {
    return guarded([&] {
        const CliConfig cfg = load_config(opts.config_path, opts.overrides);
        if (!cfg.has_compare || cfg.compare_algorithms.empty())
            throw ConfigError("compare.algorithms", "at least one algorithm required");
        std::vector<ExperimentConfig> configs;
        for (auto a : cfg.compare_algorithms) {
            ExperimentConfig c = cfg.experiment;
            c.algorithm = a;
            c.name = cfg.experiment.name + "_" + to_string(a);
            c.validate();
            configs.push_back(std::move(c));
        }
        const auto seeds = effective_seeds(opts, cfg, kDefaultCompareSeeds);
        const fs::path dir = resolve_output_dir(opts, cfg);
        std::vector<ExperimentResult> runs;
        const auto rows = compare_algorithms(configs, seeds, &runs);
        for (const auto& r : runs) write_reports(r, dir);
        const fs::path table = dir / (cfg.experiment.name + "_comparison.csv");
        write_text(table, comparison_csv(rows));
        std::cout << table.string() << "\n";
        for (const auto& r : rows) {
            std::cout << r.algorithm << ": Glob " << pct(r.global_mean) << " +- " << pct(r.global_std) << "  Loc "
                      << pct(r.local_mean) << " +- " << pct(r.local_std) << "\n";
        }
        return kExitOk;
    });
}

int cmd_sweep(const CommandOptions& opts) {
    return guarded([&] {
        const CliConfig cfg = load_config(opts.config_path, opts.overrides);
        if (!cfg.has_sweep || cfg.sweep_values.empty()) throw ConfigError("sweep.values", "at least one value required");
        std::vector<double> values;
        for (double v : cfg.sweep_values) {
            if (std::find(values.begin(), values.end(), v) != values.end()) {
                std::cerr << "warning: duplicate sweep value " << v << " ignored\n";
                continue;
            }
            values.push_back(v);
        }
        const bool alpha = cfg.sweep_kind == SweepKind::Alpha;
        const std::string column = alpha ? "alpha" : "inference_weight";
        const fs::path dir = resolve_output_dir(opts, cfg);
        for (auto seed : effective_seeds(opts, cfg)) {
            ExperimentConfig c = cfg.experiment;
            c.seed = seed;
            std::vector<ExperimentResult> runs;
            std::vector<SweepRow> rows;
            try {
                rows = alpha ? alpha_sensitivity_sweep(c, values, &runs) : inference_weight_sweep(c, values, &runs);
            } catch (const ConstraintError& e) {
                throw ConfigError("sweep.values", e.what());
            }
            for (const auto& r : runs) std::cout << write_reports(r, dir).csv.string() << "\n";
            const fs::path table = dir / (c.name + "_" + column + "_sweep_" + std::to_string(seed) + ".csv");
            write_text(table, sweep_csv(column, rows));
            std::cout << table.string() << "\n";
            for (const auto& r : rows) {
                std::cout << column << "=" << r.value << ": Glob " << pct(r.summary.final_global_acc) << " Loc "
                          << pct(r.summary.final_local_acc) << "\n";
            }
        }
        return kExitOk;
    });
}

int main(int argc, char** argv) {
    CLI::App app{"Federated learning simulator: FedPrism, FedAvg, IFCA and Local training"};
    app.require_subcommand(1);

    CommandOptions opts;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opts.config_path, "Experiment config (YAML)")->required();
        sub->add_option("--out", opts.out, "Output directory");
        sub->add_option("--set", opts.overrides, "Override a config key: key=value (repeatable)");
        sub->add_option("--seeds", opts.seeds, "Comma-separated seed list, e.g. 0,1,2");
    };
    auto* run = app.add_subcommand("run", "Run one experiment per seed");
    auto* compare = app.add_subcommand("compare", "Compare algorithms over shared data and seeds");
    auto* sweep = app.add_subcommand("sweep", "Alpha or inference-weight sweep");
    add_common(run);
    add_common(compare);
    add_common(sweep);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }
    if (*run) return cmd_run(opts);
    if (*compare) return cmd_compare(opts);
    return cmd_sweep(opts);
}

}  // namespace fedprism::cli
