#include "fedprism/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <set>

#include <json.hpp>

#include "fedprism/errors.hpp"
#include "fedprism/prism_server.hpp"
#include "fedprism/rng.hpp"

namespace fedprism {

using json = nlohmann::ordered_json;

std::string to_string(Algorithm a) {
    switch (a) {
        case Algorithm::FedPrism: return "fedprism";
        case Algorithm::FedAvg: return "fedavg";
        case Algorithm::Ifca: return "ifca";
        case Algorithm::Local: return "local";
    }
    return "unknown";
}

Algorithm parse_algorithm(const std::string& name) {
    if (name == "fedprism") return Algorithm::FedPrism;
    if (name == "fedavg") return Algorithm::FedAvg;
    if (name == "ifca") return Algorithm::Ifca;
    if (name == "local") return Algorithm::Local;
    throw ConfigError("algorithm", "unknown algorithm '" + name + "' (expected fedprism|fedavg|ifca|local)");
}

std::string to_string(PartitionKind k) {
    switch (k) {
        case PartitionKind::Latent: return "latent";
        case PartitionKind::Dirichlet: return "dirichlet";
        case PartitionKind::Pathological: return "pathological";
    }
    return "unknown";
}

void ExperimentConfig::validate() const {
    if (name.empty()) throw ConfigError("name", "must be nonempty");
    if (rounds < 1) throw ConfigError("rounds", "must be >= 1");
    if (!(client_fraction > 0.0 && client_fraction <= 1.0)) throw ConfigError("client_fraction", "must lie in (0, 1]");
    if (eval_every < 1) throw ConfigError("eval_every", "must be >= 1");
    if (n_clients < 1) throw ConfigError("n_clients", "must be >= 1");
    for (auto h : hidden) {
        if (h < 1) throw ConfigError("model.hidden", "layer widths must be >= 1");
    }
    if (!ablation.mask.any()) throw ConfigError("ablation", "at least one component must be enabled");
    if (ablation.inference_weight && !(*ablation.inference_weight >= 0.0 && *ablation.inference_weight <= 1.0))
        throw ConfigError("ablation.inference_weight", "must lie in [0, 1]");
    if (prism.sgd.epochs < 1) throw ConfigError("training.epochs", "must be >= 1");
    if (!(prism.sgd.lr >= 0.0)) throw ConfigError("training.lr", "must be >= 0");
    if (!(prism.sgd.momentum >= 0.0 && prism.sgd.momentum < 1.0)) throw ConfigError("training.momentum", "must lie in [0, 1)");
    if (prism.sgd.batch_size < 1) throw ConfigError("training.batch_size", "must be >= 1");
    if (algorithm == Algorithm::Ifca && prism.clusters < 2) throw ConfigError("algorithm.K", "IFCA needs K >= 2");
    try {
        prism.validate();
    } catch (const std::exception& e) {
        throw ConfigError("algorithm", e.what());
    }
    if (partition.kind == PartitionKind::Latent && dataset.kind != DatasetKind::Synthetic)
        throw ConfigError("partition.scheme", "latent partition requires a synthetic dataset");
    if (partition.kind == PartitionKind::Dirichlet && !(partition.alpha_dir > 0.0))
        throw ConfigError("partition.alpha_dir", "must be > 0");
    if (partition.kind == PartitionKind::Pathological && partition.shards_per_client < 1)
        throw ConfigError("partition.shards_per_client", "must be >= 1");
    if (dataset.kind == DatasetKind::Synthetic) {
        try {
            SyntheticConfig s = dataset.synthetic;
            s.n_clients = n_clients;
            s.validate();
        } catch (const std::exception& e) {
            throw ConfigError("dataset.synthetic", e.what());
        }
    } else {
        if (dataset.idx.train_images.empty()) throw ConfigError("dataset.idx.train_images", "path required");
        if (dataset.idx.train_labels.empty()) throw ConfigError("dataset.idx.train_labels", "path required");
        if (dataset.idx.test_images.empty()) throw ConfigError("dataset.idx.test_images", "path required");
        if (dataset.idx.test_labels.empty()) throw ConfigError("dataset.idx.test_labels", "path required");
    }
}

namespace {

void truncate(LabeledDataset& ds, std::size_t limit) {
    if (limit == 0 || limit >= ds.size()) return;
    ds.labels.resize(limit);
    ds.inputs.data.resize(limit * ds.inputs.cols);
    ds.inputs.rows = limit;
}

json config_to_json(const ExperimentConfig& c) {
    json j;
    j["name"] = c.name;
    j["algorithm"] = to_string(c.algorithm);
    j["seed"] = c.seed;
    j["rounds"] = c.rounds;
    j["client_fraction"] = c.client_fraction;
    j["n_clients"] = c.n_clients;
    j["eval_every"] = c.eval_every;
    json d;
    if (c.dataset.kind == DatasetKind::Synthetic) {
        const auto& s = c.dataset.synthetic;
        d["kind"] = "synthetic";
        d["latent_clusters"] = s.latent_clusters;
        d["classes_per_cluster"] = s.classes_per_cluster;
        d["input_dim"] = s.input_dim;
        d["samples_per_client"] = s.samples_per_client;
        d["test_samples_per_client"] = s.test_samples_per_client;
        d["cluster_noise"] = s.cluster_noise;
    } else {
        const auto& p = c.dataset.idx;
        d["kind"] = "idx";
        d["train_images"] = p.train_images;
        d["train_labels"] = p.train_labels;
        d["test_images"] = p.test_images;
        d["test_labels"] = p.test_labels;
        d["limit_train"] = p.limit_train;
        d["limit_test"] = p.limit_test;
    }
    j["dataset"] = d;
    json p;
    p["scheme"] = to_string(c.partition.kind);
    if (c.partition.kind == PartitionKind::Dirichlet) p["alpha_dir"] = c.partition.alpha_dir;
    if (c.partition.kind == PartitionKind::Pathological) p["shards_per_client"] = c.partition.shards_per_client;
    j["partition"] = p;
    j["model"] = {{"hidden", c.hidden}};
    j["training"] = {{"epochs", c.prism.sgd.epochs},
                     {"lr", c.prism.sgd.lr},
                     {"momentum", c.prism.sgd.momentum},
                     {"batch_size", c.prism.sgd.batch_size}};
    json a;
    a["K"] = c.prism.clusters;
    a["beta"] = c.prism.beta;
    a["tau"] = c.prism.tau;
    a["eta_cluster"] = c.prism.eta_cluster;
    a["eta_alpha"] = c.prism.eta_alpha;
    a["warmup_rounds"] = c.prism.warmup_rounds;
    a["recluster_every"] = c.prism.recluster_every;
    a["temperature"] = c.prism.temperature;
    a["kmeans_max_iters"] = c.prism.kmeans_max_iters;
    a["initial_alpha"] = c.prism.initial_alpha;
    j["prism"] = a;
    json ab;
    ab["use_global"] = c.ablation.mask.global;
    ab["use_cluster"] = c.ablation.mask.cluster;
    ab["use_private"] = c.ablation.mask.private_part;
    ab["inference_weight"] = c.ablation.inference_weight ? json(*c.ablation.inference_weight) : json(nullptr);
    ab["fixed_alpha"] = c.prism.fixed_alpha ? json(*c.prism.fixed_alpha) : json(nullptr);
    j["ablation"] = ab;
    return j;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    std::size_t n = 0;
    for (double x : v) {
        if (std::isnan(x)) continue;
        s += x;
        ++n;
    }
    return n ? s / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

struct Snapshot {
    std::vector<double> local;   // per client, NaN without a test split
    std::vector<double> global;  // per client
    double assignment_entropy = 0.0;
    double alpha_mean = 0.0, alpha_min = 0.0, alpha_max = 0.0;
};

// Uniform round interface over FedPrism and the baselines.
class Runner {
public:
    virtual ~Runner() = default;
    virtual void round(std::span<const std::size_t> sampled, std::uint64_t round_seed) = 0;
    virtual Snapshot evaluate() const = 0;
    virtual std::vector<int> clusters() const { return {}; }
};

double batch_accuracy(const ParamVector& p, const Batch& b) {
    return b.empty() ? std::numeric_limits<double>::quiet_NaN() : evaluate(p, b);
}

class PrismRunner : public Runner {
public:
    PrismRunner(const ExperimentConfig& cfg, const ExperimentData& data)
        : cfg_(cfg), data_(data), server_(init_server(data.spec, cfg.prism, cfg.seed)) {
        for (const auto& c : data.clients) clients_.push_back(init_client(c.client_id, server_, c.train, c.test, cfg.seed));
    }

    void round(std::span<const std::size_t> sampled, std::uint64_t round_seed) override {
        apply_round(server_, clients_, sampled, round_seed, cfg_.ablation.mask);
    }

    Snapshot evaluate() const override {
        Snapshot s;
        std::vector<std::vector<double>> rows;
        std::vector<double> alphas;
        for (const auto& c : clients_) {
            auto ev = client_evaluate(c, server_.global, server_.clusters, cfg_.prism.beta, cfg_.prism.temperature,
                                      cfg_.ablation.inference_weight, data_.global_test, cfg_.ablation.mask);
            s.local.push_back(ev.local_acc.value_or(std::numeric_limits<double>::quiet_NaN()));
            s.global.push_back(ev.global_acc);
            rows.push_back(c.assign_w);
            alphas.push_back(c.alpha);
        }
        s.assignment_entropy = mean_assignment_entropy(rows);
        s.alpha_mean = mean_of(alphas);
        s.alpha_min = *std::min_element(alphas.begin(), alphas.end());
        s.alpha_max = *std::max_element(alphas.begin(), alphas.end());
        return s;
    }

    std::vector<int> clusters() const override {
        std::vector<int> out;
        for (const auto& c : clients_) out.push_back(static_cast<int>(dominant_cluster(c.assign_w)));
        return out;
    }

private:
    const ExperimentConfig& cfg_;
    const ExperimentData& data_;
    ServerState server_;
    std::vector<ClientState> clients_;
};

class FedAvgRunner : public Runner {
public:
    FedAvgRunner(const ExperimentConfig& cfg, const ExperimentData& data)
        : cfg_(cfg), data_(data), global_(init_server(data.spec, cfg.prism, cfg.seed).global) {}

    void round(std::span<const std::size_t> sampled, std::uint64_t round_seed) override {
        global_ = fedavg_round(global_, data_.clients, sampled, cfg_.prism.sgd, round_seed);
    }

    Snapshot evaluate() const override {
        Snapshot s;
        const double g = evaluate_global();
        for (const auto& c : data_.clients) {
            s.local.push_back(batch_accuracy(global_, c.test));
            s.global.push_back(g);
        }
        return s;
    }

private:
    double evaluate_global() const { return fedprism::evaluate(global_, data_.global_test); }

    const ExperimentConfig& cfg_;
    const ExperimentData& data_;
    ParamVector global_;
};

class LocalRunner : public Runner {
public:
    LocalRunner(const ExperimentConfig& cfg, const ExperimentData& data) : cfg_(cfg), data_(data) {
        // Same initial model as the FedPrism local specialist of each client.
        auto server = init_server(data.spec, cfg.prism, cfg.seed);
        for (const auto& c : data.clients) {
            models_.push_back(init_client(c.client_id, server, c.train, Batch{}, cfg.seed).specialist);
        }
    }

    void round(std::span<const std::size_t> sampled, std::uint64_t round_seed) override {
        local_round(models_, data_.clients, sampled, cfg_.prism.sgd, round_seed);
    }

    Snapshot evaluate() const override {
        Snapshot s;
        for (std::size_t i = 0; i < models_.size(); ++i) {
            s.local.push_back(batch_accuracy(models_[i], data_.clients[i].test));
            s.global.push_back(fedprism::evaluate(models_[i], data_.global_test));
        }
        return s;
    }

private:
    const ExperimentConfig& cfg_;
    const ExperimentData& data_;
    std::vector<ParamVector> models_;
};

class IfcaRunner : public Runner {
public:
    IfcaRunner(const ExperimentConfig& cfg, const ExperimentData& data)
        : cfg_(cfg), data_(data), models_(init_server(data.spec, cfg.prism, cfg.seed).clusters) {}

    void round(std::span<const std::size_t> sampled, std::uint64_t round_seed) override {
        models_ = ifca_round(models_, data_.clients, sampled, cfg_.prism.sgd, round_seed).models;
    }

    Snapshot evaluate() const override {
        Snapshot s;
        std::vector<double> model_global(models_.size());
        for (std::size_t k = 0; k < models_.size(); ++k) model_global[k] = fedprism::evaluate(models_[k], data_.global_test);
        for (const auto& c : data_.clients) {
            const std::size_t k = ifca_select(models_, c.train);
            s.local.push_back(batch_accuracy(models_[k], c.test));
            s.global.push_back(model_global[k]);
        }
        return s;
    }

    std::vector<int> clusters() const override {
        std::vector<int> out;
        for (const auto& c : data_.clients) out.push_back(static_cast<int>(ifca_select(models_, c.train)));
        return out;
    }

private:
    const ExperimentConfig& cfg_;
    const ExperimentData& data_;
    std::vector<ParamVector> models_;
};

std::unique_ptr<Runner> make_runner(const ExperimentConfig& cfg, const ExperimentData& data) {
    switch (cfg.algorithm) {
        case Algorithm::FedPrism: return std::make_unique<PrismRunner>(cfg, data);
        case Algorithm::FedAvg: return std::make_unique<FedAvgRunner>(cfg, data);
        case Algorithm::Ifca: return std::make_unique<IfcaRunner>(cfg, data);
        case Algorithm::Local: return std::make_unique<LocalRunner>(cfg, data);
    }
    throw ConfigError("algorithm", "unsupported");
}

}  // namespace

ExperimentData prepare_data(const ExperimentConfig& config) {
    ExperimentData out;
    const std::uint64_t data_seed = derive_seed(config.seed, {seed_tag::kData});
    const std::uint64_t part_seed = derive_seed(config.seed, {seed_tag::kPartition});
    if (config.dataset.kind == DatasetKind::Synthetic) {
        SyntheticConfig s = config.dataset.synthetic;
        s.n_clients = config.n_clients;
        s.seed = data_seed;
        if (config.partition.kind == PartitionKind::Latent) {
            auto syn = generate_synthetic(s);
            out.data = std::move(syn.data);
            out.partition = std::move(syn.partition);
            out.true_clusters = std::move(syn.true_cluster_of_client);
        } else {
            out.data = generate_synthetic_pool(s);
        }
    } else {
        const auto& p = config.dataset.idx;
        out.data.train = load_idx(p.train_images, p.train_labels);
        out.data.test = load_idx(p.test_images, p.test_labels);
        truncate(out.data.train, p.limit_train);
        truncate(out.data.test, p.limit_test);
        const int classes = std::max(out.data.train.class_count, out.data.test.class_count);
        out.data.train.class_count = classes;
        out.data.test.class_count = classes;
        if (out.data.train.dim() != out.data.test.dim())
            throw ConfigError("dataset.idx", "train and test images differ in size");
    }
    if (config.partition.kind == PartitionKind::Dirichlet) {
        out.partition = dirichlet_partition(out.data.train, out.data.test, config.n_clients, config.partition.alpha_dir,
                                            part_seed);
    } else if (config.partition.kind == PartitionKind::Pathological) {
        out.partition = pathological_partition(out.data.train, out.data.test, config.n_clients,
                                               config.partition.shards_per_client, part_seed);
    }

    std::vector<std::size_t> dims;
    dims.push_back(out.data.train.dim());
    dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
    dims.push_back(static_cast<std::size_t>(out.data.train.class_count));
    out.spec = make_spec(std::move(dims));

    for (std::size_t i = 0; i < out.partition.client_count(); ++i) {
        ClientData c;
        c.client_id = static_cast<int>(i);
        c.train = out.data.train.subset(out.partition.client_train[i]);
        c.test = out.data.test.subset(out.partition.client_test[i]);
        out.clients.push_back(std::move(c));
    }
    out.global_test = out.data.test.all();
    return out;
}

double mean_assignment_entropy(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) return 0.0;
    double total = 0.0;
    for (const auto& r : rows) {
        for (double w : r) {
            if (w > 0.0) total -= w * std::log(w);
        }
    }
    return total / static_cast<double>(rows.size());
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) throw DimensionError("adjusted_rand_index labelings", a.size(), b.size());
    const std::size_t n = a.size();
    if (n < 2) return 1.0;
    std::map<std::pair<int, int>, double> table;
    std::map<int, double> ra, rb;
    for (std::size_t i = 0; i < n; ++i) {
        table[{a[i], b[i]}] += 1.0;
        ra[a[i]] += 1.0;
        rb[b[i]] += 1.0;
    }
    auto c2 = [](double x) { return x * (x - 1.0) / 2.0; };
    double index = 0.0, sa = 0.0, sb = 0.0;
    for (const auto& [k, v] : table) index += c2(v);
    for (const auto& [k, v] : ra) sa += c2(v);
    for (const auto& [k, v] : rb) sb += c2(v);
    const double expected = sa * sb / c2(static_cast<double>(n));
    const double max_index = 0.5 * (sa + sb);
    if (max_index == expected) return 1.0;  // both labelings trivial
    return (index - expected) / (max_index - expected);
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    config.validate();
    const auto start = std::chrono::steady_clock::now();
    ExperimentResult result;
    result.config = config;
    const ExperimentData data = prepare_data(config);
    auto runner = make_runner(config, data);

    auto& sum = result.summary;
    sum.best_global_acc = -1.0;
    sum.best_local_acc = -1.0;
    for (int t = 1; t <= config.rounds; ++t) {
        const std::uint64_t round_seed = derive_seed(config.seed, {seed_tag::kSampling, static_cast<std::uint64_t>(t)});
        const auto sampled = sample_clients(data.clients.size(), config.client_fraction, derive_seed(round_seed, {0}));
        runner->round(sampled, round_seed);

        if (t % config.eval_every != 0 && t != config.rounds) continue;
        Snapshot snap = runner->evaluate();
        RoundReport r;
        r.round = t;
        r.global_acc = mean_of(snap.global);
        r.mean_local_acc = mean_of(snap.local);
        r.per_client_local_acc = snap.local;
        r.assignment_entropy = snap.assignment_entropy;
        r.alpha_mean = snap.alpha_mean;
        r.alpha_min = snap.alpha_min;
        r.alpha_max = snap.alpha_max;
        r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        sum.best_global_acc = std::max(sum.best_global_acc, r.global_acc);
        sum.best_local_acc = std::max(sum.best_local_acc, r.mean_local_acc);
        if (t == config.rounds) {
            sum.final_global_acc = r.global_acc;
            sum.final_local_acc = r.mean_local_acc;
            sum.per_client_final_local_acc = snap.local;
            sum.per_client_final_global_acc = snap.global;
        }
        result.reports.push_back(std::move(r));
    }
    sum.final_clusters = runner->clusters();
    sum.true_clusters = data.true_clusters;
    if (!sum.final_clusters.empty() && !sum.true_clusters.empty())
        sum.adjusted_rand = adjusted_rand_index(sum.final_clusters, sum.true_clusters);
    sum.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

namespace {

std::string point_name(const std::string& base, const char* tag, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%s%g", base.c_str(), tag, v);
    return buf;
}

std::vector<double> dedup_preserving_order(const std::vector<double>& values) {
    std::vector<double> out;
    for (double v : values) {
        if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
    }
    return out;
}

}  // namespace

std::vector<SweepRow> alpha_sensitivity_sweep(const ExperimentConfig& config, const std::vector<double>& alphas,
                                              std::vector<ExperimentResult>* runs) {
    std::vector<SweepRow> rows;
    for (double a : dedup_preserving_order(alphas)) {
        if (a < 0.0 || a + config.prism.beta > 1.0 + 1e-12)
            throw ConstraintError("alpha " + std::to_string(a) + " violates alpha + beta <= 1");
        ExperimentConfig c = config;
        c.prism.fixed_alpha = a;
        c.name = point_name(config.name, "alpha", a);
        auto res = run_experiment(c);
        rows.push_back({a, res.summary});
        if (runs) runs->push_back(std::move(res));
    }
    return rows;
}

std::vector<SweepRow> inference_weight_sweep(const ExperimentConfig& config, const std::vector<double>& weights,
                                             std::vector<ExperimentResult>* runs) {
    if (config.algorithm != Algorithm::FedPrism)
        throw ConfigError("algorithm", "inference-weight sweep requires fedprism");
    std::vector<SweepRow> rows;
    for (double w : dedup_preserving_order(weights)) {
        ExperimentConfig c = config;
        c.ablation.inference_weight = w;
        c.name = point_name(config.name, "weight", w);
        auto res = run_experiment(c);
        rows.push_back({w, res.summary});
        if (runs) runs->push_back(std::move(res));
    }
    return rows;
}

double sample_std(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

std::vector<ComparisonRow> compare_algorithms(const std::vector<ExperimentConfig>& configs,
                                              const std::vector<std::uint64_t>& seeds,
                                              std::vector<ExperimentResult>* runs) {
    if (configs.empty()) throw ConfigError("compare.algorithms", "no algorithms to compare");
    if (seeds.empty()) throw ConfigError("seeds", "no seeds");
    auto shared = [](const ExperimentConfig& c) {
        json j = config_to_json(c);
        return json{{"dataset", j["dataset"]}, {"partition", j["partition"]}, {"model", j["model"]},
                    {"rounds", j["rounds"]}, {"client_fraction", j["client_fraction"]}, {"n_clients", j["n_clients"]}};
    };
    const json ref = shared(configs.front());
    std::set<std::string> names;
    for (const auto& c : configs) {
        if (shared(c) != ref) throw ConfigError("compare", "configs disagree on shared dataset/partition/model fields");
        if (!names.insert(to_string(c.algorithm)).second)
            throw ConfigError("compare.algorithms", "algorithm '" + to_string(c.algorithm) + "' listed twice");
    }
    std::vector<ComparisonRow> rows;
    for (const auto& c : configs) {
        ComparisonRow row;
        row.algorithm = to_string(c.algorithm);
        for (auto s : seeds) {
            ExperimentConfig cs = c;
            cs.seed = s;
            auto res = run_experiment(cs);
            row.seeds.push_back(s);
            row.final_global.push_back(res.summary.final_global_acc);
            row.final_local.push_back(res.summary.final_local_acc);
            if (runs) runs->push_back(std::move(res));
        }
        row.global_mean = std::accumulate(row.final_global.begin(), row.final_global.end(), 0.0) /
                          static_cast<double>(row.final_global.size());
        row.local_mean = std::accumulate(row.final_local.begin(), row.final_local.end(), 0.0) /
                         static_cast<double>(row.final_local.size());
        row.global_std = sample_std(row.final_global);
        row.local_std = sample_std(row.final_local);
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace {

std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

}  // namespace

std::string reports_csv(const std::vector<RoundReport>& reports) {
    std::string out = kCsvHeader;
    out += '\n';
    for (const auto& r : reports) {
        out += std::to_string(r.round) + ',' + fmt6(r.global_acc) + ',' + fmt6(r.mean_local_acc) + ',' +
               fmt6(r.assignment_entropy) + ',' + fmt6(r.alpha_mean) + ',' + fmt6(r.alpha_min) + ',' +
               fmt6(r.alpha_max) + '\n';
    }
    return out;
}

std::string summary_json(const ExperimentResult& result) {
    const auto& s = result.summary;
    json j;
    j["config"] = config_to_json(result.config);
    j["final"] = {{"global_acc", s.final_global_acc}, {"local_acc", s.final_local_acc}};
    j["best"] = {{"global_acc", s.best_global_acc}, {"local_acc", s.best_local_acc}};
    j["per_client_final"] = {{"local_acc", s.per_client_final_local_acc},
                             {"global_acc", s.per_client_final_global_acc}};
    if (!s.final_clusters.empty()) j["final_clusters"] = s.final_clusters;
    if (!s.true_clusters.empty()) j["true_clusters"] = s.true_clusters;
    if (s.adjusted_rand) j["adjusted_rand"] = *s.adjusted_rand;
    json per_round = json::array();
    for (const auto& r : result.reports) per_round.push_back(r.wall_time);
    j["timing"] = {{"wall_time_s", s.wall_time}, {"round_wall_time_s", per_round}};
    return j.dump(2) + "\n";
}

std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
    std::string out = "algorithm,seeds,glob_mean,glob_std,loc_mean,loc_std\n";
    for (const auto& r : rows) {
        out += r.algorithm + ',' + std::to_string(r.seeds.size()) + ',' + fmt6(r.global_mean) + ',' +
               fmt6(r.global_std) + ',' + fmt6(r.local_mean) + ',' + fmt6(r.local_std) + '\n';
    }
    return out;
}

std::string sweep_csv(const std::string& column, const std::vector<SweepRow>& rows) {
    std::string out = column + ",final_global_acc,best_global_acc,final_local_acc,best_local_acc\n";
    for (const auto& r : rows) {
        out += fmt6(r.value) + ',' + fmt6(r.summary.final_global_acc) + ',' + fmt6(r.summary.best_global_acc) + ',' +
               fmt6(r.summary.final_local_acc) + ',' + fmt6(r.summary.best_local_acc) + '\n';
    }
    return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(path.string(), 0, "cannot open for writing");
    out << text;
    if (!out) throw IoError(path.string(), 0, "write failed");
}

WrittenFiles write_reports(const ExperimentResult& result, const std::filesystem::path& dir) {
    const std::string stem = result.config.name + "_" + std::to_string(result.config.seed);
    WrittenFiles files{dir / (stem + ".csv"), dir / (stem + ".json")};
    write_text(files.csv, reports_csv(result.reports));
    write_text(files.json, summary_json(result));
    return files;
}

}  // namespace fedprism
