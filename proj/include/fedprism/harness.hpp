#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fedprism/baselines.hpp"
#include "fedprism/data.hpp"
#include "fedprism/prism_client.hpp"

namespace fedprism {

enum class Algorithm { FedPrism, FedAvg, Ifca, Local };

std::string to_string(Algorithm a);
Algorithm parse_algorithm(const std::string& name);  // throws ConfigError

enum class DatasetKind { Synthetic, Idx };
enum class PartitionKind { Latent, Dirichlet, Pathological };

std::string to_string(PartitionKind k);

struct IdxPaths {
    std::string train_images;
    std::string train_labels;
    std::string test_images;
    std::string test_labels;
    std::size_t limit_train = 0;  // 0 = use everything
    std::size_t limit_test = 0;
};

struct DatasetConfig {
    DatasetKind kind = DatasetKind::Synthetic;
    SyntheticConfig synthetic;  // seed and n_clients are filled in by the harness
    IdxPaths idx;
};

struct PartitionConfig {
    PartitionKind kind = PartitionKind::Latent;
    double alpha_dir = 0.5;
    int shards_per_client = 2;
};

struct AblationConfig {
    ComponentMask mask;
    std::optional<double> inference_weight;  // replaces the routing weight at evaluation
};

// Defaults are the desk-scale experiment: 30 clients, R = 40, C = 0.2, E = 5.
struct ExperimentConfig {
    ExperimentConfig() { prism.sgd.epochs = 5; }

    std::string name = "experiment";
    DatasetConfig dataset;
    PartitionConfig partition;
    Algorithm algorithm = Algorithm::FedPrism;
    PrismParams prism;  // K is shared with IFCA; sgd is shared by every algorithm
    std::vector<std::size_t> hidden = {64, 32};
    std::size_t n_clients = 30;
    int rounds = 40;
    double client_fraction = 0.2;
    std::uint64_t seed = 0;
    int eval_every = 1;
    AblationConfig ablation;

    // Throws ConfigError naming the offending field.
    void validate() const;
};

struct RoundReport {
    int round = 0;
    double global_acc = 0.0;
    double mean_local_acc = 0.0;
    std::vector<double> per_client_local_acc;  // NaN for clients without a test split
    double assignment_entropy = 0.0;
    double alpha_mean = 0.0;
    double alpha_min = 0.0;
    double alpha_max = 0.0;
    double wall_time = 0.0;  // seconds since the start of the run
};

struct ExperimentSummary {
    double final_global_acc = 0.0;
    double final_local_acc = 0.0;
    double best_global_acc = 0.0;
    double best_local_acc = 0.0;
    std::vector<double> per_client_final_local_acc;
    std::vector<double> per_client_final_global_acc;
    std::vector<int> final_clusters;  // dominant cluster (FedPrism) or selected model (IFCA)
    std::vector<int> true_clusters;   // latent groups, synthetic latent partition only
    std::optional<double> adjusted_rand;
    double wall_time = 0.0;
};

struct ExperimentResult {
    ExperimentConfig config;
    std::vector<RoundReport> reports;
    ExperimentSummary summary;
};

struct ExperimentData {
    DatasetSplits data;
    Partition partition;
    std::vector<int> true_clusters;
    std::vector<ClientData> clients;
    Batch global_test;
    SpecPtr spec;
};

ExperimentData prepare_data(const ExperimentConfig& config);

ExperimentResult run_experiment(const ExperimentConfig& config);

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

// Mean Shannon entropy (nats) of soft assignment rows.
double mean_assignment_entropy(const std::vector<std::vector<double>>& rows);

struct SweepRow {
    double value = 0.0;
    ExperimentSummary summary;
};

// Fixed-alpha runs (adaptation disabled), one per alpha.
std::vector<SweepRow> alpha_sensitivity_sweep(const ExperimentConfig& config, const std::vector<double>& alphas,
                                              std::vector<ExperimentResult>* runs = nullptr);

// Fixed expert inference weight in place of the confidence router.
std::vector<SweepRow> inference_weight_sweep(const ExperimentConfig& config, const std::vector<double>& weights,
                                             std::vector<ExperimentResult>* runs = nullptr);

struct ComparisonRow {
    std::string algorithm;
    std::vector<std::uint64_t> seeds;
    std::vector<double> final_global;
    std::vector<double> final_local;
    double global_mean = 0.0;
    double global_std = 0.0;  // sample standard deviation; 0 for one seed
    double local_mean = 0.0;
    double local_std = 0.0;
};

// Every config must share dataset, partition, model, rounds and fraction;
// each is run once per seed.
std::vector<ComparisonRow> compare_algorithms(const std::vector<ExperimentConfig>& configs,
                                              const std::vector<std::uint64_t>& seeds,
                                              std::vector<ExperimentResult>* runs = nullptr);

double sample_std(const std::vector<double>& v);

// Report files.
inline const char* kCsvHeader = "round,global_acc,mean_local_acc,assignment_entropy,alpha_mean,alpha_min,alpha_max";

std::string reports_csv(const std::vector<RoundReport>& reports);
std::string summary_json(const ExperimentResult& result);  // timing segregated under "timing"
std::string comparison_csv(const std::vector<ComparisonRow>& rows);
std::string sweep_csv(const std::string& column, const std::vector<SweepRow>& rows);

struct WrittenFiles {
    std::filesystem::path csv;
    std::filesystem::path json;
};

// <name>_<seed>.csv and <name>_<seed>.json under dir.
WrittenFiles write_reports(const ExperimentResult& result, const std::filesystem::path& dir);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace fedprism
