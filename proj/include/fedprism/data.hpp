#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedprism/nn.hpp"

namespace fedprism {

struct LabeledDataset {
    Matrix inputs;
    std::vector<int> labels;
    int class_count = 0;
    std::string name;

    std::size_t size() const { return labels.size(); }
    std::size_t dim() const { return inputs.cols; }

    Batch subset(std::span<const std::size_t> indices) const;
    Batch all() const;
    void validate() const;
};

// A train pool and a test pool drawn from the same distribution.
struct DatasetSplits {
    LabeledDataset train;
    LabeledDataset test;
};

enum class PartitionScheme { Dirichlet, Pathological, Latent };

// Per-client index sets: client_train indexes the train pool,
// client_test indexes the test pool.
struct Partition {
    std::vector<std::vector<std::size_t>> client_train;
    std::vector<std::vector<std::size_t>> client_test;
    PartitionScheme scheme = PartitionScheme::Dirichlet;
    double alpha_dir = 0.0;
    int shards_per_client = 0;
    std::uint64_t seed = 0;

    std::size_t client_count() const { return client_train.size(); }
    bool operator==(const Partition&) const = default;
};

std::vector<std::size_t> class_histogram(const LabeledDataset& ds, std::span<const std::size_t> indices);

// Shannon entropy (nats) of the label distribution of the given indices.
double label_entropy(const LabeledDataset& ds, std::span<const std::size_t> indices);

// Draws p_i ~ Dir(alpha_dir * 1) per client and splits every class pool across
// clients in proportion to p_i (largest-remainder rounding). The same p_i
// splits the test pool.
Partition dirichlet_partition(const LabeledDataset& train, const LabeledDataset& test, std::size_t n_clients,
                              double alpha_dir, std::uint64_t seed);

// Label-sorted equal shards, shards_per_client per client by seeded
// permutation. Test data follows each client's realized train histogram.
Partition pathological_partition(const LabeledDataset& train, const LabeledDataset& test,
                                 std::size_t n_clients, int shards_per_client, std::uint64_t seed);

struct SyntheticConfig {
    int latent_clusters = 3;
    int classes_per_cluster = 2;
    std::size_t input_dim = 16;
    std::size_t n_clients = 30;
    std::size_t samples_per_client = 100;
    std::size_t test_samples_per_client = 50;
    double cluster_noise = 0.5;
    std::uint64_t seed = 0;

    int class_count() const { return latent_clusters * classes_per_cluster; }
    void validate() const;
};

inline constexpr double kBlobScale = 3.0;

struct SyntheticData {
    DatasetSplits data;
    std::vector<int> true_cluster_of_client;
    Partition partition;
};

// Gaussian blobs with latent client groups: group g owns classes
// [g*classes_per_cluster, (g+1)*classes_per_cluster); client c belongs to
// group c mod latent_clusters and samples only its group's classes.
SyntheticData generate_synthetic(const SyntheticConfig& config);

// Same class means as generate_synthetic, but as class-balanced train/test
// pools (n_clients*samples_per_client train points) for the partitioners.
DatasetSplits generate_synthetic_pool(const SyntheticConfig& config);

// Per-class means: seeded standard normal scaled by kBlobScale.
Matrix synthetic_class_means(int class_count, std::size_t dim, std::uint64_t seed);

// IDX images (magic 0x00000803) and labels (0x00000801), big-endian.
LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path);

}  // namespace fedprism
