#include "fedprism/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "fedprism/errors.hpp"
#include "fedprism/rng.hpp"

namespace fedprism {

Batch LabeledDataset::subset(std::span<const std::size_t> indices) const {
    Batch b;
    b.inputs = Matrix(indices.size(), dim());
    b.labels.resize(indices.size());
    for (std::size_t k = 0; k < indices.size(); ++k) {
        if (indices[k] >= size()) throw DimensionError("dataset index out of range", size(), indices[k]);
        auto src = inputs.row(indices[k]);
        std::copy(src.begin(), src.end(), b.inputs.row(k).begin());
        b.labels[k] = labels[indices[k]];
    }
    return b;
}

Batch LabeledDataset::all() const { return Batch{inputs, labels}; }

void LabeledDataset::validate() const {
    if (labels.empty()) throw ParameterError("dataset '" + name + "' is empty");
    if (inputs.rows != labels.size()) throw DimensionError("dataset rows vs labels", inputs.rows, labels.size());
    for (int y : labels) {
        if (y < 0 || y >= class_count)
            throw ParameterError("dataset '" + name + "' has label " + std::to_string(y) + " outside [0, " +
                                 std::to_string(class_count) + ")");
    }
}

std::vector<std::size_t> class_histogram(const LabeledDataset& ds, std::span<const std::size_t> indices) {
    std::vector<std::size_t> h(static_cast<std::size_t>(ds.class_count), 0);
    for (auto i : indices) ++h[static_cast<std::size_t>(ds.labels[i])];
    return h;
}

double label_entropy(const LabeledDataset& ds, std::span<const std::size_t> indices) {
    if (indices.empty()) return 0.0;
    auto h = class_histogram(ds, indices);
    double n = static_cast<double>(indices.size());
    double e = 0.0;
    for (auto c : h) {
        if (c == 0) continue;
        double p = static_cast<double>(c) / n;
        e -= p * std::log(p);
    }
    return e;
}

namespace {

// Splits total into integer counts proportional to weights; leftover units go
// to the largest fractional parts (ties to the lower index). Zero total weight
// falls back to equal weights.
std::vector<std::size_t> apportion(std::size_t total, std::span<const double> weights) {
    const std::size_t n = weights.size();
    std::vector<std::size_t> counts(n, 0);
    if (n == 0 || total == 0) return counts;
    double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::vector<double> w(weights.begin(), weights.end());
    if (!(wsum > 0.0)) {
        std::fill(w.begin(), w.end(), 1.0);
        wsum = static_cast<double>(n);
    }
    std::vector<double> frac(n);
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double exact = static_cast<double>(total) * w[i] / wsum;
        double fl = std::floor(exact);
        counts[i] = static_cast<std::size_t>(fl);
        frac[i] = exact - fl;
        assigned += counts[i];
    }
    // Floating point can overshoot by a unit in pathological cases.
    while (assigned > total) {
        auto it = std::max_element(counts.begin(), counts.end());
        --*it;
        --assigned;
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
    for (std::size_t k = 0; assigned < total; k = (k + 1) % n) {
        ++counts[order[k]];
        ++assigned;
    }
    return counts;
}

// Indices of each class, shuffled with the given seed.
std::vector<std::vector<std::size_t>> shuffled_class_pools(const LabeledDataset& ds, std::uint64_t seed) {
    std::vector<std::vector<std::size_t>> pools(static_cast<std::size_t>(ds.class_count));
    for (std::size_t i = 0; i < ds.size(); ++i) pools[static_cast<std::size_t>(ds.labels[i])].push_back(i);
    Rng rng(seed);
    for (auto& p : pools) std::shuffle(p.begin(), p.end(), rng);
    return pools;
}

// weights[client][class]; splits each class pool across clients.
std::vector<std::vector<std::size_t>> allocate_by_class(const std::vector<std::vector<std::size_t>>& pools,
                                                        const std::vector<std::vector<double>>& weights) {
    const std::size_t n_clients = weights.size();
    std::vector<std::vector<std::size_t>> out(n_clients);
    std::vector<double> col(n_clients);
    for (std::size_t c = 0; c < pools.size(); ++c) {
        for (std::size_t i = 0; i < n_clients; ++i) col[i] = weights[i][c];
        auto counts = apportion(pools[c].size(), col);
        std::size_t pos = 0;
        for (std::size_t i = 0; i < n_clients; ++i) {
            for (std::size_t k = 0; k < counts[i]; ++k) out[i].push_back(pools[c][pos++]);
        }
    }
    for (auto& v : out) std::sort(v.begin(), v.end());
    return out;
}

std::vector<double> sample_dirichlet(std::size_t k, double alpha, std::uint64_t seed) {
    Rng rng(seed);
    std::gamma_distribution<double> gamma(alpha, 1.0);
    std::vector<double> p(k);
    double s = 0.0;
    for (auto& v : p) {
        v = gamma(rng);
        s += v;
    }
    if (!(s > 0.0)) {
        // Every draw underflowed: the small-alpha limit puts all mass on one class.
        std::fill(p.begin(), p.end(), 0.0);
        p[std::uniform_int_distribution<std::size_t>(0, k - 1)(rng)] = 1.0;
        return p;
    }
    for (auto& v : p) v /= s;
    return p;
}

void check_pair(const LabeledDataset& train, const LabeledDataset& test) {
    train.validate();
    if (test.size() > 0) {
        test.validate();
        if (test.class_count != train.class_count)
            throw ParameterError("train/test class counts differ");
    }
}

}  // namespace

Partition dirichlet_partition(const LabeledDataset& train, const LabeledDataset& test, std::size_t n_clients,
                              double alpha_dir, std::uint64_t seed) {
    if (n_clients < 1) throw ParameterError("dirichlet_partition: n_clients must be >= 1");
    if (!(alpha_dir > 0.0)) throw ParameterError("dirichlet_partition: alpha_dir must be > 0");
    check_pair(train, test);
    if (train.size() < n_clients)
        throw ParameterError("dirichlet_partition: fewer training samples than clients");

    const auto k = static_cast<std::size_t>(train.class_count);
    std::vector<std::vector<double>> p(n_clients);
    for (std::size_t i = 0; i < n_clients; ++i) p[i] = sample_dirichlet(k, alpha_dir, derive_seed(seed, {i, 0}));

    auto train_pools = shuffled_class_pools(train, derive_seed(seed, {seed_tag::kPartition, 0}));
    std::vector<std::vector<std::size_t>> client_train;
    constexpr int kMaxRedraws = 1000;
    for (int attempt = 1;; ++attempt) {
        client_train = allocate_by_class(train_pools, p);
        bool redrawn = false;
        for (std::size_t i = 0; i < n_clients; ++i) {
            if (client_train[i].empty()) {
                p[i] = sample_dirichlet(k, alpha_dir, derive_seed(seed, {i, static_cast<std::uint64_t>(attempt)}));
                redrawn = true;
            }
        }
        if (!redrawn) break;
        if (attempt == kMaxRedraws)
            throw ParameterError("dirichlet_partition: could not give every client a training sample");
    }

    Partition part;
    part.scheme = PartitionScheme::Dirichlet;
    part.alpha_dir = alpha_dir;
    part.seed = seed;
    part.client_train = std::move(client_train);
    if (test.size() > 0) {
        auto test_pools = shuffled_class_pools(test, derive_seed(seed, {seed_tag::kPartition, 1}));
        part.client_test = allocate_by_class(test_pools, p);
    } else {
        part.client_test.assign(n_clients, {});
    }
    return part;
}

Partition pathological_partition(const LabeledDataset& train, const LabeledDataset& test,
                                 std::size_t n_clients, int shards_per_client, std::uint64_t seed) {
    if (n_clients < 1) throw ParameterError("pathological_partition: n_clients must be >= 1");
    if (shards_per_client < 1) throw ParameterError("pathological_partition: shards_per_client must be >= 1");
    check_pair(train, test);
    const std::size_t shard_count = n_clients * static_cast<std::size_t>(shards_per_client);
    if (train.size() % shard_count != 0 || train.size() < shard_count)
        throw ParameterError("pathological_partition: training size " + std::to_string(train.size()) +
                             " must be a positive multiple of n_clients*shards_per_client = " +
                             std::to_string(shard_count));
    const std::size_t shard_size = train.size() / shard_count;

    std::vector<std::size_t> sorted(train.size());
    std::iota(sorted.begin(), sorted.end(), std::size_t{0});
    std::stable_sort(sorted.begin(), sorted.end(),
                     [&](std::size_t a, std::size_t b) { return train.labels[a] < train.labels[b]; });

    std::vector<std::size_t> shard_ids(shard_count);
    std::iota(shard_ids.begin(), shard_ids.end(), std::size_t{0});
    Rng rng(derive_seed(seed, {seed_tag::kPartition, 0}));
    std::shuffle(shard_ids.begin(), shard_ids.end(), rng);

    Partition part;
    part.scheme = PartitionScheme::Pathological;
    part.shards_per_client = shards_per_client;
    part.seed = seed;
    part.client_train.resize(n_clients);
    for (std::size_t i = 0; i < n_clients; ++i) {
        auto& dst = part.client_train[i];
        for (int s = 0; s < shards_per_client; ++s) {
            std::size_t shard = shard_ids[i * static_cast<std::size_t>(shards_per_client) + static_cast<std::size_t>(s)];
            dst.insert(dst.end(), sorted.begin() + static_cast<std::ptrdiff_t>(shard * shard_size),
                       sorted.begin() + static_cast<std::ptrdiff_t>((shard + 1) * shard_size));
        }
        std::sort(dst.begin(), dst.end());
    }

    if (test.size() > 0) {
        std::vector<std::vector<double>> weights(n_clients);
        for (std::size_t i = 0; i < n_clients; ++i) {
            auto h = class_histogram(train, part.client_train[i]);
            weights[i].assign(h.begin(), h.end());
        }
        auto test_pools = shuffled_class_pools(test, derive_seed(seed, {seed_tag::kPartition, 1}));
        // Classes nobody trains on stay unallocated.
        for (std::size_t c = 0; c < test_pools.size(); ++c) {
            bool held = std::any_of(weights.begin(), weights.end(), [&](const auto& w) { return w[c] > 0.0; });
            if (!held) test_pools[c].clear();
        }
        part.client_test = allocate_by_class(test_pools, weights);
    } else {
        part.client_test.assign(n_clients, {});
    }
    return part;
}

void SyntheticConfig::validate() const {
    if (latent_clusters < 1) throw ParameterError("synthetic: latent_clusters must be >= 1");
    if (classes_per_cluster < 1) throw ParameterError("synthetic: classes_per_cluster must be >= 1");
    if (input_dim < 1) throw ParameterError("synthetic: input_dim must be >= 1");
    if (n_clients < 1) throw ParameterError("synthetic: n_clients must be >= 1");
    if (samples_per_client < static_cast<std::size_t>(classes_per_cluster))
        throw ParameterError("synthetic: samples_per_client must be >= classes_per_cluster");
    if (!(cluster_noise >= 0.0)) throw ParameterError("synthetic: cluster_noise must be >= 0");
}

Matrix synthetic_class_means(int class_count, std::size_t dim, std::uint64_t seed) {
    Matrix means(static_cast<std::size_t>(class_count), dim);
    Rng rng(derive_seed(seed, {seed_tag::kData, 0}));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& v : means.data) v = kBlobScale * normal(rng);
    return means;
}

namespace {

void draw_point(const Matrix& means, int label, double noise, Rng& rng, std::span<double> out) {
    std::normal_distribution<double> normal(0.0, 1.0);
    auto mu = means.row(static_cast<std::size_t>(label));
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = mu[j] + noise * normal(rng);
}

LabeledDataset empty_dataset(std::size_t n, std::size_t dim, int classes, std::string name) {
    LabeledDataset ds;
    ds.inputs = Matrix(n, dim);
    ds.labels.assign(n, 0);
    ds.class_count = classes;
    ds.name = std::move(name);
    return ds;
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticConfig& config) {
    config.validate();
    const int classes = config.class_count();
    const Matrix means = synthetic_class_means(classes, config.input_dim, config.seed);
    const std::size_t n = config.n_clients;
    const auto per_group = static_cast<std::size_t>(config.classes_per_cluster);

    SyntheticData out;
    out.data.train = empty_dataset(n * config.samples_per_client, config.input_dim, classes, "synthetic-train");
    out.data.test = empty_dataset(n * config.test_samples_per_client, config.input_dim, classes, "synthetic-test");
    out.true_cluster_of_client.resize(n);
    out.partition.scheme = PartitionScheme::Latent;
    out.partition.seed = config.seed;
    out.partition.client_train.resize(n);
    out.partition.client_test.resize(n);

    Rng train_rng(derive_seed(config.seed, {seed_tag::kData, 1}));
    Rng test_rng(derive_seed(config.seed, {seed_tag::kData, 2}));
    std::size_t train_pos = 0;
    std::size_t test_pos = 0;
    for (std::size_t c = 0; c < n; ++c) {
        const int group = static_cast<int>(c % static_cast<std::size_t>(config.latent_clusters));
        out.true_cluster_of_client[c] = group;
        const int first = group * config.classes_per_cluster;
        for (std::size_t s = 0; s < config.samples_per_client; ++s, ++train_pos) {
            int label = first + static_cast<int>(s % per_group);
            out.data.train.labels[train_pos] = label;
            draw_point(means, label, config.cluster_noise, train_rng, out.data.train.inputs.row(train_pos));
            out.partition.client_train[c].push_back(train_pos);
        }
        for (std::size_t s = 0; s < config.test_samples_per_client; ++s, ++test_pos) {
            int label = first + static_cast<int>(s % per_group);
            out.data.test.labels[test_pos] = label;
            draw_point(means, label, config.cluster_noise, test_rng, out.data.test.inputs.row(test_pos));
            out.partition.client_test[c].push_back(test_pos);
        }
    }
    return out;
}

DatasetSplits generate_synthetic_pool(const SyntheticConfig& config) {
    config.validate();
    const int classes = config.class_count();
    const Matrix means = synthetic_class_means(classes, config.input_dim, config.seed);
    DatasetSplits out;
    const std::size_t n_train = config.n_clients * config.samples_per_client;
    const std::size_t n_test = config.n_clients * config.test_samples_per_client;
    out.train = empty_dataset(n_train, config.input_dim, classes, "synthetic-pool-train");
    out.test = empty_dataset(n_test, config.input_dim, classes, "synthetic-pool-test");
    Rng train_rng(derive_seed(config.seed, {seed_tag::kData, 3}));
    Rng test_rng(derive_seed(config.seed, {seed_tag::kData, 4}));
    for (std::size_t i = 0; i < n_train; ++i) {
        int label = static_cast<int>(i % static_cast<std::size_t>(classes));
        out.train.labels[i] = label;
        draw_point(means, label, config.cluster_noise, train_rng, out.train.inputs.row(i));
    }
    for (std::size_t i = 0; i < n_test; ++i) {
        int label = static_cast<int>(i % static_cast<std::size_t>(classes));
        out.test.labels[i] = label;
        draw_point(means, label, config.cluster_noise, test_rng, out.test.inputs.row(i));
    }
    return out;
}

namespace {

std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path, 0, "cannot open file");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t offset, const std::string& path) {
    if (offset + 4 > buf.size()) throw IoError(path, offset, "truncated header");
    return (std::uint32_t{buf[offset]} << 24) | (std::uint32_t{buf[offset + 1]} << 16) |
           (std::uint32_t{buf[offset + 2]} << 8) | std::uint32_t{buf[offset + 3]};
}

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

}  // namespace

LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path) {
    const auto img = read_file(images_path);
    const auto lab = read_file(labels_path);

    if (auto m = read_be32(img, 0, images_path); m != kImagesMagic)
        throw IoError(images_path, 0, "bad magic " + std::to_string(m) + ", expected 0x00000803");
    if (auto m = read_be32(lab, 0, labels_path); m != kLabelsMagic)
        throw IoError(labels_path, 0, "bad magic " + std::to_string(m) + ", expected 0x00000801");

    const std::size_t n_images = read_be32(img, 4, images_path);
    const std::size_t rows = read_be32(img, 8, images_path);
    const std::size_t cols = read_be32(img, 12, images_path);
    const std::size_t n_labels = read_be32(lab, 4, labels_path);
    if (n_images != n_labels)
        throw IoError(labels_path, 4,
                      "count mismatch: " + std::to_string(n_labels) + " labels vs " + std::to_string(n_images) +
                          " images");
    if (n_images == 0) throw IoError(images_path, 4, "file holds no images");

    const std::size_t dim = rows * cols;
    constexpr std::size_t kImagesHeader = 16;
    constexpr std::size_t kLabelsHeader = 8;
    if (img.size() < kImagesHeader + n_images * dim)
        throw IoError(images_path, img.size(), "truncated pixel data");
    if (lab.size() < kLabelsHeader + n_labels) throw IoError(labels_path, lab.size(), "truncated label data");

    LabeledDataset ds;
    ds.name = std::filesystem::path(images_path).stem().string();
    ds.inputs = Matrix(n_images, dim);
    ds.labels.resize(n_images);
    for (std::size_t i = 0; i < n_images * dim; ++i) ds.inputs.data[i] = img[kImagesHeader + i] / 255.0;
    int max_label = 0;
    for (std::size_t i = 0; i < n_labels; ++i) {
        ds.labels[i] = lab[kLabelsHeader + i];
        max_label = std::max(max_label, ds.labels[i]);
    }
    ds.class_count = max_label + 1;
    return ds;
}

}  // namespace fedprism
