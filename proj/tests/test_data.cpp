#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "fedprism/errors.hpp"
#include "fedprism/data.hpp"
#include "fedprism/prism_client.hpp"
#include "fedprism/prism_server.hpp"

using namespace fedprism;
namespace fs = std::filesystem;

namespace {

// Balanced pool: `per_class` points of every class, each class on its own axis.
LabeledDataset balanced(int classes, std::size_t per_class) {
    LabeledDataset d;
    d.class_count = classes;
    d.inputs = Matrix(static_cast<std::size_t>(classes) * per_class, static_cast<std::size_t>(classes));
    for (std::size_t i = 0; i < d.inputs.rows; ++i) {
        const int y = static_cast<int>(i % static_cast<std::size_t>(classes));
        d.inputs(i, static_cast<std::size_t>(y)) = 1.0;
        d.labels.push_back(y);
    }
    return d;
}

double max_class_share(const LabeledDataset& d, const std::vector<std::size_t>& idx) {
    auto h = class_histogram(d, idx);
    return static_cast<double>(*std::max_element(h.begin(), h.end())) / static_cast<double>(idx.size());
}

std::size_t distinct_labels(const LabeledDataset& d, const std::vector<std::size_t>& idx) {
    std::set<int> s;
    for (auto i : idx) s.insert(d.labels[i]);
    return s.size();
}

double mean_entropy(const LabeledDataset& d, const Partition& p) {
    double e = 0.0;
    for (const auto& c : p.client_train) e += label_entropy(d, c);
    return e / static_cast<double>(p.client_count());
}

void put_be32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<unsigned char>(v >> s));
}

fs::path write_bytes(const std::string& name, const std::vector<unsigned char>& bytes) {
    const fs::path p = fs::temp_directory_path() / ("fedprism_idx_" + name);
    std::ofstream out(p, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    return p;
}

std::vector<unsigned char> images_file(std::uint32_t n, std::uint32_t rows, std::uint32_t cols,
                                       std::vector<unsigned char> pixels) {
    std::vector<unsigned char> b;
    put_be32(b, 0x00000803);
    put_be32(b, n);
    put_be32(b, rows);
    put_be32(b, cols);
    b.insert(b.end(), pixels.begin(), pixels.end());
    return b;
}

std::vector<unsigned char> labels_file(std::uint32_t n, std::vector<unsigned char> labels) {
    std::vector<unsigned char> b;
    put_be32(b, 0x00000801);
    put_be32(b, n);
    b.insert(b.end(), labels.begin(), labels.end());
    return b;
}

}  // namespace

TEST_CASE("near-infinite concentration gives near-uniform clients") {
    auto train = balanced(10, 100);
    auto test = balanced(10, 20);
    auto p = dirichlet_partition(train, test, 10, 1e6, 3);
    REQUIRE(p.client_count() == 10);
    for (const auto& c : p.client_train) CHECK(max_class_share(train, c) < 0.15);
}

TEST_CASE("smaller concentration concentrates labels") {
    auto train = balanced(10, 200);
    auto test = balanced(10, 20);
    const double e01 = mean_entropy(train, dirichlet_partition(train, test, 100, 0.1, 5));
    const double e05 = mean_entropy(train, dirichlet_partition(train, test, 100, 0.5, 5));
    CHECK(e01 < e05);
}

TEST_CASE("dirichlet partition covers the pool disjointly") {
    auto train = balanced(5, 37);
    auto test = balanced(5, 11);
    auto p = dirichlet_partition(train, test, 7, 0.3, 9);
    std::vector<int> seen(train.size(), 0);
    for (const auto& c : p.client_train)
        for (auto i : c) ++seen[i];
    for (int s : seen) CHECK(s == 1);
    std::vector<int> seen_test(test.size(), 0);
    for (const auto& c : p.client_test)
        for (auto i : c) ++seen_test[i];
    for (int s : seen_test) CHECK(s <= 1);
}

TEST_CASE("every dirichlet client gets data") {
    auto train = balanced(4, 10);
    auto test = balanced(4, 2);
    auto p = dirichlet_partition(train, test, 30, 0.05, 1);
    for (const auto& c : p.client_train) CHECK_FALSE(c.empty());
}

TEST_CASE("test split follows the train proportions") {
    auto train = balanced(5, 400);
    auto test = balanced(5, 400);
    auto p = dirichlet_partition(train, test, 10, 0.3, 17);
    for (std::size_t i = 0; i < p.client_count(); ++i) {
        if (p.client_train[i].size() < 100) continue;
        auto ht = class_histogram(train, p.client_train[i]);
        auto hs = class_histogram(test, p.client_test[i]);
        double tv = 0.0;
        for (std::size_t k = 0; k < ht.size(); ++k)
            tv += std::fabs(static_cast<double>(ht[k]) / static_cast<double>(p.client_train[i].size()) -
                            static_cast<double>(hs[k]) / static_cast<double>(p.client_test[i].size()));
        CHECK(tv / 2.0 < 0.05);
    }
}

TEST_CASE("dirichlet rejects a non-positive concentration") {
    auto d = balanced(2, 4);
    CHECK_THROWS_AS(dirichlet_partition(d, d, 2, 0.0, 1), ParameterError);
    CHECK_THROWS_AS(dirichlet_partition(d, d, 2, -1.0, 1), ParameterError);
    CHECK_THROWS_AS(dirichlet_partition(d, d, 0, 1.0, 1), ParameterError);
}

TEST_CASE("pathological shards keep label support small") {
    auto train = balanced(10, 1000);
    auto test = balanced(10, 100);
    auto p = pathological_partition(train, test, 100, 2, 4);
    REQUIRE(p.client_count() == 100);
    for (const auto& c : p.client_train) {
        CHECK(c.size() == 100);
        CHECK(distinct_labels(train, c) <= 4);
    }
    // test labels only come from the client's own train labels
    for (std::size_t i = 0; i < p.client_count(); ++i) {
        auto ht = class_histogram(train, p.client_train[i]);
        for (auto j : p.client_test[i]) CHECK(ht[static_cast<std::size_t>(test.labels[j])] > 0);
    }
}

TEST_CASE("single pathological client holds everything") {
    auto train = balanced(4, 5);
    auto p = pathological_partition(train, train, 1, 4, 2);
    std::vector<std::size_t> got = p.client_train[0];
    std::sort(got.begin(), got.end());
    std::vector<std::size_t> all(train.size());
    std::iota(all.begin(), all.end(), 0);
    CHECK(got == all);
}

TEST_CASE("pathological partition is deterministic") {
    auto train = balanced(10, 60);
    auto test = balanced(10, 6);
    CHECK(pathological_partition(train, test, 20, 3, 8) == pathological_partition(train, test, 20, 3, 8));
    CHECK_FALSE(pathological_partition(train, test, 20, 3, 8) == pathological_partition(train, test, 20, 3, 9));
}

TEST_CASE("indivisible shard arithmetic is an error") {
    auto train = balanced(3, 7);  // 21 samples
    try {
        pathological_partition(train, train, 4, 2, 1);
        FAIL("expected ParameterError");
    } catch (const ParameterError& e) {
        CHECK(std::string(e.what()).find("multiple") != std::string::npos);
    }
}

TEST_CASE("synthetic groups own disjoint classes") {
    SyntheticConfig c;
    c.latent_clusters = 3;
    c.classes_per_cluster = 2;
    c.n_clients = 12;
    c.seed = 4;
    auto s = generate_synthetic(c);
    CHECK(s.data.train.class_count == 6);
    REQUIRE(s.true_cluster_of_client.size() == 12);
    for (std::size_t i = 0; i < 12; ++i) {
        const int g = s.true_cluster_of_client[i];
        CHECK(g == static_cast<int>(i % 3));
        CHECK(distinct_labels(s.data.train, s.partition.client_train[i]) == 2);
        for (auto j : s.partition.client_train[i]) {
            CHECK(s.data.train.labels[j] / 2 == g);
        }
    }
}

TEST_CASE("noise-free synthetic data is nearest-mean separable") {
    SyntheticConfig c;
    c.cluster_noise = 1e-9;
    c.seed = 12;
    auto s = generate_synthetic(c);
    Matrix means = synthetic_class_means(c.class_count(), c.input_dim, c.seed);
    const auto& test = s.data.test;
    std::size_t correct = 0;
    for (std::size_t r = 0; r < test.size(); ++r) {
        int best = 0;
        double best_d = 1e300;
        for (int k = 0; k < c.class_count(); ++k) {
            double d = 0.0;
            for (std::size_t j = 0; j < c.input_dim; ++j) {
                const double diff = test.inputs(r, j) - means(static_cast<std::size_t>(k), j);
                d += diff * diff;
            }
            if (d < best_d) {
                best_d = d;
                best = k;
            }
        }
        correct += best == test.labels[r];
    }
    CHECK(correct == test.size());
}

TEST_CASE("local prototypes are closer within a latent group") {
    SyntheticConfig c;
    c.cluster_noise = 0.5;
    c.input_dim = 16;
    c.n_clients = 12;
    c.seed = 21;
    auto s = generate_synthetic(c);
    auto spec = make_spec({16, 32, static_cast<std::size_t>(c.class_count())});
    ParamVector init = init_params(spec, 3);
    SgdOptions o;
    o.epochs = 10;
    std::vector<std::vector<double>> protos;
    for (std::size_t i = 0; i < c.n_clients; ++i)
        protos.push_back(extract_prototype(sgd_train(init, s.data.train.subset(s.partition.client_train[i]), o, i)));
    double within = 0.0, between = 0.0;
    int nw = 0, nb = 0;
    for (std::size_t i = 0; i < protos.size(); ++i)
        for (std::size_t j = i + 1; j < protos.size(); ++j) {
            const double sim = cosine_similarity(protos[i], protos[j]);
            if (s.true_cluster_of_client[i] == s.true_cluster_of_client[j]) {
                within += sim;
                ++nw;
            } else {
                between += sim;
                ++nb;
            }
        }
    CHECK(within / nw > between / nb);
}

TEST_CASE("synthetic generation is seeded") {
    SyntheticConfig c;
    c.seed = 5;
    auto a = generate_synthetic(c);
    auto b = generate_synthetic(c);
    CHECK(a.data.train.inputs.data == b.data.train.inputs.data);
    c.seed = 6;
    CHECK_FALSE(generate_synthetic(c).data.train.inputs.data == a.data.train.inputs.data);
}

TEST_CASE("synthetic config validation") {
    SyntheticConfig c;
    c.latent_clusters = 0;
    CHECK_THROWS(c.validate());
    c = SyntheticConfig{};
    c.cluster_noise = -1.0;
    CHECK_THROWS(c.validate());
}

TEST_CASE("IDX fixture with two 1x1 images") {
    auto img = write_bytes("img", images_file(2, 1, 1, {51, 255}));
    auto lab = write_bytes("lab", labels_file(2, {3, 1}));
    auto d = load_idx(img.string(), lab.string());
    REQUIRE(d.size() == 2);
    CHECK(d.dim() == 1);
    CHECK(d.inputs(0, 0) == 51.0 / 255.0);
    CHECK(d.inputs(1, 0) == 1.0);
    CHECK(d.labels == std::vector<int>{3, 1});
    CHECK(d.class_count == 4);
}

TEST_CASE("IDX multi-pixel rows are row-major") {
    auto img = write_bytes("img2", images_file(1, 2, 2, {0, 1, 2, 3}));
    auto lab = write_bytes("lab2", labels_file(1, {0}));
    auto d = load_idx(img.string(), lab.string());
    CHECK(d.dim() == 4);
    for (int j = 0; j < 4; ++j) CHECK(d.inputs(0, static_cast<std::size_t>(j)) == j / 255.0);
}

TEST_CASE("IDX count mismatch") {
    auto img = write_bytes("img3", images_file(2, 1, 1, {1, 2}));
    auto lab = write_bytes("lab3", labels_file(3, {0, 1, 2}));
    try {
        load_idx(img.string(), lab.string());
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(e.file() == lab.string());
        CHECK(std::string(e.what()).find("count") != std::string::npos);
    }
}

TEST_CASE("IDX empty and truncated files") {
    auto empty = write_bytes("empty", {});
    auto lab = write_bytes("lab4", labels_file(1, {0}));
    try {
        load_idx(empty.string(), lab.string());
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(e.file() == empty.string());
    }
    auto shortimg = write_bytes("short", images_file(2, 2, 2, {1, 2, 3}));
    auto lab2 = write_bytes("lab5", labels_file(2, {0, 1}));
    CHECK_THROWS_AS(load_idx(shortimg.string(), lab2.string()), IoError);
}

TEST_CASE("IDX bad magic names the file and offset") {
    auto img = write_bytes("img6", labels_file(1, {0}));  // label magic in the image slot
    auto lab = write_bytes("lab6", labels_file(1, {0}));
    try {
        load_idx(img.string(), lab.string());
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(e.file() == img.string());
        CHECK(e.offset() == 0);
    }
    CHECK_THROWS_AS(load_idx("/nonexistent/file", lab.string()), IoError);
}
