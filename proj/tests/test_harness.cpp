#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <json.hpp>

#include "checks.hpp"
#include "fedprism/errors.hpp"
#include "fedprism/harness.hpp"

using namespace fedprism;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small(Algorithm a = Algorithm::FedPrism) {
    ExperimentConfig c;
    c.name = "small";
    c.algorithm = a;
    c.n_clients = 12;
    c.rounds = 6;
    c.client_fraction = 0.5;
    c.hidden = {16};
    c.dataset.synthetic.input_dim = 8;
    c.dataset.synthetic.samples_per_client = 40;
    c.dataset.synthetic.test_samples_per_client = 20;
    c.prism.clusters = 3;
    c.prism.warmup_rounds = 2;
    c.prism.recluster_every = 2;
    c.prism.sgd.epochs = 2;
    return c;
}

std::string config_error_key(const ExperimentConfig& c) {
    try {
        c.validate();
    } catch (const ConfigError& e) {
        return e.key();
    }
    return "";
}

}  // namespace

TEST_CASE("config validation names the field") {
    auto c = small();
    c.rounds = 0;
    CHECK(config_error_key(c) == "rounds");
    c = small();
    c.client_fraction = 0.0;
    CHECK(config_error_key(c) == "client_fraction");
    c = small();
    c.ablation.mask = {false, false, false};
    CHECK(config_error_key(c) == "ablation");
    c = small(Algorithm::Ifca);
    c.prism.clusters = 1;
    CHECK(config_error_key(c) == "algorithm.K");
    c = small();
    c.ablation.inference_weight = 1.5;
    CHECK(config_error_key(c) == "ablation.inference_weight");
    c = small();
    c.partition.kind = PartitionKind::Dirichlet;
    c.partition.alpha_dir = 0.0;
    CHECK(config_error_key(c) == "partition.alpha_dir");
    CHECK(config_error_key(small()) == "");
    CHECK_THROWS_AS(parse_algorithm("sgd"), ConfigError);
    CHECK(parse_algorithm("ifca") == Algorithm::Ifca);
}

TEST_CASE("one-round smoke run") {
    for (auto a : {Algorithm::FedPrism, Algorithm::FedAvg, Algorithm::Ifca, Algorithm::Local}) {
        auto c = small(a);
        c.rounds = 1;
        auto r = run_experiment(c);
        REQUIRE(r.reports.size() == 1);
        CHECK(r.reports[0].round == 1);
        CHECK(r.summary.final_global_acc >= 0.0);
        CHECK(r.summary.final_global_acc <= 1.0);
        CHECK(r.summary.per_client_final_local_acc.size() == c.n_clients);
    }
}

TEST_CASE("prepared data matches the config") {
    auto c = small();
    auto d = prepare_data(c);
    CHECK(d.clients.size() == c.n_clients);
    CHECK(d.true_clusters.size() == c.n_clients);
    CHECK(d.spec->layer_dims() == std::vector<std::size_t>{8, 16, 6});
    CHECK(d.global_test.size() == d.data.test.size());
    c.partition.kind = PartitionKind::Pathological;
    auto p = prepare_data(c);
    CHECK(p.true_clusters.empty());
    CHECK(p.partition.scheme == PartitionScheme::Pathological);
}

TEST_CASE("near-IID FedAvg: global and local agree") {
    auto c = small(Algorithm::FedAvg);
    c.partition.kind = PartitionKind::Dirichlet;
    c.partition.alpha_dir = 1e6;
    c.dataset.synthetic.cluster_noise = 3.0;
    auto r = run_experiment(c);
    CHECK(std::fabs(r.summary.final_global_acc - r.summary.final_local_acc) < 0.03);
}

TEST_CASE("pure private FedPrism stays local") {
    auto c = small();
    c.rounds = 8;
    c.ablation.mask = {false, false, true};
    auto r = run_experiment(c);
    const double prior = 1.0 / 6.0;
    CHECK(r.summary.final_local_acc > 0.9);
    CHECK(r.summary.final_global_acc < r.summary.final_local_acc - 0.4);
    CHECK(r.summary.final_global_acc < 3.0 * prior);
}

TEST_CASE("alpha sweep") {
    auto c = small();
    c.rounds = 3;
    std::vector<ExperimentResult> runs;
    auto rows = alpha_sensitivity_sweep(c, {0.1, 0.9, 0.1}, &runs);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].value == 0.1);
    CHECK(rows[1].value == 0.9);
    CHECK(runs[1].config.name == "small_alpha0.9");
    for (const auto& r : runs)
        for (const auto& rep : r.reports) CHECK(rep.alpha_min == rep.alpha_max);

    auto plain = c;
    plain.prism.fixed_alpha = 0.9;
    auto single = alpha_sensitivity_sweep(c, {0.9});
    auto direct = run_experiment(plain);
    CHECK(single[0].summary.final_global_acc == direct.summary.final_global_acc);
    CHECK(single[0].summary.final_local_acc == direct.summary.final_local_acc);
    CHECK(single[0].summary.per_client_final_local_acc == direct.summary.per_client_final_local_acc);

    CHECK_THROWS_AS(alpha_sensitivity_sweep(c, {0.95}), ConstraintError);
}

TEST_CASE("inference-weight sweep boundaries") {
    auto c = small();
    c.rounds = 3;
    auto rows = inference_weight_sweep(c, {0.0, 1.0});
    REQUIRE(rows.size() == 2);
    // weight 0 is the backbone alone, which is also what global accuracy measures
    CHECK(rows[0].summary.final_local_acc != rows[1].summary.final_local_acc);
    c.algorithm = Algorithm::FedAvg;
    CHECK_THROWS_AS(inference_weight_sweep(c, {0.5}), ConfigError);
}

TEST_CASE("compare lists each algorithm once with sample std") {
    std::vector<ExperimentConfig> cfgs{small(Algorithm::FedAvg), small(Algorithm::Local)};
    for (auto& c : cfgs) c.rounds = 2;
    std::vector<ExperimentResult> runs;
    auto rows = compare_algorithms(cfgs, {1, 2, 3}, &runs);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].algorithm == "fedavg");
    CHECK(rows[1].algorithm == "local");
    CHECK(runs.size() == 6);
    for (std::size_t a = 0; a < 2; ++a) {
        std::vector<double> g;
        for (std::size_t s = 0; s < 3; ++s) g.push_back(runs[a * 3 + s].summary.final_global_acc);
        const double m = (g[0] + g[1] + g[2]) / 3.0;
        const double sd = std::sqrt(((g[0] - m) * (g[0] - m) + (g[1] - m) * (g[1] - m) + (g[2] - m) * (g[2] - m)) / 2.0);
        CHECK(rows[a].global_mean == doctest::Approx(m).epsilon(1e-12));
        CHECK(rows[a].global_std == doctest::Approx(sd).epsilon(1e-12));
    }
    auto csv = comparison_csv(rows);
    CHECK(csv.rfind("algorithm,seeds,glob_mean,glob_std,loc_mean,loc_std\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);

    auto bad = cfgs;
    bad[1].rounds = 5;
    CHECK_THROWS_AS(compare_algorithms(bad, {1}), ConfigError);
    auto dup = std::vector<ExperimentConfig>{cfgs[0], cfgs[0]};
    CHECK_THROWS_AS(compare_algorithms(dup, {1}), ConfigError);
}

TEST_CASE("sample standard deviation") {
    CHECK(sample_std({1.0}) == 0.0);
    CHECK(sample_std({2.0, 4.0}) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("adjusted Rand index") {
    CHECK(adjusted_rand_index({0, 0, 1, 1}, {0, 0, 1, 1}) == doctest::Approx(1.0));
    CHECK(adjusted_rand_index({0, 0, 1, 1, 2}, {2, 2, 0, 0, 1}) == doctest::Approx(1.0));
    CHECK(adjusted_rand_index({0, 0, 1, 1}, {0, 1, 0, 1}) == doctest::Approx(-0.5));
}

TEST_CASE("assignment entropy") {
    CHECK(mean_assignment_entropy({{0.5, 0.5}, {1.0, 0.0}}) == doctest::Approx(std::log(2.0) / 2.0));
}

TEST_CASE("report files") {
    auto c = small(Algorithm::Ifca);
    c.rounds = 3;
    c.eval_every = 2;
    auto r = run_experiment(c);
    // evaluated at round 2 and at the final round
    REQUIRE(r.reports.size() == 2);
    CHECK(r.reports[0].round == 2);
    CHECK(r.reports[1].round == 3);
    CHECK(r.summary.final_clusters.size() == c.n_clients);

    auto csv = reports_csv(r.reports);
    CHECK(csv.rfind(std::string(kCsvHeader) + "\n", 0) == 0);
    CHECK(csv.find("wall") == std::string::npos);

    auto j = nlohmann::json::parse(summary_json(r));
    CHECK(j.contains("timing"));
    CHECK(j["config"]["algorithm"] == "ifca");
    j.erase("timing");
    CHECK(j.dump().find("wall") == std::string::npos);

    const fs::path dir = fs::temp_directory_path() / "fedprism_report_test";
    fs::remove_all(dir);
    auto files = write_reports(r, dir);
    CHECK(files.csv == dir / ("small_" + std::to_string(c.seed) + ".csv"));
    CHECK(fs::exists(files.csv));
    CHECK(fs::exists(files.json));
    fs::remove_all(dir);
}

TEST_CASE("harness invariants") {
    for (auto fn : {checks::end_to_end_determinism, checks::seed_isolation, checks::cadence_invariance,
                    checks::ablation_consistency}) {
        auto r = fn(20, 41);
        INFO(r.name << ": " << r.first_failure);
        CHECK(r.ok());
    }
}
