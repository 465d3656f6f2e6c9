#include <doctest.h>

#include "checks.hpp"
#include "fedprism/baselines.hpp"
#include "fedprism/errors.hpp"
#include "fedprism/prism_client.hpp"

using namespace fedprism;

namespace {

// Class `label` sits around +shift on axis `label`.
Batch blob(int label, std::size_t n, int classes, double offset) {
    Batch b;
    b.inputs = Matrix(n, static_cast<std::size_t>(classes));
    for (std::size_t r = 0; r < n; ++r) {
        b.inputs(r, static_cast<std::size_t>(label)) = 2.0 + offset + 0.01 * static_cast<double>(r);
        b.labels.push_back(label);
    }
    return b;
}

ClientData client(int id, Batch train, Batch test) { return ClientData{id, std::move(train), std::move(test)}; }

}  // namespace

TEST_CASE("local training on disjoint single-class clients") {
    auto spec = make_spec({2, 4, 2});
    std::vector<ClientData> clients{client(0, blob(0, 10, 2, 0.0), blob(0, 5, 2, 0.3)),
                                    client(1, blob(1, 10, 2, 0.0), blob(1, 5, 2, 0.3))};
    std::vector<ParamVector> models{init_params(spec, 1), init_params(spec, 1)};
    SgdOptions o;
    o.epochs = 10;
    std::vector<std::size_t> all{0, 1};
    local_round(models, clients, all, o, 3);
    CHECK(evaluate(models[0], clients[0].test) == 1.0);
    CHECK(evaluate(models[1], clients[1].test) == 1.0);
    // same init, different data: the two models have moved apart
    CHECK(models[0] != models[1]);
}

TEST_CASE("local round with zero learning rate changes nothing") {
    auto spec = make_spec({2, 3, 2});
    std::vector<ClientData> clients{client(0, blob(0, 4, 2, 0), {}), client(1, blob(1, 4, 2, 0), {})};
    std::vector<ParamVector> models{init_params(spec, 1), init_params(spec, 2)};
    const auto before = models;
    SgdOptions o;
    o.epochs = 1;
    o.lr = 0.0;
    std::vector<std::size_t> all{0, 1};
    local_round(models, clients, all, o, 3);
    CHECK(models == before);
}

TEST_CASE("local baseline matches the FedPrism specialist stream") {
    auto spec = make_spec({2, 3, 2});
    std::vector<ClientData> clients{client(4, blob(0, 6, 2, 0), {})};
    std::vector<ParamVector> models{init_params(spec, 1)};
    SgdOptions o;
    o.epochs = 2;
    std::vector<std::size_t> only{0};
    local_round(models, clients, only, o, 99);
    CHECK(models[0] == sgd_train(init_params(spec, 1), clients[0].train, o, client_round_seed(99, 4) + kSpecialistSeedOffset));
}

TEST_CASE("FedAvg with one client adopts its model") {
    auto spec = make_spec({2, 3, 2});
    std::vector<ClientData> clients{client(0, blob(0, 6, 2, 0), {}), client(1, blob(1, 6, 2, 0), {})};
    SgdOptions o;
    o.epochs = 1;
    const auto g = init_params(spec, 5);
    std::vector<std::size_t> one{1};
    CHECK(fedavg_round(g, clients, one, o, 8) == sgd_train(g, clients[1].train, o, client_round_seed(8, 1)));
}

TEST_CASE("FedAvg of identical clients equals single-client training") {
    auto spec = make_spec({2, 3, 2});
    // full-batch steps make the shuffle order irrelevant up to rounding
    const Batch b = blob(0, 6, 2, 0);
    SgdOptions o;
    o.epochs = 3;
    o.batch_size = 64;
    std::vector<ClientData> clients{client(0, b, {}), client(1, b, {})};
    const auto g = init_params(spec, 5);
    std::vector<std::size_t> both{0, 1};
    const auto avg = fedavg_round(g, clients, both, o, 8);
    const auto solo = sgd_train(g, b, o, 1234);
    for (std::size_t i = 0; i < avg.size(); ++i) CHECK(avg[i] == doctest::Approx(solo[i]).epsilon(1e-12));
}

TEST_CASE("FedAvg with zero learning rate returns the global model") {
    auto spec = make_spec({1, 1});
    std::vector<ClientData> clients{client(0, blob(0, 3, 1, 0), {}), client(1, blob(0, 3, 1, 0), {})};
    SgdOptions o;
    o.epochs = 1;
    o.lr = 0.0;
    std::vector<std::size_t> both{0, 1};
    ParamVector g(spec, {3.0, 0.0});
    CHECK(fedavg_round(g, clients, both, o, 1)[0] == 3.0);
    std::vector<std::size_t> none;
    CHECK_THROWS_AS(fedavg_round(g, clients, none, o, 1), ProtocolError);
}

TEST_CASE("IFCA picks the specialized model") {
    auto spec = make_spec({2, 2});
    // model 0 favours class 0, model 1 favours class 1
    ParamVector m0(spec, {4, 0, 0, 4, 0, 0});
    ParamVector m1(spec, {4, 0, 0, 4, 0, 0});
    m0[4] = 5.0;
    m1[5] = 5.0;
    std::vector<ParamVector> models{m0, m1};
    CHECK(ifca_select(models, blob(0, 4, 2, -1.5)) == 0);
    CHECK(ifca_select(models, blob(1, 4, 2, -1.5)) == 1);
}

TEST_CASE("IFCA ties go to the first model") {
    auto spec = make_spec({2, 3, 2});
    const auto m = init_params(spec, 3);
    std::vector<ParamVector> models{m, m, m};
    CHECK(ifca_select(models, blob(1, 5, 2, 0)) == 0);
}

TEST_CASE("IFCA leaves unselected models untouched") {
    auto spec = make_spec({2, 2});
    ParamVector m0(spec, {4, 0, 0, 4, 5, 0});
    ParamVector m1(spec, {4, 0, 0, 4, 0, 5});
    ParamVector m2(spec, {-9, 0, 0, -9, 0, 0});
    std::vector<ParamVector> models{m0, m1, m2};
    std::vector<ClientData> clients{client(0, blob(0, 5, 2, -1.5), {}), client(1, blob(0, 5, 2, -1.5), {})};
    SgdOptions o;
    o.epochs = 1;
    std::vector<std::size_t> both{0, 1};
    auto r = ifca_round(models, clients, both, o, 4);
    CHECK(r.selection == std::vector<std::size_t>{0, 0});
    CHECK(r.models[1] == m1);
    CHECK(r.models[2] == m2);
    CHECK_FALSE(r.models[0] == m0);
    std::vector<ParamVector> single{m0};
    CHECK_THROWS_AS(ifca_round(single, clients, both, o, 4), ParameterError);
}

TEST_CASE("baseline invariants") {
    for (auto fn : {checks::baselines_deterministic, checks::fedavg_centralized, checks::ifca_affine_invariance}) {
        auto r = fn(30, 31);
        INFO(r.name << ": " << r.first_failure);
        CHECK(r.ok());
    }
}
