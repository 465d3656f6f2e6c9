#include "fedprism/baselines.hpp"

#include "fedprism/errors.hpp"
#include "fedprism/prism_client.hpp"
#include "fedprism/rng.hpp"

namespace fedprism {

std::uint64_t client_round_seed(std::uint64_t round_seed, int client_id) {
    return derive_seed(round_seed, {seed_tag::kClient, static_cast<std::uint64_t>(client_id)});
}

void local_round(std::vector<ParamVector>& models, const std::vector<ClientData>& clients,
                 std::span<const std::size_t> sampled, const SgdOptions& sgd, std::uint64_t round_seed) {
    if (models.size() != clients.size()) throw DimensionError("local models vs clients", clients.size(), models.size());
    for (auto i : sampled) {
        const auto& c = clients.at(i);
        models[i] = sgd_train(models[i], c.train, sgd, client_round_seed(round_seed, c.client_id) + kSpecialistSeedOffset);
    }
}

ParamVector fedavg_round(const ParamVector& global, const std::vector<ClientData>& clients,
                         std::span<const std::size_t> sampled, const SgdOptions& sgd, std::uint64_t round_seed) {
    if (sampled.empty()) throw ProtocolError("fedavg_round: empty round");
    std::size_t total = 0;
    for (auto i : sampled) total += clients.at(i).train.size();
    if (total == 0) throw ProtocolError("fedavg_round: round holds zero samples");
    ParamVector next(global.spec_ptr());
    for (auto i : sampled) {
        const auto& c = clients[i];
        ParamVector w = sgd_train(global, c.train, sgd, client_round_seed(round_seed, c.client_id));
        next.axpy(static_cast<double>(c.train.size()) / static_cast<double>(total), w);
    }
    return next;
}

std::size_t ifca_select(std::span<const ParamVector> models, const Batch& data) {
    if (models.empty()) throw ParameterError("ifca_select: no models");
    std::size_t best = 0;
    double best_loss = cross_entropy_loss(models[0], data);
    for (std::size_t k = 1; k < models.size(); ++k) {
        double l = cross_entropy_loss(models[k], data);
        if (l < best_loss) {
            best_loss = l;
            best = k;
        }
    }
    return best;
}

IfcaRoundResult ifca_round(std::span<const ParamVector> models, const std::vector<ClientData>& clients,
                           std::span<const std::size_t> sampled, const SgdOptions& sgd, std::uint64_t round_seed) {
    if (models.size() < 2) throw ParameterError("IFCA needs K >= 2");
    if (sampled.empty()) throw ProtocolError("ifca_round: empty round");
    const std::size_t k = models.size();
    IfcaRoundResult res;
    res.selection.reserve(sampled.size());
    std::vector<std::vector<std::pair<std::size_t, ParamVector>>> updates(k);
    for (auto i : sampled) {
        const auto& c = clients.at(i);
        std::size_t sel = ifca_select(models, c.train);
        res.selection.push_back(sel);
        updates[sel].emplace_back(c.train.size(), sgd_train(models[sel], c.train, sgd, client_round_seed(round_seed, c.client_id)));
    }
    res.models.assign(models.begin(), models.end());
    for (std::size_t m = 0; m < k; ++m) {
        if (updates[m].empty()) continue;
        std::size_t total = 0;
        for (const auto& [n, w] : updates[m]) total += n;
        ParamVector avg(models[m].spec_ptr());
        for (const auto& [n, w] : updates[m]) avg.axpy(static_cast<double>(n) / static_cast<double>(total), w);
        res.models[m] = std::move(avg);
    }
    return res;
}

}  // namespace fedprism
