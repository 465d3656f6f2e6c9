#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fedprism/nn.hpp"

namespace fedprism {

enum class BaselineKind { Local, FedAvg, Ifca };

struct ClientData {
    int client_id = 0;
    Batch train;
    Batch test;
};

// Seed for a client's local training in a round; shared by every algorithm so
// the same client sees the same shuffle stream.
std::uint64_t client_round_seed(std::uint64_t round_seed, int client_id);

// Local-only: each sampled client trains its own model; nothing is shared.
void local_round(std::vector<ParamVector>& models, const std::vector<ClientData>& clients,
                 std::span<const std::size_t> sampled, const SgdOptions& sgd, std::uint64_t round_seed);

// Each sampled client trains a copy of global; returns sum_k (n_k / N_t) w_k.
ParamVector fedavg_round(const ParamVector& global, const std::vector<ClientData>& clients,
                         std::span<const std::size_t> sampled, const SgdOptions& sgd, std::uint64_t round_seed);

// argmin of mean training loss over the K models; lowest index on ties.
std::size_t ifca_select(std::span<const ParamVector> models, const Batch& data);

struct IfcaRoundResult {
    std::vector<ParamVector> models;
    std::vector<std::size_t> selection;  // per sampled client, in sampled order
};

// Each sampled client trains its selected model; the server averages updates
// per model index weighted by n_i. Models nobody selects stay unchanged.
IfcaRoundResult ifca_round(std::span<const ParamVector> models, const std::vector<ClientData>& clients,
                           std::span<const std::size_t> sampled, const SgdOptions& sgd, std::uint64_t round_seed);

}  // namespace fedprism
