#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "fedprism/nn.hpp"

namespace fedprism {

// Protocol constants shared by client and server.
struct PrismParams {
    int clusters = 5;            // K
    double beta = 0.1;           // cluster coefficient
    double tau = 0.5;            // soft-assignment temperature
    double eta_cluster = 0.5;    // cluster moving-average step
    double eta_alpha = 0.1;      // mixing-weight step
    int warmup_rounds = 10;
    int recluster_every = 10;
    double temperature = 1.0;    // routing temperature T
    int kmeans_max_iters = 50;
    double initial_alpha = 0.5;
    std::optional<double> fixed_alpha;  // disables alpha adaptation
    SgdOptions sgd;

    void validate() const;
};

// Which components of the decomposition enter the backbone.
struct ComponentMask {
    bool global = true;
    bool cluster = true;
    bool private_part = true;

    bool all() const { return global && cluster && private_part; }
    bool any() const { return global || cluster || private_part; }
};

struct MixingCoefficients {
    double global;
    double cluster;
    double private_part;
};

// (alpha, beta, 1 - alpha - beta); disabled components are zeroed and the
// remainder rescaled to sum to one. An all-on mask returns the raw values.
MixingCoefficients mixing_coefficients(double alpha, double beta, const ComponentMask& mask = {});

// alpha*G + beta*sum_k w_k C_k + (1 - alpha - beta)*P.
ParamVector compose_backbone(double alpha, const ParamVector& global, double beta, std::span<const double> assign_w,
                             std::span<const ParamVector> clusters, const ParamVector& private_part);

ParamVector compose_backbone(const MixingCoefficients& coeffs, const ParamVector& global,
                             std::span<const double> assign_w, std::span<const ParamVector> clusters,
                             const ParamVector& private_part);

// Final-layer weight matrix (class_count x last_hidden, row-major), bias excluded.
std::vector<double> extract_prototype(const ParamVector& params);

struct ClientState {
    int client_id = 0;
    ParamVector private_part;  // P_i, never leaves the client
    ParamVector specialist;    // L_i, trained on local data only
    double alpha = 0.5;
    std::vector<double> assign_w;  // soft cluster weights, sum to 1
    Batch train;
    Batch test;

    std::size_t train_size() const { return train.size(); }
};

struct ClientRoundOutput {
    int client_id = 0;
    ParamVector backbone;  // trained composed model
    std::vector<double> prototype;
    std::size_t train_size = 0;
};

inline constexpr std::uint64_t kSpecialistSeedOffset = 0;
inline constexpr std::uint64_t kPrivateSeedOffset = 1;
inline constexpr std::uint64_t kBackboneSeedOffset = 2;

// Dual-path local training. Returns the message for the server and the
// client's updated state (new specialist and private component).
std::pair<ClientRoundOutput, ClientState> client_update(const ClientState& state, const ParamVector& global,
                                                        std::span<const ParamVector> clusters,
                                                        const PrismParams& params, std::uint64_t round_seed,
                                                        const ComponentMask& mask = {});

struct RouteResult {
    std::size_t prediction = 0;
    double lambda = 0.0;
    std::vector<double> fused_logits;
};

// lambda = max softmax(z_L / T); fused = lambda*z_L + (1 - lambda)*z_G.
RouteResult route_inference(std::span<const double> x, const ParamVector& specialist, const ParamVector& backbone,
                            double temperature);

// Batched routing. A fixed expert weight replaces lambda when given.
std::vector<std::size_t> route_predictions(const Matrix& inputs, const ParamVector& specialist,
                                           const ParamVector& backbone, double temperature,
                                           std::optional<double> expert_weight = std::nullopt);

struct ClientEval {
    std::optional<double> local_acc;  // routed inference on the client's own test split; empty split -> none
    double global_acc = 0.0;  // composed backbone on the shared IID test set
};

ParamVector client_backbone(const ClientState& state, const ParamVector& global,
                            std::span<const ParamVector> clusters, double beta, const ComponentMask& mask = {});

ClientEval client_evaluate(const ClientState& state, const ParamVector& global, std::span<const ParamVector> clusters,
                           double beta, double temperature, std::optional<double> expert_weight,
                           const Batch& global_test, const ComponentMask& mask = {});

}  // namespace fedprism
