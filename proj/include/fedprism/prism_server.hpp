#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fedprism/nn.hpp"
#include "fedprism/prism_client.hpp"

namespace fedprism {

struct ServerState {
    ParamVector global;
    std::vector<ParamVector> clusters;
    std::vector<std::vector<double>> centroids;  // empty until the first re-clustering
    int round = 0;                               // completed rounds
    PrismParams params;
};

inline constexpr double kClusterPerturbation = 0.01;
inline constexpr double kEmptyClusterEps = 1e-12;

// G0 from the seeded initializer; every C_k is G0 plus N(0, 0.01^2) noise.
ServerState init_server(SpecPtr spec, const PrismParams& params, std::uint64_t seed);

// Client state at round 0: P_i starts from G0, L_i from its own seeded init,
// uniform assignment and the initial alpha.
ClientState init_client(int client_id, const ServerState& server, Batch train, Batch test, std::uint64_t seed);

// Copies of `base` with seeded Gaussian noise; shared with IFCA initialization.
std::vector<ParamVector> perturbed_copies(const ParamVector& base, int count, double sigma, std::uint64_t seed);

// sum_i (n_i / N_t) W'_i
ParamVector aggregate_global(std::span<const ClientRoundOutput> outputs);

// Soft moving average: C_k += eta (Wbar_k - C_k) where Wbar_k is the
// w_ik-weighted mean of the round's backbones; clusters with Z_k <= eps stay put.
std::vector<ParamVector> update_clusters(std::span<const ParamVector> clusters,
                                         std::span<const ClientRoundOutput> outputs,
                                         std::span<const std::vector<double>> assign_w, double eta_cluster);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

struct KMeansResult {
    std::vector<std::vector<double>> centroids;  // unit norm
    std::vector<std::size_t> assignment;
    std::vector<double> objective;  // mean max-cosine after each assignment step
    int iterations = 0;
    bool degenerate = false;  // fewer distinct prototypes than K
};

// Spherical k-means: k-means++ seeding on cosine distance unless `initial`
// centroids are supplied, max-cosine assignment, normalized-mean update,
// empty clusters reseeded to the prototype least similar to every centroid.
KMeansResult kmeans_cosine(std::span<const std::vector<double>> prototypes, int k, std::uint64_t seed,
                           int max_iters = 50, std::span<const std::vector<double>> initial = {});

// softmax_k(cos(h, mu_k) / tau)
std::vector<double> soft_assign(std::span<const double> prototype, std::span<const std::vector<double>> centroids,
                                double tau);

// Lowest index on ties.
std::size_t dominant_cluster(std::span<const double> assign_w);

// alpha + eta * (|W' - C| - |W' - G|), clipped to [0, 1] then to [0, 1 - beta].
double update_alpha(double alpha, const ParamVector& backbone, const ParamVector& cluster_model,
                    const ParamVector& global, double eta_alpha, double beta);

std::vector<std::size_t> sample_clients(std::size_t n_clients, double fraction, std::uint64_t seed);

struct PrismRoundResult {
    ServerState server;
    std::vector<ClientState> clients;  // updated sampled clients, ascending client_id
    std::vector<ClientRoundOutput> outputs;
    bool reclustered = false;
};

// One synchronous round over the sampled clients.
PrismRoundResult server_round(const ServerState& state, std::span<const ClientState> sampled,
                              std::uint64_t round_seed, const ComponentMask& mask = {});

// server_round over the population `clients` (indexed by position): sampled
// entries are replaced by their updated state, all others are left untouched.
// Returns whether the round re-clustered.
bool apply_round(ServerState& server, std::vector<ClientState>& clients, std::span<const std::size_t> sampled,
                 std::uint64_t round_seed, const ComponentMask& mask = {});

}  // namespace fedprism
