#include "fedprism/prism_server.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "fedprism/errors.hpp"
#include "fedprism/rng.hpp"

namespace fedprism {

std::vector<ParamVector> perturbed_copies(const ParamVector& base, int count, double sigma, std::uint64_t seed) {
    std::vector<ParamVector> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) {
        Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(k)}));
        std::normal_distribution<double> noise(0.0, sigma);
        ParamVector c = base;
        for (auto& v : c.values()) v += noise(rng);
        out.push_back(std::move(c));
    }
    return out;
}

ServerState init_server(SpecPtr spec, const PrismParams& params, std::uint64_t seed) {
    params.validate();
    ServerState s;
    s.params = params;
    s.global = init_params(spec, derive_seed(seed, {seed_tag::kInit, 0}));
    s.clusters = perturbed_copies(s.global, params.clusters, kClusterPerturbation, derive_seed(seed, {seed_tag::kInit, 1}));
    return s;
}

ClientState init_client(int client_id, const ServerState& server, Batch train, Batch test, std::uint64_t seed) {
    if (train.empty()) throw ParameterError("client " + std::to_string(client_id) + " has no training data");
    ClientState c;
    c.client_id = client_id;
    c.private_part = server.global;
    c.specialist = init_params(server.global.spec_ptr(),
                               derive_seed(seed, {seed_tag::kInit, 2, static_cast<std::uint64_t>(client_id)}));
    c.alpha = server.params.fixed_alpha.value_or(server.params.initial_alpha);
    const auto k = static_cast<std::size_t>(server.params.clusters);
    c.assign_w.assign(k, 1.0 / static_cast<double>(k));
    c.train = std::move(train);
    c.test = std::move(test);
    return c;
}

ParamVector aggregate_global(std::span<const ClientRoundOutput> outputs) {
    if (outputs.empty()) throw ProtocolError("aggregate_global: empty round");
    std::size_t total = 0;
    for (const auto& o : outputs) total += o.train_size;
    if (total == 0) throw ProtocolError("aggregate_global: round holds zero samples");
    // Shifted mean: base + sum_i (n_i/N)(W_i - base), exact for identical inputs.
    const ParamVector& base = outputs.front().backbone;
    ParamVector g = base;
    auto gv = g.values();
    auto bv = base.values();
    std::vector<double> shift(gv.size(), 0.0);
    for (const auto& o : outputs) {
        if (!o.backbone.same_shape(base)) throw DimensionError("aggregate_global", base.size(), o.backbone.size());
        const double w = static_cast<double>(o.train_size) / static_cast<double>(total);
        auto ov = o.backbone.values();
        for (std::size_t j = 0; j < shift.size(); ++j) shift[j] += w * (ov[j] - bv[j]);
    }
    for (std::size_t j = 0; j < shift.size(); ++j) gv[j] += shift[j];
    return g;
}

std::vector<ParamVector> update_clusters(std::span<const ParamVector> clusters,
                                         std::span<const ClientRoundOutput> outputs,
                                         std::span<const std::vector<double>> assign_w, double eta_cluster) {
    if (assign_w.size() != outputs.size())
        throw DimensionError("assignment rows vs outputs", outputs.size(), assign_w.size());
    if (!(eta_cluster > 0.0 && eta_cluster <= 1.0)) throw ParameterError("eta_cluster must lie in (0, 1]");
    std::vector<ParamVector> next(clusters.begin(), clusters.end());
    for (std::size_t k = 0; k < clusters.size(); ++k) {
        double z = 0.0;
        for (const auto& row : assign_w) {
            if (row.size() != clusters.size()) throw DimensionError("assignment row length", clusters.size(), row.size());
            z += row[k];
        }
        if (z <= kEmptyClusterEps) continue;
        // Wbar - C accumulated directly, so Wbar == C leaves C untouched.
        auto c = next[k].values();
        std::vector<double> gap(c.size(), 0.0);
        for (std::size_t i = 0; i < outputs.size(); ++i) {
            const double w = assign_w[i][k] / z;
            if (w == 0.0) continue;
            auto ov = outputs[i].backbone.values();
            if (ov.size() != c.size()) throw DimensionError("update_clusters backbone", c.size(), ov.size());
            for (std::size_t j = 0; j < c.size(); ++j) gap[j] += w * (ov[j] - c[j]);
        }
        for (std::size_t j = 0; j < c.size(); ++j) c[j] += eta_cluster * gap[j];
    }
    return next;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionError("cosine_similarity", a.size(), b.size());
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

namespace {

std::vector<double> normalized(std::span<const double> v) {
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    std::vector<double> out(v.begin(), v.end());
    if (n > 0.0) {
        for (auto& x : out) x /= n;
    }
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Max similarity of a unit vector to any centroid, and the argmax (lowest index on ties).
std::pair<double, std::size_t> best_match(std::span<const double> x, const std::vector<std::vector<double>>& cents) {
    double best = -std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t k = 0; k < cents.size(); ++k) {
        double s = dot(x, cents[k]);
        if (s > best) {
            best = s;
            arg = k;
        }
    }
    return {best, arg};
}

}  // namespace

KMeansResult kmeans_cosine(std::span<const std::vector<double>> prototypes, int k, std::uint64_t seed, int max_iters,
                           std::span<const std::vector<double>> initial) {
    if (prototypes.empty()) throw ParameterError("kmeans_cosine: no prototypes");
    if (k < 1) throw ParameterError("kmeans_cosine: K must be >= 1");
    if (max_iters < 1) throw ParameterError("kmeans_cosine: max_iters must be >= 1");
    const std::size_t dim = prototypes.front().size();
    const std::size_t m = prototypes.size();
    const auto kk = static_cast<std::size_t>(k);

    // Cosine geometry only sees directions.
    std::vector<std::vector<double>> x;
    x.reserve(m);
    for (const auto& p : prototypes) {
        if (p.size() != dim) throw DimensionError("prototype length", dim, p.size());
        x.push_back(normalized(p));
    }

    KMeansResult res;
    res.degenerate = std::set<std::vector<double>>(x.begin(), x.end()).size() < kk;

    auto& cents = res.centroids;
    if (!initial.empty()) {
        if (initial.size() != kk) throw DimensionError("initial centroid count", kk, initial.size());
        for (const auto& c : initial) {
            if (c.size() != dim) throw DimensionError("initial centroid length", dim, c.size());
            cents.push_back(normalized(c));
        }
    } else {
        Rng rng(seed);
        cents.push_back(x[std::uniform_int_distribution<std::size_t>(0, m - 1)(rng)]);
        std::vector<double> d2(m);
        while (cents.size() < kk) {
            double total = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                double dist = std::max(0.0, 1.0 - best_match(x[i], cents).first);
                d2[i] = dist * dist;
                total += d2[i];
            }
            std::size_t pick;
            if (total > 0.0) {
                pick = std::discrete_distribution<std::size_t>(d2.begin(), d2.end())(rng);
            } else {
                pick = std::uniform_int_distribution<std::size_t>(0, m - 1)(rng);
            }
            cents.push_back(x[pick]);
        }
    }

    res.assignment.assign(m, kk);  // sentinel: nothing assigned yet
    std::vector<std::size_t> next(m);
    for (int it = 0; it < max_iters; ++it) {
        double obj = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            auto [s, a] = best_match(x[i], cents);
            next[i] = a;
            obj += s;
        }
        res.objective.push_back(obj / static_cast<double>(m));
        res.iterations = it + 1;
        if (next == res.assignment) break;
        res.assignment = next;

        std::vector<std::vector<double>> sums(kk, std::vector<double>(dim, 0.0));
        std::vector<std::size_t> counts(kk, 0);
        for (std::size_t i = 0; i < m; ++i) {
            auto& s = sums[res.assignment[i]];
            for (std::size_t j = 0; j < dim; ++j) s[j] += x[i][j];
            ++counts[res.assignment[i]];
        }
        for (std::size_t c = 0; c < kk; ++c) {
            if (counts[c] > 0) {
                for (auto& v : sums[c]) v /= static_cast<double>(counts[c]);
                cents[c] = normalized(sums[c]);
            }
        }
        for (std::size_t c = 0; c < kk; ++c) {
            if (counts[c] > 0) continue;
            std::size_t far = 0;
            double far_sim = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < m; ++i) {
                double s = best_match(x[i], cents).first;
                if (s < far_sim) {
                    far_sim = s;
                    far = i;
                }
            }
            cents[c] = x[far];
        }
    }
    return res;
}

std::vector<double> soft_assign(std::span<const double> prototype, std::span<const std::vector<double>> centroids,
                                double tau) {
    if (!(tau > 0.0)) throw ParameterError("soft_assign: tau must be > 0");
    if (centroids.empty()) throw ParameterError("soft_assign: no centroids");
    std::vector<double> sims(centroids.size());
    for (std::size_t k = 0; k < centroids.size(); ++k) sims[k] = cosine_similarity(prototype, centroids[k]);
    return softmax_temp(sims, tau);
}

std::size_t dominant_cluster(std::span<const double> assign_w) { return argmax(assign_w); }

double update_alpha(double alpha, const ParamVector& backbone, const ParamVector& cluster_model,
                    const ParamVector& global, double eta_alpha, double beta) {
    if (!(eta_alpha > 0.0)) throw ParameterError("update_alpha: eta_alpha must be > 0");
    const double delta = l2_distance(backbone, cluster_model) - l2_distance(backbone, global);
    double a = std::clamp(alpha + eta_alpha * delta, 0.0, 1.0);
    // Keep gamma = 1 - alpha - beta nonnegative.
    return std::min(a, std::max(0.0, 1.0 - beta));
}

std::vector<std::size_t> sample_clients(std::size_t n_clients, double fraction, std::uint64_t seed) {
    if (n_clients == 0) throw ParameterError("sample_clients: no clients");
    if (!(fraction > 0.0 && fraction <= 1.0)) throw ParameterError("client fraction must lie in (0, 1]");
    auto count = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n_clients) - 1e-9));
    count = std::clamp<std::size_t>(count, 1, n_clients);
    std::vector<std::size_t> ids(n_clients);
    std::iota(ids.begin(), ids.end(), std::size_t{0});
    Rng rng(seed);
    std::shuffle(ids.begin(), ids.end(), rng);
    ids.resize(count);
    std::sort(ids.begin(), ids.end());
    return ids;
}

PrismRoundResult server_round(const ServerState& state, std::span<const ClientState> sampled,
                              std::uint64_t round_seed, const ComponentMask& mask) {
    if (sampled.empty()) throw ProtocolError("server_round: no sampled clients");
    const PrismParams& hp = state.params;
    const int t = state.round + 1;

    // Reduce in ascending client_id order.
    std::vector<std::size_t> order(sampled.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return sampled[a].client_id < sampled[b].client_id; });

    PrismRoundResult res;
    res.outputs.reserve(sampled.size());
    res.clients.reserve(sampled.size());
    for (auto idx : order) {
        const ClientState& c = sampled[idx];
        auto seed = derive_seed(round_seed, {seed_tag::kClient, static_cast<std::uint64_t>(c.client_id)});
        auto [out, next] = client_update(c, state.global, state.clusters, hp, seed, mask);
        res.outputs.push_back(std::move(out));
        res.clients.push_back(std::move(next));
    }

    ServerState& next = res.server;
    next.params = hp;
    next.round = t;

    // A. global aggregation
    next.global = aggregate_global(res.outputs);

    // B. soft cluster moving average with the weights used this round
    std::vector<std::vector<double>> weights;
    weights.reserve(res.clients.size());
    for (const auto& c : res.clients) weights.push_back(c.assign_w);
    next.clusters = update_clusters(state.clusters, res.outputs, weights, hp.eta_cluster);

    // C. re-clustering after warmup; between re-clusterings sampled clients
    // are re-assigned against the latest centroids.
    next.centroids = state.centroids;
    if (t > hp.warmup_rounds) {
        if (t % hp.recluster_every == 0) {
            std::vector<std::vector<double>> protos;
            protos.reserve(res.outputs.size());
            for (const auto& o : res.outputs) protos.push_back(o.prototype);
            auto km = kmeans_cosine(protos, hp.clusters, derive_seed(round_seed, {seed_tag::kKMeans}),
                                    hp.kmeans_max_iters, state.centroids);
            next.centroids = std::move(km.centroids);
            res.reclustered = true;
        }
        if (!next.centroids.empty()) {
            for (std::size_t i = 0; i < res.clients.size(); ++i) {
                res.clients[i].assign_w = soft_assign(res.outputs[i].prototype, next.centroids, hp.tau);
            }
        }
    }

    // D. mixing weights against the pre-round G and C_k
    if (!hp.fixed_alpha) {
        for (std::size_t i = 0; i < res.clients.size(); ++i) {
            const std::size_t k = dominant_cluster(weights[i]);
            res.clients[i].alpha = update_alpha(res.clients[i].alpha, res.outputs[i].backbone, state.clusters[k],
                                                state.global, hp.eta_alpha, hp.beta);
        }
    }
    return res;
}

bool apply_round(ServerState& server, std::vector<ClientState>& clients, std::span<const std::size_t> sampled,
                 std::uint64_t round_seed, const ComponentMask& mask) {
    std::vector<ClientState> batch;
    batch.reserve(sampled.size());
    for (auto i : sampled) batch.push_back(clients.at(i));
    auto res = server_round(server, batch, round_seed, mask);
    for (std::size_t k = 0; k < sampled.size(); ++k) clients[sampled[k]] = std::move(res.clients[k]);
    server = std::move(res.server);
    return res.reclustered;
}

}  // namespace fedprism
