#include "fedprism/prism_client.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fedprism/errors.hpp"

namespace fedprism {

void PrismParams::validate() const {
    if (clusters < 1) throw ParameterError("K must be >= 1");
    if (!(beta >= 0.0 && beta <= 1.0)) throw ParameterError("beta must lie in [0, 1]");
    if (!(tau > 0.0)) throw ParameterError("tau must be > 0");
    if (!(eta_cluster > 0.0 && eta_cluster <= 1.0)) throw ParameterError("eta_cluster must lie in (0, 1]");
    if (!(eta_alpha > 0.0)) throw ParameterError("eta_alpha must be > 0");
    if (warmup_rounds < 0) throw ParameterError("warmup_rounds must be >= 0");
    if (recluster_every < 1) throw ParameterError("recluster_every must be >= 1");
    if (!(temperature > 0.0)) throw ParameterError("temperature must be > 0");
    if (kmeans_max_iters < 1) throw ParameterError("kmeans_max_iters must be >= 1");
    if (!(initial_alpha >= 0.0 && initial_alpha + beta <= 1.0))
        throw ConstraintError("initial alpha must lie in [0, 1 - beta]");
    if (fixed_alpha && !(*fixed_alpha >= 0.0 && *fixed_alpha + beta <= 1.0))
        throw ConstraintError("fixed alpha must lie in [0, 1 - beta]");
}

MixingCoefficients mixing_coefficients(double alpha, double beta, const ComponentMask& mask) {
    if (alpha < 0.0 || beta < 0.0) throw ConstraintError("mixing weights must be nonnegative");
    if (alpha + beta > 1.0 + 1e-12) throw ConstraintError("alpha + beta must not exceed 1");
    MixingCoefficients c{alpha, beta, std::max(0.0, 1.0 - alpha - beta)};
    if (mask.all()) return c;
    if (!mask.any()) throw ConstraintError("component mask disables every component");
    if (!mask.global) c.global = 0.0;
    if (!mask.cluster) c.cluster = 0.0;
    if (!mask.private_part) c.private_part = 0.0;
    const double s = c.global + c.cluster + c.private_part;
    if (s > 0.0) {
        c.global /= s;
        c.cluster /= s;
        c.private_part /= s;
    } else {
        // Every enabled coefficient is zero: split evenly among enabled parts.
        const double n = static_cast<double>(int{mask.global} + int{mask.cluster} + int{mask.private_part});
        c = {mask.global / n, mask.cluster / n, mask.private_part / n};
    }
    return c;
}

ParamVector compose_backbone(const MixingCoefficients& coeffs, const ParamVector& global,
                             std::span<const double> assign_w, std::span<const ParamVector> clusters,
                             const ParamVector& private_part) {
    if (assign_w.size() != clusters.size())
        throw DimensionError("assignment weights vs clusters", clusters.size(), assign_w.size());
    double wsum = 0.0;
    for (double w : assign_w) {
        if (!(w >= 0.0)) throw ConstraintError("assignment weights must be nonnegative");
        wsum += w;
    }
    if (!clusters.empty() && std::abs(wsum - 1.0) > 1e-9) throw ConstraintError("assignment weights must sum to 1");
    if (!global.same_shape(private_part)) throw DimensionError("private component length", global.size(), private_part.size());
    for (const auto& c : clusters) {
        if (!global.same_shape(c)) throw DimensionError("cluster model length", global.size(), c.size());
    }
    const std::size_t n = global.size();
    ParamVector out(global.spec_ptr());
    auto o = out.values();
    auto g = global.values();
    auto p = private_part.values();
    for (std::size_t i = 0; i < n; ++i) o[i] = coeffs.global * g[i];
    for (std::size_t k = 0; k < clusters.size(); ++k) {
        const double wk = coeffs.cluster * assign_w[k];
        if (wk == 0.0) continue;
        auto c = clusters[k].values();
        for (std::size_t i = 0; i < n; ++i) o[i] += wk * c[i];
    }
    for (std::size_t i = 0; i < n; ++i) o[i] += coeffs.private_part * p[i];
    return out;
}

ParamVector compose_backbone(double alpha, const ParamVector& global, double beta, std::span<const double> assign_w,
                             std::span<const ParamVector> clusters, const ParamVector& private_part) {
    return compose_backbone(mixing_coefficients(alpha, beta), global, assign_w, clusters, private_part);
}

std::vector<double> extract_prototype(const ParamVector& params) {
    const ModelSpec& spec = params.spec();
    const std::size_t last = spec.layer_count() - 1;
    const std::size_t off = spec.weight_offset(last);
    const std::size_t n = spec.fan_in(last) * spec.fan_out(last);
    auto v = params.values();
    return {v.begin() + static_cast<std::ptrdiff_t>(off), v.begin() + static_cast<std::ptrdiff_t>(off + n)};
}

std::pair<ClientRoundOutput, ClientState> client_update(const ClientState& state, const ParamVector& global,
                                                        std::span<const ParamVector> clusters,
                                                        const PrismParams& params, std::uint64_t round_seed,
                                                        const ComponentMask& mask) {
    ClientState next = state;
    // Path A: independent local specialist.
    next.specialist = sgd_train(state.specialist, state.train, params.sgd, round_seed + kSpecialistSeedOffset);
    // Path B, step 1: private component.
    next.private_part = sgd_train(state.private_part, state.train, params.sgd, round_seed + kPrivateSeedOffset);
    // Step 2: compose with the fresh private component and train the result.
    ParamVector composed = compose_backbone(mixing_coefficients(state.alpha, params.beta, mask), global,
                                            state.assign_w, clusters, next.private_part);
    ClientRoundOutput out;
    out.client_id = state.client_id;
    out.backbone = sgd_train(composed, state.train, params.sgd, round_seed + kBackboneSeedOffset);
    // Step 3: prototype.
    out.prototype = extract_prototype(out.backbone);
    out.train_size = state.train_size();
    return {std::move(out), std::move(next)};
}

namespace {

// Argmax of w*z_L + (1-w)*z_G over one row.
std::size_t fuse_argmax(std::span<const double> zl, std::span<const double> zg, double w, std::vector<double>& fused) {
    fused.resize(zl.size());
    for (std::size_t c = 0; c < zl.size(); ++c) fused[c] = w * zl[c] + (1.0 - w) * zg[c];
    return argmax(fused);
}

}  // namespace

RouteResult route_inference(std::span<const double> x, const ParamVector& specialist, const ParamVector& backbone,
                            double temperature) {
    if (!(temperature > 0.0)) throw ParameterError("routing temperature must be > 0");
    if (!specialist.same_shape(backbone)) throw DimensionError("specialist vs backbone", specialist.size(), backbone.size());
    auto zl = forward_row(specialist, x);
    auto zg = forward_row(backbone, x);
    auto probs = softmax_temp(zl, temperature);
    RouteResult r;
    r.lambda = *std::max_element(probs.begin(), probs.end());
    r.prediction = fuse_argmax(zl, zg, r.lambda, r.fused_logits);
    return r;
}

std::vector<std::size_t> route_predictions(const Matrix& inputs, const ParamVector& specialist,
                                           const ParamVector& backbone, double temperature,
                                           std::optional<double> expert_weight) {
    if (!(temperature > 0.0)) throw ParameterError("routing temperature must be > 0");
    if (expert_weight && !(*expert_weight >= 0.0 && *expert_weight <= 1.0))
        throw ParameterError("expert weight must lie in [0, 1]");
    const Matrix zl = forward(specialist, inputs);
    const Matrix zg = forward(backbone, inputs);
    std::vector<std::size_t> preds(inputs.rows);
    std::vector<double> fused;
    for (std::size_t r = 0; r < inputs.rows; ++r) {
        double w;
        if (expert_weight) {
            w = *expert_weight;
        } else {
            auto probs = softmax_temp(zl.row(r), temperature);
            w = *std::max_element(probs.begin(), probs.end());
        }
        preds[r] = fuse_argmax(zl.row(r), zg.row(r), w, fused);
    }
    return preds;
}

ParamVector client_backbone(const ClientState& state, const ParamVector& global,
                            std::span<const ParamVector> clusters, double beta, const ComponentMask& mask) {
    return compose_backbone(mixing_coefficients(state.alpha, beta, mask), global, state.assign_w, clusters,
                            state.private_part);
}

ClientEval client_evaluate(const ClientState& state, const ParamVector& global, std::span<const ParamVector> clusters,
                           double beta, double temperature, std::optional<double> expert_weight,
                           const Batch& global_test, const ComponentMask& mask) {
    ParamVector backbone = client_backbone(state, global, clusters, beta, mask);
    ClientEval ev;
    if (!state.test.empty()) {
        auto preds = route_predictions(state.test.inputs, state.specialist, backbone, temperature, expert_weight);
        std::size_t correct = 0;
        for (std::size_t r = 0; r < preds.size(); ++r) {
            if (static_cast<int>(preds[r]) == state.test.labels[r]) ++correct;
        }
        ev.local_acc = static_cast<double>(correct) / static_cast<double>(preds.size());
    }
    ev.global_acc = evaluate(backbone, global_test);
    return ev;
}

}  // namespace fedprism
