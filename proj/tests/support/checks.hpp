#pragma once

// Randomized checks shared by the unit tests and the acceptance runner.
// Each check draws `cases` independent instances from `seed` and counts
// the instances that violate the property.

#include <cstdint>
#include <string>
#include <vector>

namespace fedprism::checks {

struct CheckResult {
    std::string name;
    int cases = 0;
    int failures = 0;
    std::string first_failure;

    bool ok() const { return failures == 0 && cases > 0; }
};

using CheckFn = CheckResult (*)(int cases, std::uint64_t seed);

struct CheckEntry {
    const char* module;
    const char* name;
    CheckFn fn;
    int cases;  // default case count
};

// nn-core
CheckResult gradient_check(int cases, std::uint64_t seed);
CheckResult forward_reference(int cases, std::uint64_t seed);
CheckResult softmax_normalization(int cases, std::uint64_t seed);
CheckResult temperature_identity(int cases, std::uint64_t seed);
CheckResult sgd_determinism(int cases, std::uint64_t seed);
CheckResult separable_loss_nonincreasing(int cases, std::uint64_t seed);

// data
CheckResult partition_coverage(int cases, std::uint64_t seed);
CheckResult dirichlet_entropy_monotone(int cases, std::uint64_t seed);
CheckResult pathological_support(int cases, std::uint64_t seed);
CheckResult data_seed_determinism(int cases, std::uint64_t seed);

// prism-client
CheckResult compose_linearity(int cases, std::uint64_t seed);
CheckResult routing_bounds(int cases, std::uint64_t seed);
CheckResult fused_sandwich(int cases, std::uint64_t seed);
CheckResult specialist_independence(int cases, std::uint64_t seed);
CheckResult private_independence(int cases, std::uint64_t seed);

// prism-server
CheckResult aggregate_idempotence(int cases, std::uint64_t seed);
CheckResult cluster_fixed_point(int cases, std::uint64_t seed);
CheckResult soft_assign_sharpening(int cases, std::uint64_t seed);
CheckResult alpha_monotone(int cases, std::uint64_t seed);
CheckResult assignment_persistence(int cases, std::uint64_t seed);
CheckResult kmeans_objective(int cases, std::uint64_t seed);

// baselines
CheckResult baselines_deterministic(int cases, std::uint64_t seed);
CheckResult fedavg_centralized(int cases, std::uint64_t seed);
CheckResult ifca_affine_invariance(int cases, std::uint64_t seed);

// harness
CheckResult end_to_end_determinism(int cases, std::uint64_t seed);
CheckResult seed_isolation(int cases, std::uint64_t seed);
CheckResult cadence_invariance(int cases, std::uint64_t seed);
CheckResult ablation_consistency(int cases, std::uint64_t seed);

// cli
CheckResult cli_thin_shell(int cases, std::uint64_t seed);
CheckResult cli_exit_codes(int cases, std::uint64_t seed);

// Every invariant above with its default case count.
const std::vector<CheckEntry>& invariant_suite();

// Library vs brute-force reference, max deviation 1e-12.
CheckResult oracle_compose(int cases, std::uint64_t seed);
CheckResult oracle_aggregate(int cases, std::uint64_t seed);
CheckResult oracle_update_clusters(int cases, std::uint64_t seed);
CheckResult oracle_soft_assign(int cases, std::uint64_t seed);
CheckResult oracle_update_alpha(int cases, std::uint64_t seed);

}  // namespace fedprism::checks
