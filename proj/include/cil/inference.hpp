#ifndef CIL_INFERENCE_HPP
#define CIL_INFERENCE_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "cil/candidates.hpp"
#include "cil/mrf.hpp"
#include "cil/rng.hpp"

namespace cil {

/// Per-node particle positions.
struct ParticleSet {
    std::vector<std::vector<WorldPoint>> nodes;

    int n_nodes() const { return static_cast<int>(nodes.size()); }
};

/// Directed min-sum messages M[t->s][i], one value per particle i of the
/// receiving node s. Storage is indexed by (s, neighbor slot of t in N_s).
class MessageTable {
public:
    MessageTable() = default;
    MessageTable(const MrfModel& model, const ParticleSet& particles);

    double get(int t, int s, int i) const { return data_[s][slot(s, t)][i]; }
    void set(int t, int s, int i, double v) { data_[s][slot(s, t)][i] = v; }
    std::vector<double>& edge(int t, int s) { return data_[s][slot(s, t)]; }
    const std::vector<double>& edge(int t, int s) const { return data_[s][slot(s, t)]; }
    const std::vector<int>& neighbors_of(int s) const { return nbrs_[s]; }

private:
    int slot(int s, int t) const;
    std::vector<std::vector<int>> nbrs_;                  // nbrs_[s] = N_s
    std::vector<std::vector<std::vector<double>>> data_;  // data_[s][slot][i]
};

/// Log-disbelief B[s][i] per node-particle.
struct BeliefTable {
    std::vector<std::vector<double>> b;

    /// Argmin particle index per node; ties go to the lowest index.
    int argmin(int s) const;
};

struct InferenceConfig {
    int n_iterations = 60;     ///< PBP iterations N
    int mcmc_steps = 5;        ///< slice sampling steps M per particle
    int particles_per_node = 30;
    int k_nearest = 3;         ///< P_knn candidates per node
    int plateau_window = 5;
    double plateau_epsilon_scale = 1e-6;
    double diversity_radius_factor = 0.25;  ///< r_div = factor * d_st1
    double init_jitter_factor = 0.1;        ///< initial particle spread, x d_st1
};

struct RunDiagnostics {
    int reties = 0;
    int plateaus = 0;
};

struct RunResult {
    Configuration positions;
    double energy = 0.0;
    int n_iterations = 0;
    RunDiagnostics diagnostics;
};

/// Mutable state of one PBP run. The message and belief tables are always
/// indexed consistently with `particles`.
struct InferenceState {
    ParticleSet particles;
    MessageTable msgs;
    BeliefTable beliefs;
    std::optional<Configuration> map_estimate;
};

/// One synchronous message update from the previous iteration's tables:
/// M[t->s](x_s^i) = min over x_t in P_t of
///   psi_{s,t}(x_s^i, x_t) + B_t[x_t] - M[s->t](x_t),
/// then min-normalized to 0 per message.
MessageTable compute_messages(const MrfModel& model, const UnaryField& field,
                              const ParticleSet& particles,
                              const MessageTable& prev_msgs,
                              const BeliefTable& prev_beliefs);

/// B[s][i] = psi_s(x_s^i) + sum over t in N_s of M[t->s][i].
BeliefTable compute_disbelief(const MrfModel& model, const UnaryField& field,
                              const ParticleSet& particles, const MessageTable& msgs);

/// Disbelief of node s at an arbitrary point, evaluated through the given
/// tables; used to drive the slice sampler and to score augmented particles.
double disbelief_at(const MrfModel& model, const UnaryField& field,
                    const ParticleSet& particles, const MessageTable& msgs,
                    const BeliefTable& beliefs, int s, const WorldPoint& x);

/// M iterations of coordinate-wise slice sampling on exp(-disbelief):
/// exponential slice level, step-out bracketing (initial width `width`,
/// doubling, max 10 expansions), shrink on rejection.
WorldPoint slice_sample_node(const WorldPoint& current,
                             const std::function<double(const WorldPoint&)>& disbelief_fn,
                             Rng& rng, int mcmc_steps, double width);

/// Heuristic particle injections around the current MAP estimate: neighbor
/// positions plus apical extrapolation (P_mobility), helix-fit predictions
/// (P_CI), the 180-degree rotated estimate (P_rotated) and the k nearest blob
/// candidates per node (P_knn). Without a MAP estimate only P_knn applies.
ParticleSet augment_particles(const InferenceState& state, const MrfModel& model,
                              const UnaryField& field, const CandidateSet& cands,
                              int k);

/// Fits a helix (axis from cross-products of displacement second differences,
/// Kasa circle fit,
/// linear angle/pitch) to a window of 4-6 consecutive MAP positions starting
/// at node index window_start, and extrapolates all n_nodes positions.
/// A collinear window yields an empty result.
std::vector<WorldPoint> fit_helix(const std::vector<WorldPoint>& window,
                                  int window_start, int n_nodes);

/// Greedy diverse decimation: per node, keep particles in ascending disbelief
/// order, skipping any within r_div of an already kept one; fill with the best
/// remaining (then duplicates of the best) up to target_p.
ParticleSet decimate_diverse(const ParticleSet& particles, const BeliefTable& beliefs,
                             int target_p, double r_div);

/// True iff max - min of the last `window` energies is below
/// epsilon_scale * (last + 1).
bool detect_plateau(const std::vector<double>& history, int window,
                    double epsilon_scale);

/// Relabels the configuration along the shortest open path through all points
/// starting at the current basal point (exact Held-Karp for n <= 20, greedy
/// nearest-neighbor beyond). The point multiset is unchanged.
Configuration retie_shortest_path(const Configuration& cfg);

/// One full PBP run from a random straight-line initialization at `basal`.
RunResult run_single(const MrfModel& model, const UnaryField& field,
                     const CandidateSet& cands, const WorldPoint& basal,
                     const Box3& voi, const InferenceConfig& cfg, Rng& rng);

/// Best of n_runs independent restarts (derived seeds); ties broken by the
/// lowest run index.
RunResult localize(const MrfModel& model, const UnaryField& field,
                   const CandidateSet& cands, const WorldPoint& basal,
                   const Box3& voi, const InferenceConfig& cfg, int n_runs,
                   std::uint64_t seed);

}  // namespace cil

#endif
