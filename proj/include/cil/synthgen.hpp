#ifndef CIL_SYNTHGEN_HPP
#define CIL_SYNTHGEN_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "cil/rng.hpp"
#include "cil/volume.hpp"

namespace cil {

/// All generator parameters for one synthetic dataset.
struct SynthParams {
    std::uint64_t seed = 0;
    double l_prior = 1.0;        ///< inter-contact distance, mm
    double alpha = 0.3;          ///< base curvature angle, rad
    double lambda1 = 0.2;        ///< screw factor out of the u,v-plane
    double lambda2 = 1.0;        ///< angle weight
    double lambda3 = 1.0;        ///< intensity scale
    double lambda4 = 0.0;        ///< intensity shift
    int lambda_mirror = 0;       ///< 0 or 1
    double theta_u = 0.0, theta_v = 0.0, theta_w = 0.0;  ///< rad
    double sigma1 = 0.4;         ///< hires smoothing, mm
    int n_bones = 0;             ///< distractor count
    double noise_sigma = 0.0;
    int n_electrodes = 12;
    std::array<int, 3> hires_dims{128, 128, 128};
    std::array<int, 3> target_dims{64, 64, 64};
    /// When true, the helix step's third component is the literal 1 instead
    /// of lambda1 (alternative reading, off by default).
    bool literal_unit_pitch = false;
    double guard_mm = 2.0;       ///< border guard interval, mm

    void validate() const;
};

/// Ordered ground-truth contact list; index 0 is the most basal contact,
/// electrode number n+1 corresponds to index n.
struct GroundTruth {
    std::vector<WorldPoint> contacts;
};

/// Iterates the helix recursion from x0:
/// x_{n+1} = x_n + l_prior * [cos(l2*n*a), sin(l2*n*a), l1].
GroundTruth generate_helix_positions(const SynthParams& params, const WorldPoint& x0);

/// Mirror the u coordinate about the array centroid when lambda_mirror = 1,
/// then rotate about the centroid by R_w(theta_w)*R_v(theta_v)*R_u(theta_u).
GroundTruth apply_mirror_rotation(const GroundTruth& gt, const SynthParams& params);

/// Hires indicator volume: 1 at the nearest voxel of each contact and of each
/// accepted distractor, 0 elsewhere. Distractors are sampled uniformly inside
/// the volume and rejected within 2*l_prior of any contact.
Volume3D place_impulses(const GroundTruth& gt, const SynthParams& params, Rng& rng);

/// Smooth (sigma1) -> downsample (target_dims) -> lambda3*x + lambda4 ->
/// white noise, then f32 quantization so files round-trip exactly.
Volume3D render_synthetic_volume(const Volume3D& i0, const SynthParams& params, Rng& rng);

/// Inclusive parameter ranges for sample_params.
struct SynthRanges {
    std::pair<double, double> l_prior{1.0, 1.0};
    std::pair<double, double> alpha{0.2, 0.4};
    std::pair<double, double> lambda1{0.0, 0.4};
    std::pair<double, double> lambda2{0.8, 1.2};
    // A unit impulse smoothed at sigma1 peaks around 1/((2*pi)^1.5 * s^3) with
    // s = sigma1 in hires voxels (roughly 3e-4..1e-3 at desk scales), so the
    // intensity scale must be large for contacts to stand above the noise.
    std::pair<double, double> lambda3{1000.0, 2000.0};
    std::pair<double, double> lambda4{0.0, 0.2};
    std::pair<double, double> theta{-3.14159265358979323846, 3.14159265358979323846};
    std::pair<double, double> sigma1{0.3, 0.5};
    std::pair<int, int> n_bones{0, 10};
    std::pair<double, double> noise_sigma{0.0, 0.05};
    int n_electrodes = 12;
    std::array<int, 3> hires_dims{128, 128, 128};
    std::array<int, 3> target_dims{64, 64, 64};
    double guard_mm = 2.0;

    void validate() const;
};

/// Uniform draw per parameter; lambda_mirror is Bernoulli(0.5).
SynthParams sample_params(Rng& rng, const SynthRanges& ranges);

/// One complete dataset.
struct Dataset {
    Volume3D volume;
    GroundTruth gt;
    SynthParams params;
};

/// Full two-step generation pipeline, deterministic in params.seed.
Dataset generate_dataset(const SynthParams& params);

/// Writes volume.raw (+ sidecar), gt.json and params.json into out_dir.
void write_dataset(const Volume3D& vol, const GroundTruth& gt,
                   const SynthParams& params, const std::string& out_dir);
GroundTruth read_ground_truth(const std::string& path);
void write_ground_truth(const GroundTruth& gt, const std::string& path);
SynthParams read_params(const std::string& path);

}  // namespace cil

#endif
