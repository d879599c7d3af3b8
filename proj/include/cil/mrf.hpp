#ifndef CIL_MRF_HPP
#define CIL_MRF_HPP

#include <vector>

#include "cil/volume.hpp"

namespace cil {

/// Normalized per-voxel energy fields for the unary potential. Both fields
/// map to [0,1] with LOW energy at bright/blobby locations; sampling outside
/// the field returns the worst energy (1).
struct UnaryField {
    Volume3D smoothed;
    Volume3D blob;
    double theta1 = 1.0;
    double theta2 = 1.0;
};

/// Chain MRF over the electrode contacts: first-order neighbors constrain the
/// inter-contact distance to d_st1, second-order neighbors encode the turning
/// angle alpha_n via d_st2[n] = 2*d_st1*sin(alpha_n/2).
struct MrfModel {
    int n_nodes = 16;
    double theta3 = 1.0;
    double theta4 = 1.0;
    double d_st1 = 1.0;                  ///< prior inter-contact spacing, mm
    std::vector<double> alpha_schedule;  ///< per-node interior angle, rad, non-increasing
    std::vector<double> d_st2;           ///< derived second-order distance prior, mm

    /// Linear alpha schedule from alpha_basal down to alpha_apical.
    static MrfModel make(int n_nodes, double d_st1, double alpha_basal,
                         double alpha_apical, double theta3, double theta4);
    void validate() const;
};

/// Node configuration; index 0 is basal.
struct Configuration {
    std::vector<WorldPoint> positions;
};

/// Second-order distance prior from the interior angle: 2*d_st1*sin(alpha/2).
double dst2_from_alpha(double d_st1, double alpha);

/// Crop to the VOI, filter with G_sigma2 and the blob filter, then normalize
/// each field to (max - f)/(max - min) so bright locations carry low energy.
/// A degenerate (constant) field becomes all-zero energy with a warning.
UnaryField build_unary_field(const Volume3D& vol, const Box3& voi, double sigma2,
                             double blob_scale, double theta1, double theta2);

/// theta1 * smoothed(x) + theta2 * blob(x), trilinear.
double unary_potential(const UnaryField& field, const WorldPoint& x);

/// Spring penalty on the deviation of |xs - xt| from the distance prior:
/// theta3*(|xs-xt| - d_st1)^2 for adjacent nodes, theta4*(|xs-xt| -
/// d_st2[interior])^2 for second-order pairs.
double pairwise_potential(const MrfModel& model, int s, int t, const WorldPoint& xs,
                          const WorldPoint& xt);

/// Full model energy; each undirected edge counted once.
double total_energy(const MrfModel& model, const UnaryField& field,
                    const Configuration& cfg);

/// Neighbor indices of node s: |s - t| in {1, 2}, within range.
std::vector<int> neighbors(const MrfModel& model, int s);

}  // namespace cil

#endif
