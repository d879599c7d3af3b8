#include "cil/mrf.hpp"

#include <cmath>
#include <iostream>
#include <stdexcept>

namespace cil {

double dst2_from_alpha(double d_st1, double alpha) {
    if (!(alpha > 0.0) || alpha > 3.14159265358979323846 + 1e-12)
        throw std::invalid_argument("dst2_from_alpha: alpha must be in (0, pi]");
    return 2.0 * d_st1 * std::sin(alpha / 2.0);
}

MrfModel MrfModel::make(int n_nodes, double d_st1, double alpha_basal,
                        double alpha_apical, double theta3, double theta4) {
    MrfModel m;
    m.n_nodes = n_nodes;
    m.d_st1 = d_st1;
    m.theta3 = theta3;
    m.theta4 = theta4;
    m.alpha_schedule.resize(n_nodes);
    for (int i = 0; i < n_nodes; ++i) {
        double t = n_nodes > 1 ? static_cast<double>(i) / (n_nodes - 1) : 0.0;
        m.alpha_schedule[i] = alpha_basal + t * (alpha_apical - alpha_basal);
    }
    m.d_st2.resize(n_nodes);
    for (int i = 0; i < n_nodes; ++i)
        m.d_st2[i] = dst2_from_alpha(d_st1, m.alpha_schedule[i]);
    m.validate();
    return m;
}

void MrfModel::validate() const {
    if (n_nodes < 3) throw std::invalid_argument("MrfModel: n_nodes must be >= 3");
    if (!(d_st1 > 0)) throw std::invalid_argument("MrfModel: d_st1 must be > 0");
    if (theta3 < 0 || theta4 < 0)
        throw std::invalid_argument("MrfModel: weights must be non-negative");
    if (static_cast<int>(alpha_schedule.size()) != n_nodes ||
        static_cast<int>(d_st2.size()) != n_nodes)
        throw std::invalid_argument("MrfModel: schedule length mismatch");
    for (int i = 0; i < n_nodes; ++i) {
        double a = alpha_schedule[i];
        if (!(a > 0.0) || a > 3.14159265358979323846 + 1e-12)
            throw std::invalid_argument("MrfModel: alpha out of (0, pi]");
        if (i > 0 && a > alpha_schedule[i - 1] + 1e-12)
            throw std::invalid_argument("MrfModel: alpha schedule must be non-increasing");
    }
}

namespace {

Volume3D crop_to_voi(const Volume3D& vol, const Box3& voi) {
    Vec3 lo = vol.world_to_voxel(voi.min);
    Vec3 hi = vol.world_to_voxel(voi.max);
    const auto& d = vol.dims();
    std::array<int, 3> i0, i1;
    for (int a = 0; a < 3; ++a) {
        i0[a] = std::max(0, static_cast<int>(std::floor(lo[a])));
        i1[a] = std::min(d[a] - 1, static_cast<int>(std::ceil(hi[a])));
        if (i0[a] > i1[a])
            throw std::invalid_argument("build_unary_field: VOI does not intersect the volume");
    }
    std::array<int, 3> nd{i1[0] - i0[0] + 1, i1[1] - i0[1] + 1, i1[2] - i0[2] + 1};
    Volume3D out(nd, vol.spacing(),
                 vol.voxel_to_world(i0[0], i0[1], i0[2]));
    for (int k = 0; k < nd[2]; ++k)
        for (int j = 0; j < nd[1]; ++j)
            for (int i = 0; i < nd[0]; ++i)
                out.at(i, j, k) = vol.at(i0[0] + i, i0[1] + j, i0[2] + k);
    return out;
}

/// (max - f) / (max - min); constant fields become all-zero energy.
Volume3D normalize_energy(Volume3D f, const char* name) {
    double lo = f.min_value(), hi = f.max_value();
    if (hi - lo <= 0.0) {
        std::cerr << "warning: degenerate " << name
                  << " field (max == min), unary energy set to zero\n";
        for (double& v : f.mutable_data()) v = 0.0;
        return f;
    }
    for (double& v : f.mutable_data()) v = (hi - v) / (hi - lo);
    return f;
}

}  // namespace

UnaryField build_unary_field(const Volume3D& vol, const Box3& voi, double sigma2,
                             double blob_scale, double theta1, double theta2) {
    if (theta1 < 0 || theta2 < 0 || theta1 + theta2 <= 0)
        throw std::invalid_argument("build_unary_field: need theta1, theta2 >= 0 and theta1 + theta2 > 0");
    Volume3D cropped = crop_to_voi(vol, voi);
    UnaryField field;
    field.smoothed = normalize_energy(gaussian_smooth(cropped, sigma2), "smoothed");
    field.blob = normalize_energy(blob_filter(cropped, blob_scale), "blob");
    field.theta1 = theta1;
    field.theta2 = theta2;
    return field;
}

double unary_potential(const UnaryField& field, const WorldPoint& x) {
    // Out-of-field points get the worst energy, repelling the chain from
    // leaving the VOI.
    return field.theta1 * sample_trilinear(field.smoothed, x, 1.0) +
           field.theta2 * sample_trilinear(field.blob, x, 1.0);
}

double pairwise_potential(const MrfModel& model, int s, int t, const WorldPoint& xs,
                          const WorldPoint& xt) {
    int diff = std::abs(s - t);
    double dist = distance(xs, xt);
    if (diff == 1) {
        double dev = dist - model.d_st1;
        return model.theta3 * dev * dev;
    }
    if (diff == 2) {
        // The interior node of the triple indexes the angle.
        double dev = dist - model.d_st2[std::min(s, t) + 1];
        return model.theta4 * dev * dev;
    }
    throw std::invalid_argument("pairwise_potential: |s - t| must be 1 or 2");
}

std::vector<int> neighbors(const MrfModel& model, int s) {
    std::vector<int> out;
    for (int t : {s - 2, s - 1, s + 1, s + 2})
        if (t >= 0 && t < model.n_nodes) out.push_back(t);
    return out;
}

double total_energy(const MrfModel& model, const UnaryField& field,
                    const Configuration& cfg) {
    if (static_cast<int>(cfg.positions.size()) != model.n_nodes)
        throw std::invalid_argument("total_energy: configuration length mismatch");
    double e = 0.0;
    for (int s = 0; s < model.n_nodes; ++s)
        e += unary_potential(field, cfg.positions[s]);
    for (int s = 0; s + 1 < model.n_nodes; ++s)
        e += pairwise_potential(model, s, s + 1, cfg.positions[s], cfg.positions[s + 1]);
    for (int s = 0; s + 2 < model.n_nodes; ++s)
        e += pairwise_potential(model, s, s + 2, cfg.positions[s], cfg.positions[s + 2]);
    return e;
}

}  // namespace cil
