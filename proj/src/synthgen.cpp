#include "cil/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace cil {

void SynthParams::validate() const {
    if (!(l_prior > 0)) throw std::invalid_argument("SynthParams: l_prior must be > 0");
    if (!(sigma1 >= 0)) throw std::invalid_argument("SynthParams: sigma1 must be >= 0");
    if (!(noise_sigma >= 0))
        throw std::invalid_argument("SynthParams: noise_sigma must be >= 0");
    if (lambda_mirror != 0 && lambda_mirror != 1)
        throw std::invalid_argument("SynthParams: lambda_mirror must be 0 or 1");
    if (n_electrodes < 3)
        throw std::invalid_argument("SynthParams: n_electrodes must be >= 3");
    if (n_bones < 0) throw std::invalid_argument("SynthParams: n_bones must be >= 0");
    for (int d : hires_dims)
        if (d < 2) throw std::invalid_argument("SynthParams: hires_dims must be >= 2");
    for (int a = 0; a < 3; ++a)
        if (target_dims[a] < 2 || target_dims[a] > hires_dims[a])
            throw std::invalid_argument("SynthParams: target_dims out of range");
}

GroundTruth generate_helix_positions(const SynthParams& params, const WorldPoint& x0) {
    params.validate();
    GroundTruth gt;
    gt.contacts.reserve(params.n_electrodes);
    WorldPoint x = x0;
    gt.contacts.push_back(x);
    double pitch = params.literal_unit_pitch ? 1.0 : params.lambda1;
    constexpr double kPi = 3.14159265358979323846;
    for (int n = 0; n + 1 < params.n_electrodes; ++n) {
        // The turning angle saturates at a half rotation: a sharper turn would
        // fold the array back through its own contacts.
        double phase = params.lambda2 * n * params.alpha;
        phase = std::clamp(phase, -kPi, kPi);
        Vec3 step{std::cos(phase), std::sin(phase), pitch};
        x += step * params.l_prior;
        gt.contacts.push_back(x);
    }
    return gt;
}

GroundTruth apply_mirror_rotation(const GroundTruth& gt, const SynthParams& params) {
    Vec3 centroid{0, 0, 0};
    for (const auto& c : gt.contacts) centroid += c;
    centroid = centroid / static_cast<double>(gt.contacts.size());
    Mat3 rot = Mat3::rotation_w(params.theta_w) * Mat3::rotation_v(params.theta_v) *
               Mat3::rotation_u(params.theta_u);
    GroundTruth out;
    out.contacts.reserve(gt.contacts.size());
    for (auto c : gt.contacts) {
        Vec3 r = c - centroid;
        if (params.lambda_mirror == 1) r.x = -r.x;
        out.contacts.push_back(centroid + rot * r);
    }
    return out;
}

namespace {

/// Equilateral hires grid enclosing the contacts plus the guard interval.
Volume3D hires_canvas(const GroundTruth& gt, const SynthParams& params) {
    Vec3 lo = gt.contacts.front(), hi = gt.contacts.front();
    for (const auto& c : gt.contacts)
        for (int a = 0; a < 3; ++a) {
            if (c[a] < lo[a]) lo[a] = c[a];
            if (c[a] > hi[a]) hi[a] = c[a];
        }
    double spacing = 0.0;
    for (int a = 0; a < 3; ++a) {
        double extent = hi[a] - lo[a] + 2.0 * params.guard_mm;
        spacing = std::max(spacing, extent / (params.hires_dims[a] - 1));
    }
    Vec3 center = (lo + hi) * 0.5;
    Vec3 origin;
    for (int a = 0; a < 3; ++a)
        origin[a] = center[a] - spacing * (params.hires_dims[a] - 1) * 0.5;
    return Volume3D(params.hires_dims, {spacing, spacing, spacing}, origin);
}

}  // namespace

Volume3D place_impulses(const GroundTruth& gt, const SynthParams& params, Rng& rng) {
    params.validate();
    Volume3D vol = hires_canvas(gt, params);
    const auto& d = vol.dims();
    for (std::size_t n = 0; n < gt.contacts.size(); ++n) {
        Vec3 v = vol.world_to_voxel(gt.contacts[n]);
        int i = static_cast<int>(std::llround(v.x));
        int j = static_cast<int>(std::llround(v.y));
        int k = static_cast<int>(std::llround(v.z));
        if (i < 0 || j < 0 || k < 0 || i >= d[0] || j >= d[1] || k >= d[2])
            throw std::runtime_error("place_impulses: contact " + std::to_string(n) +
                                     " outside the guarded volume");
        vol.at(i, j, k) = 1.0;
    }
    Box3 b = vol.bounds();
    std::uniform_real_distribution<double> ux(b.min.x, b.max.x);
    std::uniform_real_distribution<double> uy(b.min.y, b.max.y);
    std::uniform_real_distribution<double> uz(b.min.z, b.max.z);
    for (int n = 0; n < params.n_bones; ++n) {
        for (int attempt = 0; attempt < 100; ++attempt) {
            WorldPoint p{ux(rng), uy(rng), uz(rng)};
            bool near_contact = false;
            for (const auto& c : gt.contacts)
                if (distance(p, c) < 2.0 * params.l_prior) {
                    near_contact = true;
                    break;
                }
            if (near_contact) continue;
            Vec3 v = vol.world_to_voxel(p);
            vol.at(static_cast<int>(std::llround(v.x)),
                   static_cast<int>(std::llround(v.y)),
                   static_cast<int>(std::llround(v.z))) = 1.0;
            break;
        }
    }
    return vol;
}

Volume3D render_synthetic_volume(const Volume3D& i0, const SynthParams& params,
                                 Rng& rng) {
    params.validate();
    Volume3D v = gaussian_smooth(i0, params.sigma1);
    v = downsample_cubic(v, params.target_dims);
    for (double& x : v.mutable_data()) x = params.lambda3 * x + params.lambda4;
    v = add_white_noise(v, params.noise_sigma, rng);
    return quantize_f32(v);
}

void SynthRanges::validate() const {
    auto chk = [](auto r, const char* name) {
        if (!(r.first <= r.second))
            throw std::invalid_argument(std::string("SynthRanges: bad range for ") + name);
    };
    chk(l_prior, "l_prior");
    chk(alpha, "alpha");
    chk(lambda1, "lambda1");
    chk(lambda2, "lambda2");
    chk(lambda3, "lambda3");
    chk(lambda4, "lambda4");
    chk(theta, "theta");
    chk(sigma1, "sigma1");
    chk(n_bones, "n_bones");
    chk(noise_sigma, "noise_sigma");
    if (l_prior.first <= 0)
        throw std::invalid_argument("SynthRanges: l_prior must be > 0");
    if (n_electrodes < 3)
        throw std::invalid_argument("SynthRanges: n_electrodes must be >= 3");
}

SynthParams sample_params(Rng& rng, const SynthRanges& ranges) {
    ranges.validate();
    auto draw = [&rng](std::pair<double, double> r) {
        if (r.first == r.second) return r.first;
        return std::uniform_real_distribution<double>(r.first, r.second)(rng);
    };
    SynthParams p;
    p.l_prior = draw(ranges.l_prior);
    p.alpha = draw(ranges.alpha);
    p.lambda1 = draw(ranges.lambda1);
    p.lambda2 = draw(ranges.lambda2);
    p.lambda3 = draw(ranges.lambda3);
    p.lambda4 = draw(ranges.lambda4);
    p.lambda_mirror = std::uniform_int_distribution<int>(0, 1)(rng);
    p.theta_u = draw(ranges.theta);
    p.theta_v = draw(ranges.theta);
    p.theta_w = draw(ranges.theta);
    p.sigma1 = draw(ranges.sigma1);
    p.n_bones = ranges.n_bones.first == ranges.n_bones.second
                    ? ranges.n_bones.first
                    : std::uniform_int_distribution<int>(ranges.n_bones.first,
                                                         ranges.n_bones.second)(rng);
    p.noise_sigma = draw(ranges.noise_sigma);
    p.n_electrodes = ranges.n_electrodes;
    p.hires_dims = ranges.hires_dims;
    p.target_dims = ranges.target_dims;
    p.guard_mm = ranges.guard_mm;
    return p;
}

Dataset generate_dataset(const SynthParams& params) {
    params.validate();
    GroundTruth gt = generate_helix_positions(params, WorldPoint{0, 0, 0});
    gt = apply_mirror_rotation(gt, params);
    Rng bones_rng(derive_seed(params.seed, "bones"));
    Volume3D i0 = place_impulses(gt, params, bones_rng);
    Rng noise_rng(derive_seed(params.seed, "noise"));
    Volume3D vol = render_synthetic_volume(i0, params, noise_rng);
    return Dataset{std::move(vol), std::move(gt), params};
}

namespace {

nlohmann::json params_to_json(const SynthParams& p) {
    nlohmann::json j;
    j["seed"] = p.seed;
    j["l_prior"] = p.l_prior;
    j["alpha"] = p.alpha;
    j["lambda1"] = p.lambda1;
    j["lambda2"] = p.lambda2;
    j["lambda3"] = p.lambda3;
    j["lambda4"] = p.lambda4;
    j["lambda_mirror"] = p.lambda_mirror;
    j["theta_u"] = p.theta_u;
    j["theta_v"] = p.theta_v;
    j["theta_w"] = p.theta_w;
    j["sigma1"] = p.sigma1;
    j["n_bones"] = p.n_bones;
    j["noise_sigma"] = p.noise_sigma;
    j["n_electrodes"] = p.n_electrodes;
    j["hires_dims"] = p.hires_dims;
    j["target_dims"] = p.target_dims;
    j["literal_unit_pitch"] = p.literal_unit_pitch;
    j["guard_mm"] = p.guard_mm;
    return j;
}

SynthParams params_from_json(const nlohmann::json& j) {
    SynthParams p;
    p.seed = j.at("seed");
    p.l_prior = j.at("l_prior");
    p.alpha = j.at("alpha");
    p.lambda1 = j.at("lambda1");
    p.lambda2 = j.at("lambda2");
    p.lambda3 = j.at("lambda3");
    p.lambda4 = j.at("lambda4");
    p.lambda_mirror = j.at("lambda_mirror");
    p.theta_u = j.at("theta_u");
    p.theta_v = j.at("theta_v");
    p.theta_w = j.at("theta_w");
    p.sigma1 = j.at("sigma1");
    p.n_bones = j.at("n_bones");
    p.noise_sigma = j.at("noise_sigma");
    p.n_electrodes = j.at("n_electrodes");
    p.hires_dims = j.at("hires_dims");
    p.target_dims = j.at("target_dims");
    p.literal_unit_pitch = j.value("literal_unit_pitch", false);
    p.guard_mm = j.value("guard_mm", 2.0);
    return p;
}

}  // namespace

void write_ground_truth(const GroundTruth& gt, const std::string& path) {
    nlohmann::json j;
    auto& arr = j["contacts_mm"] = nlohmann::json::array();
    for (const auto& c : gt.contacts) arr.push_back({c.x, c.y, c.z});
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_ground_truth: cannot open " + path);
    f << j.dump(2) << "\n";
}

GroundTruth read_ground_truth(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("read_ground_truth: cannot open " + path);
    nlohmann::json j = nlohmann::json::parse(f);
    GroundTruth gt;
    for (const auto& c : j.at("contacts_mm"))
        gt.contacts.push_back({c[0], c[1], c[2]});
    return gt;
}

SynthParams read_params(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("read_params: cannot open " + path);
    return params_from_json(nlohmann::json::parse(f));
}

void write_dataset(const Volume3D& vol, const GroundTruth& gt,
                   const SynthParams& params, const std::string& out_dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(out_dir))
        throw std::runtime_error("write_dataset: not a directory: " + out_dir);
    write_volume(vol, (fs::path(out_dir) / "volume.raw").string());
    write_ground_truth(gt, (fs::path(out_dir) / "gt.json").string());
    std::ofstream pf(fs::path(out_dir) / "params.json");
    if (!pf) throw std::runtime_error("write_dataset: cannot write params.json in " + out_dir);
    pf << params_to_json(params).dump(2) << "\n";
}

}  // namespace cil
