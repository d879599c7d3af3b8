#include "cil/volume.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace cil {

Volume3D::Volume3D(std::array<int, 3> dims, Vec3 spacing, Vec3 origin,
                   std::vector<double> data)
    : dims_(dims), spacing_(spacing), origin_(origin), data_(std::move(data)) {
    validate();
}

Volume3D::Volume3D(std::array<int, 3> dims, Vec3 spacing, Vec3 origin)
    : Volume3D(dims, spacing, origin,
               std::vector<double>(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2],
                                   0.0)) {}

void Volume3D::validate() const {
    for (int d : dims_)
        if (d <= 0) throw std::invalid_argument("Volume3D: dims must be positive");
    if (!(spacing_.x > 0 && spacing_.y > 0 && spacing_.z > 0))
        throw std::invalid_argument("Volume3D: spacing must be strictly positive");
    if (!origin_.finite() || !spacing_.finite())
        throw std::invalid_argument("Volume3D: non-finite geometry");
    std::size_t expected =
        static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2];
    if (data_.size() != expected)
        throw std::invalid_argument("Volume3D: data length does not match dims");
    for (double v : data_)
        if (!std::isfinite(v))
            throw std::invalid_argument("Volume3D: non-finite intensity");
}

double Volume3D::min_value() const {
    if (!min_cache_) {
        auto [lo, hi] = std::minmax_element(data_.begin(), data_.end());
        min_cache_ = {*lo, *hi};
    }
    return min_cache_->first;
}

double Volume3D::max_value() const {
    min_value();
    return min_cache_->second;
}

namespace {

int clamp_index(int i, int n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); }

std::vector<double> gaussian_kernel(double sigma_vox) {
    int radius = static_cast<int>(std::ceil(4.0 * sigma_vox));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        double v = std::exp(-0.5 * (i / sigma_vox) * (i / sigma_vox));
        k[i + radius] = v;
        sum += v;
    }
    for (double& v : k) v /= sum;
    return k;
}

/// Convolve along one axis with clamped borders.
void convolve_axis(const Volume3D& in, Volume3D& out, int axis,
                   const std::vector<double>& kernel) {
    const auto& d = in.dims();
    int radius = (static_cast<int>(kernel.size()) - 1) / 2;
    for (int k = 0; k < d[2]; ++k)
        for (int j = 0; j < d[1]; ++j)
            for (int i = 0; i < d[0]; ++i) {
                std::array<int, 3> idx{i, j, k};
                double acc = 0.0;
                for (int t = -radius; t <= radius; ++t) {
                    std::array<int, 3> q = idx;
                    q[axis] = clamp_index(idx[axis] + t, d[axis]);
                    acc += kernel[t + radius] * in.at(q[0], q[1], q[2]);
                }
                out.at(i, j, k) = acc;
            }
}

}  // namespace

Volume3D gaussian_smooth(const Volume3D& vol, double sigma) {
    if (!std::isfinite(sigma) || sigma < 0)
        throw std::invalid_argument("gaussian_smooth: sigma must be finite and >= 0");
    if (sigma == 0.0) return vol;
    Volume3D a = vol;
    Volume3D b(vol.dims(), vol.spacing(), vol.origin());
    for (int axis = 0; axis < 3; ++axis) {
        double sigma_vox = sigma / vol.spacing()[axis];
        auto kernel = gaussian_kernel(sigma_vox);
        convolve_axis(a, b, axis, kernel);
        std::swap(a, b);
    }
    return a;
}

Volume3D blob_filter(const Volume3D& vol, double scale) {
    if (!std::isfinite(scale) || scale <= 0)
        throw std::invalid_argument("blob_filter: scale must be finite and > 0");
    Volume3D g = gaussian_smooth(vol, scale);
    Volume3D out(vol.dims(), vol.spacing(), vol.origin());
    const auto& d = vol.dims();
    const Vec3& sp = vol.spacing();
    for (int k = 0; k < d[2]; ++k)
        for (int j = 0; j < d[1]; ++j)
            for (int i = 0; i < d[0]; ++i) {
                double lap = 0.0;
                std::array<int, 3> idx{i, j, k};
                for (int axis = 0; axis < 3; ++axis) {
                    std::array<int, 3> lo = idx, hi = idx;
                    lo[axis] = clamp_index(idx[axis] - 1, d[axis]);
                    hi[axis] = clamp_index(idx[axis] + 1, d[axis]);
                    double h = sp[axis];
                    lap += (g.at(hi[0], hi[1], hi[2]) - 2.0 * g.at(i, j, k) +
                            g.at(lo[0], lo[1], lo[2])) /
                           (h * h);
                }
                out.at(i, j, k) = -scale * scale * lap;
            }
    return out;
}

namespace {

/// Catmull-Rom weight for |t| <= 2.
double catmull_rom(double t) {
    t = std::fabs(t);
    if (t < 1.0) return 1.5 * t * t * t - 2.5 * t * t + 1.0;
    if (t < 2.0) return -0.5 * t * t * t + 2.5 * t * t - 4.0 * t + 2.0;
    return 0.0;
}

/// Resample one axis to a new size with align-corner mapping.
Volume3D resample_axis_cubic(const Volume3D& in, int axis, int target) {
    const auto& d = in.dims();
    std::array<int, 3> nd = d;
    nd[axis] = target;
    double ratio = (d[axis] == 1 || target == 1)
                       ? 0.0
                       : static_cast<double>(d[axis] - 1) / (target - 1);
    Vec3 sp = in.spacing();
    sp[axis] = sp[axis] * (target > 1 ? static_cast<double>(d[axis] - 1) / (target - 1) : 1.0);
    Volume3D out(nd, sp, in.origin());
    for (int k = 0; k < nd[2]; ++k)
        for (int j = 0; j < nd[1]; ++j)
            for (int i = 0; i < nd[0]; ++i) {
                std::array<int, 3> idx{i, j, k};
                double src = idx[axis] * ratio;
                int base = static_cast<int>(std::floor(src));
                double frac = src - base;
                double acc = 0.0;
                for (int t = -1; t <= 2; ++t) {
                    std::array<int, 3> q = idx;
                    q[axis] = clamp_index(base + t, d[axis]);
                    acc += catmull_rom(t - frac) * in.at(q[0], q[1], q[2]);
                }
                out.at(i, j, k) = acc;
            }
    return out;
}

}  // namespace

Volume3D downsample_cubic(const Volume3D& vol, std::array<int, 3> target_dims) {
    for (int a = 0; a < 3; ++a) {
        if (target_dims[a] < 2)
            throw std::invalid_argument("downsample_cubic: target dims must be >= 2");
        if (target_dims[a] > vol.dims()[a])
            throw std::invalid_argument("downsample_cubic: target dims exceed source");
    }
    if (target_dims == vol.dims()) return vol;
    Volume3D v = vol;
    for (int axis = 0; axis < 3; ++axis)
        if (target_dims[axis] != v.dims()[axis])
            v = resample_axis_cubic(v, axis, target_dims[axis]);
    return v;
}

double sample_trilinear(const Volume3D& vol, const WorldPoint& p,
                        std::optional<double> oob) {
    if (!p.finite())
        throw std::invalid_argument("sample_trilinear: non-finite point");
    Vec3 v = vol.world_to_voxel(p);
    const auto& d = vol.dims();
    if (v.x < 0 || v.y < 0 || v.z < 0 || v.x > d[0] - 1 || v.y > d[1] - 1 ||
        v.z > d[2] - 1)
        return oob ? *oob : vol.min_value();
    int i0 = std::min(static_cast<int>(v.x), d[0] - 2 < 0 ? 0 : d[0] - 2);
    int j0 = std::min(static_cast<int>(v.y), d[1] - 2 < 0 ? 0 : d[1] - 2);
    int k0 = std::min(static_cast<int>(v.z), d[2] - 2 < 0 ? 0 : d[2] - 2);
    double fx = v.x - i0, fy = v.y - j0, fz = v.z - k0;
    int i1 = clamp_index(i0 + 1, d[0]);
    int j1 = clamp_index(j0 + 1, d[1]);
    int k1 = clamp_index(k0 + 1, d[2]);
    double c00 = vol.at(i0, j0, k0) * (1 - fx) + vol.at(i1, j0, k0) * fx;
    double c10 = vol.at(i0, j1, k0) * (1 - fx) + vol.at(i1, j1, k0) * fx;
    double c01 = vol.at(i0, j0, k1) * (1 - fx) + vol.at(i1, j0, k1) * fx;
    double c11 = vol.at(i0, j1, k1) * (1 - fx) + vol.at(i1, j1, k1) * fx;
    double c0 = c00 * (1 - fy) + c10 * fy;
    double c1 = c01 * (1 - fy) + c11 * fy;
    return c0 * (1 - fz) + c1 * fz;
}

Volume3D add_white_noise(const Volume3D& vol, double sigma_n, Rng& rng) {
    if (!std::isfinite(sigma_n) || sigma_n < 0)
        throw std::invalid_argument("add_white_noise: sigma_n must be finite and >= 0");
    if (sigma_n == 0.0) return vol;
    Volume3D out = vol;
    std::normal_distribution<double> noise(0.0, sigma_n);
    for (double& v : out.mutable_data()) v += noise(rng);
    return out;
}

Volume3D quantize_f32(const Volume3D& vol) {
    Volume3D out = vol;
    for (double& v : out.mutable_data()) v = static_cast<double>(static_cast<float>(v));
    return out;
}

void write_volume(const Volume3D& vol, const std::string& path) {
    std::ofstream raw(path, std::ios::binary);
    if (!raw) throw std::runtime_error("write_volume: cannot open " + path);
    std::vector<float> buf(vol.size());
    for (std::size_t i = 0; i < buf.size(); ++i)
        buf[i] = static_cast<float>(vol.data()[i]);
    raw.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!raw) throw std::runtime_error("write_volume: write failed for " + path);
    raw.close();

    nlohmann::json side;
    side["dims"] = vol.dims();
    side["spacing_mm"] = {vol.spacing().x, vol.spacing().y, vol.spacing().z};
    side["origin_mm"] = {vol.origin().x, vol.origin().y, vol.origin().z};
    side["dtype"] = "f32le";
    std::ofstream js(path + ".json");
    if (!js) throw std::runtime_error("write_volume: cannot open " + path + ".json");
    js << side.dump(2) << "\n";
}

Volume3D read_volume(const std::string& path) {
    std::ifstream js(path + ".json");
    if (!js) throw std::runtime_error("read_volume: missing sidecar " + path + ".json");
    nlohmann::json side = nlohmann::json::parse(js);
    if (side.value("dtype", "") != "f32le")
        throw std::runtime_error("read_volume: unsupported dtype in " + path + ".json");
    std::array<int, 3> dims = side.at("dims");
    auto sp = side.at("spacing_mm");
    auto og = side.at("origin_mm");
    Vec3 spacing{sp[0], sp[1], sp[2]};
    Vec3 origin{og[0], og[1], og[2]};

    std::ifstream raw(path, std::ios::binary);
    if (!raw) throw std::runtime_error("read_volume: cannot open " + path);
    std::size_t n = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    std::vector<float> buf(n);
    raw.read(reinterpret_cast<char*>(buf.data()),
             static_cast<std::streamsize>(n * sizeof(float)));
    if (static_cast<std::size_t>(raw.gcount()) != n * sizeof(float))
        throw std::runtime_error("read_volume: voxel stream length mismatch in " + path);
    std::vector<double> data(n);
    for (std::size_t i = 0; i < n; ++i) data[i] = buf[i];
    return Volume3D(dims, spacing, origin, std::move(data));
}

}  // namespace cil
