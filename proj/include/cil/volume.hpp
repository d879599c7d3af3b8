#ifndef CIL_VOLUME_HPP
#define CIL_VOLUME_HPP

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "cil/geometry.hpp"
#include "cil/rng.hpp"

namespace cil {

/// 3D scalar intensity grid with physical spacing and origin.
/// Voxel (i,j,k) sits at origin + (i,j,k)*spacing in world mm; data is stored
/// u-fastest. Treated as immutable after construction: all operations return
/// new volumes.
class Volume3D {
public:
    Volume3D() = default;
    Volume3D(std::array<int, 3> dims, Vec3 spacing, Vec3 origin,
             std::vector<double> data);
    /// Zero-filled volume.
    Volume3D(std::array<int, 3> dims, Vec3 spacing, Vec3 origin);

    const std::array<int, 3>& dims() const { return dims_; }
    const Vec3& spacing() const { return spacing_; }
    const Vec3& origin() const { return origin_; }
    const std::vector<double>& data() const { return data_; }
    std::vector<double>& mutable_data() { min_cache_.reset(); return data_; }

    std::size_t size() const { return data_.size(); }
    std::size_t index(int i, int j, int k) const {
        return static_cast<std::size_t>(i) +
               static_cast<std::size_t>(dims_[0]) *
                   (static_cast<std::size_t>(j) +
                    static_cast<std::size_t>(dims_[1]) * static_cast<std::size_t>(k));
    }
    double at(int i, int j, int k) const { return data_[index(i, j, k)]; }
    double& at(int i, int j, int k) { min_cache_.reset(); return data_[index(i, j, k)]; }

    Vec3 voxel_to_world(double i, double j, double k) const {
        return {origin_.x + i * spacing_.x, origin_.y + j * spacing_.y,
                origin_.z + k * spacing_.z};
    }
    Vec3 world_to_voxel(const Vec3& p) const {
        return {(p.x - origin_.x) / spacing_.x, (p.y - origin_.y) / spacing_.y,
                (p.z - origin_.z) / spacing_.z};
    }
    /// World-space bounds of the voxel-center grid.
    Box3 bounds() const {
        return {origin_, voxel_to_world(dims_[0] - 1, dims_[1] - 1, dims_[2] - 1)};
    }

    double min_value() const;
    double max_value() const;

    /// Verify the type invariants; throws std::invalid_argument on violation.
    void validate() const;

private:
    std::array<int, 3> dims_{0, 0, 0};
    Vec3 spacing_{1, 1, 1};
    Vec3 origin_{0, 0, 0};
    std::vector<double> data_;
    mutable std::optional<std::pair<double, double>> min_cache_;
};

/// Separable Gaussian smoothing, kernel truncated at +-4 sigma and
/// renormalized to unit sum; borders are clamp-replicated. sigma is in mm;
/// sigma = 0 returns the input unchanged.
Volume3D gaussian_smooth(const Volume3D& vol, double sigma);

/// Scale-normalized negated Laplacian-of-Gaussian: -scale^2 * lap(G_scale * I).
/// Bright blobs of radius ~ scale*sqrt(3) give maximal positive response.
Volume3D blob_filter(const Volume3D& vol, double scale);

/// Catmull-Rom cubic resampling to target_dims. Target grid aligns the corner
/// voxel centers with the source, so physical extent is preserved and
/// target_dims == dims is the identity. Borders clamp-replicate.
Volume3D downsample_cubic(const Volume3D& vol, std::array<int, 3> target_dims);

/// Trilinear interpolation at world point p. Points outside the voxel-center
/// grid return `oob` if given, otherwise the volume's minimum intensity.
double sample_trilinear(const Volume3D& vol, const WorldPoint& p,
                        std::optional<double> oob = std::nullopt);

/// Adds i.i.d. zero-mean Gaussian noise with standard deviation sigma_n.
Volume3D add_white_noise(const Volume3D& vol, double sigma_n, Rng& rng);

/// Raw f32le voxel stream (u-fastest) + JSON sidecar {dims, spacing_mm,
/// origin_mm, dtype}. `path` is the raw file; sidecar is path + ".json".
void write_volume(const Volume3D& vol, const std::string& path);
Volume3D read_volume(const std::string& path);

/// Snap every voxel to its nearest f32 value, so a written volume reads back
/// bit-identically.
Volume3D quantize_f32(const Volume3D& vol);

}  // namespace cil

#endif
