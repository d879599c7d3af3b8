#include "cil/candidates.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace cil {

CandidateSet extract_candidates(const Volume3D& vol, const Box3& voi, double scale,
                                int max_candidates) {
    if (max_candidates < 1)
        throw std::invalid_argument("extract_candidates: max_candidates must be >= 1");
    Volume3D blob = blob_filter(vol, scale);
    const auto& d = blob.dims();

    // Voxel index range covered by the VOI.
    Vec3 lo = blob.world_to_voxel(voi.min);
    Vec3 hi = blob.world_to_voxel(voi.max);
    int i0 = std::max(0, static_cast<int>(std::ceil(lo.x)));
    int j0 = std::max(0, static_cast<int>(std::ceil(lo.y)));
    int k0 = std::max(0, static_cast<int>(std::ceil(lo.z)));
    int i1 = std::min(d[0] - 1, static_cast<int>(std::floor(hi.x)));
    int j1 = std::min(d[1] - 1, static_cast<int>(std::floor(hi.y)));
    int k1 = std::min(d[2] - 1, static_cast<int>(std::floor(hi.z)));
    if (i0 > i1 || j0 > j1 || k0 > k1)
        throw std::invalid_argument("extract_candidates: VOI does not intersect the volume");

    double sum = 0.0, sum2 = 0.0;
    std::size_t n = 0;
    for (int k = k0; k <= k1; ++k)
        for (int j = j0; j <= j1; ++j)
            for (int i = i0; i <= i1; ++i) {
                double v = blob.at(i, j, k);
                sum += v;
                sum2 += v * v;
                ++n;
            }
    double mean = sum / n;
    double var = std::max(0.0, sum2 / n - mean * mean);
    double threshold = mean + std::sqrt(var);

    struct Peak {
        int i, j, k;
        double score;
    };
    std::vector<Peak> peaks;
    for (int k = k0; k <= k1; ++k)
        for (int j = j0; j <= j1; ++j)
            for (int i = i0; i <= i1; ++i) {
                double v = blob.at(i, j, k);
                if (!(v > threshold)) continue;
                bool strict_max = true;
                for (int dk = -1; dk <= 1 && strict_max; ++dk)
                    for (int dj = -1; dj <= 1 && strict_max; ++dj)
                        for (int di = -1; di <= 1; ++di) {
                            if (di == 0 && dj == 0 && dk == 0) continue;
                            int ni = i + di, nj = j + dj, nk = k + dk;
                            if (ni < 0 || nj < 0 || nk < 0 || ni >= d[0] ||
                                nj >= d[1] || nk >= d[2])
                                continue;
                            if (blob.at(ni, nj, nk) >= v) {
                                strict_max = false;
                                break;
                            }
                        }
                if (strict_max) peaks.push_back({i, j, k, v});
            }

    std::sort(peaks.begin(), peaks.end(),
              [](const Peak& a, const Peak& b) { return a.score > b.score; });
    if (static_cast<int>(peaks.size()) > max_candidates)
        peaks.resize(static_cast<std::size_t>(max_candidates));

    CandidateSet out;
    for (const auto& p : peaks) {
        // Quadratic fit along each axis, offset clamped to +-0.5 voxel.
        Vec3 refined{static_cast<double>(p.i), static_cast<double>(p.j),
                     static_cast<double>(p.k)};
        std::array<int, 3> idx{p.i, p.j, p.k};
        for (int axis = 0; axis < 3; ++axis) {
            if (idx[axis] == 0 || idx[axis] == d[axis] - 1) continue;
            std::array<int, 3> a = idx, b = idx;
            a[axis] -= 1;
            b[axis] += 1;
            double fm = blob.at(a[0], a[1], a[2]);
            double f0 = p.score;
            double fp = blob.at(b[0], b[1], b[2]);
            double denom = fm - 2.0 * f0 + fp;
            if (denom >= 0.0) continue;  // not a proper parabolic peak
            double off = 0.5 * (fm - fp) / denom;
            off = std::clamp(off, -0.5, 0.5);
            refined[axis] += off;
        }
        out.points.push_back(blob.voxel_to_world(refined.x, refined.y, refined.z));
        out.scores.push_back(p.score);
    }
    return out;
}

void write_candidates(const CandidateSet& cands, const std::string& path) {
    nlohmann::json j;
    auto& pts = j["points_mm"] = nlohmann::json::array();
    for (const auto& p : cands.points) pts.push_back({p.x, p.y, p.z});
    j["scores"] = cands.scores;
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_candidates: cannot open " + path);
    f << j.dump(2) << "\n";
}

}  // namespace cil
