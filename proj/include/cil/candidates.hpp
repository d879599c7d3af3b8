#ifndef CIL_CANDIDATES_HPP
#define CIL_CANDIDATES_HPP

#include <string>
#include <vector>

#include "cil/volume.hpp"

namespace cil {

/// Candidate contact points with their blob-filter scores, sorted by
/// descending score.
struct CandidateSet {
    std::vector<WorldPoint> points;
    std::vector<double> scores;

    std::size_t size() const { return points.size(); }
};

/// Local maxima of the blob response inside the VOI: strict 26-neighborhood
/// maximality, thresholded at mean + 1 std of the in-VOI response, capped at
/// max_candidates, with quadratic sub-voxel refinement clamped to +-0.5 voxel.
CandidateSet extract_candidates(const Volume3D& vol, const Box3& voi, double scale,
                                int max_candidates);

/// Debug dump: {"points_mm": [...], "scores": [...]}.
void write_candidates(const CandidateSet& cands, const std::string& path);

}  // namespace cil

#endif
