#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "cil/synthgen.hpp"

using namespace cil;

namespace {

SynthParams small_params() {
    SynthParams p;
    p.seed = 7;
    p.l_prior = 1.0;
    p.alpha = 0.4;
    p.lambda1 = 0.2;
    p.lambda2 = 1.0;
    p.n_electrodes = 8;
    p.hires_dims = {48, 48, 48};
    p.target_dims = {24, 24, 24};
    p.sigma1 = 0.3;
    return p;
}

}  // namespace

TEST_CASE("helix recursion: straight-line case") {
    SynthParams p = small_params();
    p.lambda1 = 0.0;
    p.lambda2 = 0.0;
    GroundTruth gt = generate_helix_positions(p, {0, 0, 0});
    REQUIRE(gt.contacts.size() == 8);
    for (int n = 0; n < 8; ++n) {
        CHECK(gt.contacts[n].x == doctest::Approx(n).epsilon(1e-12));
        CHECK(gt.contacts[n].y == doctest::Approx(0.0));
        CHECK(gt.contacts[n].z == doctest::Approx(0.0));
    }
}

TEST_CASE("helix recursion: hand-unrolled quarter-turn case") {
    SynthParams p = small_params();
    p.lambda1 = 0.0;
    p.lambda2 = 1.0;
    p.alpha = 3.14159265358979323846 / 2.0;
    p.n_electrodes = 5;
    GroundTruth gt = generate_helix_positions(p, {0, 0, 0});
    WorldPoint want[5] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}, {-1, 1, 0}};
    for (int n = 0; n < 5; ++n) {
        CHECK(gt.contacts[n].x == doctest::Approx(want[n].x).epsilon(1e-12));
        CHECK(gt.contacts[n].y == doctest::Approx(want[n].y).epsilon(1e-12));
        CHECK(gt.contacts[n].z == doctest::Approx(want[n].z).epsilon(1e-12));
    }
}

TEST_CASE("helix step length: constant u,v projection and 3D spacing") {
    SynthParams p = small_params();
    p.lambda1 = 0.35;
    GroundTruth gt = generate_helix_positions(p, {1, 2, 3});
    double want3d = p.l_prior * std::sqrt(1.0 + p.lambda1 * p.lambda1);
    for (std::size_t n = 0; n + 1 < gt.contacts.size(); ++n) {
        Vec3 d = gt.contacts[n + 1] - gt.contacts[n];
        CHECK(std::hypot(d.x, d.y) == doctest::Approx(p.l_prior).epsilon(1e-12));
        CHECK(d.norm() == doctest::Approx(want3d).epsilon(1e-12));
    }
}

TEST_CASE("literal unit pitch reading is available behind the flag") {
    SynthParams p = small_params();
    p.lambda1 = 0.2;
    p.literal_unit_pitch = true;
    GroundTruth gt = generate_helix_positions(p, {0, 0, 0});
    CHECK((gt.contacts[1] - gt.contacts[0]).z == doctest::Approx(p.l_prior));
}

TEST_CASE("mirror/rotation: identity, involution, isometry") {
    SynthParams p = small_params();
    GroundTruth gt = generate_helix_positions(p, {0, 0, 0});

    SynthParams ident = p;
    GroundTruth same = apply_mirror_rotation(gt, ident);
    for (std::size_t i = 0; i < gt.contacts.size(); ++i)
        CHECK(distance(same.contacts[i], gt.contacts[i]) < 1e-12);

    SynthParams mir = p;
    mir.lambda_mirror = 1;
    GroundTruth twice = apply_mirror_rotation(apply_mirror_rotation(gt, mir), mir);
    for (std::size_t i = 0; i < gt.contacts.size(); ++i)
        CHECK(distance(twice.contacts[i], gt.contacts[i]) < 1e-12);

    SynthParams rot = p;
    rot.lambda_mirror = 1;
    rot.theta_u = 0.3;
    rot.theta_v = -1.2;
    rot.theta_w = 2.1;
    GroundTruth moved = apply_mirror_rotation(gt, rot);
    for (std::size_t i = 0; i < gt.contacts.size(); ++i)
        for (std::size_t j = i + 1; j < gt.contacts.size(); ++j)
            CHECK(std::fabs(distance(moved.contacts[i], moved.contacts[j]) -
                            distance(gt.contacts[i], gt.contacts[j])) < 1e-12);
}

TEST_CASE("place_impulses: indicator sum and determinism") {
    SynthParams p = small_params();
    p.n_electrodes = 3;
    GroundTruth gt = generate_helix_positions(p, {0, 0, 0});

    Rng r0(1);
    Volume3D i0 = place_impulses(gt, p, r0);
    double sum = 0;
    int nonzero = 0;
    for (double v : i0.data()) {
        sum += v;
        if (v != 0.0) {
            CHECK(v == 1.0);
            ++nonzero;
        }
    }
    CHECK(nonzero == 3);
    CHECK(sum == doctest::Approx(3.0));

    p.n_bones = 6;
    Rng r1(5), r2(5);
    Volume3D a = place_impulses(gt, p, r1);
    Volume3D b = place_impulses(gt, p, r2);
    CHECK(a.data() == b.data());
    double sum_b = 0;
    for (double v : a.data()) sum_b += v;
    CHECK(sum_b <= 3.0 + 6.0);
    CHECK(sum_b >= 3.0);

    // No distractor lands within 2*l_prior of a contact.
    const auto& d = a.dims();
    for (int k = 0; k < d[2]; ++k)
        for (int j = 0; j < d[1]; ++j)
            for (int i = 0; i < d[0]; ++i) {
                if (a.at(i, j, k) == 0.0) continue;
                WorldPoint w = a.voxel_to_world(i, j, k);
                double min_d = 1e300;
                for (const auto& c : gt.contacts) min_d = std::min(min_d, distance(w, c));
                bool is_contact = min_d < 0.87 * a.spacing().x;  // within voxel rounding
                if (!is_contact) CHECK(min_d > 2.0 * p.l_prior - 0.87 * a.spacing().x);
            }
}

TEST_CASE("render pipeline: identity and affine map") {
    SynthParams p = small_params();
    p.n_electrodes = 3;
    GroundTruth gt = generate_helix_positions(p, {0, 0, 0});
    Rng r(1);
    Volume3D i0 = place_impulses(gt, p, r);

    SynthParams ident = p;
    ident.sigma1 = 0.0;
    ident.target_dims = ident.hires_dims;
    ident.lambda3 = 1.0;
    ident.lambda4 = 0.0;
    ident.noise_sigma = 0.0;
    Rng r2(1);
    Volume3D syn = render_synthetic_volume(i0, ident, r2);
    CHECK(syn.data() == i0.data());

    SynthParams aff = ident;
    aff.lambda3 = 2.0;
    aff.lambda4 = 3.0;
    Volume3D c(i0.dims(), i0.spacing(), i0.origin(),
               std::vector<double>(i0.size(), 0.5));
    Rng r3(1);
    Volume3D out = render_synthetic_volume(c, aff, r3);
    for (double v : out.data()) CHECK(v == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("sample_params: degenerate ranges, mirror balance, determinism") {
    SynthRanges ranges;
    ranges.l_prior = {1.5, 1.5};
    ranges.alpha = {0.25, 0.25};
    Rng r(3);
    SynthParams p = sample_params(r, ranges);
    CHECK(p.l_prior == 1.5);
    CHECK(p.alpha == 0.25);

    Rng r1(9), r2(9);
    SynthParams a = sample_params(r1, ranges), b = sample_params(r2, ranges);
    CHECK(a.lambda1 == b.lambda1);
    CHECK(a.theta_w == b.theta_w);
    CHECK(a.lambda_mirror == b.lambda_mirror);

    Rng rm(1234);
    int ones = 0;
    for (int i = 0; i < 1000; ++i) ones += sample_params(rm, ranges).lambda_mirror;
    CHECK(ones >= 453);  // binomial 3-sigma band around 500
    CHECK(ones <= 547);

    SynthRanges bad;
    bad.alpha = {0.5, 0.1};
    Rng rb(1);
    CHECK_THROWS_AS(sample_params(rb, bad), std::invalid_argument);
}

TEST_CASE("full generation is deterministic and GT stays inside the target grid") {
    SynthParams p = small_params();
    p.n_bones = 4;
    p.noise_sigma = 0.05;
    p.theta_u = 0.4;
    p.theta_v = 1.1;
    p.theta_w = -0.6;
    Dataset a = generate_dataset(p);
    Dataset b = generate_dataset(p);
    CHECK(a.volume.data() == b.volume.data());
    CHECK(a.gt.contacts.size() == b.gt.contacts.size());

    Box3 bounds = a.volume.bounds();
    for (const auto& c : a.gt.contacts) CHECK(bounds.contains(c));

    double want = p.l_prior * std::sqrt(1.0 + p.lambda1 * p.lambda1);
    for (std::size_t n = 0; n + 1 < a.gt.contacts.size(); ++n)
        CHECK(distance(a.gt.contacts[n], a.gt.contacts[n + 1]) ==
              doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("write_dataset round-trips and preserves contact order") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "cil_synth_test";
    fs::create_directories(dir);

    SynthParams p = small_params();
    Dataset ds = generate_dataset(p);
    write_dataset(ds.volume, ds.gt, ds.params, dir.string());

    Volume3D vol = read_volume((dir / "volume.raw").string());
    CHECK(vol.data() == ds.volume.data());
    GroundTruth gt = read_ground_truth((dir / "gt.json").string());
    REQUIRE(gt.contacts.size() == ds.gt.contacts.size());
    for (std::size_t i = 0; i < gt.contacts.size(); ++i)
        CHECK(gt.contacts[i] == ds.gt.contacts[i]);
    SynthParams rp = read_params((dir / "params.json").string());
    CHECK(rp.seed == p.seed);
    CHECK(rp.alpha == p.alpha);

    CHECK_THROWS_WITH_AS(write_dataset(ds.volume, ds.gt, ds.params, "/no/such/dir"),
                         doctest::Contains("/no/such/dir"), std::runtime_error);
    fs::remove_all(dir);
}
