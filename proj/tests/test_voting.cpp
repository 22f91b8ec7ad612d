#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include "pctag/codebook.hpp"
#include "pctag/synth.hpp"
#include "pctag/voting.hpp"

using namespace pctag;
using namespace pctag::voting;

namespace {

struct RenderedCluster {
    synth::RenderResult render;
    detection::Cluster cluster;
    synth::TagTarget target;
};

// Renders a facing tag and builds a cluster directly from the labeled target
// returns, bypassing the clustering stage.
RenderedCluster rendered_cluster(int tag_id, int quarter_turns = 0,
                                 double distance = 2.0, double in_plane_offset = 0.0) {
    synth::TagTarget target;
    target.family = generate_lexicode(4, 5, 1);
    target.tag_id = tag_id;
    target.tag_size = 0.6;
    target.backing_extent = 0.1;
    target.mount = Eigen::Isometry3d::Identity();
    target.mount.translation() = Eigen::Vector3d(distance, 0, 0);
    target.mount.rotate(Eigen::AngleAxisd(
        quarter_turns * std::numbers::pi / 2.0 + in_plane_offset, Eigen::Vector3d::UnitX()));

    const auto model = synth::make_uniform_model(64, -0.18, 0.18,
                                                 0.25 * std::numbers::pi / 180.0, 50.0, -0.3, 0.6);
    RenderedCluster out{synth::render_scene(model, target, 8.0), {}, target};
    for (const auto& beam : out.render.scan.beams)
        for (const auto& p : beam) {
            const auto* label = out.render.truth.label_of(p.beam, p.azimuth_index);
            if (label && label->kind != synth::ReturnKind::Background)
                out.cluster.filled_points.push_back(p);
        }
    return out;
}

// Exact alignment derived from the mount instead of the corner fit.
pose::TemplateAlignment truth_alignment(const Eigen::Isometry3d& mount) {
    pose::TemplateAlignment a;
    a.rotation = mount.linear().transpose();
    a.translation = -a.rotation * mount.translation();
    return a;
}

double rotation_angle(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
    return Eigen::AngleAxisd(a.transpose() * b).angle();
}

}  // namespace

TEST_CASE("map_to_template maps template corners to canonical corners") {
    const double s = 0.6;
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n;
    Eigen::Isometry3d mount = Eigen::Isometry3d::Identity();
    mount.linear() = Eigen::Quaterniond(1.0, 0.2 * n(rng), 0.2 * n(rng), 0.2 * n(rng))
                         .normalized()
                         .toRotationMatrix();
    mount.translation() = Eigen::Vector3d(2.5, 0.3, -0.2);

    const auto canon = canonical_corners(s);
    std::vector<Point> corner_points;
    for (const auto& c : canon) corner_points.push_back({mount * c, 0.1, 0, 0});

    const auto mapped = map_to_template(corner_points, truth_alignment(mount), s);
    REQUIRE(mapped.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(mapped[i].uv.x() == Catch::Approx(canon[i].y()).margin(1e-9));
        CHECK(mapped[i].uv.y() == Catch::Approx(canon[i].z()).margin(1e-9));
    }
}

TEST_CASE("identity alignment leaves origin-centered square points unchanged") {
    const double s = 0.6;
    std::vector<Point> points;
    for (int i = -2; i <= 2; ++i)
        for (int j = -2; j <= 2; ++j)
            points.push_back({Eigen::Vector3d(0.0, 0.1 * i, 0.1 * j), 0.5, 0, 0});
    const auto mapped = map_to_template(points, pose::TemplateAlignment{}, s);
    REQUIRE(mapped.size() == points.size());
    for (std::size_t i = 0; i < mapped.size(); ++i) {
        CHECK(mapped[i].uv.x() == points[i].position.y());
        CHECK(mapped[i].uv.y() == points[i].position.z());
    }
}

TEST_CASE("map_to_template throws when too many points leave the plane") {
    std::vector<Point> points;
    for (int i = 0; i < 100; ++i)
        points.push_back({Eigen::Vector3d(i < 10 ? 0.5 : 0.0, 0.0, 0.0), 0.5, 0, i});
    CHECK_THROWS_AS(map_to_template(points, pose::TemplateAlignment{}, 0.6), OutOfPlane);
    // at exactly 5% (5 violations in 100 points) it passes
    std::vector<Point> boundary(points.begin() + 5, points.end());
    for (int i = 0; i < 5; ++i) boundary.push_back({Eigen::Vector3d(0, 0, 0), 0.5, 1, i});
    CHECK_NOTHROW(map_to_template(boundary, pose::TemplateAlignment{}, 0.6));
}

TEST_CASE("noiseless marker points land in their rendered grid cells") {
    const auto rc = rendered_cluster(5);
    const MarkerGrid grid{rc.target.tag_size, 4};
    const auto alignment = truth_alignment(rc.target.mount);

    std::size_t checked = 0;
    for (const auto& p : rc.cluster.filled_points) {
        const auto* label = rc.render.truth.label_of(p.beam, p.azimuth_index);
        if (!label || label->kind != synth::ReturnKind::Marker) continue;
        const auto mapped = map_to_template({p}, alignment, rc.target.tag_size);
        REQUIRE(mapped.size() == 1);
        const auto cell = grid.cell_at(mapped[0].uv.x(), mapped[0].uv.y());
        REQUIRE(cell.has_value());
        CHECK(cell->first == label->cell_row);
        CHECK(cell->second == label->cell_col);
        ++checked;
    }
    CHECK(checked >= 320);
}

TEST_CASE("default sigma squared follows the marker-size formula") {
    CHECK(default_sigma_sq(0.6, 4) == Catch::Approx(0.025));
    CHECK(default_sigma_sq(1.2, 2) == Catch::Approx(1.2 / 16.0));
}

TEST_CASE("vote reduces to the intensity when all intensities in a cell are equal") {
    GridCell cell;
    cell.center = Eigen::Vector2d(0.05, -0.05);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-0.05, 0.05);
    for (int i = 0; i < 12; ++i)
        cell.points.push_back({cell.center + Eigen::Vector2d(u(rng), u(rng)), 0.73});
    const auto bits = gaussian_vote({cell}, 0.6, 4);
    REQUIRE(bits.size() == 1);
    CHECK(bits[0].p == Catch::Approx(0.73));
    CHECK(bits[0].bit == Bit::One);
    CHECK(!bits[0].is_bad);
}

TEST_CASE("a cell with four points is a bad bit") {
    GridCell cell;
    cell.center = Eigen::Vector2d::Zero();
    for (int i = 0; i < 4; ++i)
        cell.points.push_back({Eigen::Vector2d(0.001 * i, 0), 0.9});
    const auto bits = gaussian_vote({cell}, 0.6, 4);
    REQUIRE(bits.size() == 1);
    CHECK(bits[0].is_bad);
    CHECK(bits[0].bit == Bit::Unknown);
    CHECK(bits[0].n_points == 4);
}

TEST_CASE("P_k is invariant under point permutation") {
    GridCell cell;
    cell.center = Eigen::Vector2d::Zero();
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(-0.05, 0.05);
    std::uniform_real_distribution<double> inten(0.0, 1.0);
    for (int i = 0; i < 20; ++i)
        cell.points.push_back({Eigen::Vector2d(u(rng), u(rng)), inten(rng)});

    const double base = gaussian_vote({cell}, 0.6, 4)[0].p;
    for (int trial = 0; trial < 5; ++trial) {
        std::shuffle(cell.points.begin(), cell.points.end(), rng);
        CHECK(gaussian_vote({cell}, 0.6, 4)[0].p == Catch::Approx(base).epsilon(1e-12));
    }
}

TEST_CASE("equal-weight vote coincides with gaussian when weights cannot matter") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-0.04, 0.04);
    std::uniform_real_distribution<double> inten(0.0, 1.0);
    SECTION("single point per cell") {
        std::vector<GridCell> cells(6);
        for (auto& c : cells) {
            c.center = Eigen::Vector2d(u(rng), u(rng));
            for (int i = 0; i < 5; ++i) c.points.push_back({c.center, inten(rng)});
        }
        const auto g = gaussian_vote(cells, 0.6, 4);
        const auto e = equal_weight_vote(cells);
        for (std::size_t i = 0; i < cells.size(); ++i) {
            CHECK(g[i].p == Catch::Approx(e[i].p).margin(1e-12));
            CHECK(g[i].bit == e[i].bit);
        }
    }
    SECTION("equal intensities per cell") {
        GridCell cell;
        cell.center = Eigen::Vector2d::Zero();
        for (int i = 0; i < 9; ++i) cell.points.push_back({{u(rng), u(rng)}, 0.31});
        CHECK(gaussian_vote({cell}, 0.6, 4)[0].p ==
              Catch::Approx(equal_weight_vote({cell})[0].p).margin(1e-12));
    }
}

TEST_CASE("decode_tag recovers a noiseless tag rotated a quarter turn") {
    const auto rc = rendered_cluster(7, 1);
    const auto table = build_hash_table(rc.target.family);
    DecodeParams params;
    params.tag_size = rc.target.tag_size;

    const auto outcome = decode_tag(rc.cluster, table, params);
    REQUIRE(outcome.ok());
    const auto& det = *outcome.detection;
    CHECK(det.tag_id == 7);
    CHECK(det.hamming_distance == 0);
    CHECK((det.mu - rc.render.truth.mu).norm() < 0.02 * rc.target.tag_size);
    // The recovered orientation must reproduce the mount, quarter turn included.
    CHECK(rotation_angle(det.q.toRotationMatrix(), rc.target.mount.linear()) <
          2.0 * std::numbers::pi / 180.0);
    CHECK(std::abs(det.q.norm() - 1.0) < 1e-9);
}

TEST_CASE("physical quarter turns shift rotation_k and keep the id") {
    const auto table = build_hash_table(generate_lexicode(4, 5, 1));
    DecodeParams params;
    params.tag_size = 0.6;

    // A 10-degree offset keeps the start-corner choice unambiguous, so the
    // decoded index depends only on the physical quarter turns.
    const double offset = 10.0 * std::numbers::pi / 180.0;
    int k0 = -1;
    for (int k = 0; k < 4; ++k) {
        const auto rc = rendered_cluster(9, k, 2.0, offset);
        const auto outcome = decode_tag(rc.cluster, table, params);
        REQUIRE(outcome.ok());
        CHECK(outcome.detection->tag_id == 9);
        if (k == 0) {
            k0 = outcome.detection->rotation_k;
        } else {
            INFO("physical quarter turns: " << k);
            CHECK(((outcome.detection->rotation_k - k0 - k) % 4 + 4) % 4 == 0);
        }
        CHECK(rotation_angle(outcome.detection->q.toRotationMatrix(),
                             rc.target.mount.linear()) < 2.0 * std::numbers::pi / 180.0);
    }
}

TEST_CASE("a blank white plane is rejected") {
    detection::Cluster cluster;
    for (int i = 0; i < 40; ++i)
        for (int j = 0; j < 40; ++j)
            cluster.filled_points.push_back(
                {Eigen::Vector3d(2.0, -0.39 + 0.02 * i, -0.39 + 0.02 * j), 0.9, i, j});
    const auto table = build_hash_table(generate_lexicode(4, 5, 1));
    DecodeParams params;
    params.tag_size = 0.6;
    const auto outcome = decode_tag(cluster, table, params);
    CHECK(!outcome.ok());
    REQUIRE(outcome.rejection.has_value());
}

TEST_CASE("two starved cells decode through the bad-bit allowance") {
    auto rc = rendered_cluster(4);
    const MarkerGrid grid{rc.target.tag_size, 4};

    // Drop every return of two payload cells.
    auto is_masked = [&](const Point& p) {
        const auto* label = rc.render.truth.label_of(p.beam, p.azimuth_index);
        if (!label || label->kind != synth::ReturnKind::Marker) return false;
        if (grid.is_border(label->cell_row, label->cell_col)) return false;
        const int i = grid.payload_index(label->cell_row, label->cell_col);
        return i == 5 || i == 10;
    };
    auto& pts = rc.cluster.filled_points;
    pts.erase(std::remove_if(pts.begin(), pts.end(), is_masked), pts.end());

    const auto table = build_hash_table(rc.target.family);
    DecodeParams params;
    params.tag_size = rc.target.tag_size;
    const auto outcome = decode_tag(rc.cluster, table, params);
    REQUIRE(outcome.ok());
    CHECK(outcome.detection->tag_id == 4);
    CHECK(outcome.detection->bad_bits == 2);
}

TEST_CASE("decode_tag is deterministic") {
    const auto rc = rendered_cluster(2);
    const auto table = build_hash_table(rc.target.family);
    DecodeParams params;
    params.tag_size = rc.target.tag_size;
    const auto a = decode_tag(rc.cluster, table, params);
    const auto b = decode_tag(rc.cluster, table, params);
    REQUIRE(a.ok());
    REQUIRE(b.ok());
    CHECK(a.detection->tag_id == b.detection->tag_id);
    CHECK(a.detection->rotation_k == b.detection->rotation_k);
    CHECK(a.detection->mu == b.detection->mu);
    CHECK(a.detection->q.coeffs() == b.detection->q.coeffs());
}
