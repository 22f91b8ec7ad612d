#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "pctag/codebook.hpp"
#include "pctag/errors.hpp"
#include "pctag/grid.hpp"
#include "pctag/pointcloud.hpp"

namespace pctag::synth {

// Nominal rendered intensities.
inline constexpr double kWhiteIntensity = 0.9;
inline constexpr double kBlackIntensity = 0.1;
inline constexpr double kBackgroundIntensity = 0.5;
// A black-white transition is any intensity step larger than this.
inline constexpr double kTransitionIntensityGap = 0.4;

struct LidarModel {
    int num_beams = 0;
    std::vector<double> elevation_angles;  // radians, strictly increasing
    double azimuth_step = 0.0;             // radians
    double max_range = 0.0;                // meters
    // Rendered azimuth window; index j maps to azimuth_start + j * azimuth_step.
    double azimuth_start = -std::numbers::pi;
    int azimuth_count = 0;
};

inline LidarModel make_uniform_model(int num_beams, double elevation_min, double elevation_max,
                                     double azimuth_step, double max_range,
                                     double azimuth_start = -std::numbers::pi,
                                     double azimuth_span = 2.0 * std::numbers::pi) {
    LidarModel m;
    m.num_beams = num_beams;
    m.elevation_angles.reserve(static_cast<std::size_t>(num_beams));
    for (int i = 0; i < num_beams; ++i)
        m.elevation_angles.push_back(
            elevation_min + (elevation_max - elevation_min) * i / std::max(1, num_beams - 1));
    m.azimuth_step = azimuth_step;
    m.max_range = max_range;
    m.azimuth_start = azimuth_start;
    m.azimuth_count = static_cast<int>(std::floor(azimuth_span / azimuth_step));
    return m;
}

// A planar marker on a freestanding backing. The local frame has the plane at
// x = 0 with in-plane axes (y, z); identity mount faces the sensor upright.
struct TagTarget {
    TagFamily family;
    int tag_id = 0;
    double tag_size = 0.0;        // side of the full (d+2)x(d+2) marker, meters
    double backing_extent = 0.0;  // margin of the backing around the marker
    Eigen::Isometry3d mount = Eigen::Isometry3d::Identity();

    Codeword codeword() const { return family.codewords.at(static_cast<std::size_t>(tag_id)); }
};

// Untextured rectangular panel used as background clutter.
struct ClutterPanel {
    Eigen::Isometry3d pose = Eigen::Isometry3d::Identity();
    double half_width = 0.5;
    double half_height = 0.5;
    double intensity = 0.7;
};

struct NoiseModel {
    double range_sigma = 0.0;
    double intensity_sigma = 0.0;
    double transition_dropout_prob = 0.0;
    double transition_jitter = 0.0;  // in-plane displacement sigma at transitions
    std::uint64_t seed = 0;
};

enum class ReturnKind { Background, Clutter, Backing, Marker };

struct ReturnLabel {
    ReturnKind kind = ReturnKind::Background;
    int cell_row = -1;
    int cell_col = -1;
};

struct RenderTruth {
    int tag_id = -1;
    Eigen::Vector3d mu = Eigen::Vector3d::Zero();
    Eigen::Quaterniond q = Eigen::Quaterniond::Identity();
    std::array<Eigen::Vector3d, 4> corners{};
    std::unordered_map<std::int64_t, ReturnLabel> labels;
    std::size_t marker_returns = 0;
    std::size_t target_returns = 0;  // marker + backing
    std::size_t total_returns = 0;

    static std::int64_t key(int beam, int azimuth_index) {
        return (static_cast<std::int64_t>(beam) << 32) | static_cast<std::uint32_t>(azimuth_index);
    }
    const ReturnLabel* label_of(int beam, int azimuth_index) const {
        const auto it = labels.find(key(beam, azimuth_index));
        return it == labels.end() ? nullptr : &it->second;
    }
};

struct RenderResult {
    Scan scan;
    RenderTruth truth;
};

namespace detail {

struct PlaneHit {
    double range;
    double u;
    double v;
};

inline std::optional<PlaneHit> intersect_plane(const Eigen::Isometry3d& pose,
                                               const Eigen::Vector3d& dir, double half_u,
                                               double half_v) {
    const Eigen::Vector3d n = pose.linear().col(0);
    const double denom = n.dot(dir);
    if (std::abs(denom) < 1e-12) return std::nullopt;
    const double range = n.dot(pose.translation()) / denom;
    if (range <= 1e-9) return std::nullopt;
    const Eigen::Vector3d local = pose.inverse() * (range * dir);
    if (std::abs(local.y()) > half_u || std::abs(local.z()) > half_v) return std::nullopt;
    return PlaneHit{range, local.y(), local.z()};
}

// Deterministic RNG independent of standard library internals.
struct Rng {
    std::uint64_t state;
    explicit Rng(std::uint64_t seed) : state(seed) {}
    double uniform01() {
        // 53-bit mantissa in [0, 1)
        return static_cast<double>(pctag::detail::splitmix64(state) >> 11) * 0x1.0p-53;
    }
    double gaussian() {
        double u1 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }
};

}  // namespace detail

// Intensity of the tag surface at local in-plane coordinates (u, v), together
// with the grid cell when (u, v) falls on the marker.
inline ReturnLabel classify_target_point(const TagTarget& target, double u, double v) {
    const MarkerGrid grid{target.tag_size, target.family.d};
    const auto cell = grid.cell_at(u, v);
    if (!cell) return ReturnLabel{ReturnKind::Backing, -1, -1};
    return ReturnLabel{ReturnKind::Marker, cell->first, cell->second};
}

inline double target_intensity(const TagTarget& target, const ReturnLabel& label) {
    if (label.kind == ReturnKind::Backing) return kWhiteIntensity;
    const MarkerGrid grid{target.tag_size, target.family.d};
    if (grid.is_border(label.cell_row, label.cell_col)) return kBlackIntensity;
    const int bit_index = grid.payload_index(label.cell_row, label.cell_col);
    const bool white = target.codeword() >> bit_index & 1;
    return white ? kWhiteIntensity : kBlackIntensity;
}

// Casts one ray per (beam, azimuth index) and returns the scan plus a
// ground-truth sidecar labeling every emitted return. Bit-identical for
// identical inputs.
inline RenderResult render_scene(const LidarModel& model, const TagTarget& target,
                                 double background_range,
                                 const std::vector<ClutterPanel>& clutter = {}) {
    const Eigen::Vector3d t = target.mount.translation();
    const Eigen::Vector3d outward_normal = target.mount.linear() * Eigen::Vector3d(-1, 0, 0);
    if (outward_normal.dot(-t) <= 0.0)
        throw TargetBehindSensor("tag plane faces away from the sensor");
    if (t.norm() >= model.max_range)
        throw TargetOutOfRange("target at " + std::to_string(t.norm()) + " m exceeds max range");
    if (background_range <= t.norm())
        throw TargetOutOfRange("background must be beyond the target");

    const double half_ext = target.tag_size / 2.0 + target.backing_extent;

    RenderResult out;
    out.scan.num_beams = model.num_beams;
    out.scan.beams.resize(static_cast<std::size_t>(model.num_beams));
    out.truth.tag_id = target.tag_id;
    out.truth.mu = t;
    out.truth.q = Eigen::Quaterniond(target.mount.linear());
    const auto canon = canonical_corners(target.tag_size);
    for (int i = 0; i < 4; ++i) out.truth.corners[static_cast<std::size_t>(i)] = target.mount * canon[static_cast<std::size_t>(i)];

    for (int m = 0; m < model.num_beams; ++m) {
        const double el = model.elevation_angles[static_cast<std::size_t>(m)];
        const double cos_el = std::cos(el), sin_el = std::sin(el);
        auto& beam = out.scan.beams[static_cast<std::size_t>(m)];
        for (int j = 0; j < model.azimuth_count; ++j) {
            const double az = model.azimuth_start + j * model.azimuth_step;
            const Eigen::Vector3d dir(cos_el * std::cos(az), cos_el * std::sin(az), sin_el);

            std::optional<detail::PlaneHit> best = detail::intersect_plane(target.mount, dir, half_ext, half_ext);
            ReturnLabel label;
            double intensity = 0.0;
            if (best) {
                label = classify_target_point(target, best->u, best->v);
                intensity = target_intensity(target, label);
            }
            for (const auto& panel : clutter) {
                const auto hit = detail::intersect_plane(panel.pose, dir, panel.half_width, panel.half_height);
                if (hit && (!best || hit->range < best->range)) {
                    best = hit;
                    label = ReturnLabel{ReturnKind::Clutter, -1, -1};
                    intensity = panel.intensity;
                }
            }

            double range;
            if (best && best->range <= model.max_range) {
                range = best->range;
            } else if (background_range <= model.max_range) {
                range = background_range;
                label = ReturnLabel{ReturnKind::Background, -1, -1};
                intensity = kBackgroundIntensity;
            } else {
                continue;  // no return on this ray
            }

            Point p;
            p.position = range * dir;
            p.intensity = intensity;
            p.beam = m;
            p.azimuth_index = j;
            beam.push_back(p);
            out.truth.labels.emplace(RenderTruth::key(m, j), label);
            ++out.truth.total_returns;
            if (label.kind == ReturnKind::Marker) {
                ++out.truth.marker_returns;
                ++out.truth.target_returns;
            } else if (label.kind == ReturnKind::Backing) {
                ++out.truth.target_returns;
            }
        }
    }
    return out;
}

// Marks returns whose sequence neighbor differs in intensity by more than the
// black-white transition gap. Indices follow sequence position, not azimuth.
inline std::vector<std::vector<bool>> transition_adjacency(const Scan& scan) {
    std::vector<std::vector<bool>> adjacent(scan.beams.size());
    for (std::size_t m = 0; m < scan.beams.size(); ++m) {
        const auto& beam = scan.beams[m];
        adjacent[m].assign(beam.size(), false);
        for (std::size_t i = 0; i + 1 < beam.size(); ++i) {
            if (std::abs(beam[i + 1].intensity - beam[i].intensity) > kTransitionIntensityGap) {
                adjacent[m][i] = true;
                adjacent[m][i + 1] = true;
            }
        }
    }
    return adjacent;
}

// Deterministic noise pass: drops and jitters returns adjacent to intensity
// transitions, then applies Gaussian range and intensity perturbations.
inline Scan apply_noise(const Scan& scan, const NoiseModel& noise) {
    detail::Rng rng(noise.seed * 0x9e3779b97f4a7c15ULL + 1);
    const auto adjacent = transition_adjacency(scan);

    Scan out;
    out.num_beams = scan.num_beams;
    out.timestamp = scan.timestamp;
    out.beams.resize(scan.beams.size());
    for (std::size_t m = 0; m < scan.beams.size(); ++m) {
        const auto& beam = scan.beams[m];
        auto& out_beam = out.beams[m];
        out_beam.reserve(beam.size());
        for (std::size_t i = 0; i < beam.size(); ++i) {
            Point p = beam[i];
            if (adjacent[m][i]) {
                if (rng.uniform01() < noise.transition_dropout_prob) continue;
                // Slide along the local beam direction; keeps the point on the
                // surface it came from.
                const std::size_t prev = i > 0 ? i - 1 : i;
                const std::size_t next = i + 1 < beam.size() ? i + 1 : i;
                Eigen::Vector3d tangent = beam[next].position - beam[prev].position;
                const double g = rng.gaussian();
                if (tangent.squaredNorm() > 1e-18)
                    p.position += noise.transition_jitter * g * tangent.normalized();
            }
            const double range_noise = rng.gaussian() * noise.range_sigma;
            if (p.position.squaredNorm() > 1e-18)
                p.position += range_noise * p.position.normalized();
            p.intensity += rng.gaussian() * noise.intensity_sigma;
            p.intensity = std::clamp(p.intensity, 0.0, 1.0);
            out_beam.push_back(p);
        }
    }
    return out;
}

}  // namespace pctag::synth
