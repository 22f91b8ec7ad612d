#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Core>

#include "pctag/codebook.hpp"
#include "pctag/pointcloud.hpp"

namespace pctag::detection {

struct EdgeParams {
    int ell_distance = 2;            // neighbor offset for the distance gradient
    double distance_threshold = 0.3; // meters
    int ell_intensity = 1;           // neighbor offset for the intensity gradient
    double intensity_threshold = 0.4;
};

// Cuboid-bounded group of edge points, later filled with raw returns.
struct Cluster {
    std::vector<Point> edge_points;
    std::vector<Point> filled_points;
    Eigen::Vector3d min_bound = Eigen::Vector3d::Zero();
    Eigen::Vector3d max_bound = Eigen::Vector3d::Zero();
    double tau = 0.0;  // tag_size / 4

    bool contains(const Eigen::Vector3d& p) const {
        return (p.array() >= min_bound.array()).all() && (p.array() <= max_bound.array()).all();
    }
};

enum class RejectReason { None, TooFewPoints, TooFewPayloadEdges };

struct ValidationReport {
    std::size_t eta = 0;  // filled point count
    std::size_t psi = 0;  // payload edge count
    bool passed = false;
    RejectReason reject_reason = RejectReason::None;
};

inline std::size_t eta_threshold(int d) {
    return 5 * static_cast<std::size_t>((d + 4) * (d + 4));
}

inline std::size_t psi_threshold(int d) {
    return 2 * static_cast<std::size_t>(d + 2);
}

// Distance-gradient edge detector: a point is an edge point when the larger
// of its two ell-offset neighbor distances exceeds the threshold. Points near
// a beam end use the one available neighbor.
inline std::vector<Point> detect_edges(const Scan& scan, const EdgeParams& params) {
    std::vector<Point> edges;
    const int ell = params.ell_distance;
    for (const auto& beam : scan.beams) {
        const int n = static_cast<int>(beam.size());
        for (int i = 0; i < n; ++i) {
            double grad = -1.0;
            if (i + ell < n)
                grad = (beam[static_cast<std::size_t>(i + ell)].position - beam[static_cast<std::size_t>(i)].position).norm();
            if (i - ell >= 0)
                grad = std::max(grad, (beam[static_cast<std::size_t>(i - ell)].position - beam[static_cast<std::size_t>(i)].position).norm());
            if (grad > params.distance_threshold) edges.push_back(beam[static_cast<std::size_t>(i)]);
        }
    }
    return edges;
}

// Intensity-gradient edge detector over a whole scan, same stencil as
// detect_edges but on intensities with the ell_intensity offset.
inline std::vector<Point> detect_intensity_edges(const Scan& scan, const EdgeParams& params) {
    std::vector<Point> edges;
    const int ell = params.ell_intensity;
    for (const auto& beam : scan.beams) {
        const int n = static_cast<int>(beam.size());
        for (int i = 0; i < n; ++i) {
            double grad = -1.0;
            if (i + ell < n)
                grad = std::abs(beam[static_cast<std::size_t>(i + ell)].intensity - beam[static_cast<std::size_t>(i)].intensity);
            if (i - ell >= 0)
                grad = std::max(grad, std::abs(beam[static_cast<std::size_t>(i - ell)].intensity - beam[static_cast<std::size_t>(i)].intensity));
            if (grad > params.intensity_threshold) edges.push_back(beam[static_cast<std::size_t>(i)]);
        }
    }
    return edges;
}

// Union of distance and intensity edges in canonical scan order (beam-major,
// azimuth ascending), deduplicated. A tag's silhouette produces only two
// disconnected edge columns per side under the distance gradient; the payload
// transitions bridge them, so clustering runs on the union.
inline std::vector<Point> detect_combined_edges(const Scan& scan, const EdgeParams& params) {
    const auto distance = detect_edges(scan, params);
    const auto intensity = detect_intensity_edges(scan, params);
    std::vector<Point> merged;
    merged.reserve(distance.size() + intensity.size());
    auto di = distance.begin();
    auto ii = intensity.begin();
    auto key = [](const Point& p) { return std::pair<int, int>(p.beam, p.azimuth_index); };
    while (di != distance.end() || ii != intensity.end()) {
        if (ii == intensity.end() || (di != distance.end() && key(*di) < key(*ii))) {
            merged.push_back(*di++);
        } else if (di == distance.end() || key(*ii) < key(*di)) {
            merged.push_back(*ii++);
        } else {
            merged.push_back(*di++);
            ++ii;
        }
    }
    return merged;
}

// Single-pass single-linkage clustering with the per-axis signed-distance
// linkage criterion. A point joins the first cluster whose tau-inflated
// bounds contain it; processing order (beam-major, azimuth ascending) is the
// canonical order, so results are deterministic.
inline std::vector<Cluster> cluster_edges(const std::vector<Point>& edges, double tag_size) {
    const double tau = tag_size / 4.0;
    std::vector<Cluster> clusters;
    for (const Point& p : edges) {
        bool linked = false;
        for (auto& cluster : clusters) {
            const auto& q = p.position;
            if ((q.array() >= cluster.min_bound.array() - tau).all() &&
                (q.array() <= cluster.max_bound.array() + tau).all()) {
                cluster.edge_points.push_back(p);
                cluster.min_bound = cluster.min_bound.cwiseMin(q);
                cluster.max_bound = cluster.max_bound.cwiseMax(q);
                linked = true;
                break;
            }
        }
        if (!linked) {
            Cluster c;
            c.edge_points.push_back(p);
            c.min_bound = p.position.array() - tau;
            c.max_bound = p.position.array() + tau;
            c.tau = tau;
            clusters.push_back(std::move(c));
        }
    }
    return clusters;
}

// Fills a cluster with every scan return inside its bounds (inclusive).
inline Cluster fill_cluster(const Scan& scan, Cluster cluster) {
    cluster.filled_points.clear();
    for (const auto& beam : scan.beams)
        for (const auto& p : beam)
            if (cluster.contains(p.position)) cluster.filled_points.push_back(p);
    return cluster;
}

// Intensity-gradient edge detector over the filled points of a cluster,
// applied per beam in azimuth order.
inline std::vector<Point> extract_payload_edges(const Cluster& cluster, const EdgeParams& params) {
    // Regroup the filled points by beam; fill_cluster preserves scan order, so
    // each group is already azimuth-ascending.
    std::vector<std::vector<const Point*>> by_beam;
    for (const Point& p : cluster.filled_points) {
        if (by_beam.empty() || by_beam.back().back()->beam != p.beam) by_beam.emplace_back();
        by_beam.back().push_back(&p);
    }
    std::vector<Point> edges;
    const int ell = params.ell_intensity;
    for (const auto& beam : by_beam) {
        const int n = static_cast<int>(beam.size());
        for (int i = 0; i < n; ++i) {
            double grad = -1.0;
            if (i + ell < n)
                grad = std::abs(beam[static_cast<std::size_t>(i + ell)]->intensity - beam[static_cast<std::size_t>(i)]->intensity);
            if (i - ell >= 0)
                grad = std::max(grad, std::abs(beam[static_cast<std::size_t>(i - ell)]->intensity - beam[static_cast<std::size_t>(i)]->intensity));
            if (grad > params.intensity_threshold) edges.push_back(*beam[static_cast<std::size_t>(i)]);
        }
    }
    return edges;
}

inline ValidationReport validate_cluster(const Cluster& cluster, const TagFamily& family,
                                         const std::vector<Point>& payload_edges) {
    ValidationReport report;
    report.eta = cluster.filled_points.size();
    report.psi = payload_edges.size();
    if (report.eta < eta_threshold(family.d)) {
        report.reject_reason = RejectReason::TooFewPoints;
    } else if (report.psi < psi_threshold(family.d)) {
        report.reject_reason = RejectReason::TooFewPayloadEdges;
    } else {
        report.passed = true;
    }
    return report;
}

}  // namespace pctag::detection
