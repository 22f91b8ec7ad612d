#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <optional>
#include <thread>
#include <vector>

#include "pctag/detection.hpp"
#include "pctag/voting.hpp"

namespace pctag::pipeline {

struct Config {
    detection::EdgeParams edge;
    double tag_size = 0.6;
    int workers = 1;
    std::optional<double> sigma_sq_override;
    bool use_equal_weights = false;
    std::optional<int> max_bad_bits;
    // Clusters with fewer edge points than this cannot hold a tag and are
    // dropped before the fill pass.
    std::size_t min_cluster_edges = 4;
};

// Wall-clock milliseconds per stage, matching the output schema.
struct Timings {
    double edges_ms = 0.0;
    double clustering_ms = 0.0;
    double fill_ms = 0.0;
    double validation_ms = 0.0;
    double extraction_ms = 0.0;
    double pose_ms = 0.0;
    double voting_ms = 0.0;
    double decoding_ms = 0.0;

    double total_ms() const {
        return edges_ms + clustering_ms + fill_ms + validation_ms + extraction_ms + pose_ms +
               voting_ms + decoding_ms;
    }
};

struct ScanResult {
    std::vector<voting::TagDetection> detections;
    std::size_t edge_count = 0;
    std::size_t cluster_count = 0;
    std::size_t validated_count = 0;
    Timings timings;
};

namespace detail {

struct ClusterWork {
    detection::Cluster cluster;
    std::vector<Point> payload_edges;
    bool validated = false;
    voting::DecodeOutcome outcome;
};

}  // namespace detail

// Runs the full pipeline over one scan. With workers > 1 the per-cluster
// decode fans out to a thread pool; outputs are canonicalized (sorted by
// tag id, then by position) so the result is independent of the worker count.
inline ScanResult detect_scan(const Scan& scan, const DecodingTable& table, const Config& config) {
    using clock = std::chrono::steady_clock;
    auto ms_since = [](clock::time_point t) {
        return std::chrono::duration<double, std::milli>(clock::now() - t).count();
    };

    ScanResult result;

    auto t = clock::now();
    const auto edges = detection::detect_combined_edges(scan, config.edge);
    result.timings.edges_ms = ms_since(t);
    result.edge_count = edges.size();

    t = clock::now();
    auto clusters = detection::cluster_edges(edges, config.tag_size);
    result.timings.clustering_ms = ms_since(t);
    result.cluster_count = clusters.size();

    t = clock::now();
    std::vector<detail::ClusterWork> work;
    for (auto& cluster : clusters) {
        if (cluster.edge_points.size() < config.min_cluster_edges) continue;
        detail::ClusterWork w;
        w.cluster = detection::fill_cluster(scan, std::move(cluster));
        work.push_back(std::move(w));
    }
    result.timings.fill_ms = ms_since(t);

    t = clock::now();
    for (auto& w : work) w.payload_edges = detection::extract_payload_edges(w.cluster, config.edge);
    result.timings.extraction_ms = ms_since(t);

    t = clock::now();
    for (auto& w : work) {
        const auto report = detection::validate_cluster(w.cluster, table.family, w.payload_edges);
        w.validated = report.passed;
        if (report.passed) ++result.validated_count;
    }
    result.timings.validation_ms = ms_since(t);

    voting::DecodeParams params;
    params.tag_size = config.tag_size;
    params.sigma_sq_override = config.sigma_sq_override;
    params.use_equal_weights = config.use_equal_weights;
    params.max_bad_bits = config.max_bad_bits;

    t = clock::now();
    const int workers = std::max(1, config.workers);
    if (workers == 1 || work.size() <= 1) {
        for (auto& w : work)
            if (w.validated) w.outcome = voting::decode_tag(w.cluster, table, params);
    } else {
        std::vector<std::thread> pool;
        std::atomic<std::size_t> next{0};
        for (int i = 0; i < workers; ++i) {
            pool.emplace_back([&]() {
                for (std::size_t j = next.fetch_add(1); j < work.size(); j = next.fetch_add(1))
                    if (work[j].validated)
                        work[j].outcome = voting::decode_tag(work[j].cluster, table, params);
            });
        }
        for (auto& th : pool) th.join();
    }
    const double decode_wall = ms_since(t);

    double pose_ms = 0.0, voting_ms = 0.0, decoding_ms = 0.0;
    for (auto& w : work) {
        if (!w.outcome.ok()) continue;
        auto& det = *w.outcome.detection;
        pose_ms += det.timings.pose_ms;
        voting_ms += det.timings.voting_ms;
        decoding_ms += det.timings.decoding_ms;
        result.detections.push_back(std::move(det));
    }
    if (workers == 1) {
        result.timings.pose_ms = pose_ms;
        result.timings.voting_ms = voting_ms;
        result.timings.decoding_ms = decoding_ms;
    } else {
        // Per-cluster clocks overlap across threads; report the wall-clock
        // split pro rata instead.
        const double cpu = pose_ms + voting_ms + decoding_ms;
        const double scale = cpu > 0.0 ? decode_wall / cpu : 0.0;
        result.timings.pose_ms = pose_ms * scale;
        result.timings.voting_ms = voting_ms * scale;
        result.timings.decoding_ms = decoding_ms * scale;
    }

    std::sort(result.detections.begin(), result.detections.end(),
              [](const voting::TagDetection& a, const voting::TagDetection& b) {
                  if (a.tag_id != b.tag_id) return a.tag_id < b.tag_id;
                  return std::lexicographical_compare(a.mu.data(), a.mu.data() + 3, b.mu.data(),
                                                      b.mu.data() + 3);
              });
    return result;
}

}  // namespace pctag::pipeline
