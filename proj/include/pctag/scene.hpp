#pragma once

#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Geometry>
#include <nlohmann/json.hpp>

#include "pctag/pipeline.hpp"
#include "pctag/synth.hpp"

namespace pctag {

// Scene description consumed by the synth command: lidar model, tag family
// file, tag id, mount pose, tag size, noise parameters, and optional clutter.
struct Scene {
    synth::LidarModel model;
    std::string family_file;
    int tag_id = 0;
    double tag_size = 0.6;
    double backing_extent = 0.1;
    Eigen::Isometry3d mount = Eigen::Isometry3d::Identity();
    double background_range = 10.0;
    synth::NoiseModel noise;
    std::vector<synth::ClutterPanel> clutter;
};

namespace scene_detail {

inline Eigen::Vector3d vec3(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 3) throw ParseError("expected [x,y,z]");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline Eigen::Quaterniond quat(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 4) throw ParseError("expected [w,x,y,z]");
    return Eigen::Quaterniond(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
                              j[3].get<double>())
        .normalized();
}

inline nlohmann::json to_json(const Eigen::Vector3d& v) {
    return nlohmann::json::array({v.x(), v.y(), v.z()});
}

inline nlohmann::json to_json(const Eigen::Quaterniond& q) {
    return nlohmann::json::array({q.w(), q.x(), q.y(), q.z()});
}

}  // namespace scene_detail

inline Scene read_scene_json(std::istream& is) {
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad scene file: ") + e.what());
    }
    Scene scene;
    try {
        const auto& lm = j.at("lidar");
        scene.model = synth::make_uniform_model(
            lm.at("num_beams").get<int>(), lm.at("elevation_min").get<double>(),
            lm.at("elevation_max").get<double>(), lm.at("azimuth_step").get<double>(),
            lm.at("max_range").get<double>(), lm.value("azimuth_start", -std::numbers::pi),
            lm.value("azimuth_span", 2.0 * std::numbers::pi));
        scene.family_file = j.at("family").get<std::string>();
        scene.tag_id = j.at("tag_id").get<int>();
        scene.tag_size = j.at("tag_size").get<double>();
        scene.backing_extent = j.value("backing_extent", 0.1);
        const auto& pose = j.at("pose");
        scene.mount = Eigen::Isometry3d::Identity();
        scene.mount.linear() = scene_detail::quat(pose.at("quaternion")).toRotationMatrix();
        scene.mount.translation() = scene_detail::vec3(pose.at("translation"));
        scene.background_range = j.value("background_range", 10.0);
        if (j.contains("noise")) {
            const auto& n = j.at("noise");
            scene.noise.range_sigma = n.value("range_sigma", 0.0);
            scene.noise.intensity_sigma = n.value("intensity_sigma", 0.0);
            scene.noise.transition_dropout_prob = n.value("transition_dropout_prob", 0.0);
            scene.noise.transition_jitter = n.value("transition_jitter", 0.0);
        }
        scene.noise.seed = j.value("seed", std::uint64_t{0});
        for (const auto& c : j.value("clutter", nlohmann::json::array())) {
            synth::ClutterPanel panel;
            panel.pose.linear() = scene_detail::quat(c.at("quaternion")).toRotationMatrix();
            panel.pose.translation() = scene_detail::vec3(c.at("translation"));
            panel.half_width = c.at("half_width").get<double>();
            panel.half_height = c.at("half_height").get<double>();
            panel.intensity = c.value("intensity", 0.7);
            scene.clutter.push_back(panel);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad scene file: ") + e.what());
    }
    return scene;
}

inline void write_scene_json(std::ostream& os, const Scene& scene) {
    nlohmann::json j;
    j["lidar"] = {
        {"num_beams", scene.model.num_beams},
        {"elevation_min", scene.model.elevation_angles.front()},
        {"elevation_max", scene.model.elevation_angles.back()},
        {"azimuth_step", scene.model.azimuth_step},
        {"max_range", scene.model.max_range},
        {"azimuth_start", scene.model.azimuth_start},
        {"azimuth_span", scene.model.azimuth_count * scene.model.azimuth_step},
    };
    j["family"] = scene.family_file;
    j["tag_id"] = scene.tag_id;
    j["tag_size"] = scene.tag_size;
    j["backing_extent"] = scene.backing_extent;
    j["pose"] = {{"translation", scene_detail::to_json(scene.mount.translation())},
                 {"quaternion", scene_detail::to_json(Eigen::Quaterniond(scene.mount.linear()))}};
    j["background_range"] = scene.background_range;
    j["noise"] = {{"range_sigma", scene.noise.range_sigma},
                  {"intensity_sigma", scene.noise.intensity_sigma},
                  {"transition_dropout_prob", scene.noise.transition_dropout_prob},
                  {"transition_jitter", scene.noise.transition_jitter}};
    j["seed"] = scene.noise.seed;
    auto& cl = j["clutter"] = nlohmann::json::array();
    for (const auto& c : scene.clutter) {
        cl.push_back({{"translation", scene_detail::to_json(c.pose.translation())},
                      {"quaternion", scene_detail::to_json(Eigen::Quaterniond(c.pose.linear()))},
                      {"half_width", c.half_width},
                      {"half_height", c.half_height},
                      {"intensity", c.intensity}});
    }
    os << j.dump(2) << "\n";
}

inline TagFamily load_family_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open family file: " + path);
    return read_family_json(in);
}

inline synth::RenderResult render_scene_description(const Scene& scene) {
    synth::TagTarget target;
    target.family = load_family_file(scene.family_file);
    target.tag_id = scene.tag_id;
    target.tag_size = scene.tag_size;
    target.backing_extent = scene.backing_extent;
    target.mount = scene.mount;
    auto result = synth::render_scene(scene.model, target, scene.background_range, scene.clutter);
    result.scan = synth::apply_noise(result.scan, scene.noise);
    return result;
}

// Ground-truth sidecar written next to a synthesized scan.
inline void write_truth_json(std::ostream& os, const synth::RenderTruth& truth) {
    nlohmann::json j;
    j["tag_id"] = truth.tag_id;
    j["mu"] = scene_detail::to_json(truth.mu);
    j["q"] = scene_detail::to_json(truth.q);
    auto& corners = j["corners"] = nlohmann::json::array();
    for (const auto& c : truth.corners) corners.push_back(scene_detail::to_json(c));
    j["marker_returns"] = truth.marker_returns;
    j["target_returns"] = truth.target_returns;
    j["total_returns"] = truth.total_returns;
    auto& labels = j["labels"] = nlohmann::json::array();
    std::vector<std::int64_t> keys;
    keys.reserve(truth.labels.size());
    for (const auto& [key, label] : truth.labels) keys.push_back(key);
    std::sort(keys.begin(), keys.end());
    for (const std::int64_t key : keys) {
        const auto& label = truth.labels.at(key);
        labels.push_back({{"beam", static_cast<int>(key >> 32)},
                          {"azimuth_index", static_cast<int>(key & 0xffffffff)},
                          {"kind", static_cast<int>(label.kind)},
                          {"cell_row", label.cell_row},
                          {"cell_col", label.cell_col}});
    }
    os << j.dump() << "\n";
}

// Detector configuration file: edge parameters, tag size, family file, and
// worker count.
struct DetectorFileConfig {
    pipeline::Config pipeline;
    std::string family_file;
};

inline DetectorFileConfig read_config_json(std::istream& is) {
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad config file: ") + e.what());
    }
    DetectorFileConfig config;
    try {
        if (j.contains("edge")) {
            const auto& e = j.at("edge");
            config.pipeline.edge.ell_distance = e.value("ell_distance", 2);
            config.pipeline.edge.distance_threshold = e.value("distance_threshold", 0.3);
            config.pipeline.edge.ell_intensity = e.value("ell_intensity", 1);
            config.pipeline.edge.intensity_threshold = e.value("intensity_threshold", 0.4);
        }
        config.pipeline.tag_size = j.at("tag_size").get<double>();
        config.family_file = j.at("family").get<std::string>();
        config.pipeline.workers = j.value("workers", 1);
        if (j.contains("sigma_sq")) config.pipeline.sigma_sq_override = j.at("sigma_sq").get<double>();
        if (j.contains("max_bad_bits")) config.pipeline.max_bad_bits = j.at("max_bad_bits").get<int>();
        config.pipeline.use_equal_weights = j.value("equal_weights", false);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad config file: ") + e.what());
    }
    return config;
}

inline nlohmann::json detection_to_json(const voting::TagDetection& det, bool with_timings = true) {
    nlohmann::json j;
    j["tag_id"] = det.tag_id;
    j["mu"] = scene_detail::to_json(det.mu);
    j["q"] = scene_detail::to_json(det.q);
    j["rotation_k"] = det.rotation_k;
    j["hamming_distance"] = det.hamming_distance;
    j["bad_bits"] = det.bad_bits;
    if (with_timings)
        j["timings_ms"] = {{"pose", det.timings.pose_ms},
                           {"voting", det.timings.voting_ms},
                           {"decoding", det.timings.decoding_ms}};
    return j;
}

inline nlohmann::json scan_result_to_json(const pipeline::ScanResult& result,
                                          bool with_timings = true) {
    nlohmann::json j;
    auto& dets = j["detections"] = nlohmann::json::array();
    for (const auto& det : result.detections) dets.push_back(detection_to_json(det, with_timings));
    j["edge_count"] = result.edge_count;
    j["cluster_count"] = result.cluster_count;
    j["validated_count"] = result.validated_count;
    if (with_timings) {
        const auto& t = result.timings;
        j["timings_ms"] = {{"edges", t.edges_ms},       {"clustering", t.clustering_ms},
                           {"fill", t.fill_ms},         {"validation", t.validation_ms},
                           {"extraction", t.extraction_ms}, {"pose", t.pose_ms},
                           {"voting", t.voting_ms},     {"decoding", t.decoding_ms},
                           {"total", t.total_ms()}};
    }
    return j;
}

}  // namespace pctag
