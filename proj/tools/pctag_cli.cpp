// pctag command-line tool: synthesize scans, detect tags, manage codeword
// families, and benchmark the pipeline per stage.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pctag/pipeline.hpp"
#include "pctag/scene.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyFail = 1;
constexpr int kExitInputError = 2;

int run_synth(const std::string& scene_path, const std::string& out_path,
              std::optional<std::uint64_t> seed) {
    std::ifstream in(scene_path);
    if (!in) {
        std::cerr << "synth: cannot open scene file: " << scene_path << "\n";
        return kExitInputError;
    }
    pctag::Scene scene = pctag::read_scene_json(in);
    if (seed) scene.noise.seed = *seed;
    const auto result = pctag::render_scene_description(scene);

    std::ofstream csv(out_path);
    if (!csv) {
        std::cerr << "synth: cannot write " << out_path << "\n";
        return kExitInputError;
    }
    pctag::write_scan_csv(csv, result.scan);

    const std::string truth_path = out_path + ".truth.json";
    std::ofstream truth(truth_path);
    if (!truth) {
        std::cerr << "synth: cannot write " << truth_path << "\n";
        return kExitInputError;
    }
    pctag::write_truth_json(truth, result.truth);
    return kExitOk;
}

int run_detect(const std::string& scan_path, const std::string& config_path,
               std::optional<int> workers, bool json_format, bool with_timings) {
    std::ifstream cfg_in(config_path);
    if (!cfg_in) {
        std::cerr << "detect: cannot open config file: " << config_path << "\n";
        return kExitInputError;
    }
    pctag::DetectorFileConfig config = pctag::read_config_json(cfg_in);
    if (workers) config.pipeline.workers = *workers;

    std::ifstream scan_in(scan_path);
    if (!scan_in) {
        std::cerr << "detect: cannot open scan file: " << scan_path << "\n";
        return kExitInputError;
    }
    const pctag::Scan scan = pctag::read_scan_csv(scan_in);
    const auto table = pctag::build_hash_table(pctag::load_family_file(config.family_file));
    const auto result = pctag::pipeline::detect_scan(scan, table, config.pipeline);

    if (json_format) {
        std::cout << pctag::scan_result_to_json(result, with_timings).dump(2) << "\n";
    } else {
        std::cout << "detections: " << result.detections.size() << "\n";
        for (const auto& det : result.detections) {
            std::cout << "  id=" << det.tag_id << " k=" << det.rotation_k
                      << " mu=[" << det.mu.x() << ", " << det.mu.y() << ", " << det.mu.z()
                      << "] hamming=" << det.hamming_distance << " bad_bits=" << det.bad_bits
                      << "\n";
        }
        if (with_timings) {
            const auto& t = result.timings;
            std::printf(
                "timings_ms: edges=%.3f clustering=%.3f fill=%.3f validation=%.3f "
                "extraction=%.3f pose=%.3f voting=%.3f decoding=%.3f total=%.3f\n",
                t.edges_ms, t.clustering_ms, t.fill_ms, t.validation_ms, t.extraction_ms,
                t.pose_ms, t.voting_ms, t.decoding_ms, t.total_ms());
        }
    }
    return kExitOk;
}

int run_codebook_generate(int d, int h, std::uint64_t seed, const std::string& name,
                          const std::string& out_path) {
    const pctag::TagFamily family = pctag::generate_lexicode(d, h, seed, name);
    std::ofstream out(out_path);
    if (!out) {
        std::cerr << "codebook: cannot write " << out_path << "\n";
        return kExitInputError;
    }
    pctag::write_family_json(out, family);
    std::cout << "wrote " << family.codewords.size() << " codewords to " << out_path << "\n";
    return kExitOk;
}

int run_codebook_verify(const std::string& path) {
    const pctag::TagFamily family = pctag::load_family_file(path);
    if (const auto violation = pctag::verify_family(family)) {
        std::cerr << "verify: " << *violation << "\n";
        return kExitVerifyFail;
    }
    std::cout << "ok: " << family.codewords.size() << " codewords, min distance >= " << family.h
              << " over all rotations\n";
    return kExitOk;
}

int run_codebook_info(const std::string& path, bool json_format) {
    const pctag::TagFamily family = pctag::load_family_file(path);
    if (json_format) {
        nlohmann::json j{{"name", family.name},
                         {"d", family.d},
                         {"h", family.h},
                         {"codewords", family.codewords.size()},
                         {"max_correctable", family.max_correctable()}};
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << "name: " << family.name << "\nd: " << family.d << "\nh: " << family.h
                  << "\ncodewords: " << family.codewords.size()
                  << "\nmax_correctable: " << family.max_correctable() << "\n";
    }
    return kExitOk;
}

struct StageMeans {
    double edges = 0, clustering = 0, fill = 0, validation = 0, extraction = 0, pose = 0,
           voting = 0, decoding = 0, total = 0;
    void accumulate(const pctag::pipeline::Timings& t) {
        edges += t.edges_ms;
        clustering += t.clustering_ms;
        fill += t.fill_ms;
        validation += t.validation_ms;
        extraction += t.extraction_ms;
        pose += t.pose_ms;
        voting += t.voting_ms;
        decoding += t.decoding_ms;
        total += t.total_ms();
    }
    void divide(double n) {
        edges /= n; clustering /= n; fill /= n; validation /= n; extraction /= n;
        pose /= n; voting /= n; decoding /= n; total /= n;
    }
};

int run_bench(const std::vector<std::string>& scene_paths, const std::string& config_path,
              int repetitions, bool json_format) {
    std::ifstream cfg_in(config_path);
    if (!cfg_in) {
        std::cerr << "bench: cannot open config file: " << config_path << "\n";
        return kExitInputError;
    }
    const pctag::DetectorFileConfig config = pctag::read_config_json(cfg_in);
    const auto table = pctag::build_hash_table(pctag::load_family_file(config.family_file));

    struct Rendered {
        pctag::Scan scan;
        int tag_id;
    };
    std::vector<Rendered> scans;
    for (const auto& path : scene_paths) {
        std::ifstream in(path);
        if (!in) {
            std::cerr << "bench: cannot open scene file: " << path << "\n";
            return kExitInputError;
        }
        const pctag::Scene scene = pctag::read_scene_json(in);
        auto result = pctag::render_scene_description(scene);
        scans.push_back({std::move(result.scan), scene.tag_id});
    }

    StageMeans means;
    int runs = 0;
    int gaussian_hits = 0, equal_hits = 0;
    auto equal_config = config.pipeline;
    equal_config.use_equal_weights = true;
    for (int rep = 0; rep < repetitions; ++rep) {
        for (const auto& rendered : scans) {
            const auto result = pctag::pipeline::detect_scan(rendered.scan, table, config.pipeline);
            means.accumulate(result.timings);
            ++runs;
            if (rep == 0) {
                const bool hit = !result.detections.empty() &&
                                 result.detections.front().tag_id == rendered.tag_id;
                gaussian_hits += hit ? 1 : 0;
                const auto equal_result =
                    pctag::pipeline::detect_scan(rendered.scan, table, equal_config);
                const bool equal_hit = !equal_result.detections.empty() &&
                                       equal_result.detections.front().tag_id == rendered.tag_id;
                equal_hits += equal_hit ? 1 : 0;
            }
        }
    }
    means.divide(static_cast<double>(runs));
    const double hz = means.total > 0 ? 1000.0 / means.total : 0.0;
    const double gaussian_acc = static_cast<double>(gaussian_hits) / scans.size();
    const double equal_acc = static_cast<double>(equal_hits) / scans.size();

    if (json_format) {
        nlohmann::json j;
        j["scenes"] = scene_paths.size();
        j["repetitions"] = repetitions;
        j["mean_ms"] = {{"edges", means.edges},         {"clustering", means.clustering},
                        {"fill", means.fill},           {"validation", means.validation},
                        {"extraction", means.extraction}, {"pose", means.pose},
                        {"voting", means.voting},       {"decoding", means.decoding},
                        {"total", means.total}};
        j["hz"] = hz;
        j["accuracy"] = {{"gaussian", gaussian_acc}, {"equal", equal_acc}};
        std::cout << j.dump(2) << "\n";
    } else {
        std::printf("%-12s %-12s %-12s %-12s %-12s %-12s %-12s\n", "Clustering", "Validation",
                    "Extraction", "Pose", "Decoding", "Total", "Hz");
        std::printf("%-12.3f %-12.3f %-12.3f %-12.3f %-12.3f %-12.3f %-12.1f\n",
                    means.edges + means.clustering + means.fill, means.validation,
                    means.extraction, means.pose, means.voting + means.decoding, means.total, hz);
        std::printf("accuracy: gaussian=%.4f equal=%.4f (over %zu scenes)\n", gaussian_acc,
                    equal_acc, scans.size());
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"planar fiducial tag tools for multi-beam lidar scans"};
    app.require_subcommand(1);

    std::string format = "json";

    // synth
    auto* synth = app.add_subcommand("synth", "render a scene description to a scan CSV");
    std::string scene_path, synth_out;
    std::optional<std::uint64_t> seed_override;
    synth->add_option("scene", scene_path, "scene JSON file")->required();
    synth->add_option("out", synth_out, "output scan CSV path")->required();
    synth->add_option("--seed", seed_override, "override the scene noise seed");

    // detect
    auto* detect = app.add_subcommand("detect", "detect tags in a scan CSV");
    std::string scan_path, config_path;
    std::optional<int> workers_override;
    bool no_timings = false;
    detect->add_option("scan", scan_path, "scan CSV file")->required();
    detect->add_option("--config", config_path, "detector config JSON")->required();
    detect->add_option("--workers", workers_override, "override worker count");
    detect->add_option("--format", format, "output format")->check(CLI::IsMember({"json", "text"}));
    detect->add_flag("--no-timings", no_timings, "omit timing fields from output");

    // codebook
    auto* codebook = app.add_subcommand("codebook", "generate, verify, or inspect tag families");
    codebook->require_subcommand(1);
    auto* generate = codebook->add_subcommand("generate", "generate a lexicode family");
    generate->set_help_flag("--help", "print this help message");  // frees -h for --h below
    int gen_d = 4, gen_h = 5;
    std::uint64_t gen_seed = 1;
    std::string gen_name = "pctag";
    std::string family_out = "family.json";
    generate->add_option("--d", gen_d, "payload grid side length");
    generate->add_option("--h", gen_h, "minimum rotation-inclusive hamming distance");
    generate->add_option("--seed", gen_seed, "candidate shuffle seed");
    generate->add_option("--name", gen_name, "family name");
    generate->add_option("-o,--out", family_out, "output family JSON path");
    auto* verify = codebook->add_subcommand("verify", "exhaustively check a family file");
    std::string family_path;
    verify->add_option("family", family_path, "family JSON file")->required();
    auto* info = codebook->add_subcommand("info", "print family parameters");
    std::string info_path;
    info->add_option("family", info_path, "family JSON file")->required();
    info->add_option("--format", format, "output format")->check(CLI::IsMember({"json", "text"}));

    // bench
    auto* bench = app.add_subcommand("bench", "per-stage timing over a scene set");
    std::vector<std::string> bench_scenes;
    std::string bench_config;
    int repetitions = 10;
    bench->add_option("scenes", bench_scenes, "scene JSON files")->required();
    bench->add_option("--config", bench_config, "detector config JSON")->required();
    bench->add_option("--reps", repetitions, "repetitions per scene")->check(CLI::PositiveNumber);
    bench->add_option("--format", format, "output format")->check(CLI::IsMember({"json", "text"}));

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return run_synth(scene_path, synth_out, seed_override);
        if (detect->parsed())
            return run_detect(scan_path, config_path, workers_override, format == "json",
                              !no_timings);
        if (codebook->parsed()) {
            if (generate->parsed())
                return run_codebook_generate(gen_d, gen_h, gen_seed, gen_name, family_out);
            if (verify->parsed()) return run_codebook_verify(family_path);
            if (info->parsed()) return run_codebook_info(info_path, format == "json");
        }
        if (bench->parsed()) return run_bench(bench_scenes, bench_config, repetitions,
                                              format == "json");
    } catch (const pctag::Error& e) {
        std::cerr << app.get_subcommands().front()->get_name() << ": " << e.what() << "\n";
        return kExitInputError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInputError;
    }
    return kExitInputError;
}
