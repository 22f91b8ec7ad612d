#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

const std::string kCli = PCTAG_CLI_PATH;

struct RunResult {
    int exit_code;
    std::string stdout_text;
};

RunResult run(const std::string& args) {
    const fs::path out = fs::temp_directory_path() / "pctag_cli_test_stdout.txt";
    const std::string cmd = kCli + " " + args + " > " + out.string() + " 2>/dev/null";
    const int status = std::system(cmd.c_str());
    std::ifstream in(out);
    std::stringstream ss;
    ss << in.rdbuf();
    return {WEXITSTATUS(status), ss.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Shared workspace with a generated family, a scene, and a detector config.
struct Workspace {
    fs::path dir;
    fs::path family, scene, config;

    Workspace() {
        dir = fs::temp_directory_path() / "pctag_cli_test";
        fs::create_directories(dir);
        family = dir / "family.json";
        scene = dir / "scene.json";
        config = dir / "config.json";

        REQUIRE(run("codebook generate --d 4 --h 5 --seed 1 -o " + family.string()).exit_code == 0);

        nlohmann::json s;
        s["lidar"] = {{"num_beams", 64},      {"elevation_min", -0.18},
                      {"elevation_max", 0.18}, {"azimuth_step", 0.004363323129985824},
                      {"max_range", 50.0},     {"azimuth_start", -0.3},
                      {"azimuth_span", 0.6}};
        s["family"] = family.string();
        s["tag_id"] = 6;
        s["tag_size"] = 0.6;
        s["backing_extent"] = 0.1;
        s["pose"] = {{"translation", {2.0, 0.0, 0.0}},
                     {"quaternion", {0.9961946980917455, 0.08715574274765817, 0.0, 0.0}}};
        s["background_range"] = 8.0;
        s["noise"] = {{"range_sigma", 0.0},
                      {"intensity_sigma", 0.0},
                      {"transition_dropout_prob", 0.0},
                      {"transition_jitter", 0.0}};
        s["seed"] = 3;
        std::ofstream(scene) << s.dump(2);

        nlohmann::json c;
        c["tag_size"] = 0.6;
        c["family"] = family.string();
        std::ofstream(config) << c.dump(2);
    }
};

Workspace& workspace() {
    static Workspace w;
    return w;
}

}  // namespace

TEST_CASE("synth writes a scan and a truth sidecar deterministically") {
    auto& w = workspace();
    const fs::path a = w.dir / "a.csv";
    const fs::path b = w.dir / "b.csv";
    REQUIRE(run("synth " + w.scene.string() + " " + a.string()).exit_code == 0);
    REQUIRE(run("synth " + w.scene.string() + " " + b.string()).exit_code == 0);
    CHECK(fs::exists(a));
    CHECK(fs::exists(fs::path(a.string() + ".truth.json")));
    CHECK(slurp(a) == slurp(b));
    CHECK(slurp(fs::path(a.string() + ".truth.json")) ==
          slurp(fs::path(b.string() + ".truth.json")));

    const auto truth = nlohmann::json::parse(slurp(fs::path(a.string() + ".truth.json")));
    CHECK(truth["tag_id"] == 6);
}

TEST_CASE("synth with a missing family file exits 2") {
    auto& w = workspace();
    nlohmann::json s = nlohmann::json::parse(slurp(w.scene));
    s["family"] = (w.dir / "no_such_family.json").string();
    const fs::path bad_scene = w.dir / "bad_scene.json";
    std::ofstream(bad_scene) << s.dump();
    CHECK(run("synth " + bad_scene.string() + " " + (w.dir / "bad.csv").string()).exit_code == 2);
}

TEST_CASE("detect round-trips the synthesized tag") {
    auto& w = workspace();
    const fs::path csv = w.dir / "roundtrip.csv";
    REQUIRE(run("synth " + w.scene.string() + " " + csv.string()).exit_code == 0);
    const auto r = run("detect " + csv.string() + " --config " + w.config.string());
    REQUIRE(r.exit_code == 0);
    const auto doc = nlohmann::json::parse(r.stdout_text);
    REQUIRE(doc["detections"].size() == 1);
    const auto& det = doc["detections"][0];
    CHECK(det["tag_id"] == 6);

    const auto truth =
        nlohmann::json::parse(slurp(fs::path(csv.string() + ".truth.json")));
    for (int i = 0; i < 3; ++i)
        CHECK(std::abs(det["mu"][i].get<double>() - truth["mu"][i].get<double>()) < 0.02 * 0.6);
    CHECK(doc["timings_ms"].contains("clustering"));
    CHECK(doc["timings_ms"].contains("total"));
}

TEST_CASE("detect on an empty scan exits 0 with no detections") {
    auto& w = workspace();
    const fs::path csv = w.dir / "empty.csv";
    std::ofstream(csv) << "beam,azimuth_index,x,y,z,intensity\n";
    const auto r = run("detect " + csv.string() + " --config " + w.config.string());
    REQUIRE(r.exit_code == 0);
    const auto doc = nlohmann::json::parse(r.stdout_text);
    CHECK(doc["detections"].empty());
}

TEST_CASE("detect on a malformed CSV exits 2") {
    auto& w = workspace();
    const fs::path csv = w.dir / "malformed.csv";
    std::ofstream(csv) << "beam,azimuth_index,x,y,z,intensity\n0,0,1.0,0.0,bogus,0.5\n";
    CHECK(run("detect " + csv.string() + " --config " + w.config.string()).exit_code == 2);
}

TEST_CASE("codebook generate then verify exits 0; corrupted family exits 1") {
    auto& w = workspace();
    CHECK(run("codebook verify " + w.family.string()).exit_code == 0);

    auto family = nlohmann::json::parse(slurp(w.family));
    // Duplicate the first codeword with one flipped bit: distance 1 violation.
    std::uint64_t first = std::stoull(family["codewords"][0].get<std::string>(), nullptr, 16);
    std::stringstream hex;
    hex << std::hex << (first ^ 1);
    family["codewords"].push_back(hex.str());
    const fs::path corrupted = w.dir / "corrupted.json";
    std::ofstream(corrupted) << family.dump();
    CHECK(run("codebook verify " + corrupted.string()).exit_code == 1);
}

TEST_CASE("codebook info prints the family parameters") {
    auto& w = workspace();
    const auto r = run("codebook info " + w.family.string() + " --format json");
    REQUIRE(r.exit_code == 0);
    const auto doc = nlohmann::json::parse(r.stdout_text);
    CHECK(doc["d"] == 4);
    CHECK(doc["h"] == 5);
    CHECK(doc["codewords"].get<int>() >= 1);
    CHECK(doc["max_correctable"] == 2);
}

TEST_CASE("detect output is identical across worker counts") {
    auto& w = workspace();
    const fs::path csv = w.dir / "workers.csv";
    REQUIRE(run("synth " + w.scene.string() + " " + csv.string()).exit_code == 0);
    const auto base = "detect " + csv.string() + " --config " + w.config.string() +
                      " --no-timings --workers ";
    const auto one = run(base + "1");
    const auto four = run(base + "4");
    REQUIRE(one.exit_code == 0);
    REQUIRE(four.exit_code == 0);
    CHECK(one.stdout_text == four.stdout_text);
}

TEST_CASE("bench reports stage means, rate, and both accuracies") {
    auto& w = workspace();
    const auto r = run("bench " + w.scene.string() + " --config " + w.config.string() +
                       " --reps 2 --format json");
    REQUIRE(r.exit_code == 0);
    const auto doc = nlohmann::json::parse(r.stdout_text);
    for (const char* stage : {"edges", "clustering", "fill", "validation", "extraction", "pose",
                              "voting", "decoding", "total"})
        CHECK(doc["mean_ms"].contains(stage));
    CHECK(doc["hz"].get<double>() > 0.0);
    CHECK(doc["accuracy"]["gaussian"].get<double>() == 1.0);
}
