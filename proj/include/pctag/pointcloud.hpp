#pragma once

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <istream>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pctag/errors.hpp"

namespace pctag {

// One LiDAR return. Intensity is normalized to [0,1] at ingestion.
struct Point {
    Eigen::Vector3d position{0, 0, 0};
    double intensity = 0.0;
    int beam = 0;
    int azimuth_index = 0;
};

// A full revolution's worth of returns, organized per beam and sorted
// ascending by azimuth index within each beam. Immutable after build_scan.
struct Scan {
    std::vector<std::vector<Point>> beams;
    int num_beams = 0;
    std::optional<double> timestamp;

    std::size_t total_points() const {
        std::size_t n = 0;
        for (const auto& b : beams) n += b.size();
        return n;
    }
};

struct ScanStats {
    std::vector<std::size_t> points_per_beam;
    std::size_t total_points = 0;
    std::size_t min_per_beam = 0;
    std::size_t max_per_beam = 0;
    double mean_per_beam = 0.0;
};

// Organizes an unordered point list into a Scan. Duplicate
// (beam, azimuth_index) pairs are rejected.
inline Scan build_scan(std::vector<Point> points, int num_beams) {
    if (num_beams < 0) throw BeamOutOfRange("num_beams must be >= 0");
    Scan scan;
    scan.num_beams = num_beams;
    scan.beams.resize(static_cast<std::size_t>(num_beams));
    for (auto& p : points) {
        if (p.beam < 0 || p.beam >= num_beams)
            throw BeamOutOfRange("beam " + std::to_string(p.beam) +
                                 " outside [0, " + std::to_string(num_beams) + ")");
        scan.beams[static_cast<std::size_t>(p.beam)].push_back(std::move(p));
    }
    for (auto& beam : scan.beams) {
        std::sort(beam.begin(), beam.end(), [](const Point& a, const Point& b) {
            return a.azimuth_index < b.azimuth_index;
        });
        for (std::size_t i = 1; i < beam.size(); ++i) {
            if (beam[i].azimuth_index == beam[i - 1].azimuth_index)
                throw DuplicateReturn("duplicate return at beam " +
                                      std::to_string(beam[i].beam) + ", azimuth index " +
                                      std::to_string(beam[i].azimuth_index));
        }
    }
    return scan;
}

inline ScanStats analyze_scan(const Scan& scan) {
    ScanStats stats;
    stats.points_per_beam.reserve(scan.beams.size());
    for (const auto& b : scan.beams) stats.points_per_beam.push_back(b.size());
    stats.total_points =
        std::accumulate(stats.points_per_beam.begin(), stats.points_per_beam.end(), std::size_t{0});
    if (!stats.points_per_beam.empty()) {
        auto [mn, mx] = std::minmax_element(stats.points_per_beam.begin(), stats.points_per_beam.end());
        stats.min_per_beam = *mn;
        stats.max_per_beam = *mx;
        stats.mean_per_beam =
            static_cast<double>(stats.total_points) / static_cast<double>(stats.points_per_beam.size());
    }
    return stats;
}

// --- CSV interchange: `beam,azimuth_index,x,y,z,intensity`, one header line ---

inline void write_scan_csv(std::ostream& os, const Scan& scan) {
    os << "beam,azimuth_index,x,y,z,intensity\n";
    char buf[192];
    for (const auto& beam : scan.beams) {
        for (const auto& p : beam) {
            std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.17g,%.17g,%.17g\n", p.beam,
                          p.azimuth_index, p.position.x(), p.position.y(), p.position.z(),
                          p.intensity);
            os << buf;
        }
    }
}

inline Scan read_scan_csv(std::istream& is, std::optional<int> num_beams = std::nullopt) {
    std::string line;
    if (!std::getline(is, line)) throw ParseError("empty scan file");
    std::vector<Point> points;
    int max_beam = -1;
    long line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        Point p;
        double fields[4];
        const char* s = line.c_str();
        const char* end = s + line.size();
        auto fail = [&]() -> ParseError {
            return ParseError("malformed scan CSV at line " + std::to_string(line_no));
        };
        auto parse_int = [&](int& out) {
            auto [ptr, ec] = std::from_chars(s, end, out);
            if (ec != std::errc{}) throw fail();
            s = ptr;
        };
        auto expect_comma = [&]() {
            if (s >= end || *s != ',') throw fail();
            ++s;
        };
        parse_int(p.beam);
        expect_comma();
        parse_int(p.azimuth_index);
        for (double& f : fields) {
            expect_comma();
            char* num_end = nullptr;
            f = std::strtod(s, &num_end);
            if (num_end == s) throw fail();
            s = num_end;
        }
        if (s != end) throw fail();
        p.position = {fields[0], fields[1], fields[2]};
        p.intensity = fields[3];
        if (p.intensity < 0.0 || p.intensity > 1.0)
            throw ParseError("intensity out of [0,1] at line " + std::to_string(line_no));
        max_beam = std::max(max_beam, p.beam);
        points.push_back(p);
    }
    const int nb = num_beams.value_or(max_beam + 1);
    return build_scan(std::move(points), nb);
}

}  // namespace pctag
