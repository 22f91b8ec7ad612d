#pragma once

#include <chrono>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "pctag/codebook.hpp"
#include "pctag/detection.hpp"
#include "pctag/errors.hpp"
#include "pctag/grid.hpp"
#include "pctag/pose.hpp"

namespace pctag::voting {

struct MappedPoint {
    Eigen::Vector2d uv;  // template-plane coordinates (y, z)
    double intensity;
};

struct GridCell {
    int index = 0;               // k in [0, (d+2)^2), row-major
    Eigen::Vector2d center;      // mu_k on the template plane
    std::vector<MappedPoint> points;
};

enum class Bit : int { Zero = 0, One = 1, Unknown = -1 };

// Fewer mapped returns than this makes a cell a bad bit.
inline constexpr std::size_t kMinPointsPerCell = 5;

struct BitEstimate {
    double p = 0.0;  // weighted mean intensity P_k
    std::size_t n_points = 0;
    bool is_bad = true;
    Bit bit = Bit::Unknown;
};

// Maps marker points through the template alignment and drops the out-of-plane
// coordinate. Points landing outside the marker grid are dropped. Throws when
// more than 5% of the inputs violate the out-of-plane bound.
inline std::vector<MappedPoint> map_to_template(const std::vector<Point>& points,
                                                const pose::TemplateAlignment& alignment,
                                                double tag_size) {
    std::vector<MappedPoint> mapped;
    mapped.reserve(points.size());
    const double out_of_plane_bound = 0.1 * tag_size;
    std::size_t violations = 0;
    for (const auto& p : points) {
        const Eigen::Vector3d x = alignment.rotation * p.position + alignment.translation;
        if (std::abs(x.x()) > out_of_plane_bound) {
            ++violations;
            continue;
        }
        if (std::max(std::abs(x.y()), std::abs(x.z())) > 0.55 * tag_size) continue;
        mapped.push_back(MappedPoint{{x.y(), x.z()}, p.intensity});
    }
    if (violations * 20 > points.size())
        throw OutOfPlane(std::to_string(violations) + " of " + std::to_string(points.size()) +
                         " mapped points violate the out-of-plane bound");
    return mapped;
}

// Bins mapped points into the (d+2)^2 marker grid. Points on the grid but
// outside every cell cannot occur; points outside the grid are dropped.
inline std::vector<GridCell> bin_to_grid(const std::vector<MappedPoint>& mapped, double tag_size,
                                         int d) {
    const MarkerGrid grid{tag_size, d};
    const int n = grid.cells_per_side();
    std::vector<GridCell> cells(static_cast<std::size_t>(n * n));
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            auto& cell = cells[static_cast<std::size_t>(r * n + c)];
            cell.index = r * n + c;
            cell.center = grid.cell_center(r, c);
        }
    }
    for (const auto& p : mapped) {
        const auto rc = grid.cell_at(p.uv.x(), p.uv.y());
        if (!rc) continue;
        cells[static_cast<std::size_t>(rc->first * n + rc->second)].points.push_back(p);
    }
    return cells;
}

namespace detail {

inline std::vector<BitEstimate> vote(const std::vector<GridCell>& cells, double sigma_sq) {
    std::vector<BitEstimate> bits;
    bits.reserve(cells.size());
    for (const auto& cell : cells) {
        BitEstimate est;
        est.n_points = cell.points.size();
        double wsum = 0.0, wisum = 0.0;
        for (const auto& p : cell.points) {
            const double w = sigma_sq > 0.0
                                 ? std::exp(-(p.uv - cell.center).squaredNorm() / (2.0 * sigma_sq))
                                 : 1.0;
            wsum += w;
            wisum += w * p.intensity;
        }
        if (est.n_points >= kMinPointsPerCell && wsum > 0.0) {
            est.p = wisum / wsum;
            est.is_bad = false;
            est.bit = est.p > 0.5 ? Bit::One : Bit::Zero;
        } else if (wsum > 0.0) {
            est.p = wisum / wsum;
        }
        bits.push_back(est);
    }
    return bits;
}

}  // namespace detail

inline double default_sigma_sq(double tag_size, int d) {
    return tag_size / (4.0 * (d + 2));
}

// Weighted Gaussian voting: each point votes with an unnormalized isotropic
// Gaussian weight of its offset from the cell center, variance
// tag_size / (4 (d+2)). P_k is the weighted mean intensity.
inline std::vector<BitEstimate> gaussian_vote(const std::vector<GridCell>& cells, double tag_size,
                                              int d, std::optional<double> sigma_sq = std::nullopt) {
    return detail::vote(cells, sigma_sq.value_or(default_sigma_sq(tag_size, d)));
}

// Equal-weight baseline for the comparison experiment.
inline std::vector<BitEstimate> equal_weight_vote(const std::vector<GridCell>& cells) {
    return detail::vote(cells, 0.0);
}

enum class Stage {
    Pose,
    Corners,
    Alignment,
    Mapping,
    Voting,
    Decoding,
};

inline const char* stage_name(Stage s) {
    switch (s) {
        case Stage::Pose: return "pose";
        case Stage::Corners: return "corners";
        case Stage::Alignment: return "alignment";
        case Stage::Mapping: return "mapping";
        case Stage::Voting: return "voting";
        case Stage::Decoding: return "decoding";
    }
    return "?";
}

struct Rejection {
    Stage stage = Stage::Decoding;
    std::string reason;
};

struct StageTimings {
    double pose_ms = 0.0;
    double voting_ms = 0.0;
    double decoding_ms = 0.0;
};

struct TagDetection {
    int tag_id = -1;
    Eigen::Vector3d mu = Eigen::Vector3d::Zero();
    Eigen::Quaterniond q = Eigen::Quaterniond::Identity();
    int rotation_k = 0;
    int hamming_distance = 0;
    int bad_bits = 0;
    std::vector<BitEstimate> bits;  // all (d+2)^2 cells, row-major
    StageTimings timings;
};

struct DecodeParams {
    double tag_size = 0.0;
    std::optional<double> sigma_sq_override;
    bool use_equal_weights = false;  // comparison experiment only
    std::optional<int> max_bad_bits;  // default floor((h-1)/2)
};

struct DecodeOutcome {
    std::optional<TagDetection> detection;
    std::optional<Rejection> rejection;
    bool ok() const { return detection.has_value(); }
};

namespace detail {

inline Eigen::Matrix3d quarter_turn_about_x(int k) {
    return Eigen::AngleAxisd(k * std::numbers::pi / 2.0, Eigen::Vector3d::UnitX())
        .toRotationMatrix();
}

// Reads the payload codeword off the voted grid; dark border cells are
// required as a falsification filter.
struct GridReadout {
    Codeword word = 0;
    Codeword unknown_mask = 0;
    int bad_bits = 0;
    bool border_dark = true;
};

inline GridReadout read_grid(const std::vector<BitEstimate>& bits, int d) {
    const MarkerGrid grid{1.0, d};
    const int n = grid.cells_per_side();
    GridReadout out;
    double border_sum = 0.0;
    std::size_t border_count = 0;
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            const auto& est = bits[static_cast<std::size_t>(r * n + c)];
            if (grid.is_border(r, c)) {
                if (!est.is_bad) {
                    border_sum += est.p;
                    ++border_count;
                }
                continue;
            }
            const int i = grid.payload_index(r, c);
            if (est.is_bad) {
                out.unknown_mask |= Codeword{1} << i;
                ++out.bad_bits;
            } else if (est.bit == Bit::One) {
                out.word |= Codeword{1} << i;
            }
        }
    }
    out.border_dark = border_count == 0 || border_sum / static_cast<double>(border_count) < 0.5;
    return out;
}

}  // namespace detail

// Convex hull (monotone chain, collinear points kept) of points projected
// into the pose plane, returned as 3D points.
inline std::vector<Eigen::Vector3d> plane_convex_hull(const std::vector<Eigen::Vector3d>& points,
                                                      const pose::PartialPose& plane) {
    std::vector<Eigen::Vector2d> pts;
    pts.reserve(points.size());
    for (const auto& p : points) pts.push_back(plane.to_plane(p));
    std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
        return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
    });
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](const auto& a, const auto& b) { return a == b; }),
              pts.end());
    if (pts.size() < 3) {
        std::vector<Eigen::Vector3d> out;
        for (const auto& p : pts) out.push_back(plane.from_plane(p));
        return out;
    }
    auto cross = [](const Eigen::Vector2d& o, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
        return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
    };
    std::vector<Eigen::Vector2d> hull(2 * pts.size() + 1);
    std::size_t k = 0;
    for (const auto& p : pts) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) < 0) --k;
        hull[k++] = p;
    }
    for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) < 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    std::vector<Eigen::Vector3d> out;
    out.reserve(hull.size());
    for (const auto& p : hull) out.push_back(plane.from_plane(p));
    return out;
}

// Raster extremes of the dark (border ring and black payload) returns: the
// first and last dark return of every beam plus the first and last dark
// return of every azimuth column. The dark region is a connected blob whose
// outer edge is the black border ring, so these samples trace the marker
// outline on all four sides at the scan's native resolution.
inline std::vector<Eigen::Vector3d> marker_outline_points(const std::vector<Point>& points) {
    std::map<int, std::pair<const Point*, const Point*>> by_beam, by_column;
    auto extend = [](std::map<int, std::pair<const Point*, const Point*>>& groups, int key,
                     const Point& p, int ordinal) {
        auto [it, inserted] = groups.try_emplace(key, &p, &p);
        if (inserted) return;
        auto ord = [ordinal](const Point& q) {
            return ordinal == 0 ? q.azimuth_index : q.beam;
        };
        if (ord(p) < ord(*it->second.first)) it->second.first = &p;
        if (ord(p) > ord(*it->second.second)) it->second.second = &p;
    };
    for (const auto& p : points) {
        if (p.intensity >= 0.5) continue;
        extend(by_beam, p.beam, p, 0);
        extend(by_column, p.azimuth_index, p, 1);
    }
    std::set<std::pair<int, int>> seen;
    std::vector<Eigen::Vector3d> outline;
    for (const auto* groups : {&by_beam, &by_column})
        for (const auto& [key, extremes] : *groups)
            for (const Point* p : {extremes.first, extremes.second})
                if (seen.insert({p->beam, p->azimuth_index}).second)
                    outline.push_back(p->position);
    return outline;
}

// Full per-cluster decode: partial pose, corner fit, Procrustes alignment,
// template mapping, voting, and codeword lookup. The boundary points for the
// corner fit are the raster extremes of the dark (border and black payload)
// returns, which trace the marker outline.
inline DecodeOutcome decode_tag(const detection::Cluster& cluster, const DecodingTable& table,
                                const DecodeParams& params) {
    using clock = std::chrono::steady_clock;
    const int d = table.family.d;
    DecodeOutcome outcome;
    StageTimings timings;
    auto reject = [&](Stage stage, std::string reason) {
        outcome.rejection = Rejection{stage, std::move(reason)};
        return outcome;
    };

    const auto t0 = clock::now();
    pose::PartialPose partial;
    std::array<Eigen::Vector3d, 4> corners;
    try {
        partial = pose::estimate_partial_pose(cluster.filled_points);

        const auto outline = marker_outline_points(cluster.filled_points);
        corners = pose::estimate_corners(outline, partial, params.tag_size);
    } catch (const Error& e) {
        return reject(Stage::Pose, e.what());
    }

    pose::TemplateAlignment alignment;
    std::vector<GridCell> cells;
    try {
        alignment = pose::procrustes_align(corners, params.tag_size, partial);
        const auto mapped = map_to_template(cluster.filled_points, alignment, params.tag_size);
        cells = bin_to_grid(mapped, params.tag_size, d);
    } catch (const Error& e) {
        return reject(Stage::Alignment, e.what());
    }
    timings.pose_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();

    const auto t1 = clock::now();
    const auto bits = params.use_equal_weights
                          ? equal_weight_vote(cells)
                          : gaussian_vote(cells, params.tag_size, d, params.sigma_sq_override);
    const auto readout = detail::read_grid(bits, d);
    timings.voting_ms = std::chrono::duration<double, std::milli>(clock::now() - t1).count();

    const auto t2 = clock::now();
    if (!readout.border_dark) return reject(Stage::Voting, "border cells are not dark");
    const int max_bad = params.max_bad_bits.value_or(table.max_correctable);
    std::optional<DecodeResult> decoded;
    try {
        decoded = decode_codeword(table, readout.word, readout.unknown_mask, max_bad);
    } catch (const TooManyBadBits& e) {
        return reject(Stage::Decoding, e.what());
    }
    if (!decoded) return reject(Stage::Decoding, "no codeword within the correctable radius");
    timings.decoding_ms = std::chrono::duration<double, std::milli>(clock::now() - t2).count();

    TagDetection det;
    det.tag_id = decoded->tag_id;
    det.rotation_k = decoded->rotation_k;
    det.hamming_distance = decoded->hamming_distance;
    det.bad_bits = readout.bad_bits;
    det.mu = partial.mu;
    // The alignment maps sensor to template coordinates; the decoded rotation
    // index is the residual quarter-turn between the template readout and the
    // canonical codeword.
    const Eigen::Matrix3d tag_rotation =
        alignment.rotation.transpose() * detail::quarter_turn_about_x(decoded->rotation_k);
    det.q = Eigen::Quaterniond(tag_rotation).normalized();
    det.bits = bits;
    det.timings = timings;
    outcome.detection = det;
    return outcome;
}

}  // namespace pctag::voting
