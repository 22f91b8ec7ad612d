#pragma once

#include <array>
#include <cmath>
#include <optional>

#include <Eigen/Core>

namespace pctag {

// Geometry of the (d+2) x (d+2) marker grid in template-plane coordinates.
//
// The template plane is the x = 0 plane; a point on it has in-plane
// coordinates (u, v) = (y, z). The marker spans [-s/2, s/2]^2 where s is the
// tag size. Cells are indexed (row, col) with row 0 at the top (v = +s/2)
// and col 0 at the left (u = +s/2, i.e. toward +y as seen from the sensor).
// The outermost ring of cells is the black border; the inner d x d cells
// carry the payload, bit index = payload_row * d + payload_col.
struct MarkerGrid {
    double tag_size;
    int d;

    int cells_per_side() const { return d + 2; }
    double cell_size() const { return tag_size / (d + 2); }

    std::optional<std::pair<int, int>> cell_at(double u, double v) const {
        const double half = tag_size / 2.0;
        if (std::abs(u) > half || std::abs(v) > half) return std::nullopt;
        const int n = cells_per_side();
        auto clamp = [n](int i) { return i < 0 ? 0 : (i >= n ? n - 1 : i); };
        const int c = clamp(static_cast<int>(std::floor((half - u) / cell_size())));
        const int r = clamp(static_cast<int>(std::floor((half - v) / cell_size())));
        return std::make_pair(r, c);
    }

    Eigen::Vector2d cell_center(int r, int c) const {
        const double half = tag_size / 2.0;
        return {half - (c + 0.5) * cell_size(), half - (r + 0.5) * cell_size()};
    }

    bool is_border(int r, int c) const {
        return r == 0 || c == 0 || r == cells_per_side() - 1 || c == cells_per_side() - 1;
    }

    // Payload bit index for an inner cell, -1 for border cells.
    int payload_index(int r, int c) const {
        if (is_border(r, c)) return -1;
        return (r - 1) * d + (c - 1);
    }
};

// Canonical marker corners on the template plane, counterclockwise as seen
// from the sensor, starting at the top-left (+y, +z) corner.
inline std::array<Eigen::Vector3d, 4> canonical_corners(double tag_size) {
    const double h = tag_size / 2.0;
    return {Eigen::Vector3d{0, h, h}, Eigen::Vector3d{0, h, -h},
            Eigen::Vector3d{0, -h, -h}, Eigen::Vector3d{0, -h, h}};
}

}  // namespace pctag
