#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "pctag/errors.hpp"
#include "pctag/grid.hpp"
#include "pctag/pointcloud.hpp"

namespace pctag::pose {

// Marker center, plane normal, and in-plane axes; orientation known modulo
// rotation about the normal.
struct PartialPose {
    Eigen::Vector3d mu = Eigen::Vector3d::Zero();
    Eigen::Vector3d normal = Eigen::Vector3d::UnitX();
    Eigen::Vector3d axis_u = Eigen::Vector3d::UnitY();
    Eigen::Vector3d axis_v = Eigen::Vector3d::UnitZ();
    double plane_residual_rms = 0.0;

    Eigen::Vector2d to_plane(const Eigen::Vector3d& p) const {
        const Eigen::Vector3d y = p - mu;
        return {axis_u.dot(y), axis_v.dot(y)};
    }
    Eigen::Vector3d from_plane(const Eigen::Vector2d& uv) const {
        return mu + uv.x() * axis_u + uv.y() * axis_v;
    }
};

struct TemplateAlignment {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();
    double residual = 0.0;  // Frobenius misfit over the corner columns
};

// Centroid plus plane basis from the singular decomposition of the zero-mean
// point matrix. The normal is the least singular direction, sign-fixed to
// point toward the sensor origin; (axis_u, axis_v, normal) is right-handed.
inline PartialPose estimate_partial_pose(const std::vector<Eigen::Vector3d>& points) {
    if (points.size() < 3) throw DegenerateGeometry("need at least 3 points");
    PartialPose pose;
    pose.mu.setZero();
    for (const auto& p : points) pose.mu += p;
    pose.mu /= static_cast<double>(points.size());

    Eigen::Matrix3Xd centered(3, static_cast<Eigen::Index>(points.size()));
    for (Eigen::Index i = 0; i < centered.cols(); ++i)
        centered.col(i) = points[static_cast<std::size_t>(i)] - pose.mu;

    Eigen::JacobiSVD<Eigen::Matrix3Xd> svd(centered, Eigen::ComputeFullU);
    const Eigen::Vector3d sv = svd.singularValues();
    if (sv(1) <= 1e-10 * std::max(sv(0), 1e-300))
        throw DegenerateGeometry("points are collinear");

    pose.normal = svd.matrixU().col(2);
    if (pose.normal.dot(pose.mu) > 0.0) pose.normal = -pose.normal;
    pose.axis_u = svd.matrixU().col(0);
    pose.axis_v = pose.normal.cross(pose.axis_u);

    double ss = 0.0;
    for (Eigen::Index i = 0; i < centered.cols(); ++i) {
        const double r = pose.normal.dot(centered.col(i));
        ss += r * r;
    }
    pose.plane_residual_rms = std::sqrt(ss / static_cast<double>(centered.cols()));
    return pose;
}

inline PartialPose estimate_partial_pose(const std::vector<Point>& points) {
    std::vector<Eigen::Vector3d> positions;
    positions.reserve(points.size());
    for (const auto& p : points) positions.push_back(p.position);
    return estimate_partial_pose(positions);
}

namespace detail {

// 2D total-least-squares line through a point set: centroid + unit direction.
struct Line2d {
    Eigen::Vector2d point;
    Eigen::Vector2d dir;
};

inline Line2d fit_line_tls(const std::vector<Eigen::Vector2d>& pts) {
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    for (const auto& p : pts) mean += p;
    mean /= static_cast<double>(pts.size());
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    for (const auto& p : pts) {
        const Eigen::Vector2d y = p - mean;
        cov += y * y.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
    return Line2d{mean, eig.eigenvectors().col(1)};  // largest eigenvalue
}

inline Eigen::Vector2d intersect(const Line2d& a, const Line2d& b) {
    // Solve a.point + s * a.dir == b.point + t * b.dir.
    Eigen::Matrix2d A;
    A.col(0) = a.dir;
    A.col(1) = -b.dir;
    const double det = A.determinant();
    if (std::abs(det) < 1e-9) throw CornerFitFailed("side lines are near-parallel");
    const Eigen::Vector2d st = A.inverse() * (b.point - a.point);
    return a.point + st.x() * a.dir;
}

// Orientation (mod 90 degrees) minimizing the bounding-box area of the
// projected boundary, searched on a fine angular grid.
inline double principal_orientation(const std::vector<Eigen::Vector2d>& pts) {
    double best_angle = 0.0;
    double best_area = std::numeric_limits<double>::infinity();
    constexpr int kSteps = 360;  // quarter-degree resolution over [0, 90)
    for (int i = 0; i < kSteps; ++i) {
        const double angle = i * (std::numbers::pi / 2.0) / kSteps;
        const double ca = std::cos(angle), sa = std::sin(angle);
        double umin = 1e300, umax = -1e300, vmin = 1e300, vmax = -1e300;
        for (const auto& p : pts) {
            const double u = ca * p.x() + sa * p.y();
            const double v = -sa * p.x() + ca * p.y();
            umin = std::min(umin, u);
            umax = std::max(umax, u);
            vmin = std::min(vmin, v);
            vmax = std::max(vmax, v);
        }
        const double area = (umax - umin) * (vmax - vmin);
        if (area < best_area) {
            best_area = area;
            best_angle = angle;
        }
    }
    return best_angle;
}

}  // namespace detail

// Fits the four marker sides with total-least-squares lines and intersects
// them. Boundary points are projected into the plane frame, aligned by the
// principal orientation of the outline, and partitioned into four side sets
// by angular quadrant around the centroid. Corners are returned
// counterclockwise (as seen from the sensor) starting from the
// highest-elevation corner.
inline std::array<Eigen::Vector3d, 4> estimate_corners(const std::vector<Eigen::Vector3d>& boundary,
                                                       const PartialPose& pose, double tag_size) {
    if (boundary.size() < 8) throw CornerFitFailed("too few boundary points");
    std::vector<Eigen::Vector2d> pts;
    pts.reserve(boundary.size());
    Eigen::Vector2d center = Eigen::Vector2d::Zero();
    for (const auto& p : boundary) {
        pts.push_back(pose.to_plane(p));
        center += pts.back();
    }
    center /= static_cast<double>(pts.size());

    const double theta = detail::principal_orientation(pts);
    const double ca = std::cos(theta), sa = std::sin(theta);

    std::array<std::vector<Eigen::Vector2d>, 4> sides;
    for (const auto& p : pts) {
        const Eigen::Vector2d y = p - center;
        // Rotate by -theta so the square is axis-aligned, then bin by the
        // quadrant the side centers fall in (right, top, left, bottom).
        const double u = ca * y.x() + sa * y.y();
        const double v = -sa * y.x() + ca * y.y();
        const double angle = std::atan2(v, u);
        const int side = static_cast<int>(std::floor((angle + std::numbers::pi / 4.0) /
                                                     (std::numbers::pi / 2.0) + 2.0)) % 4;
        sides[static_cast<std::size_t>(side)].push_back(p);
    }
    std::array<detail::Line2d, 4> lines;
    for (std::size_t s = 0; s < 4; ++s) {
        if (sides[s].size() < 2) throw CornerFitFailed("side with fewer than 2 points");
        lines[s] = detail::fit_line_tls(sides[s]);
    }
    std::array<Eigen::Vector2d, 4> corners2d;
    for (std::size_t s = 0; s < 4; ++s)
        corners2d[s] = detail::intersect(lines[s], lines[(s + 1) % 4]);

    // Sanity: reject wildly inconsistent fits.
    for (const auto& c : corners2d)
        if ((c - center).norm() > 2.0 * tag_size) throw CornerFitFailed("corner fit diverged");

    // Counterclockwise order as seen from the sensor equals ascending atan2 in
    // the right-handed (axis_u, axis_v, normal) frame with normal toward the
    // sensor.
    std::array<Eigen::Vector2d, 4> ordered = corners2d;
    std::sort(ordered.begin(), ordered.end(), [&](const auto& a, const auto& b) {
        return std::atan2(a.y() - center.y(), a.x() - center.x()) <
               std::atan2(b.y() - center.y(), b.x() - center.x());
    });

    std::array<Eigen::Vector3d, 4> corners3d;
    for (std::size_t i = 0; i < 4; ++i) corners3d[i] = pose.from_plane(ordered[i]);

    // Start the cycle at the highest-elevation corner (ties broken toward +y).
    std::size_t start = 0;
    for (std::size_t i = 1; i < 4; ++i) {
        const auto& a = corners3d[i];
        const auto& b = corners3d[start];
        if (a.z() > b.z() + 1e-12 || (std::abs(a.z() - b.z()) <= 1e-12 && a.y() > b.y()))
            start = i;
    }
    std::array<Eigen::Vector3d, 4> result;
    for (std::size_t i = 0; i < 4; ++i) result[i] = corners3d[(start + i) % 4];
    return result;
}

// Closed-form constrained orthogonal Procrustes fit of the measured corners
// to the canonical template corners: M = X P^T = U S V^T, R* = U V^T with a
// determinant guard, T = -R* p0.
inline TemplateAlignment procrustes_align(const std::array<Eigen::Vector3d, 4>& corners,
                                          const std::array<Eigen::Vector3d, 4>& template_corners,
                                          const Eigen::Vector3d& center) {
    Eigen::Matrix<double, 3, 4> P, X;
    for (int i = 0; i < 4; ++i) {
        P.col(i) = corners[static_cast<std::size_t>(i)] - center;
        X.col(i) = template_corners[static_cast<std::size_t>(i)];
    }
    const Eigen::Matrix3d M = X * P.transpose();
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::Vector3d sv = svd.singularValues();
    if (sv(1) <= 1e-10 * std::max(sv(0), 1e-300))
        throw IllConditioned("corner configuration has rank < 2");
    Eigen::Matrix3d U = svd.matrixU();
    if ((U * svd.matrixV().transpose()).determinant() < 0.0) U.col(2) = -U.col(2);

    TemplateAlignment alignment;
    alignment.rotation = U * svd.matrixV().transpose();
    alignment.translation = -alignment.rotation * center;
    alignment.residual = (alignment.rotation * P - X).norm();
    return alignment;
}

inline TemplateAlignment procrustes_align(const std::array<Eigen::Vector3d, 4>& corners,
                                          double tag_size, const PartialPose& partial) {
    return procrustes_align(corners, canonical_corners(tag_size), partial.mu);
}

}  // namespace pctag::pose
