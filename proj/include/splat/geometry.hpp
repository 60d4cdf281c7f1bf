#pragma once

#include "splat/model.hpp"

#include <vector>

namespace splat {

/// Means of all Gaussians whose activated opacity reaches the floor, with
/// their base colors (the view-independent harmonics band, clamped to
/// [0,1]).
PointCloud extract_pointcloud(const GaussianModel& model, double min_opacity);

struct Aabb {
    Vec3 lo = Vec3::Zero();
    Vec3 hi = Vec3::Zero();
};

/// Points inside the closed box, with their attributes.
PointCloud crop(const PointCloud& pc, const Aabb& box);

/// Plane-fit normals from the covariance of each point's k nearest
/// neighbors (the point itself excluded), oriented toward +z (ties toward
/// +y, then +x). Neighborhoods whose two smallest covariance eigenvalues
/// are relatively closer than 1e-9 cannot pick a stable direction; they
/// get the fallback normal (0,0,1) and are counted in the return value.
int estimate_normals(PointCloud& pc, int k = 16);

/// Mean squared distance from each src point to its nearest ref point.
double point_to_point_mse(const PointCloud& src, const PointCloud& ref);

/// Mean squared distance from each src point to the tangent plane of its
/// nearest ref point. Requires ref normals; never exceeds
/// point_to_point_mse on the same inputs.
double point_to_surface_mse(const PointCloud& src, const PointCloud& ref);

/// Largest nearest-neighbor distance, taken in both directions.
double hausdorff_distance(const PointCloud& a, const PointCloud& b);

/// Sum of the two directed mean nearest-neighbor distances (plain
/// Euclidean, not squared).
double chamfer_distance(const PointCloud& a, const PointCloud& b);

struct RigidTransform {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
};

PointCloud apply_transform(const PointCloud& pc, const RigidTransform& t);

struct IcpResult {
    RigidTransform transform;
    /// Full-set RMSE before each accepted step; entry 0 is the initial
    /// alignment. Never increasing.
    std::vector<double> rmse_history;
};

/// Rigid alignment of src onto ref: nearest-neighbor correspondences,
/// pairs beyond three times the median distance excluded from the fit
/// (but never from the reported RMSE), least-squares rotation via SVD
/// with reflection correction. A step that would raise the full-set RMSE
/// is discarded and iteration stops. Throws std::runtime_error naming the
/// iteration if the correspondence geometry becomes rank-deficient.
IcpResult icp(const PointCloud& src, const PointCloud& ref, int max_iterations = 50,
              double min_improvement = 1e-9);

}  // namespace splat
