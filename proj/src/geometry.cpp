#include "splat/geometry.hpp"

#include "splat/kdtree.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace splat {

namespace {

void require_nonempty(const PointCloud& pc, const char* name) {
    if (pc.size() == 0)
        throw std::invalid_argument(std::string(name) + " point cloud is empty");
}

double directed_mean_distance(const PointCloud& from, const KdTree& to_tree,
                              const PointCloud& to) {
    double sum = 0;
    for (const Vec3& p : from.positions)
        sum += (to.positions[to_tree.nearest(p)] - p).norm();
    return sum / static_cast<double>(from.size());
}

double directed_max_distance(const PointCloud& from, const KdTree& to_tree,
                             const PointCloud& to) {
    double best = 0;
    for (const Vec3& p : from.positions)
        best = std::max(best, (to.positions[to_tree.nearest(p)] - p).norm());
    return best;
}

double full_set_rmse(const std::vector<Vec3>& src, const KdTree& ref_tree,
                     const PointCloud& ref) {
    double sum = 0;
    for (const Vec3& p : src) sum += (ref.positions[ref_tree.nearest(p)] - p).squaredNorm();
    return std::sqrt(sum / static_cast<double>(src.size()));
}

}  // namespace

PointCloud extract_pointcloud(const GaussianModel& model, double min_opacity) {
    PointCloud pc;
    for (std::size_t i = 0; i < model.size(); ++i) {
        if (model.activated_opacity(i) < min_opacity) continue;
        pc.positions.push_back(model.means[i]);
        Vec3 color;
        for (int ch = 0; ch < 3; ++ch)
            color[ch] = std::clamp(model.sh_coeffs[i][ch] * kShC0 + 0.5, 0.0, 1.0);
        pc.colors.push_back(color);
    }
    return pc;
}

PointCloud crop(const PointCloud& pc, const Aabb& box) {
    PointCloud out;
    for (std::size_t i = 0; i < pc.size(); ++i) {
        const Vec3& p = pc.positions[i];
        if ((p.array() < box.lo.array()).any() || (p.array() > box.hi.array()).any())
            continue;
        out.positions.push_back(p);
        if (pc.has_colors()) out.colors.push_back(pc.colors[i]);
        if (pc.has_normals()) out.normals.push_back(pc.normals[i]);
    }
    return out;
}

int estimate_normals(PointCloud& pc, int k) {
    require_nonempty(pc, "normals input");
    if (k < 2) throw std::invalid_argument("normal estimation needs at least 2 neighbors");

    KdTree tree(pc.positions);
    pc.normals.assign(pc.size(), Vec3(0, 0, 1));
    int degenerate = 0;

    for (std::size_t i = 0; i < pc.size(); ++i) {
        auto nn = tree.knearest(pc.positions[i], static_cast<std::size_t>(k), i);
        if (nn.size() < 2) {
            degenerate += 1;
            continue;
        }
        Vec3 centroid = Vec3::Zero();
        for (std::size_t j : nn) centroid += pc.positions[j];
        centroid /= static_cast<double>(nn.size());
        Mat3 cov = Mat3::Zero();
        for (std::size_t j : nn) {
            Vec3 d = pc.positions[j] - centroid;
            cov += d * d.transpose();
        }
        cov /= static_cast<double>(nn.size());

        Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
        const Vec3& evals = eig.eigenvalues();  // ascending
        double scale = std::max(evals[2], 1e-300);
        if ((evals[1] - evals[0]) / scale < 1e-9) {
            degenerate += 1;  // no unique smallest direction; keep the fallback
            continue;
        }
        Vec3 n = eig.eigenvectors().col(0);
        if (n.z() < 0 || (n.z() == 0 && (n.y() < 0 || (n.y() == 0 && n.x() < 0))))
            n = -n;
        pc.normals[i] = n;
    }
    return degenerate;
}

double point_to_point_mse(const PointCloud& src, const PointCloud& ref) {
    require_nonempty(src, "source");
    require_nonempty(ref, "reference");
    KdTree tree(ref.positions);
    double sum = 0;
    for (const Vec3& p : src.positions)
        sum += (ref.positions[tree.nearest(p)] - p).squaredNorm();
    return sum / static_cast<double>(src.size());
}

double point_to_surface_mse(const PointCloud& src, const PointCloud& ref) {
    require_nonempty(src, "source");
    require_nonempty(ref, "reference");
    if (!ref.has_normals())
        throw std::invalid_argument("reference cloud has no normals");
    KdTree tree(ref.positions);
    double sum = 0;
    for (const Vec3& p : src.positions) {
        std::size_t j = tree.nearest(p);
        double along = (p - ref.positions[j]).dot(ref.normals[j]);
        sum += along * along;
    }
    return sum / static_cast<double>(src.size());
}

double hausdorff_distance(const PointCloud& a, const PointCloud& b) {
    require_nonempty(a, "first");
    require_nonempty(b, "second");
    KdTree ta(a.positions), tb(b.positions);
    return std::max(directed_max_distance(a, tb, b), directed_max_distance(b, ta, a));
}

double chamfer_distance(const PointCloud& a, const PointCloud& b) {
    require_nonempty(a, "first");
    require_nonempty(b, "second");
    KdTree ta(a.positions), tb(b.positions);
    return directed_mean_distance(a, tb, b) + directed_mean_distance(b, ta, a);
}

PointCloud apply_transform(const PointCloud& pc, const RigidTransform& t) {
    PointCloud out = pc;
    for (Vec3& p : out.positions) p = t.apply(p);
    for (Vec3& n : out.normals) n = t.rotation * n;
    return out;
}

IcpResult icp(const PointCloud& src, const PointCloud& ref, int max_iterations,
              double min_improvement) {
    require_nonempty(src, "source");
    require_nonempty(ref, "reference");

    KdTree ref_tree(ref.positions);
    std::vector<Vec3> cur = src.positions;

    IcpResult result;
    result.rmse_history.push_back(full_set_rmse(cur, ref_tree, ref));

    for (int iter = 1; iter <= max_iterations; ++iter) {
        // Correspondences at the current alignment.
        std::vector<std::size_t> nn(cur.size());
        std::vector<double> dist(cur.size());
        for (std::size_t i = 0; i < cur.size(); ++i) {
            nn[i] = ref_tree.nearest(cur[i]);
            dist[i] = (ref.positions[nn[i]] - cur[i]).norm();
        }
        std::vector<double> sorted = dist;
        std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2,
                         sorted.end());
        double median = sorted[sorted.size() / 2];
        double cutoff = 3.0 * median;

        Vec3 centroid_src = Vec3::Zero(), centroid_ref = Vec3::Zero();
        std::size_t inliers = 0;
        for (std::size_t i = 0; i < cur.size(); ++i) {
            if (dist[i] > cutoff) continue;
            centroid_src += cur[i];
            centroid_ref += ref.positions[nn[i]];
            inliers += 1;
        }
        if (inliers < 3)
            throw std::runtime_error("icp: fewer than 3 inlier pairs at iteration " +
                                     std::to_string(iter));
        centroid_src /= static_cast<double>(inliers);
        centroid_ref /= static_cast<double>(inliers);

        Mat3 H = Mat3::Zero();
        for (std::size_t i = 0; i < cur.size(); ++i) {
            if (dist[i] > cutoff) continue;
            H += (cur[i] - centroid_src) * (ref.positions[nn[i]] - centroid_ref).transpose();
        }

        Eigen::JacobiSVD<Mat3> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
        const Vec3& sv = svd.singularValues();
        if (sv[0] <= 0 || sv[2] < 1e-12 * sv[0])
            throw std::runtime_error(
                "icp: degenerate correspondence geometry at iteration " +
                std::to_string(iter));
        Mat3 U = svd.matrixU(), V = svd.matrixV();
        double d = (V * U.transpose()).determinant();
        Mat3 R = V * Vec3(1, 1, d).asDiagonal() * U.transpose();
        Vec3 t = centroid_ref - R * centroid_src;

        std::vector<Vec3> candidate(cur.size());
        for (std::size_t i = 0; i < cur.size(); ++i) candidate[i] = R * cur[i] + t;
        double rmse = full_set_rmse(candidate, ref_tree, ref);
        if (rmse > result.rmse_history.back()) break;  // revert this step

        cur = std::move(candidate);
        result.transform.rotation = R * result.transform.rotation;
        result.transform.translation = R * result.transform.translation + t;
        double gain = result.rmse_history.back() - rmse;
        result.rmse_history.push_back(rmse);
        if (gain < min_improvement) break;
    }
    return result;
}

}  // namespace splat
