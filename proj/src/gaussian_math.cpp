#include "splat/gaussian_math.hpp"

#include <cmath>

namespace splat {

namespace {

constexpr double kC1 = 0.4886025119029199;
constexpr double kC2[5] = {1.0925484305920792, -1.0925484305920792,
                           0.31539156525252005, -1.0925484305920792,
                           0.5462742152960396};
constexpr double kC3[7] = {-0.5900435899266435, 2.890611442640554,
                           -0.4570457994644658, 0.3731763325901154,
                           -0.4570457994644658, 1.445305721320277,
                           -0.5900435899266435};

Mat3 rotmat_unit(double r, double i, double j, double k) {
    Mat3 R;
    R << 1 - 2 * (j * j + k * k), 2 * (i * j - r * k), 2 * (i * k + r * j),
        2 * (i * j + r * k), 1 - 2 * (i * i + k * k), 2 * (j * k - r * i),
        2 * (i * k - r * j), 2 * (j * k + r * i), 1 - 2 * (i * i + j * j);
    return R;
}

}  // namespace

Mat3 quat_to_rotmat(const Quat& q) {
    Quat u = q / q.norm();
    return rotmat_unit(u[0], u[1], u[2], u[3]);
}

Quat quat_to_rotmat_backward(const Quat& q, const Mat3& dL_dR) {
    double norm = q.norm();
    Quat u = q / norm;
    double r = u[0], i = u[1], j = u[2], k = u[3];

    Mat3 dR_dr, dR_di, dR_dj, dR_dk;
    dR_dr << 0, -k, j, k, 0, -i, -j, i, 0;
    dR_di << 0, j, k, j, -2 * i, -r, k, r, -2 * i;
    dR_dj << -2 * j, i, r, i, 0, k, -r, k, -2 * j;
    dR_dk << -2 * k, -r, i, r, -2 * k, j, i, j, 0;

    Quat dL_du;
    dL_du[0] = 2 * dR_dr.cwiseProduct(dL_dR).sum();
    dL_du[1] = 2 * dR_di.cwiseProduct(dL_dR).sum();
    dL_du[2] = 2 * dR_dj.cwiseProduct(dL_dR).sum();
    dL_du[3] = 2 * dR_dk.cwiseProduct(dL_dR).sum();

    // d(q/|q|)/dq = (I - u u^T) / |q|
    return (dL_du - u * u.dot(dL_du)) / norm;
}

Mat3 covariance3d(const Vec3& log_scale, const Quat& q) {
    Mat3 R = quat_to_rotmat(q);
    Vec3 s = log_scale.array().exp();
    Mat3 M = R * s.asDiagonal();
    return M * M.transpose();
}

void covariance3d_backward(const Vec3& log_scale, const Quat& q, const Mat3& dL_dSigma,
                           Vec3& dL_dlog_scale, Quat& dL_dq) {
    Mat3 R = quat_to_rotmat(q);
    Vec3 s = log_scale.array().exp();
    Mat3 M = R * s.asDiagonal();

    // Sigma = M M^T, so dL/dM = (G + G^T) M.
    Mat3 dL_dM = (dL_dSigma + dL_dSigma.transpose()) * M;

    Mat3 dL_dR = dL_dM * s.asDiagonal();
    for (int c = 0; c < 3; ++c) {
        double dL_ds = R.col(c).dot(dL_dM.col(c));
        dL_dlog_scale[c] += dL_ds * s[c];  // d(exp)/dlog = exp
    }
    dL_dq += quat_to_rotmat_backward(q, dL_dR);
}

ProjectedGaussian project_gaussian(const Vec3& mean, const Mat3& cov3d,
                                   const Camera& cam) {
    ProjectedGaussian out;
    Vec3 t = cam.rotation * mean + cam.translation;
    if (t.z() <= kNearPlane) return out;
    out.in_front = true;
    out.t = t;
    out.mean2d = Vec2(cam.fx * t.x() / t.z() + cam.cx, cam.fy * t.y() / t.z() + cam.cy);

    Eigen::Matrix<double, 2, 3> J;
    double inv_z = 1.0 / t.z();
    J << cam.fx * inv_z, 0, -cam.fx * t.x() * inv_z * inv_z, 0, cam.fy * inv_z,
        -cam.fy * t.y() * inv_z * inv_z;
    Eigen::Matrix<double, 2, 3> T = J * cam.rotation;
    out.cov2d = T * cov3d * T.transpose() + kLowpass2d * Mat2::Identity();
    return out;
}

void project_gaussian_backward(const Vec3& mean, const Mat3& cov3d, const Camera& cam,
                               const Vec2& dL_dmean2d, const Mat2& dL_dcov2d,
                               Vec3& dL_dmean, Mat3& dL_dcov3d) {
    Vec3 t = cam.rotation * mean + cam.translation;
    if (t.z() <= kNearPlane) return;

    double inv_z = 1.0 / t.z();
    double inv_z2 = inv_z * inv_z;
    Eigen::Matrix<double, 2, 3> J;
    J << cam.fx * inv_z, 0, -cam.fx * t.x() * inv_z2, 0, cam.fy * inv_z,
        -cam.fy * t.y() * inv_z2;
    Eigen::Matrix<double, 2, 3> T = J * cam.rotation;

    Mat2 G = 0.5 * (dL_dcov2d + dL_dcov2d.transpose());
    dL_dcov3d += T.transpose() * G * T;

    // cov2d = T Sigma T^T: dL/dT = 2 G T Sigma for symmetric G, Sigma.
    Eigen::Matrix<double, 2, 3> dL_dT = 2.0 * G * T * cov3d;
    Eigen::Matrix<double, 2, 3> dL_dJ = dL_dT * cam.rotation.transpose();

    Vec3 dL_dt = Vec3::Zero();
    // Entries of J that depend on t: J00 = fx/tz, J02 = -fx tx/tz^2,
    // J11 = fy/tz, J12 = -fy ty/tz^2.
    dL_dt.x() += dL_dJ(0, 2) * (-cam.fx * inv_z2);
    dL_dt.y() += dL_dJ(1, 2) * (-cam.fy * inv_z2);
    dL_dt.z() += dL_dJ(0, 0) * (-cam.fx * inv_z2) + dL_dJ(1, 1) * (-cam.fy * inv_z2) +
                 dL_dJ(0, 2) * (2 * cam.fx * t.x() * inv_z2 * inv_z) +
                 dL_dJ(1, 2) * (2 * cam.fy * t.y() * inv_z2 * inv_z);

    // Pixel position: m = (fx tx/tz + cx, fy ty/tz + cy), i.e. J^T dL_dm.
    dL_dt.x() += dL_dmean2d.x() * cam.fx * inv_z;
    dL_dt.y() += dL_dmean2d.y() * cam.fy * inv_z;
    dL_dt.z() += -dL_dmean2d.x() * cam.fx * t.x() * inv_z2 -
                 dL_dmean2d.y() * cam.fy * t.y() * inv_z2;

    dL_dmean += cam.rotation.transpose() * dL_dt;
}

void sh_basis(int deg, const Vec3& dir, double basis[kShCoeffsPerChannel]) {
    const double x = dir.x(), y = dir.y(), z = dir.z();
    for (int c = 0; c < kShCoeffsPerChannel; ++c) basis[c] = 0.0;
    basis[0] = kShC0;
    if (deg < 1) return;
    basis[1] = -kC1 * y;
    basis[2] = kC1 * z;
    basis[3] = -kC1 * x;
    if (deg < 2) return;
    const double xx = x * x, yy = y * y, zz = z * z;
    basis[4] = kC2[0] * x * y;
    basis[5] = kC2[1] * y * z;
    basis[6] = kC2[2] * (2 * zz - xx - yy);
    basis[7] = kC2[3] * x * z;
    basis[8] = kC2[4] * (xx - yy);
    if (deg < 3) return;
    basis[9] = kC3[0] * y * (3 * xx - yy);
    basis[10] = kC3[1] * x * y * z;
    basis[11] = kC3[2] * y * (4 * zz - xx - yy);
    basis[12] = kC3[3] * z * (2 * zz - 3 * xx - 3 * yy);
    basis[13] = kC3[4] * x * (4 * zz - xx - yy);
    basis[14] = kC3[5] * z * (xx - yy);
    basis[15] = kC3[6] * x * (xx - 3 * yy);
}

Vec3 sh_to_color(const std::array<double, kShCoeffsPerGaussian>& sh, int deg,
                 const Vec3& dir) {
    double basis[kShCoeffsPerChannel];
    sh_basis(deg, dir, basis);
    Vec3 color;
    for (int ch = 0; ch < 3; ++ch) {
        double v = 0.5;
        for (int c = 0; c < kShCoeffsPerChannel; ++c) v += sh[c * 3 + ch] * basis[c];
        color[ch] = std::max(0.0, v);
    }
    return color;
}

void sh_to_color_backward(const std::array<double, kShCoeffsPerGaussian>& sh, int deg,
                          const Vec3& dir, const Vec3& dL_dcolor,
                          std::array<double, kShCoeffsPerGaussian>& dL_dsh,
                          Vec3& dL_ddir) {
    double basis[kShCoeffsPerChannel];
    sh_basis(deg, dir, basis);

    // Channels that clamped to zero pass no gradient.
    Vec3 g = dL_dcolor;
    for (int ch = 0; ch < 3; ++ch) {
        double v = 0.5;
        for (int c = 0; c < kShCoeffsPerChannel; ++c) v += sh[c * 3 + ch] * basis[c];
        if (v < 0.0) g[ch] = 0.0;
    }

    const int active = (deg + 1) * (deg + 1);
    for (int c = 0; c < active; ++c)
        for (int ch = 0; ch < 3; ++ch) dL_dsh[c * 3 + ch] += g[ch] * basis[c];

    // dL/dbasis_c = sum_ch g_ch sh[c][ch], then through the basis polynomials.
    double db[kShCoeffsPerChannel];
    for (int c = 0; c < kShCoeffsPerChannel; ++c) {
        db[c] = 0.0;
        for (int ch = 0; ch < 3; ++ch) db[c] += g[ch] * sh[c * 3 + ch];
    }

    const double x = dir.x(), y = dir.y(), z = dir.z();
    Vec3 d = Vec3::Zero();
    if (deg >= 1) {
        d.x() += db[3] * (-kC1);
        d.y() += db[1] * (-kC1);
        d.z() += db[2] * kC1;
    }
    if (deg >= 2) {
        d.x() += db[4] * kC2[0] * y + db[6] * kC2[2] * (-2 * x) + db[7] * kC2[3] * z +
                 db[8] * kC2[4] * (2 * x);
        d.y() += db[4] * kC2[0] * x + db[5] * kC2[1] * z + db[6] * kC2[2] * (-2 * y) +
                 db[8] * kC2[4] * (-2 * y);
        d.z() += db[5] * kC2[1] * y + db[6] * kC2[2] * (4 * z) + db[7] * kC2[3] * x;
    }
    if (deg >= 3) {
        const double xx = x * x, yy = y * y, zz = z * z;
        d.x() += db[9] * kC3[0] * (6 * x * y) + db[10] * kC3[1] * (y * z) +
                 db[11] * kC3[2] * (-2 * x * y) + db[12] * kC3[3] * (-6 * x * z) +
                 db[13] * kC3[4] * (4 * zz - 3 * xx - yy) + db[14] * kC3[5] * (2 * x * z) +
                 db[15] * kC3[6] * (3 * xx - 3 * yy);
        d.y() += db[9] * kC3[0] * (3 * xx - 3 * yy) + db[10] * kC3[1] * (x * z) +
                 db[11] * kC3[2] * (4 * zz - xx - 3 * yy) +
                 db[12] * kC3[3] * (-6 * y * z) + db[13] * kC3[4] * (-2 * x * y) +
                 db[14] * kC3[5] * (-2 * y * z) + db[15] * kC3[6] * (-6 * x * y);
        d.z() += db[10] * kC3[1] * (x * y) + db[11] * kC3[2] * (8 * y * z) +
                 db[12] * kC3[3] * (6 * zz - 3 * xx - 3 * yy) +
                 db[13] * kC3[4] * (8 * x * z) + db[14] * kC3[5] * (xx - yy);
    }
    dL_ddir = d;
}

Vec3 sh_dir(const Vec3& mean, const Vec3& cam_center) {
    return (mean - cam_center).normalized();
}

void sh_dir_backward(const Vec3& mean, const Vec3& cam_center, const Vec3& dL_ddir,
                     Vec3& dL_dmean) {
    Vec3 v = mean - cam_center;
    double r = v.norm();
    Vec3 d = v / r;
    dL_dmean += (dL_ddir - d * d.dot(dL_ddir)) / r;
}

}  // namespace splat
