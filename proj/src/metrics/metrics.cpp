#include "gaia/metrics/metrics.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace gaia::metrics {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

double psnr(const ArrF& a, const ArrF& b) {
    if (a.shape != b.shape) throw DomainError("psnr: shape mismatch");
    double mse = 0;
    for (int64_t i = 0; i < a.numel(); ++i) {
        const double d = static_cast<double>(a[i]) - b[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.numel());
    if (mse <= 0) return 100.0;
    return std::min(100.0, 10.0 * std::log10(1.0 / mse));
}

double akd(const ArrF& pred, const ArrF& gt) {
    if (pred.shape != gt.shape || pred.ndim() != 3 || pred.dim(2) != 2) throw DomainError("akd: shape mismatch");
    const int64_t n = pred.dim(0), k = pred.dim(1);
    double sum = 0;
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < k; ++j) {
            const double dx = static_cast<double>(pred.at(i, j, 0)) - gt.at(i, j, 0);
            const double dy = static_cast<double>(pred.at(i, j, 1)) - gt.at(i, j, 1);
            sum += std::hypot(dx, dy);
        }
    return sum / static_cast<double>(n * k);
}

double msi(const ArrF& landmarks, double eps) {
    if (landmarks.ndim() != 3 || landmarks.dim(2) != 2) throw DomainError("msi: expects [N,K,2]");
    const int64_t n = landmarks.dim(0), k = landmarks.dim(1);
    if (n < 3) throw DomainError("msi: needs at least 3 frames");
    double mean_std = 0;
    for (int64_t j = 0; j < k; ++j) {
        double s1 = 0, s2 = 0;
        for (int64_t i = 0; i + 1 < n; ++i) {
            const double vx = static_cast<double>(landmarks.at(i + 1, j, 0)) - landmarks.at(i, j, 0);
            const double vy = static_cast<double>(landmarks.at(i + 1, j, 1)) - landmarks.at(i, j, 1);
            const double v = std::hypot(vx, vy);
            s1 += v;
            s2 += v * v;
        }
        const double m = static_cast<double>(n - 1);
        const double var = std::max(0.0, s2 / m - (s1 / m) * (s1 / m));
        mean_std += std::sqrt(var);
    }
    mean_std /= static_cast<double>(k);
    return 1.0 / (mean_std + eps);
}

GaussianFit fit_gaussian(const Arr& features) {
    if (features.shape.size() != 2) throw DomainError("fit_gaussian: expects [M,d]");
    const int64_t m = features.shape[0], d = features.shape[1];
    if (m <= d) throw DomainError("fit_gaussian: needs more samples than dimensions");
    GaussianFit fit;
    fit.mu = Arr(Shape{d});
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < d; ++j) fit.mu[j] += features[i * d + j];
    for (int64_t j = 0; j < d; ++j) fit.mu[j] /= static_cast<double>(m);
    fit.cov = Arr(Shape{d, d});
    Eigen::Map<const MatRM> x(features.ptr(), m, d);
    Eigen::Map<const Eigen::VectorXd> mu(fit.mu.ptr(), d);
    MatRM centered = x.rowwise() - mu.transpose();
    Eigen::Map<MatRM>(fit.cov.ptr(), d, d) = centered.transpose() * centered / static_cast<double>(m - 1);
    return fit;
}

namespace {

// Symmetric PSD square root; eigenvalues in [-tol, 0) are clipped to 0,
// below -tol the matrix is rejected.
MatRM sqrtm_psd(const Eigen::Ref<const MatRM>& m, double tol) {
    Eigen::SelfAdjointEigenSolver<MatRM> es(m);
    if (es.info() != Eigen::Success) throw NumericError("sqrtm: eigendecomposition failed");
    Eigen::VectorXd ev = es.eigenvalues();
    const double scale = std::max(1.0, std::abs(ev.maxCoeff()));
    for (int i = 0; i < ev.size(); ++i) {
        if (ev[i] < -tol * scale) throw NumericError("sqrtm: matrix is not PSD within tolerance");
        ev[i] = std::sqrt(std::max(0.0, ev[i]));
    }
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double frechet_distance(const Arr& mu1, const Arr& cov1, const Arr& mu2, const Arr& cov2) {
    const int64_t d = mu1.shape.at(0);
    if (mu2.shape != Shape{d} || cov1.shape != Shape{d, d} || cov2.shape != Shape{d, d})
        throw DomainError("frechet_distance: inconsistent shapes");
    const double tol = 1e-8;
    Eigen::Map<const Eigen::VectorXd> m1(mu1.ptr(), d), m2(mu2.ptr(), d);
    Eigen::Map<const MatRM> c1(cov1.ptr(), d, d), c2(cov2.ptr(), d, d);
    // Tr((C1 C2)^{1/2}) computed as Tr((A C2 A)^{1/2}) with A = C1^{1/2},
    // which keeps everything symmetric.
    const MatRM a = sqrtm_psd(c1, tol);
    const MatRM inner = a * c2 * a;
    const MatRM s = sqrtm_psd((inner + inner.transpose()) / 2.0, tol);
    const double mean_term = (m1 - m2).squaredNorm();
    return mean_term + c1.trace() + c2.trace() - 2.0 * s.trace();
}

double lipsync_proxy(const ArrF& mouth_openness, const ArrF& speech_energy) {
    if (mouth_openness.shape != speech_energy.shape || mouth_openness.ndim() != 1)
        throw DomainError("lipsync_proxy: expects equal-length vectors");
    const int64_t n = mouth_openness.dim(0);
    if (n < 2) throw DomainError("lipsync_proxy: needs at least 2 samples");
    double ma = 0, mb = 0;
    for (int64_t i = 0; i < n; ++i) {
        ma += mouth_openness[i];
        mb += speech_energy[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double sab = 0, saa = 0, sbb = 0;
    for (int64_t i = 0; i < n; ++i) {
        const double da = mouth_openness[i] - ma;
        const double db = speech_energy[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa <= 0 || sbb <= 0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

Arr downsample16_features(const ArrF& frames) {
    if (frames.ndim() != 4 || frames.dim(3) != 3) throw DomainError("downsample16_features: expects [N,H,W,3]");
    const int64_t n = frames.dim(0), h = frames.dim(1), w = frames.dim(2);
    const int64_t gh = 16, gw = 16;
    Arr out(Shape{n, gh * gw * 3});
    for (int64_t i = 0; i < n; ++i)
        for (int64_t gy = 0; gy < gh; ++gy)
            for (int64_t gx = 0; gx < gw; ++gx) {
                const int64_t y0 = gy * h / gh, y1 = std::max(y0 + 1, (gy + 1) * h / gh);
                const int64_t x0 = gx * w / gw, x1 = std::max(x0 + 1, (gx + 1) * w / gw);
                double acc[3] = {0, 0, 0};
                for (int64_t y = y0; y < y1; ++y)
                    for (int64_t x = x0; x < x1; ++x)
                        for (int64_t c = 0; c < 3; ++c) acc[c] += frames.at(i, y, x, c);
                const double cnt = static_cast<double>((y1 - y0) * (x1 - x0));
                for (int64_t c = 0; c < 3; ++c) out[(i * gh * gw + gy * gw + gx) * 3 + c] = acc[c] / cnt;
            }
    return out;
}

double frechet_from_frames(const ArrF& a, const ArrF& b, const FeatureFn& features) {
    const GaussianFit fa = fit_gaussian(features(a));
    const GaussianFit fb = fit_gaussian(features(b));
    return frechet_distance(fa.mu, fa.cov, fb.mu, fb.cov);
}

nlohmann::json MetricReport::to_json() const {
    nlohmann::json j;
    j["psnr_db"] = psnr_db;
    j["akd_px"] = akd_px;
    j["msi"] = msi;
    j["frechet"] = frechet;
    j["lipsync_corr"] = lipsync_corr;
    j["per_clip"] = nlohmann::json::array();
    for (const auto& [name, m] : per_clip)
        j["per_clip"].push_back({{"clip", name},
                                 {"psnr_db", m.psnr_db},
                                 {"akd_px", m.akd_px},
                                 {"msi", m.msi},
                                 {"lipsync_corr", m.lipsync_corr}});
    return j;
}

}  // namespace gaia::metrics
