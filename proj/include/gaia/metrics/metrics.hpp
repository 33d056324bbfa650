#pragma once

#include <functional>

#include <json.hpp>

#include "gaia/ndarray.hpp"

namespace gaia::metrics {

// 10*log10(1/MSE) over same-shape [0,1] images; identical inputs cap at 100 dB.
double psnr(const ArrF& a, const ArrF& b);

// Mean over frames and keypoints of the Euclidean distance, [N,K,2].
double akd(const ArrF& pred, const ArrF& gt);

// Motion stability index: 1 / (mean over keypoints of the temporal standard
// deviation of per-frame velocity magnitude + eps). Higher = stabler. The
// published metric is cited without a formula; this reconstruction keeps its
// ordering intent and is only compared against itself.
double msi(const ArrF& landmarks, double eps = 1e-3);

// Sample mean and unbiased covariance of row features [M,d]; requires M > d.
struct GaussianFit {
    Arr mu;   // [d]
    Arr cov;  // [d,d]
};
GaussianFit fit_gaussian(const Arr& features);

// ||mu1-mu2||^2 + Tr(C1 + C2 - 2 (C1 C2)^{1/2}); the matrix square root goes
// through a symmetric eigendecomposition with negative eigenvalues clipped at
// -1e-8 tolerance (beyond that the input is rejected as non-PSD).
double frechet_distance(const Arr& mu1, const Arr& cov1, const Arr& mu2, const Arr& cov2);

// Pearson correlation; constant input is defined as 0.
double lipsync_proxy(const ArrF& mouth_openness, const ArrF& speech_energy);

// Pluggable feature extractor for the Frechet score. The default is raw
// 16x16-downsampled pixels: self-contained and deterministic, usable only for
// relative comparisons within this artifact.
using FeatureFn = std::function<Arr(const ArrF& frames)>;
Arr downsample16_features(const ArrF& frames);  // [N,H,W,3] -> [N, 768]
double frechet_from_frames(const ArrF& a, const ArrF& b, const FeatureFn& features = downsample16_features);

struct ClipMetrics {
    double psnr_db = 0, akd_px = 0, msi = 0, lipsync_corr = 0;
};

struct MetricReport {
    double psnr_db = 0;
    double akd_px = 0;
    double msi = 0;
    double frechet = 0;
    double lipsync_corr = 0;
    std::vector<std::pair<std::string, ClipMetrics>> per_clip;
    nlohmann::json to_json() const;
};

}  // namespace gaia::metrics
