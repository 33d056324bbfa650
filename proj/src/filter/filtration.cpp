#include "gaia/filter/filtration.hpp"

#include <cmath>

namespace gaia::filt {

using core::lm::kEyeOuterLeft;
using core::lm::kEyeOuterRight;
using core::lm::kNoseTip;

nlohmann::json FilterReport::to_json() const {
    nlohmann::json j;
    j["per_frame"] = nlohmann::json::array();
    for (const auto& v : per_frame) {
        j["per_frame"].push_back({{"frontal_ok", v.frontal_ok},
                                  {"stable_ok", v.stable_ok},
                                  {"speaking_ok", v.speaking_ok},
                                  {"angle_deg", v.angle_deg},
                                  {"displacement_px", v.displacement_px}});
    }
    j["segments"] = nlohmann::json::array();
    for (const auto& [b, e] : segments) j["segments"].push_back({b, e});
    return j;
}

double frontal_angle(const ArrF& landmarks) {
    if (landmarks.ndim() != 2 || landmarks.dim(1) != 2 || landmarks.dim(0) <= kEyeOuterRight)
        throw DomainError("frontal_angle: expects [K,2] landmarks with the 68-point topology");
    const double nx = landmarks.at(kNoseTip, 0), ny = landmarks.at(kNoseTip, 1);
    auto ray_angle = [&](int corner) {
        const double dx = landmarks.at(corner, 0) - nx;
        // Flip to y-up so the sweep from the horizontal reference through the
        // nose tip runs through the eye region.
        const double dy = ny - landmarks.at(corner, 1);
        if (dx * dx + dy * dy < 1e-18)
            throw DegenerateGeometryError("frontal_angle: eye corner coincides with the nose tip");
        double deg = std::atan2(dy, dx) * 180.0 / M_PI;
        if (deg < 0) deg += 360.0;
        return deg;
    };
    double sum = ray_angle(kEyeOuterLeft) + ray_angle(kEyeOuterRight);
    if (sum >= 360.0) sum -= 360.0;
    return sum;
}

double inter_frame_displacement(const ArrF& prev, const ArrF& next) {
    if (prev.shape != next.shape || prev.ndim() != 2 || prev.dim(1) != 2)
        throw DomainError("inter_frame_displacement: shape mismatch");
    double worst = 0;
    for (int64_t k = 0; k < prev.dim(0); ++k) {
        const double dx = next.at(k, 0) - prev.at(k, 0);
        const double dy = next.at(k, 1) - prev.at(k, 1);
        worst = std::max(worst, std::hypot(dx, dy));
    }
    return worst;
}

std::vector<bool> silence_mask(const ArrF& speech_features, double threshold) {
    if (speech_features.ndim() != 2) throw DomainError("silence_mask: expects [N,d]");
    const int64_t n = speech_features.dim(0), d = speech_features.dim(1);
    std::vector<bool> silent(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        double e = 0;
        for (int64_t j = 0; j < d; ++j) {
            const double v = speech_features.at(i, j);
            e += v * v;
        }
        silent[static_cast<size_t>(i)] = std::sqrt(e) < threshold;
    }
    return silent;
}

namespace {

ArrF frame_landmarks(const VideoClip& clip, int64_t i) {
    const int64_t k = clip.landmarks.dim(1);
    ArrF out(Shape{k, 2});
    std::copy_n(clip.landmarks.ptr() + i * k * 2, k * 2, out.ptr());
    return out;
}

VideoClip crop_segment(const VideoClip& clip, int64_t b, int64_t e) {
    const int64_t h = clip.frames.dim(1), w = clip.frames.dim(2);
    const int64_t k = clip.landmarks.dim(1), ds = clip.speech_features.dim(1);
    const int64_t n = e - b;
    // Integer shift putting the first frame's landmark centroid at the frame
    // center; edge-clamped sampling fills the vacated border.
    double cx = 0, cy = 0;
    for (int64_t j = 0; j < k; ++j) {
        cx += clip.landmarks.at(b, j, 0);
        cy += clip.landmarks.at(b, j, 1);
    }
    cx /= static_cast<double>(k);
    cy /= static_cast<double>(k);
    const int64_t dx = static_cast<int64_t>(std::llround(0.5 * static_cast<double>(w) - cx));
    const int64_t dy = static_cast<int64_t>(std::llround(0.5 * static_cast<double>(h) - cy));

    VideoClip out;
    out.frames = ArrF(Shape{n, h, w, 3});
    out.landmarks = ArrF(Shape{n, k, 2});
    out.poses = ArrF(Shape{n, 3});
    out.speech_features = ArrF(Shape{n, ds});
    out.fps = clip.fps;
    out.identity_id = clip.identity_id;
    if (!clip.mask_flags.empty())
        out.mask_flags.assign(clip.mask_flags.begin() + b, clip.mask_flags.begin() + e);
    for (int64_t i = 0; i < n; ++i) {
        for (int64_t y = 0; y < h; ++y)
            for (int64_t x = 0; x < w; ++x) {
                const int64_t sy = std::clamp<int64_t>(y - dy, 0, h - 1);
                const int64_t sx = std::clamp<int64_t>(x - dx, 0, w - 1);
                for (int64_t c = 0; c < 3; ++c) out.frames.at(i, y, x, c) = clip.frames.at(b + i, sy, sx, c);
            }
        for (int64_t j = 0; j < k; ++j) {
            out.landmarks.at(i, j, 0) = clip.landmarks.at(b + i, j, 0) + static_cast<float>(dx);
            out.landmarks.at(i, j, 1) = clip.landmarks.at(b + i, j, 1) + static_cast<float>(dy);
        }
        for (int64_t c = 0; c < 3; ++c) out.poses.at(i, c) = clip.poses.at(b + i, c);
        for (int64_t j = 0; j < ds; ++j) out.speech_features.at(i, j) = clip.speech_features.at(b + i, j);
    }
    return out;
}

}  // namespace

std::pair<FilterReport, std::vector<VideoClip>> filter_video(const VideoClip& clip, const FilterPolicy& policy) {
    policy.check();
    core::ShapeConfig cfg;
    cfg.H = clip.frames.dim(1);
    cfg.W = clip.frames.dim(2);
    cfg.K = clip.landmarks.dim(1);
    cfg.d_s = clip.speech_features.dim(1);
    const auto vrep = core::validate_clip(clip, cfg);
    if (!vrep.ok()) throw DomainError("filter_video: clip does not validate: " + vrep.violations.front());

    const double loosen = policy.vae_mode ? 1.5 : 1.0;
    const double tol = policy.frontal_angle_tolerance_deg * loosen;
    const double maxdisp =
        (policy.max_displacement_px > 0 ? policy.max_displacement_px : 0.04 * static_cast<double>(cfg.H)) * loosen;
    const double silence_thr = policy.silence_energy_threshold / loosen;

    const int64_t n = clip.n_frames();
    const auto silent = silence_mask(clip.speech_features, silence_thr);

    FilterReport rep;
    rep.per_frame.resize(static_cast<size_t>(n));
    ArrF prev_lm;
    for (int64_t i = 0; i < n; ++i) {
        FrameVerdict& v = rep.per_frame[static_cast<size_t>(i)];
        const ArrF lm = frame_landmarks(clip, i);
        v.angle_deg = frontal_angle(lm);
        v.frontal_ok = std::abs(v.angle_deg - 180.0) <= tol;
        v.displacement_px = i == 0 ? 0.0 : inter_frame_displacement(prev_lm, lm);
        v.stable_ok = v.displacement_px <= maxdisp;
        const bool masked = !clip.mask_flags.empty() && clip.mask_flags[static_cast<size_t>(i)] > 0.5f;
        v.speaking_ok = !silent[static_cast<size_t>(i)] && !masked;
        prev_lm = lm;
    }

    const int64_t min_len = static_cast<int64_t>(std::llround(policy.min_segment_s * clip.fps));
    std::vector<VideoClip> out;
    int64_t run_start = -1;
    for (int64_t i = 0; i <= n; ++i) {
        const bool pass = i < n && rep.per_frame[static_cast<size_t>(i)].pass();
        if (pass && run_start < 0) run_start = i;
        if (!pass && run_start >= 0) {
            if (i - run_start >= min_len && min_len > 0) {
                rep.segments.emplace_back(run_start, i);
                out.push_back(crop_segment(clip, run_start, i));
            }
            run_start = -1;
        }
    }
    for (auto& sub : out) {
        const auto r = core::validate_clip(sub, cfg);
        if (!r.ok()) throw Error("filter_video: cropped sub-clip failed validation: " + r.violations.front());
    }
    return {std::move(rep), std::move(out)};
}

}  // namespace gaia::filt
