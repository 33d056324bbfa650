#include "gaia/core/types.hpp"

#include <cmath>
#include <sstream>

namespace gaia::core {

namespace lm {

std::vector<int> group_indices(const std::string& name) {
    auto range = [](int b, int e) {
        std::vector<int> v;
        for (int i = b; i < e; ++i) v.push_back(i);
        return v;
    };
    if (name == "jaw") return range(kJawBegin, kJawEnd);
    if (name == "brows") {
        auto v = range(kBrowLeftBegin, kBrowLeftEnd);
        auto r = range(kBrowRightBegin, kBrowRightEnd);
        v.insert(v.end(), r.begin(), r.end());
        return v;
    }
    if (name == "nose") return range(kNoseBridgeBegin, kNoseBottomEnd);
    if (name == "eyes") {
        auto v = range(kEyeLeftBegin, kEyeLeftEnd);
        auto r = range(kEyeRightBegin, kEyeRightEnd);
        v.insert(v.end(), r.begin(), r.end());
        return v;
    }
    if (name == "mouth") return range(kMouthOuterBegin, kMouthInnerEnd);
    if (name == "pose-ring") {
        // Rigid scaffold: jaw + nose bridge; fixing it pins head pose while
        // leaving mouth and eyes free.
        auto v = range(kJawBegin, kJawEnd);
        auto r = range(kNoseBridgeBegin, kNoseBridgeEnd);
        v.insert(v.end(), r.begin(), r.end());
        return v;
    }
    if (name == "non-mouth") {
        std::vector<int> v;
        for (int i = 0; i < kMouthOuterBegin; ++i) v.push_back(i);
        return v;
    }
    throw DomainError("unknown landmark group: " + name);
}

std::vector<std::string> group_names() {
    return {"jaw", "brows", "nose", "eyes", "mouth", "pose-ring", "non-mouth"};
}

}  // namespace lm

ScalePreset ScalePreset::by_name(const std::string& name) {
    if (name == "tiny") return ScalePreset{};
    if (name == "small") return ScalePreset{"small", 128, 2, 512, 6};
    if (name == "base") return ScalePreset{"base", 256, 4, 1280, 12};
    if (name == "large") return ScalePreset{"large", 512, 8, 2048, 12};
    throw DomainError("unknown scale preset: " + name);
}

namespace {

void check_dims(std::vector<std::string>& out, const char* field, const ArrF& a, const Shape& want) {
    if (a.shape != want) {
        std::ostringstream os;
        os << field << " shape " << shape_str(a.shape) << " != expected " << shape_str(want);
        out.push_back(os.str());
    }
}

bool all_finite(const ArrF& a) {
    for (float v : a.data)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace

ValidationReport validate_clip(const VideoClip& clip, const ShapeConfig& cfg) {
    ValidationReport rep;
    if (clip.frames.ndim() != 4 || clip.frames.dim(0) < 1) {
        rep.violations.push_back("frames must be [N,H,W,3] with N >= 1");
        return rep;
    }
    const int64_t n = clip.frames.dim(0);
    check_dims(rep.violations, "frames", clip.frames, {n, cfg.H, cfg.W, 3});
    if (clip.landmarks.ndim() != 3 || clip.landmarks.dim(0) != n)
        rep.violations.push_back("landmarks leading dimension != N");
    else {
        if (clip.landmarks.dim(1) != cfg.K) rep.violations.push_back("landmark count != K");
        if (clip.landmarks.dim(2) != 2) rep.violations.push_back("landmarks width != 2");
    }
    if (clip.poses.ndim() != 2 || clip.poses.dim(0) != n)
        rep.violations.push_back("poses leading dimension != N");
    else if (clip.poses.dim(1) != 3)
        rep.violations.push_back("poses width != 3");
    if (clip.speech_features.ndim() != 2 || clip.speech_features.dim(0) != n)
        rep.violations.push_back("speech_features leading dimension != N");
    else if (clip.speech_features.dim(1) != cfg.d_s)
        rep.violations.push_back("speech_features width != d_s");
    if (!clip.mask_flags.empty() && static_cast<int64_t>(clip.mask_flags.size()) != n)
        rep.violations.push_back("mask_flags length != N");
    if (!(clip.fps > 0)) rep.violations.push_back("fps must be positive");
    if (clip.identity_id.empty()) rep.violations.push_back("identity_id empty");

    for (const auto* a : {&clip.frames, &clip.landmarks, &clip.poses, &clip.speech_features})
        if (!all_finite(*a)) {
            rep.violations.push_back("non-finite values present");
            break;
        }

    if (clip.frames.shape == Shape{n, cfg.H, cfg.W, 3})
        for (float v : clip.frames.data)
            if (v < 0.0f || v > 1.0f) {
                rep.violations.push_back("frame pixel outside [0,1]");
                break;
            }

    if (clip.landmarks.shape == Shape{n, cfg.K, 2}) {
        bool oob = false;
        for (int64_t i = 0; i < n && !oob; ++i)
            for (int64_t k = 0; k < cfg.K; ++k) {
                const float x = clip.landmarks.at(i, k, 0);
                const float y = clip.landmarks.at(i, k, 1);
                if (x < 0.0f || x >= static_cast<float>(cfg.W) || y < 0.0f || y >= static_cast<float>(cfg.H)) {
                    rep.violations.push_back("landmark out of bounds");
                    oob = true;
                    break;
                }
            }
    }
    return rep;
}

}  // namespace gaia::core
