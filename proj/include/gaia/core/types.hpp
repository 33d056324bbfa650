#pragma once

#include <string>
#include <vector>

#include "gaia/core/landmarks.hpp"
#include "gaia/ndarray.hpp"

namespace gaia::core {

// Tensor geometry of one corpus / model family. The appearance latent grid is
// H/8 x W/8 and the motion latent grid H/16 x W/16, mirroring the two encoder
// downsampling factors.
struct ShapeConfig {
    int64_t H = 64;
    int64_t W = 64;
    int64_t K = lm::kCount;
    int64_t d_s = 32;   // speech feature width (synthetic provider default)
    int64_t latent_channels = 3;

    int64_t h_a() const { return H / 8; }
    int64_t w_a() const { return W / 8; }
    int64_t h_m() const { return H / 16; }
    int64_t w_m() const { return W / 16; }

    void validate() const {
        if (H % 16 != 0 || W % 16 != 0) throw DomainError("ShapeConfig: H and W must be divisible by 16");
        if (H <= 0 || W <= 0 || K <= 0 || d_s <= 0) throw DomainError("ShapeConfig: non-positive dims");
    }
};

// Model-size presets. small/base/large carry the published sizes; tiny is the
// desk-scale default used by tests and the toy pipeline.
struct ScalePreset {
    std::string name = "tiny";
    int64_t vae_hidden = 16;
    int64_t vae_layers = 1;
    int64_t diff_hidden = 64;
    int64_t diff_layers = 2;

    static ScalePreset by_name(const std::string& name);
};

// One contiguous talking segment with per-frame annotations. Frames are
// [N,H,W,3] floats in [0,1]; landmarks [N,K,2] pixel coordinates; poses
// [N,3] radians ordered (pitch, yaw, roll); speech_features [N,d_s].
// mask_flags is optional per-frame metadata (1 = mask worn); empty means none.
struct VideoClip {
    ArrF frames;
    ArrF landmarks;
    ArrF poses;
    ArrF speech_features;
    std::vector<float> mask_flags;
    float fps = 25.0f;
    std::string identity_id;

    int64_t n_frames() const { return frames.ndim() == 4 ? frames.dim(0) : 0; }
};

struct ValidationReport {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

// Reports every violated invariant; never throws. An empty report means the
// clip is well-formed against cfg.
ValidationReport validate_clip(const VideoClip& clip, const ShapeConfig& cfg);

}  // namespace gaia::core
