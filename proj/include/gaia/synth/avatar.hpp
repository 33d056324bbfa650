#pragma once

#include <array>

#include "gaia/core/types.hpp"

namespace gaia::synth {

using core::ShapeConfig;

using Rgb = std::array<float, 3>;

// Identity factors. Landmark positions are a function of MotionParams only:
// identity shows up as colors, a silhouette margin around the fixed face
// scaffold, and gaze offset inside the (fixed) eye openings.
struct AppearanceParams {
    Rgb skin_color{0.85f, 0.68f, 0.55f};
    Rgb hair_color{0.25f, 0.18f, 0.12f};
    Rgb background_color{0.35f, 0.45f, 0.60f};
    float face_scale = 1.05f;    // silhouette margin factor, [1.0, 1.1]
    float eye_spacing = 0.0f;    // pupil offset inside the eye opening, [-0.03, 0.03]
    int64_t identity_seed = 0;

    static AppearanceParams sample(int64_t identity_seed);
    void check() const;
};

struct MotionParams {
    float pitch = 0.0f;  // radians
    float yaw = 0.0f;
    float roll = 0.0f;
    float mouth_open = 0.0f;  // [0,1]
    float eyes_open = 1.0f;   // [0,1]

    void check() const;
};

constexpr float kPoseLimitRad = 0.6f;

// Canonical face geometry (unit face frame, y down). Both the renderer and
// the motion estimator invert against these constants.
namespace face {
constexpr double kHeadCx = 0.0, kHeadCy = 0.05, kHeadA = 0.72, kHeadB = 0.92;
constexpr double kHairA = 0.80, kHairB = 1.02, kHairlineV = -0.42;
constexpr double kEyeX = 0.30, kEyeY = -0.22, kEyeA = 0.155;
constexpr double kEyeOpenMin = 0.02, kEyeOpenGain = 0.10;
constexpr double kPupilR = 0.055;
constexpr double kBrowY = -0.44, kBrowA = 0.19, kBrowB = 0.030;
constexpr double kNoseTopV = -0.12, kNoseTipV = 0.125, kNoseW = 0.025;
constexpr double kNoseTipA = 0.065, kNoseTipB = 0.045;
constexpr double kMouthY = 0.48, kMouthHalfW = 0.27, kMouthGap = 0.22, kLipH = 0.055;
constexpr double kMouthInnerScale = 0.92;
constexpr double kShiftYaw = 0.22, kShiftPitch = 0.18;
constexpr double kFaceUnit = 0.36;  // face units -> pixels: s0 = kFaceUnit * min(H,W)

inline double scale_px(const ShapeConfig& cfg) {
    return kFaceUnit * static_cast<double>(std::min(cfg.H, cfg.W));
}
}  // namespace face

// Pose map from canonical face coordinates to pixels:
//   q = R(roll) * diag(cos yaw, cos pitch) * p + (kShiftYaw*sin yaw, kShiftPitch*sin pitch)
//   (x,y) = center + s0 * q
struct PoseTransform {
    double cx, cy, s0;
    double cr, sr, cyaw, cpitch, shx, shy;

    PoseTransform(const MotionParams& m, const ShapeConfig& cfg);
    std::array<double, 2> to_image(double u, double v) const;
    std::array<double, 2> to_canonical(double x, double y) const;
};

// Deterministic frame + exact analytic landmark positions. Background pixels
// depend only on AppearanceParams. `masked` draws an opaque mask over the
// lower face (motion metadata stays truthful; the flag is recorded in clip
// metadata by the corpus generator).
struct RenderResult {
    ArrF frame;      // [H,W,3]
    ArrF landmarks;  // [K,2]
};
RenderResult render_avatar_frame(const AppearanceParams& a, const MotionParams& m, const ShapeConfig& cfg,
                                 bool masked = false);

// Landmarks alone (identical for every appearance by construction).
ArrF avatar_landmarks(const MotionParams& m, const ShapeConfig& cfg);

// Conservative pixel box containing the whole avatar (hair included) for any
// pose within +-kPoseLimitRad; everything outside is pure background.
struct PixelBox {
    int64_t x0, y0, x1, y1;  // half-open
};
PixelBox avatar_bounding_box(const AppearanceParams& a, const ShapeConfig& cfg);

}  // namespace gaia::synth
