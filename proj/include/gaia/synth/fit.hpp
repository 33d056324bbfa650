#pragma once

#include "gaia/synth/avatar.hpp"

namespace gaia::synth {

// Inverse of the avatar renderer for evaluation: recovers MotionParams from a
// rendered (or generated) frame given the known appearance. Keyed on the
// fixed feature colors; tolerant to the blur of decoded frames.
MotionParams estimate_motion(const ArrF& frame, const AppearanceParams& a, const ShapeConfig& cfg);

// Full landmark set of the estimated motion.
ArrF estimate_landmarks(const ArrF& frame, const AppearanceParams& a, const ShapeConfig& cfg);

// Closed-form head pose from landmark geometry alone: roll from the outer
// eye-corner line, pitch from the eye-line/nose-tip distance, yaw from the
// pose shift of the nose tip. Returns (pitch, yaw, roll).
std::array<double, 3> pose_from_landmarks(const ArrF& landmarks, const ShapeConfig& cfg);

// Inner-lip gap in pixels (landmark indices 62/66).
double mouth_openness_px(const ArrF& landmarks);

}  // namespace gaia::synth
