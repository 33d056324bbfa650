#pragma once

#include <filesystem>

#include "gaia/synth/avatar.hpp"

namespace gaia::synth {

// Deterministic stand-in for a pretrained speech feature extractor. Row i is
// a fixed smooth embedding of phone_strength[i] plus low-amplitude seeded
// noise; row energy is monotone in phone_strength and zero at zero.
struct SpeechFeatures {
    ArrF features;     // [N, d_s]
    ArrF mouth_track;  // [N]
};
SpeechFeatures synth_speech_features(const std::vector<float>& script, const ShapeConfig& cfg,
                                     uint64_t noise_seed = 0);

// Trajectory shaping knobs. Defaults produce clips that pass the default
// filtration policy; the jittery/profile/silent presets exist to produce
// failing cases.
struct GenOptions {
    double pose_std_pitch = 0.16;
    double pose_std_yaw = 0.22;
    double pose_std_roll = 0.10;
    double pose_smooth_alpha = 0.97;  // EMA coefficient; lower = jitterier
    double pose_bias_pitch = 0.0;     // constant offset, e.g. profile views
    double pose_bias_yaw = 0.0;
    double speech_nod_gain = 0.08;    // pitch follows the syllable envelope
    double silence_prob = 0.12;       // probability of a silent gap between syllables
    bool all_silent = false;
    std::vector<std::pair<int64_t, int64_t>> mask_ranges;  // [begin,end) masked frames
};

// N = round(duration_s * fps) frames of one identity with ground-truth
// landmarks, poses, speech features, and mouth track. Deterministic given
// (identity_seed, duration_s, fps) and options.
core::VideoClip generate_clip(int64_t identity_seed, double duration_s, double fps, const ShapeConfig& cfg,
                              const GenOptions& opts = {});

// Corpus = one clip per identity seed, written as clip containers named
// clip_<seed>. Returns the directories.
std::vector<std::filesystem::path> generate_corpus(const std::filesystem::path& dir,
                                                   const std::vector<int64_t>& identity_seeds, double duration_s,
                                                   double fps, const ShapeConfig& cfg, const GenOptions& opts = {});

}  // namespace gaia::synth
