#pragma once

#include <json.hpp>

#include "gaia/core/types.hpp"

namespace gaia::filt {

using core::VideoClip;

// Thresholds of the automated filtration policies. vae_mode loosens every
// gate by 1.5x (wider frontal band, larger allowed displacement, lower
// silence bar): the first training stage tolerates noisier frames because it
// never sees speech/image alignment.
struct FilterPolicy {
    double frontal_angle_tolerance_deg = 25.0;
    double max_displacement_px = -1.0;  // <= 0: use 0.04 * H of the clip, per frame
    double silence_energy_threshold = 0.05;
    double min_segment_s = 3.0;
    bool vae_mode = false;

    void check() const {
        if (frontal_angle_tolerance_deg <= 0 || silence_energy_threshold <= 0 || min_segment_s < 0)
            throw DomainError("FilterPolicy: thresholds must be positive");
    }
};

struct FrameVerdict {
    bool frontal_ok = false;
    bool stable_ok = false;
    bool speaking_ok = false;
    double angle_deg = 0.0;
    double displacement_px = 0.0;
    bool pass() const { return frontal_ok && stable_ok && speaking_ok; }
};

struct FilterReport {
    std::vector<FrameVerdict> per_frame;
    std::vector<std::pair<int64_t, int64_t>> segments;  // [start, end)
    nlohmann::json to_json() const;
};

// Angle at the nose tip swept from the ray to the image-left outer eye corner
// to the ray to the image-right one, measured against the horizontal reference
// through the nose tip; symmetric frontal geometry gives 180 degrees.
// Returned in [0, 360).
double frontal_angle(const ArrF& landmarks);

// Max over landmarks of the Euclidean inter-frame displacement; max (not
// mean) so a single jumping feature fails the frame.
double inter_frame_displacement(const ArrF& prev, const ArrF& next);

// Frame i is silent iff the L2 energy of speech feature row i is strictly
// below the threshold.
std::vector<bool> silence_mask(const ArrF& speech_features, double threshold);

// Frame-by-frame checks, maximal passing runs of at least min_segment_s, and
// center-cropped sub-clips (first-frame landmark centroid moved to the frame
// center by an integer shift).
std::pair<FilterReport, std::vector<VideoClip>> filter_video(const VideoClip& clip, const FilterPolicy& policy);

}  // namespace gaia::filt
