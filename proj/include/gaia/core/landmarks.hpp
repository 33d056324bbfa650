#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace gaia::core {

// Fixed 68-point landmark topology (iBUG-68 ordering). "left"/"right" are
// image-side names: index 36 is the outer corner of the eye on the image-left
// side when the subject faces the camera.
namespace lm {

constexpr int kCount = 68;

constexpr int kJawBegin = 0, kJawEnd = 17;              // 17 points, temple-to-temple via chin
constexpr int kBrowLeftBegin = 17, kBrowLeftEnd = 22;   // image-left brow
constexpr int kBrowRightBegin = 22, kBrowRightEnd = 27; // image-right brow
constexpr int kNoseBridgeBegin = 27, kNoseBridgeEnd = 31;
constexpr int kNoseBottomBegin = 31, kNoseBottomEnd = 36;
constexpr int kEyeLeftBegin = 36, kEyeLeftEnd = 42;     // image-left eye
constexpr int kEyeRightBegin = 42, kEyeRightEnd = 48;   // image-right eye
constexpr int kMouthOuterBegin = 48, kMouthOuterEnd = 60;
constexpr int kMouthInnerBegin = 60, kMouthInnerEnd = 68;

constexpr int kNoseTip = 30;
constexpr int kEyeOuterLeft = 36;    // outer corner, image-left eye
constexpr int kEyeOuterRight = 45;   // outer corner, image-right eye
constexpr int kMouthCornerLeft = 48;
constexpr int kMouthCornerRight = 54;
constexpr int kUpperLipInnerMid = 62;
constexpr int kLowerLipInnerMid = 66;

// Polyline groups used by the landmark rasterizer; {first, last, closed}.
struct Group {
    int begin;
    int end;
    bool closed;
};

constexpr std::array<Group, 9> kGroups{{
    {kJawBegin, kJawEnd, false},
    {kBrowLeftBegin, kBrowLeftEnd, false},
    {kBrowRightBegin, kBrowRightEnd, false},
    {kNoseBridgeBegin, kNoseBridgeEnd, false},
    {kNoseBottomBegin, kNoseBottomEnd, false},
    {kEyeLeftBegin, kEyeLeftEnd, true},
    {kEyeRightBegin, kEyeRightEnd, true},
    {kMouthOuterBegin, kMouthOuterEnd, true},
    {kMouthInnerBegin, kMouthInnerEnd, true},
}};

// Named index sets for the `generate --fix <group>` constraint pathway.
std::vector<int> group_indices(const std::string& name);
std::vector<std::string> group_names();

}  // namespace lm

}  // namespace gaia::core
