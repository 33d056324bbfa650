#include "gaia/synth/avatar.hpp"

#include <cmath>

namespace gaia::synth {

using namespace face;

namespace {

// Fixed feature colors shared by all identities; the motion estimator keys on
// them.
constexpr Rgb kLipColor{0.72f, 0.18f, 0.24f};
constexpr Rgb kCavityColor{0.08f, 0.07f, 0.07f};  // same as pupil; spatially disambiguated
constexpr Rgb kScleraColor{0.97f, 0.97f, 0.97f};
constexpr Rgb kPupilColor{0.08f, 0.07f, 0.07f};
constexpr Rgb kMaskColor{0.62f, 0.66f, 0.70f};

struct SplitMix {
    uint64_t s;
    explicit SplitMix(uint64_t seed) : s(seed) {}
    uint64_t next() {
        s += 0x9e3779b97f4a7c15ull;
        uint64_t z = s;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
    double uniform(double lo, double hi) {
        return lo + (hi - lo) * (static_cast<double>(next() >> 11) * (1.0 / 9007199254740992.0));
    }
};

inline bool in_ellipse(double u, double v, double cx, double cy, double a, double b) {
    const double du = (u - cx) / a, dv = (v - cy) / b;
    return du * du + dv * dv <= 1.0;
}

}  // namespace

AppearanceParams AppearanceParams::sample(int64_t identity_seed) {
    SplitMix rng(static_cast<uint64_t>(identity_seed) * 0x2545f4914f6cdd1dull + 0xabcd1234u);
    AppearanceParams a;
    const float r = static_cast<float>(rng.uniform(0.55, 0.90));
    const float g = r * static_cast<float>(rng.uniform(0.72, 0.85));
    const float b = g * static_cast<float>(rng.uniform(0.60, 0.80));
    a.skin_color = {r, g, b};
    // Hair: dark, any hue; kept off the pupil/cavity feature color.
    a.hair_color = {static_cast<float>(rng.uniform(0.14, 0.45)), static_cast<float>(rng.uniform(0.14, 0.45)),
                    static_cast<float>(rng.uniform(0.14, 0.45))};
    // Background: cool (B >= R) so it never collides with skin.
    float br = static_cast<float>(rng.uniform(0.20, 0.75));
    float bg = static_cast<float>(rng.uniform(0.25, 0.85));
    float bb = static_cast<float>(rng.uniform(0.35, 0.90));
    if (bb < br) std::swap(bb, br);
    a.background_color = {br, bg, bb};
    a.face_scale = static_cast<float>(rng.uniform(1.0, 1.1));
    a.eye_spacing = static_cast<float>(rng.uniform(-0.03, 0.03));
    a.identity_seed = identity_seed;
    return a;
}

void AppearanceParams::check() const {
    for (const Rgb* c : {&skin_color, &hair_color, &background_color})
        for (float v : *c)
            if (v < 0.0f || v > 1.0f) throw DomainError("AppearanceParams: color outside [0,1]");
    if (face_scale < 1.0f || face_scale > 1.1f) throw DomainError("AppearanceParams: face_scale outside [1.0,1.1]");
    if (std::abs(eye_spacing) > 0.03f) throw DomainError("AppearanceParams: eye_spacing outside [-0.03,0.03]");
}

void MotionParams::check() const {
    if (std::abs(pitch) > kPoseLimitRad || std::abs(yaw) > kPoseLimitRad || std::abs(roll) > kPoseLimitRad)
        throw DomainError("MotionParams: pose outside +-0.6 rad");
    if (mouth_open < 0.0f || mouth_open > 1.0f) throw DomainError("MotionParams: mouth_open outside [0,1]");
    if (eyes_open < 0.0f || eyes_open > 1.0f) throw DomainError("MotionParams: eyes_open outside [0,1]");
}

PoseTransform::PoseTransform(const MotionParams& m, const ShapeConfig& cfg) {
    cx = 0.5 * static_cast<double>(cfg.W);
    cy = 0.52 * static_cast<double>(cfg.H);
    s0 = scale_px(cfg);
    cr = std::cos(m.roll);
    sr = std::sin(m.roll);
    cyaw = std::cos(m.yaw);
    cpitch = std::cos(m.pitch);
    shx = kShiftYaw * std::sin(m.yaw);
    shy = kShiftPitch * std::sin(m.pitch);
}

std::array<double, 2> PoseTransform::to_image(double u, double v) const {
    const double su = u * cyaw, sv = v * cpitch;
    const double qx = cr * su - sr * sv + shx;
    const double qy = sr * su + cr * sv + shy;
    return {cx + s0 * qx, cy + s0 * qy};
}

std::array<double, 2> PoseTransform::to_canonical(double x, double y) const {
    const double qx = (x - cx) / s0 - shx;
    const double qy = (y - cy) / s0 - shy;
    const double su = cr * qx + sr * qy;
    const double sv = -sr * qx + cr * qy;
    return {su / cyaw, sv / cpitch};
}

ArrF avatar_landmarks(const MotionParams& m, const ShapeConfig& cfg) {
    m.check();
    PoseTransform T(m, cfg);
    const double g = kMouthGap * m.mouth_open;
    const double he = kEyeOpenMin + kEyeOpenGain * m.eyes_open;

    std::array<std::array<double, 2>, core::lm::kCount> pts;
    // Jaw: lower arc of the head ellipse, image-left temple to image-right.
    for (int i = 0; i < 17; ++i) {
        const double deg = 197.0 - 13.375 * i;
        const double rad = deg * M_PI / 180.0;
        pts[i] = {kHeadCx + kHeadA * std::cos(rad), kHeadCy + kHeadB * std::sin(rad)};
    }
    // Brows.
    for (int i = 0; i < 5; ++i) {
        const double t = i / 4.0;
        const double arc = 0.025 * std::sin(M_PI * t);
        pts[17 + i] = {-kEyeX - kBrowA + 2 * kBrowA * t, kBrowY - arc};
        pts[22 + i] = {kEyeX - kBrowA + 2 * kBrowA * t, kBrowY - arc};
    }
    // Nose bridge and tip (30 = tip).
    pts[27] = {0.0, kNoseTopV};
    pts[28] = {0.0, kNoseTopV + (kNoseTipV - kNoseTopV) / 3.0};
    pts[29] = {0.0, kNoseTopV + 2.0 * (kNoseTipV - kNoseTopV) / 3.0};
    pts[30] = {0.0, kNoseTipV};
    // Nose bottom.
    pts[31] = {-0.10, 0.175};
    pts[32] = {-0.05, 0.19};
    pts[33] = {0.0, 0.195};
    pts[34] = {0.05, 0.19};
    pts[35] = {0.10, 0.175};
    // Eyes. iBUG ring order: first corner (36 = outer temporal for the left
    // eye, 42 = inner nasal for the right), two upper-lid points, the other
    // corner, two lower-lid points. 36 and 45 are the outer corners.
    auto eye = [&](int base, double ex) {
        const double dv = he * 0.87;
        pts[base + 0] = {ex - kEyeA, kEyeY};
        pts[base + 1] = {ex - kEyeA / 2, kEyeY - dv};
        pts[base + 2] = {ex + kEyeA / 2, kEyeY - dv};
        pts[base + 3] = {ex + kEyeA, kEyeY};
        pts[base + 4] = {ex + kEyeA / 2, kEyeY + dv};
        pts[base + 5] = {ex - kEyeA / 2, kEyeY + dv};
    };
    eye(36, -kEyeX);
    eye(42, kEyeX);
    // Mouth outer ring (48..59) on the outer lip ellipse.
    const double sy = g / 2 + kLipH;
    auto mouth_v = [&](double x, double halfw, double semiy, int sign) {
        const double t = std::min(1.0, std::abs(x) / halfw);
        return kMouthY + sign * semiy * std::sqrt(std::max(0.0, 1.0 - t * t));
    };
    pts[48] = {-kMouthHalfW, kMouthY};
    for (int i = 1; i <= 5; ++i) {
        const double x = -kMouthHalfW + 2 * kMouthHalfW * i / 6.0;
        pts[48 + i] = {x, mouth_v(x, kMouthHalfW, sy, -1)};
    }
    pts[54] = {kMouthHalfW, kMouthY};
    for (int i = 1; i <= 5; ++i) {
        const double x = kMouthHalfW - 2 * kMouthHalfW * i / 6.0;
        pts[54 + i] = {x, mouth_v(x, kMouthHalfW, sy, +1)};
    }
    // Mouth inner ring (60..67) on the cavity ellipse; coincident rows when
    // the mouth is closed.
    const double iw = kMouthInnerScale * kMouthHalfW;
    pts[60] = {-iw, kMouthY};
    pts[61] = {-0.5 * iw, mouth_v(-0.5 * iw, iw, g / 2, -1)};
    pts[62] = {0.0, kMouthY - g / 2};
    pts[63] = {0.5 * iw, mouth_v(0.5 * iw, iw, g / 2, -1)};
    pts[64] = {iw, kMouthY};
    pts[65] = {0.5 * iw, mouth_v(0.5 * iw, iw, g / 2, +1)};
    pts[66] = {0.0, kMouthY + g / 2};
    pts[67] = {-0.5 * iw, mouth_v(-0.5 * iw, iw, g / 2, +1)};

    ArrF out(Shape{cfg.K, 2});
    for (int k = 0; k < core::lm::kCount; ++k) {
        const auto xy = T.to_image(pts[k][0], pts[k][1]);
        out.at(k, 0) = static_cast<float>(xy[0]);
        out.at(k, 1) = static_cast<float>(xy[1]);
    }
    return out;
}

RenderResult render_avatar_frame(const AppearanceParams& a, const MotionParams& m, const ShapeConfig& cfg,
                                 bool masked) {
    a.check();
    m.check();
    cfg.validate();
    PoseTransform T(m, cfg);
    const double fs = a.face_scale;
    const double g = kMouthGap * m.mouth_open;
    const double he = kEyeOpenMin + kEyeOpenGain * m.eyes_open;
    const double gaze = a.eye_spacing;

    auto shade = [&](double u, double v, Rgb& px) {
        if (!in_ellipse(u, v, kHeadCx, 0.0, kHairA * fs, kHairB * fs) &&
            !in_ellipse(u, v, kHeadCx, kHeadCy, kHeadA * fs, kHeadB * fs))
            return;  // background already set
        // Hair cap over the top, skin below.
        if (v < kHairlineV && in_ellipse(u, v, kHeadCx, 0.0, kHairA * fs, kHairB * fs)) {
            px = a.hair_color;
            return;
        }
        if (!in_ellipse(u, v, kHeadCx, kHeadCy, kHeadA * fs, kHeadB * fs)) return;
        px = a.skin_color;
        // Brows.
        if (in_ellipse(u, v, -kEyeX, kBrowY, kBrowA, kBrowB) || in_ellipse(u, v, kEyeX, kBrowY, kBrowA, kBrowB)) {
            px = {a.hair_color[0] * 0.8f, a.hair_color[1] * 0.8f, a.hair_color[2] * 0.8f};
            return;
        }
        // Eyes: sclera opening, pupil at gaze offset.
        for (double ex : {-kEyeX, kEyeX}) {
            if (in_ellipse(u, v, ex, kEyeY, kEyeA, he)) {
                px = kScleraColor;
                const double pdx = u - (ex + gaze), pdy = v - kEyeY;
                if (pdx * pdx + pdy * pdy <= kPupilR * kPupilR) px = kPupilColor;
                return;
            }
        }
        // Nose bridge + tip wedge.
        if (std::abs(u) <= kNoseW && v >= kNoseTopV && v <= kNoseTipV) {
            px = {a.skin_color[0] * 0.72f, a.skin_color[1] * 0.72f, a.skin_color[2] * 0.72f};
            return;
        }
        if (in_ellipse(u, v, 0.0, kNoseTipV, kNoseTipA, kNoseTipB)) {
            px = {a.skin_color[0] * 0.72f, a.skin_color[1] * 0.72f, a.skin_color[2] * 0.72f};
            return;
        }
        // Mouth: lip lens with a dark cavity when open.
        const double sy = g / 2 + kLipH;
        if (in_ellipse(u, v, 0.0, kMouthY, kMouthHalfW, sy)) {
            px = kLipColor;
            if (g > 1e-9 && in_ellipse(u, v, 0.0, kMouthY, kMouthInnerScale * kMouthHalfW, g / 2))
                px = kCavityColor;
            return;
        }
    };

    const int64_t H = cfg.H, W = cfg.W;
    RenderResult out;
    out.frame = ArrF(Shape{H, W, 3});
    // 2x2 supersampling.
    constexpr double sub[2] = {0.25, 0.75};
    for (int64_t y = 0; y < H; ++y)
        for (int64_t x = 0; x < W; ++x) {
            float acc[3] = {0, 0, 0};
            for (double oy : sub)
                for (double ox : sub) {
                    const auto uv = T.to_canonical(static_cast<double>(x) + ox, static_cast<double>(y) + oy);
                    Rgb px = a.background_color;
                    shade(uv[0], uv[1], px);
                    if (masked && in_ellipse(uv[0], uv[1], 0.0, 0.40, 0.58, 0.46) &&
                        in_ellipse(uv[0], uv[1], kHeadCx, kHeadCy, kHeadA * fs + 0.03, kHeadB * fs + 0.03))
                        px = kMaskColor;
                    acc[0] += px[0];
                    acc[1] += px[1];
                    acc[2] += px[2];
                }
            for (int c = 0; c < 3; ++c) out.frame.at(y, x, c) = acc[c] * 0.25f;
        }
    out.landmarks = avatar_landmarks(m, cfg);
    return out;
}

PixelBox avatar_bounding_box(const AppearanceParams& a, const ShapeConfig& cfg) {
    const double s0 = scale_px(cfg);
    const double cx = 0.5 * static_cast<double>(cfg.W);
    const double cy = 0.52 * static_cast<double>(cfg.H);
    // Any rotation of the silhouette ellipse fits in a disc of its major
    // semi-axis; add the maximum pose shift.
    const double r = s0 * (std::max(kHairA, kHairB) * a.face_scale +
                           std::max(kShiftYaw, kShiftPitch) * std::sin(kPoseLimitRad)) +
                     1.0;  // one pixel of anti-aliasing slack
    PixelBox box;
    box.x0 = std::max<int64_t>(0, static_cast<int64_t>(std::floor(cx - r)));
    box.y0 = std::max<int64_t>(0, static_cast<int64_t>(std::floor(cy - r)));
    box.x1 = std::min<int64_t>(cfg.W, static_cast<int64_t>(std::ceil(cx + r)) + 1);
    box.y1 = std::min<int64_t>(cfg.H, static_cast<int64_t>(std::ceil(cy + r)) + 1);
    return box;
}

}  // namespace gaia::synth
