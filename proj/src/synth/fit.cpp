#include "gaia/synth/fit.hpp"

#include <cmath>
#include <optional>

namespace gaia::synth {

using namespace face;
using core::lm::kEyeOuterLeft;
using core::lm::kEyeOuterRight;
using core::lm::kLowerLipInnerMid;
using core::lm::kNoseTip;
using core::lm::kUpperLipInnerMid;

namespace {

struct Vec2 {
    double x = 0, y = 0;
};

constexpr std::array<float, 3> kLip{0.72f, 0.18f, 0.24f};
constexpr std::array<float, 3> kDark{0.08f, 0.07f, 0.07f};  // pupil and mouth cavity
constexpr std::array<float, 3> kScleraC{0.97f, 0.97f, 0.97f};

double dist2(const float* px, const std::array<float, 3>& c) {
    double s = 0;
    for (int i = 0; i < 3; ++i) {
        const double d = px[i] - c[i];
        s += d * d;
    }
    return s;
}

// Canonical centroid of the rendered nose region (bridge bar + tip wedge).
// The image-space nose cluster centroid is the pose transform of this point.
Vec2 nose_canonical_centroid() {
    static const Vec2 c = [] {
        double mass = 0, su = 0, sv = 0;
        const double step = 0.001;
        for (double u = -0.08; u <= 0.08; u += step)
            for (double v = -0.14; v <= 0.19; v += step) {
                const bool bar = std::abs(u) <= kNoseW && v >= kNoseTopV && v <= kNoseTipV;
                const double du = u / kNoseTipA, dv = (v - kNoseTipV) / kNoseTipB;
                const bool tip = du * du + dv * dv <= 1.0;
                if (!bar && !tip) continue;
                mass += 1;
                su += u;
                sv += v;
            }
        return Vec2{su / mass, sv / mass};
    }();
    return c;
}

struct Measure {
    Vec2 eye_l, eye_r, nose, lip;  // sclera centroids are the eye centers
    double sclera_mass = 0, cavity_mass = 0;
    bool ok = false;
};

struct Cluster {
    double mass = 0;
    Vec2 centroid;
};

// Soft mass/centroid of pixels whose nearest palette entry is `target`,
// optionally gated to a disc.
Cluster soft_cluster(const ArrF& frame, const std::vector<std::array<float, 3>>& palette, size_t target,
                     const Vec2& gate_center = {-1, -1}, double gate_radius = -1) {
    const double sigma2 = 0.10 * 0.10;
    const int64_t h = frame.dim(0), w = frame.dim(1);
    Cluster out;
    for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x) {
            if (gate_radius > 0) {
                const double dx = static_cast<double>(x) - gate_center.x;
                const double dy = static_cast<double>(y) - gate_center.y;
                if (dx * dx + dy * dy > gate_radius * gate_radius) continue;
            }
            const float* px = frame.ptr() + (y * w + x) * 3;
            double best = 1e9;
            size_t best_i = 0;
            for (size_t i = 0; i < palette.size(); ++i) {
                const double d = dist2(px, palette[i]);
                if (d < best) {
                    best = d;
                    best_i = i;
                }
            }
            if (best_i != target) continue;
            const double wgt = std::exp(-best / sigma2);
            out.mass += wgt;
            out.centroid.x += wgt * static_cast<double>(x);
            out.centroid.y += wgt * static_cast<double>(y);
        }
    if (out.mass > 1e-12) {
        out.centroid.x /= out.mass;
        out.centroid.y /= out.mass;
    }
    return out;
}

// DARKF covers both pupils and the mouth cavity; spatial gates tell them
// apart.
enum { SCLERA = 0, DARKF = 1, LIP = 2, NOSE = 3 };

std::vector<std::array<float, 3>> make_palette(const AppearanceParams& a) {
    const std::array<float, 3> nose{a.skin_color[0] * 0.72f, a.skin_color[1] * 0.72f, a.skin_color[2] * 0.72f};
    const std::array<float, 3> brow{a.hair_color[0] * 0.8f, a.hair_color[1] * 0.8f, a.hair_color[2] * 0.8f};
    return {kScleraC, kDark, kLip, nose, a.skin_color, brow, a.hair_color, a.background_color};
}

Measure measure_frame(const ArrF& frame, const std::vector<std::array<float, 3>>& palette, double s0) {
    Measure m;
    const Cluster sc_all = soft_cluster(frame, palette, SCLERA);
    if (sc_all.mass < 1e-9) return m;
    m.sclera_mass = sc_all.mass;

    // Split sclera into the two eyes by x about the joint centroid.
    const int64_t h = frame.dim(0), w = frame.dim(1);
    double ml = 0, mr = 0;
    Vec2 cl, cr;
    const double sigma2 = 0.10 * 0.10;
    for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x) {
            const float* px = frame.ptr() + (y * w + x) * 3;
            double best = 1e9;
            size_t bi = 0;
            for (size_t i = 0; i < palette.size(); ++i) {
                const double d = dist2(px, palette[i]);
                if (d < best) {
                    best = d;
                    bi = i;
                }
            }
            if (bi != SCLERA) continue;
            const double wgt = std::exp(-best / sigma2);
            if (static_cast<double>(x) < sc_all.centroid.x) {
                ml += wgt;
                cl.x += wgt * static_cast<double>(x);
                cl.y += wgt * static_cast<double>(y);
            } else {
                mr += wgt;
                cr.x += wgt * static_cast<double>(x);
                cr.y += wgt * static_cast<double>(y);
            }
        }
    if (ml < 1e-9 || mr < 1e-9) return m;
    m.eye_l = {cl.x / ml, cl.y / ml};
    m.eye_r = {cr.x / mr, cr.y / mr};

    // Nose gated below the eye line.
    const double roll0 = std::atan2(m.eye_r.y - m.eye_l.y, m.eye_r.x - m.eye_l.x);
    const Vec2 nc = nose_canonical_centroid();
    const double off = (nc.y - kEyeY) * s0;
    const Vec2 nose_gate{0.5 * (m.eye_l.x + m.eye_r.x) - std::sin(roll0) * off,
                         0.5 * (m.eye_l.y + m.eye_r.y) + std::cos(roll0) * off};
    const Cluster nose = soft_cluster(frame, palette, NOSE, nose_gate, 0.24 * s0);
    if (nose.mass < 1e-9) return m;
    m.nose = nose.centroid;

    const Cluster lip = soft_cluster(frame, palette, LIP);
    if (lip.mass < 1e-9) return m;
    m.lip = lip.centroid;
    const Cluster cav = soft_cluster(frame, palette, DARKF, lip.centroid, 0.45 * s0);
    m.cavity_mass = cav.mass;
    m.ok = true;
    return m;
}

struct Anchors {
    Vec2 eye_l, eye_r, nose, lip;
};

// Exact image positions of the eye centers and the nose-region centroid
// under a pose; the affine pose map sends canonical centroids to image
// centroids.
Anchors analytic_anchors(const MotionParams& m, const ShapeConfig& cfg) {
    PoseTransform T(m, cfg);
    const Vec2 nc = nose_canonical_centroid();
    Anchors an;
    auto at = [&](double u, double v) {
        const auto p = T.to_image(u, v);
        return Vec2{p[0], p[1]};
    };
    an.eye_l = at(-kEyeX, kEyeY);
    an.eye_r = at(kEyeX, kEyeY);
    an.nose = at(nc.x, nc.y);
    an.lip = at(0.0, kMouthY);  // the lip ring is symmetric about the mouth center
    return an;
}

// Closed-form pose from eye/nose anchors: roll from the eye line, pitch
// from the eye-line-to-nose distance, yaw and pitch signs from the pose
// shift.
void pose_from_anchors(const Anchors& an, const ShapeConfig& cfg, MotionParams& m) {
    const double s0 = scale_px(cfg);
    const double cx = 0.5 * static_cast<double>(cfg.W);
    const double cy = 0.52 * static_cast<double>(cfg.H);
    auto canon = [&](const Vec2& p) { return Vec2{(p.x - cx) / s0, (p.y - cy) / s0}; };
    const Vec2 wl = canon(an.eye_l), wr = canon(an.eye_r), wn = canon(an.nose);
    const Vec2 nc = nose_canonical_centroid();

    const Vec2 wlip = canon(an.lip);

    const double roll = std::atan2(wr.y - wl.y, wr.x - wl.x);
    const double cr = std::cos(roll), sr = std::sin(roll);
    const Vec2 wm{0.5 * (wl.x + wr.x), 0.5 * (wl.y + wr.y)};
    // cos_pitch from the two long vertical baselines (eyes->nose, eyes->lip),
    // averaged with baseline-length weights.
    const double ry_n = -sr * (wm.x - wn.x) + cr * (wm.y - wn.y);
    const double ry_l = -sr * (wm.x - wlip.x) + cr * (wm.y - wlip.y);
    const double cos_pitch =
        std::clamp((-ry_n - ry_l) / ((nc.y - kEyeY) + (kMouthY - kEyeY)), 0.55, 1.0);
    // Pose shift: mass-weighted residual over the three vertical anchors,
    // wi = R*(0, vi*cos_pitch) + shift.
    auto resid = [&](const Vec2& w, double vcan) {
        return Vec2{w.x - (-sr * vcan * cos_pitch), w.y - (cr * vcan * cos_pitch)};
    };
    const Vec2 r_eye = resid(wm, kEyeY);
    const Vec2 r_nose = resid(wn, nc.y);
    const Vec2 r_lip = resid(wlip, kMouthY);
    const double shift_x = (r_eye.x + r_nose.x + 2.0 * r_lip.x) / 4.0;
    const double shift_y = (r_eye.y + r_nose.y + 2.0 * r_lip.y) / 4.0;
    const double lim = static_cast<double>(kPoseLimitRad);
    m.yaw = static_cast<float>(std::clamp(std::asin(std::clamp(shift_x / kShiftYaw, -0.999, 0.999)), -lim, lim));
    double pitch = std::asin(std::clamp(shift_y / kShiftPitch, -0.999, 0.999));
    m.pitch = static_cast<float>(std::clamp(pitch, -lim, lim));
    m.roll = static_cast<float>(std::clamp(roll, -lim, lim));
}

}  // namespace

std::array<double, 3> pose_from_landmarks(const ArrF& landmarks, const ShapeConfig& cfg) {
    const double s0 = scale_px(cfg);
    const double cx = 0.5 * static_cast<double>(cfg.W);
    const double cy = 0.52 * static_cast<double>(cfg.H);
    auto get = [&](int k) {
        return Vec2{(landmarks.at(k, 0) - cx) / s0, (landmarks.at(k, 1) - cy) / s0};
    };
    const Vec2 el = get(kEyeOuterLeft), er = get(kEyeOuterRight), nt = get(kNoseTip);
    const double dx = er.x - el.x, dy = er.y - el.y;
    if (std::hypot(dx, dy) < 1e-6) throw DegenerateGeometryError("pose_from_landmarks: eye corners coincide");
    const double roll = std::atan2(dy, dx);
    const double cr = std::cos(roll), sr = std::sin(roll);
    const Vec2 mid{0.5 * (el.x + er.x), 0.5 * (el.y + er.y)};
    const double ry = -sr * (mid.x - nt.x) + cr * (mid.y - nt.y);
    const double cos_pitch = std::clamp(-ry / (kNoseTipV - kEyeY), 0.2, 1.0);
    const double shift_x = nt.x - (-sr * kNoseTipV * cos_pitch);
    const double shift_y = nt.y - (cr * kNoseTipV * cos_pitch);
    const double yaw = std::asin(std::clamp(shift_x / kShiftYaw, -1.0, 1.0));
    const double pitch = std::asin(std::clamp(shift_y / kShiftPitch, -1.0, 1.0));
    return {pitch, yaw, roll};
}

double mouth_openness_px(const ArrF& landmarks) {
    const double dx = landmarks.at(kUpperLipInnerMid, 0) - landmarks.at(kLowerLipInnerMid, 0);
    const double dy = landmarks.at(kUpperLipInnerMid, 1) - landmarks.at(kLowerLipInnerMid, 1);
    return std::hypot(dx, dy);
}

MotionParams estimate_motion(const ArrF& frame, const AppearanceParams& a, const ShapeConfig& cfg) {
    if (frame.shape != Shape{cfg.H, cfg.W, 3}) throw DomainError("estimate_motion: bad frame shape");
    const double s0 = scale_px(cfg);
    const auto palette = make_palette(a);
    const Measure obs = measure_frame(frame, palette, s0);
    if (!obs.ok) throw DegenerateGeometryError("estimate_motion: facial features not found");

    // Closed-form initialization from the observed anchors.
    MotionParams est;
    pose_from_anchors({obs.eye_l, obs.eye_r, obs.nose, obs.lip}, cfg, est);
    est.mouth_open = 0.3f;
    est.eyes_open = 0.7f;

    auto anchor_residual = [&](const MotionParams& theta, Measure* out_sim) {
        const RenderResult rr = render_avatar_frame(a, theta, cfg);
        const Measure sim = measure_frame(rr.frame, palette, s0);
        if (!sim.ok) return 1e9;
        if (out_sim) *out_sim = sim;
        double r2 = 0;
        auto acc = [&](const Vec2& sv, const Vec2& ov) {
            r2 += (sv.x - ov.x) * (sv.x - ov.x) + (sv.y - ov.y) * (sv.y - ov.y);
        };
        acc(sim.eye_l, obs.eye_l);
        acc(sim.eye_r, obs.eye_r);
        acc(sim.nose, obs.nose);
        acc(sim.lip, obs.lip);
        return r2;
    };

    // Levenberg-Marquardt on the measured anchors with the analytic anchor
    // Jacobian; steps are only accepted when the rendered-and-measured
    // residual actually drops, so the refinement can never leave the
    // closed-form estimate worse than it started.
    const Vec2 nc = nose_canonical_centroid();
    const std::array<Vec2, 4> canon_pts{Vec2{-kEyeX, kEyeY}, Vec2{kEyeX, kEyeY}, nc, Vec2{0.0, kMouthY}};
    Measure sim;
    double best = anchor_residual(est, &sim);
    double lambda = 1.0;
    const double lim = static_cast<double>(kPoseLimitRad);
    for (int it = 0; it < 10 && best > 8 * 0.15 * 0.15 && lambda < 256.0; ++it) {
        // 8x3 Jacobian of ideal anchor positions wrt (pitch, yaw, roll).
        const double cp = std::cos(est.pitch), sp = std::sin(est.pitch);
        const double cyw = std::cos(est.yaw), syw = std::sin(est.yaw);
        const double crl = std::cos(est.roll), srl = std::sin(est.roll);
        double JtJ[3][3] = {};
        double Jtr[3] = {};
        const std::array<Vec2, 4> sim_pts{sim.eye_l, sim.eye_r, sim.nose, sim.lip};
        const std::array<Vec2, 4> obs_pts{obs.eye_l, obs.eye_r, obs.nose, obs.lip};
        for (size_t i = 0; i < 4; ++i) {
            const double u = canon_pts[i].x, v = canon_pts[i].y;
            // q = R(roll)*(u*cyw, v*cp) + (kShiftYaw*syw, kShiftPitch*sp)
            const double du_dpitch_x = -crl * 0.0 + srl * v * sp;  // d(qx)/dpitch
            const double dq_pitch_x = srl * v * sp;
            const double dq_pitch_y = -crl * v * sp + kShiftPitch * cp;
            const double dq_yaw_x = -crl * u * syw + kShiftYaw * cyw;
            const double dq_yaw_y = -srl * u * syw;
            const double dq_roll_x = -srl * u * cyw - crl * v * cp;
            const double dq_roll_y = crl * u * cyw - srl * v * cp;
            (void)du_dpitch_x;
            const double J[2][3] = {{s0 * dq_pitch_x, s0 * dq_yaw_x, s0 * dq_roll_x},
                                    {s0 * dq_pitch_y, s0 * dq_yaw_y, s0 * dq_roll_y}};
            const double r[2] = {sim_pts[i].x - obs_pts[i].x, sim_pts[i].y - obs_pts[i].y};
            for (int p = 0; p < 3; ++p) {
                for (int q = 0; q < 3; ++q) JtJ[p][q] += J[0][p] * J[0][q] + J[1][p] * J[1][q];
                Jtr[p] += J[0][p] * r[0] + J[1][p] * r[1];
            }
        }
        for (int p = 0; p < 3; ++p) JtJ[p][p] += lambda;
        // Solve the 3x3 system by Cramer's rule.
        auto det3 = [](const double m[3][3]) {
            return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                   m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                   m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        };
        const double d0 = det3(JtJ);
        if (std::abs(d0) < 1e-12) break;
        double delta[3];
        for (int p = 0; p < 3; ++p) {
            double mcopy[3][3];
            for (int r2 = 0; r2 < 3; ++r2)
                for (int c2 = 0; c2 < 3; ++c2) mcopy[r2][c2] = JtJ[r2][c2];
            for (int r2 = 0; r2 < 3; ++r2) mcopy[r2][p] = -Jtr[r2];
            delta[p] = det3(mcopy) / d0;
        }
        MotionParams trial = est;
        trial.pitch = static_cast<float>(std::clamp(est.pitch + delta[0], -lim, lim));
        trial.yaw = static_cast<float>(std::clamp(est.yaw + delta[1], -lim, lim));
        trial.roll = static_cast<float>(std::clamp(est.roll + delta[2], -lim, lim));
        Measure trial_sim;
        const double trial_res = anchor_residual(trial, &trial_sim);
        if (trial_res < best) {
            est = trial;
            sim = trial_sim;
            best = trial_res;
            lambda = std::max(0.125, lambda * 0.5);
        } else {
            lambda *= 4.0;
        }
    }

    // Mouth gap and eye opening by bisection on their monotone mass
    // observables at the fitted pose.
    auto cavity_at = [&](float mo) {
        MotionParams t = est;
        t.mouth_open = mo;
        t.eyes_open = 0.7f;
        const RenderResult rr = render_avatar_frame(a, t, cfg);
        return measure_frame(rr.frame, palette, s0).cavity_mass;
    };
    if (obs.cavity_mass < 0.5) {
        est.mouth_open = 0.0f;
    } else if (cavity_at(1.0f) <= obs.cavity_mass) {
        est.mouth_open = 1.0f;
    } else {
        float lo = 0.0f, hi = 1.0f;
        for (int it = 0; it < 7; ++it) {
            const float mid = 0.5f * (lo + hi);
            if (cavity_at(mid) < obs.cavity_mass)
                lo = mid;
            else
                hi = mid;
        }
        est.mouth_open = 0.5f * (lo + hi);
    }
    auto sclera_at = [&](float eo) {
        MotionParams t = est;
        t.eyes_open = eo;
        const RenderResult rr = render_avatar_frame(a, t, cfg);
        return measure_frame(rr.frame, palette, s0).sclera_mass;
    };
    if (sclera_at(1.0f) <= obs.sclera_mass) {
        est.eyes_open = 1.0f;
    } else if (sclera_at(0.0f) >= obs.sclera_mass) {
        est.eyes_open = 0.0f;
    } else {
        float lo = 0.0f, hi = 1.0f;
        for (int it = 0; it < 7; ++it) {
            const float mid = 0.5f * (lo + hi);
            if (sclera_at(mid) < obs.sclera_mass)
                lo = mid;
            else
                hi = mid;
        }
        est.eyes_open = 0.5f * (lo + hi);
    }
    return est;
}

ArrF estimate_landmarks(const ArrF& frame, const AppearanceParams& a, const ShapeConfig& cfg) {
    return avatar_landmarks(estimate_motion(frame, a, cfg), cfg);
}

}  // namespace gaia::synth
