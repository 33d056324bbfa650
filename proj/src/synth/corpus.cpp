#include "gaia/synth/corpus.hpp"

#include <cmath>
#include <random>

#include "gaia/core/clip_io.hpp"

namespace gaia::synth {

namespace {

// Fixed embedding basis: two unit directions derived from d_s alone, so every
// corpus shares the same speech-feature geometry.
void embedding_basis(int64_t d_s, std::vector<double>& v0, std::vector<double>& v1) {
    std::mt19937_64 rng(0xfeedbeefcafe1234ull + static_cast<uint64_t>(d_s));
    std::normal_distribution<double> n(0.0, 1.0);
    v0.resize(static_cast<size_t>(d_s));
    v1.resize(static_cast<size_t>(d_s));
    double n0 = 0, n1 = 0;
    for (auto& v : v0) {
        v = n(rng);
        n0 += v * v;
    }
    for (auto& v : v1) {
        v = n(rng);
        n1 += v * v;
    }
    for (auto& v : v0) v /= std::sqrt(n0);
    for (auto& v : v1) v /= std::sqrt(n1);
}

}  // namespace

SpeechFeatures synth_speech_features(const std::vector<float>& script, const ShapeConfig& cfg,
                                     uint64_t noise_seed) {
    if (script.empty()) throw DomainError("synth_speech_features: empty script");
    const int64_t n = static_cast<int64_t>(script.size());
    std::vector<double> v0, v1;
    embedding_basis(cfg.d_s, v0, v1);

    SpeechFeatures out;
    out.features = ArrF(Shape{n, cfg.d_s});
    out.mouth_track = ArrF(Shape{n});
    std::mt19937_64 rng(noise_seed ^ 0x5deece66dull);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (int64_t i = 0; i < n; ++i) {
        const double s = script[static_cast<size_t>(i)];
        if (s < 0.0 || s > 1.0) throw DomainError("synth_speech_features: phone strength outside [0,1]");
        out.mouth_track[i] = static_cast<float>(s);
        // Direction drifts smoothly with strength; norm stays s*(1 +- eps).
        double dn = 0;
        std::vector<double> dir(static_cast<size_t>(cfg.d_s));
        for (int64_t j = 0; j < cfg.d_s; ++j) {
            dir[static_cast<size_t>(j)] = v0[static_cast<size_t>(j)] + s * v1[static_cast<size_t>(j)];
            dn += dir[static_cast<size_t>(j)] * dir[static_cast<size_t>(j)];
        }
        dn = std::sqrt(dn);
        for (int64_t j = 0; j < cfg.d_s; ++j) {
            const double e = noise(rng);
            out.features.at(i, j) = static_cast<float>(s * dir[static_cast<size_t>(j)] / dn + s * 0.04 * e);
        }
    }
    return out;
}

namespace {

// Raised-cosine syllable envelope: deterministic, smooth, with optional
// silent gaps; strengths of voiced syllables stay >= 0.25 so the silence
// gate separates cleanly.
std::vector<float> make_script(int64_t n, double fps, std::mt19937_64& rng, const GenOptions& opts) {
    std::vector<float> s(static_cast<size_t>(n), 0.0f);
    if (opts.all_silent) return s;
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    double t = 0.05;
    const double dur = static_cast<double>(n) / fps;
    while (t < dur) {
        if (uni(rng) < opts.silence_prob) {
            t += 0.3 + 0.4 * uni(rng);
            continue;
        }
        const double width = 0.22 + 0.18 * uni(rng);
        const double amp = 0.25 + 0.75 * uni(rng);
        const int64_t i0 = static_cast<int64_t>(std::floor(t * fps));
        const int64_t i1 = static_cast<int64_t>(std::ceil((t + width) * fps));
        for (int64_t i = std::max<int64_t>(0, i0); i < std::min(n, i1); ++i) {
            const double phase = (static_cast<double>(i) / fps - t) / width;
            if (phase >= 0 && phase <= 1) {
                const double env = 0.5 * (1.0 - std::cos(2.0 * M_PI * phase));
                s[static_cast<size_t>(i)] = std::max(s[static_cast<size_t>(i)], static_cast<float>(amp * env));
            }
        }
        t += width + 0.02 + 0.1 * uni(rng);
    }
    return s;
}

// Low-pass-filtered gaussian noise, normalized to unit variance in the
// stationary regime, then scaled.
std::vector<double> smooth_noise(int64_t n, double alpha, double scale, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double stat = std::sqrt((1.0 - alpha) / (1.0 + alpha));
    double x = 0.0;
    for (int i = 0; i < 200; ++i) x = alpha * x + (1.0 - alpha) * gauss(rng);  // burn-in
    std::vector<double> out(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        x = alpha * x + (1.0 - alpha) * gauss(rng);
        out[static_cast<size_t>(i)] = scale * x / stat;
    }
    return out;
}

}  // namespace

core::VideoClip generate_clip(int64_t identity_seed, double duration_s, double fps, const ShapeConfig& cfg,
                              const GenOptions& opts) {
    if (duration_s * fps < 1.0) throw DomainError("generate_clip: duration_s*fps must be >= 1");
    cfg.validate();
    const int64_t n = static_cast<int64_t>(std::llround(duration_s * fps));
    const AppearanceParams a = AppearanceParams::sample(identity_seed);

    std::mt19937_64 rng(static_cast<uint64_t>(identity_seed) * 0x9e3779b97f4a7c15ull + 17u);
    const std::vector<float> script = make_script(n, fps, rng, opts);
    SpeechFeatures sp = synth_speech_features(script, cfg, static_cast<uint64_t>(identity_seed) + 99);

    auto pitch_tr = smooth_noise(n, opts.pose_smooth_alpha, opts.pose_std_pitch, rng);
    auto yaw_tr = smooth_noise(n, opts.pose_smooth_alpha, opts.pose_std_yaw, rng);
    auto roll_tr = smooth_noise(n, opts.pose_smooth_alpha, opts.pose_std_roll, rng);
    auto eyes_tr = smooth_noise(n, 0.985, 0.18, rng);

    // Slight speech-coupled nod so poses carry recoverable speech signal.
    double env = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        env = 0.85 * env + 0.15 * static_cast<double>(script[static_cast<size_t>(i)]);
        pitch_tr[static_cast<size_t>(i)] += opts.speech_nod_gain * env;
    }

    auto clamp_pose = [](double v) {
        return std::clamp(v, -static_cast<double>(kPoseLimitRad), static_cast<double>(kPoseLimitRad));
    };

    core::VideoClip clip;
    clip.frames = ArrF(Shape{n, cfg.H, cfg.W, 3});
    clip.landmarks = ArrF(Shape{n, cfg.K, 2});
    clip.poses = ArrF(Shape{n, 3});
    clip.speech_features = sp.features;
    clip.fps = static_cast<float>(fps);
    clip.identity_id = "id" + std::to_string(identity_seed);
    if (!opts.mask_ranges.empty()) clip.mask_flags.assign(static_cast<size_t>(n), 0.0f);

    for (int64_t i = 0; i < n; ++i) {
        MotionParams m;
        m.pitch = static_cast<float>(clamp_pose(pitch_tr[static_cast<size_t>(i)] + opts.pose_bias_pitch));
        m.yaw = static_cast<float>(clamp_pose(yaw_tr[static_cast<size_t>(i)] + opts.pose_bias_yaw));
        m.roll = static_cast<float>(clamp_pose(roll_tr[static_cast<size_t>(i)]));
        m.mouth_open = sp.mouth_track[i];
        m.eyes_open = static_cast<float>(std::clamp(0.75 + eyes_tr[static_cast<size_t>(i)], 0.4, 1.0));
        bool masked = false;
        for (const auto& [b, e] : opts.mask_ranges)
            if (i >= b && i < e) masked = true;
        if (masked) clip.mask_flags[static_cast<size_t>(i)] = 1.0f;
        RenderResult r = render_avatar_frame(a, m, cfg, masked);
        std::copy_n(r.frame.ptr(), r.frame.numel(), clip.frames.ptr() + i * cfg.H * cfg.W * 3);
        std::copy_n(r.landmarks.ptr(), r.landmarks.numel(), clip.landmarks.ptr() + i * cfg.K * 2);
        clip.poses.at(i, 0) = m.pitch;
        clip.poses.at(i, 1) = m.yaw;
        clip.poses.at(i, 2) = m.roll;
    }
    return clip;
}

std::vector<std::filesystem::path> generate_corpus(const std::filesystem::path& dir,
                                                   const std::vector<int64_t>& identity_seeds, double duration_s,
                                                   double fps, const ShapeConfig& cfg, const GenOptions& opts) {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> out;
    for (int64_t seed : identity_seeds) {
        core::VideoClip clip = generate_clip(seed, duration_s, fps, cfg, opts);
        const auto path = dir / ("clip_" + std::to_string(seed));
        core::write_clip(clip, path);
        out.push_back(path);
    }
    return out;
}

}  // namespace gaia::synth
