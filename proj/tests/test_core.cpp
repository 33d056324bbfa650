#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "gaia/core/clip_io.hpp"
#include "gaia/synth/corpus.hpp"

using namespace gaia;
using namespace gaia::core;

namespace fs = std::filesystem;

namespace {

VideoClip make_clip(int64_t seed = 3, double dur = 1.0) {
    ShapeConfig cfg;
    return synth::generate_clip(seed, dur, 25.0, cfg);
}

fs::path tmpdir(const char* name) {
    const fs::path p = fs::temp_directory_path() / "gaia_test_core" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("shape config latent grids follow the 8/16 downsampling factors") {
    ShapeConfig cfg;
    cfg.H = cfg.W = 64;
    CHECK(cfg.h_a() == 8);
    CHECK(cfg.w_a() == 8);
    CHECK(cfg.h_m() == 4);
    CHECK(cfg.w_m() == 4);
    cfg.H = 62;
    CHECK_THROWS_AS(cfg.validate(), DomainError);
}

TEST_CASE("scale presets reproduce the published table; tiny is the desk default") {
    const auto small = ScalePreset::by_name("small");
    CHECK(small.vae_hidden == 128);
    CHECK(small.vae_layers == 2);
    CHECK(small.diff_hidden == 512);
    CHECK(small.diff_layers == 6);
    const auto base = ScalePreset::by_name("base");
    CHECK(base.vae_hidden == 256);
    CHECK(base.vae_layers == 4);
    CHECK(base.diff_hidden == 1280);
    CHECK(base.diff_layers == 12);
    const auto large = ScalePreset::by_name("large");
    CHECK(large.vae_hidden == 512);
    CHECK(large.vae_layers == 8);
    CHECK(large.diff_hidden == 2048);
    CHECK(large.diff_layers == 12);
    CHECK(ScalePreset::by_name("tiny").name == "tiny");
    CHECK_THROWS_AS(ScalePreset::by_name("huge"), DomainError);
}

TEST_CASE("validate_clip: well-formed synthetic clip gives an empty report") {
    ShapeConfig cfg;
    const VideoClip clip = make_clip();
    const auto rep = validate_clip(clip, cfg);
    CHECK(rep.ok());
    // purity: identical second call
    const auto rep2 = validate_clip(clip, cfg);
    CHECK(rep2.violations == rep.violations);
}

TEST_CASE("validate_clip: poses of width 2 are reported") {
    ShapeConfig cfg;
    VideoClip clip = make_clip();
    const int64_t n = clip.n_frames();
    clip.poses = ArrF(Shape{n, 2});
    const auto rep = validate_clip(clip, cfg);
    REQUIRE(!rep.ok());
    bool found = false;
    for (const auto& v : rep.violations) found = found || v == "poses width != 3";
    CHECK(found);
}

TEST_CASE("validate_clip: out-of-bounds landmark is reported") {
    ShapeConfig cfg;
    VideoClip clip = make_clip();
    clip.landmarks.at(0, 0, 0) = static_cast<float>(cfg.W + 5);
    const auto rep = validate_clip(clip, cfg);
    REQUIRE(!rep.ok());
    bool found = false;
    for (const auto& v : rep.violations) found = found || v == "landmark out of bounds";
    CHECK(found);
}

TEST_CASE("clip container roundtrip is bit-identical") {
    const auto dir = tmpdir("roundtrip");
    VideoClip clip = make_clip(5);
    clip.mask_flags.assign(static_cast<size_t>(clip.n_frames()), 0.0f);
    clip.mask_flags[3] = 1.0f;
    write_clip(clip, dir);
    const VideoClip back = read_clip(dir);
    CHECK(back.frames.shape == clip.frames.shape);
    CHECK(back.frames.data == clip.frames.data);
    CHECK(back.landmarks.data == clip.landmarks.data);
    CHECK(back.poses.data == clip.poses.data);
    CHECK(back.speech_features.data == clip.speech_features.data);
    CHECK(back.mask_flags == clip.mask_flags);
    CHECK(back.fps == clip.fps);
    CHECK(back.identity_id == clip.identity_id);
}

TEST_CASE("clip container: array shorter than manifest shape is corrupt") {
    const auto dir = tmpdir("corrupt_size");
    write_clip(make_clip(), dir);
    // Truncate landmarks to half (manifest still says [N,K,2]).
    const auto lm_path = dir / "landmarks.f32";
    const auto bytes = fs::file_size(lm_path);
    fs::resize_file(lm_path, bytes / 2);
    CHECK_THROWS_AS(read_clip(dir), CorruptContainerError);
}

TEST_CASE("clip container: manifest missing fps is corrupt") {
    const auto dir = tmpdir("corrupt_fps");
    write_clip(make_clip(), dir);
    std::ifstream in(dir / "manifest.json");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    const auto pos = text.find("\"fps\"");
    REQUIRE(pos != std::string::npos);
    const auto end = text.find('\n', pos);
    text.erase(pos, end - pos + 1);
    std::ofstream out(dir / "manifest.json");
    out << text;
    out.close();
    CHECK_THROWS_AS(read_clip(dir), CorruptContainerError);
}

TEST_CASE("clip container: missing array file is an I/O error") {
    const auto dir = tmpdir("missing_file");
    write_clip(make_clip(), dir);
    fs::remove(dir / "poses.f32");
    CHECK_THROWS_AS(read_clip(dir), IoError);
}

TEST_CASE("write_clip refuses an invalid clip") {
    const auto dir = tmpdir("invalid");
    VideoClip clip = make_clip();
    clip.fps = -1.0f;
    CHECK_THROWS_AS(write_clip(clip, dir), DomainError);
}

TEST_CASE("landmark groups") {
    CHECK(lm::group_indices("mouth").size() == 20);
    CHECK(lm::group_indices("eyes").size() == 12);
    CHECK(lm::group_indices("non-mouth").size() == 48);
    CHECK_THROWS_AS(lm::group_indices("ears"), DomainError);
}
