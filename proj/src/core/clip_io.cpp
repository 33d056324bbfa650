#include "gaia/core/clip_io.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

namespace gaia::core {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_f32(const fs::path& path, const float* data, int64_t count) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for write: " + path.string());
    f.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(float)));
    if (!f) throw IoError("short write: " + path.string());
}

std::vector<float> read_f32(const fs::path& path, int64_t expect_count) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("missing array file: " + path.string());
    f.seekg(0, std::ios::end);
    const int64_t bytes = static_cast<int64_t>(f.tellg());
    if (bytes != expect_count * static_cast<int64_t>(sizeof(float)))
        throw CorruptContainerError("array size mismatch for " + path.string() + ": have " +
                                    std::to_string(bytes / sizeof(float)) + " floats, manifest expects " +
                                    std::to_string(expect_count));
    f.seekg(0);
    std::vector<float> out(static_cast<size_t>(expect_count));
    f.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(expect_count * sizeof(float)));
    if (!f) throw IoError("short read: " + path.string());
    return out;
}

json array_entry(const ArrF& a, const std::string& file) {
    json e;
    e["shape"] = a.shape;
    e["file"] = file;
    return e;
}

Shape shape_from_json(const json& j) {
    Shape s;
    for (const auto& d : j) s.push_back(d.get<int64_t>());
    return s;
}

}  // namespace

void write_clip(const VideoClip& clip, const fs::path& dir) {
    ShapeConfig cfg;
    cfg.H = clip.frames.ndim() == 4 ? clip.frames.dim(1) : 0;
    cfg.W = clip.frames.ndim() == 4 ? clip.frames.dim(2) : 0;
    cfg.K = clip.landmarks.ndim() == 3 ? clip.landmarks.dim(1) : 0;
    cfg.d_s = clip.speech_features.ndim() == 2 ? clip.speech_features.dim(1) : 0;
    const auto rep = validate_clip(clip, cfg);
    if (!rep.ok()) throw DomainError("write_clip: clip does not validate: " + rep.violations.front());

    fs::create_directories(dir);
    json manifest;
    manifest["format"] = "gaia-clip";
    manifest["version"] = 1;
    manifest["dtype"] = "float32";
    manifest["fps"] = clip.fps;
    manifest["identity_id"] = clip.identity_id;
    manifest["arrays"]["frames"] = array_entry(clip.frames, "frames.f32");
    manifest["arrays"]["landmarks"] = array_entry(clip.landmarks, "landmarks.f32");
    manifest["arrays"]["poses"] = array_entry(clip.poses, "poses.f32");
    manifest["arrays"]["speech_features"] = array_entry(clip.speech_features, "speech_features.f32");
    write_f32(dir / "frames.f32", clip.frames.ptr(), clip.frames.numel());
    write_f32(dir / "landmarks.f32", clip.landmarks.ptr(), clip.landmarks.numel());
    write_f32(dir / "poses.f32", clip.poses.ptr(), clip.poses.numel());
    write_f32(dir / "speech_features.f32", clip.speech_features.ptr(), clip.speech_features.numel());
    if (!clip.mask_flags.empty()) {
        json e;
        e["shape"] = Shape{static_cast<int64_t>(clip.mask_flags.size())};
        e["file"] = "mask.f32";
        manifest["arrays"]["mask"] = e;
        write_f32(dir / "mask.f32", clip.mask_flags.data(), static_cast<int64_t>(clip.mask_flags.size()));
    }
    std::ofstream mf(dir / "manifest.json");
    if (!mf) throw IoError("cannot write manifest: " + (dir / "manifest.json").string());
    mf << manifest.dump(2) << "\n";
}

VideoClip read_clip(const fs::path& dir) {
    std::ifstream mf(dir / "manifest.json");
    if (!mf) throw IoError("missing clip manifest: " + (dir / "manifest.json").string());
    json manifest;
    try {
        mf >> manifest;
    } catch (const json::exception& e) {
        throw CorruptContainerError("unparseable clip manifest: " + std::string(e.what()));
    }
    for (const char* key : {"fps", "identity_id", "dtype", "arrays"})
        if (!manifest.contains(key))
            throw CorruptContainerError(std::string("clip manifest missing \"") + key + "\" key");
    if (manifest["dtype"].get<std::string>() != "float32")
        throw CorruptContainerError("clip manifest dtype must be float32");

    auto load = [&](const char* name, int want_rank) {
        if (!manifest["arrays"].contains(name))
            throw CorruptContainerError(std::string("clip manifest missing array \"") + name + "\"");
        const json& e = manifest["arrays"][name];
        const Shape shape = shape_from_json(e["shape"]);
        if (static_cast<int>(shape.size()) != want_rank)
            throw CorruptContainerError(std::string("array \"") + name + "\" has wrong rank in manifest");
        auto data = read_f32(dir / e["file"].get<std::string>(), shape_numel(shape));
        return ArrF(shape, std::move(data));
    };

    VideoClip clip;
    clip.frames = load("frames", 4);
    clip.landmarks = load("landmarks", 3);
    clip.poses = load("poses", 2);
    clip.speech_features = load("speech_features", 2);
    if (manifest["arrays"].contains("mask")) {
        ArrF m = load("mask", 1);
        clip.mask_flags = std::move(m.data);
    }
    clip.fps = manifest["fps"].get<float>();
    clip.identity_id = manifest["identity_id"].get<std::string>();
    return clip;
}

std::vector<fs::path> list_clips(const fs::path& root) {
    std::vector<fs::path> out;
    if (!fs::exists(root)) throw IoError("corpus directory does not exist: " + root.string());
    for (const auto& entry : fs::directory_iterator(root))
        if (entry.is_directory() && fs::exists(entry.path() / "manifest.json")) out.push_back(entry.path());
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace gaia::core
