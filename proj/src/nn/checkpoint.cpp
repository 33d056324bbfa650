#include "gaia/nn/checkpoint.hpp"

#include <fstream>

namespace gaia::nn {

namespace fs = std::filesystem;
using nlohmann::json;

void save_checkpoint(const fs::path& dir, const ParamStore& ps, const json& config, int64_t step) {
    fs::create_directories(dir);
    json manifest;
    manifest["format"] = "gaia-checkpoint";
    manifest["version"] = 1;
    manifest["step"] = step;
    manifest["config"] = config;
    manifest["blob"] = "params.f32";
    json table = json::array();
    int64_t offset = 0;
    std::vector<float> blob;
    for (const auto& [name, p] : ps.params) {
        json entry;
        entry["name"] = name;
        entry["shape"] = p.shape();
        entry["offset"] = offset;
        table.push_back(entry);
        for (int64_t i = 0; i < p.numel(); ++i) blob.push_back(static_cast<float>(p.value()[i]));
        offset += p.numel();
    }
    manifest["params"] = table;

    std::ofstream mf(dir / "manifest.json");
    if (!mf) throw IoError("cannot write " + (dir / "manifest.json").string());
    mf << manifest.dump(2) << "\n";
    mf.close();

    std::ofstream bf(dir / "params.f32", std::ios::binary);
    if (!bf) throw IoError("cannot write " + (dir / "params.f32").string());
    bf.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size() * sizeof(float)));
}

static json read_manifest(const fs::path& dir) {
    std::ifstream mf(dir / "manifest.json");
    if (!mf) throw IoError("missing checkpoint manifest: " + (dir / "manifest.json").string());
    json manifest;
    try {
        mf >> manifest;
    } catch (const json::exception& e) {
        throw CorruptContainerError("bad checkpoint manifest: " + std::string(e.what()));
    }
    if (!manifest.contains("params") || !manifest.contains("blob"))
        throw CorruptContainerError("checkpoint manifest missing params/blob");
    return manifest;
}

CheckpointInfo load_checkpoint(const fs::path& dir, ParamStore& ps) {
    json manifest = read_manifest(dir);
    const fs::path blob_path = dir / manifest["blob"].get<std::string>();
    std::ifstream bf(blob_path, std::ios::binary);
    if (!bf) throw IoError("missing checkpoint blob: " + blob_path.string());
    bf.seekg(0, std::ios::end);
    const int64_t nfloats = static_cast<int64_t>(bf.tellg()) / static_cast<int64_t>(sizeof(float));
    bf.seekg(0);
    std::vector<float> blob(static_cast<size_t>(nfloats));
    bf.read(reinterpret_cast<char*>(blob.data()), static_cast<std::streamsize>(blob.size() * sizeof(float)));

    std::unordered_map<std::string, std::pair<int64_t, Shape>> table;
    for (const auto& entry : manifest["params"]) {
        Shape shape;
        for (const auto& d : entry["shape"]) shape.push_back(d.get<int64_t>());
        table[entry["name"].get<std::string>()] = {entry["offset"].get<int64_t>(), shape};
    }
    for (auto& [name, p] : ps.params) {
        auto it = table.find(name);
        if (it == table.end()) throw CorruptContainerError("checkpoint missing parameter " + name);
        const auto& [offset, shape] = it->second;
        if (shape != p.shape())
            throw CorruptContainerError("checkpoint shape mismatch for " + name + ": " + shape_str(shape) +
                                        " vs " + shape_str(p.shape()));
        if (offset + p.numel() > nfloats) throw CorruptContainerError("checkpoint blob too small for " + name);
        Arr& val = p.value_mut();
        for (int64_t i = 0; i < p.numel(); ++i) val[i] = static_cast<double>(blob[static_cast<size_t>(offset + i)]);
    }
    CheckpointInfo info;
    info.config = manifest.value("config", json::object());
    info.step = manifest.value("step", int64_t{0});
    return info;
}

CheckpointInfo read_checkpoint_info(const fs::path& dir) {
    json manifest = read_manifest(dir);
    CheckpointInfo info;
    info.config = manifest.value("config", json::object());
    info.step = manifest.value("step", int64_t{0});
    return info;
}

}  // namespace gaia::nn
