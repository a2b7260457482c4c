#include <fstream>

#include "iae/dataset.hpp"
#include "iae/error.hpp"
#include "iae/image_io.hpp"

namespace iae::dataset {
namespace {

const std::map<std::string, std::string> kChannelSuffix = {
    {"albedo", "_albedo.png"},
    {"normal", "_normal.png"},
    {"refl", "_refl.png"},
    {"mask", "_mask.png"},
};

torch::Tensor read_channel(const fs::path& root, const std::map<std::string, std::string>& paths,
                           const std::string& channel, int channels,
                           torch::ScalarType dtype = torch::kFloat32) {
    auto it = paths.find(channel);
    if (it == paths.end()) throw DataError("record has no '" + channel + "' channel");
    const fs::path file = root / it->second;
    if (!fs::exists(file)) throw DataError("missing " + channel + " channel file: " + file.string());
    return read_png(file, channels, dtype);
}

}  // namespace

void encode_intrinsics(const IntrinsicMaps& maps, const fs::path& dir, const std::string& id) {
    maps.validate();
    fs::create_directories(dir);
    write_png(dir / (id + "_albedo.png"), maps.albedo, BitDepth::Eight);
    write_png(dir / (id + "_normal.png"), (maps.normals + 1.0) * 0.5, BitDepth::Sixteen);
    write_png(dir / (id + "_refl.png"), maps.reflections, BitDepth::Eight);
    write_png(dir / (id + "_mask.png"), maps.mask.unsqueeze(0).to(torch::kFloat32), BitDepth::One);
}

IntrinsicMaps decode_intrinsics(const fs::path& root, const std::map<std::string, std::string>& paths) {
    IntrinsicMaps m;
    m.albedo = read_channel(root, paths, "albedo", 3);
    m.normals = (read_channel(root, paths, "normal", 3, torch::kFloat64) * 2.0 - 1.0).to(torch::kFloat32);
    m.reflections = read_channel(root, paths, "refl", 3);
    m.mask = read_channel(root, paths, "mask", 1).squeeze(0) >= 0.5;

    auto same = [&](const torch::Tensor& t) {
        return t.size(-2) == m.albedo.size(1) && t.size(-1) == m.albedo.size(2);
    };
    if (!same(m.normals)) throw DataError("shape mismatch between albedo and normal channels");
    if (!same(m.reflections)) throw DataError("shape mismatch between albedo and refl channels");
    if (!same(m.mask)) throw DataError("shape mismatch between albedo and mask channels");

    // Background normals encode as 0.5 and may not decode to exactly zero.
    auto fg = m.mask.unsqueeze(0).to(torch::kFloat32);
    m.normals = m.normals * fg;
    m.albedo = m.albedo * fg;
    m.reflections = m.reflections * fg;
    return m;
}

IntrinsicMaps decode_intrinsics(const fs::path& dir, const std::string& id) {
    std::map<std::string, std::string> paths;
    for (const auto& [channel, suffix] : kChannelSuffix) paths[channel] = id + suffix;
    return decode_intrinsics(dir, paths);
}

DatasetManifest generate_analytic_corpus(const CorpusOptions& options, const fs::path& out_dir) {
    if (options.count <= 0) throw ConfigError("count must be positive");
    if (options.eval_count < 0) throw ConfigError("eval_count must be non-negative");
    if (options.resolution.height <= 0 || options.resolution.width <= 0)
        throw ConfigError("resolution must be positive");

    // Streams keep the four sample families disjoint: train intrinsic/real, eval intrinsic/real.
    enum Stream : uint64_t { TrainIntrinsic = 1, TrainReal = 2, EvalIntrinsic = 3, EvalReal = 4 };

    auto render_scene = [&](Stream stream, int64_t index, const std::string& id) {
        // Rare cameras can frame nothing; resample deterministically.
        for (uint64_t attempt = 0;; ++attempt) {
            const uint64_t seed = derive_seed(options.seed, stream, static_cast<uint64_t>(index) * 1000 + attempt);
            std::mt19937_64 rng(seed);
            PrimitiveScene scene = sample_scene(rng, id);
            try {
                return std::make_tuple(scene, analytic_primitive_gbuffer(scene, options.resolution), seed);
            } catch (const DataError&) {
                if (attempt >= 16) throw;
            }
        }
    };

    auto emit_split = [&](const fs::path& dir, int64_t count, Stream intrinsic_stream, Stream real_stream,
                          bool real_ground_truth) {
        DatasetManifest manifest;
        manifest.root = dir;
        manifest.resolution = options.resolution;
        fs::create_directories(dir);
        char buf[32];
        for (int64_t i = 0; i < count; ++i) {
            std::snprintf(buf, sizeof(buf), "syn_%06lld", static_cast<long long>(i));
            const std::string id = buf;
            auto [scene, maps, seed] = render_scene(intrinsic_stream, i, id);
            encode_intrinsics(maps, dir, id);
            manifest.records.push_back(Record{id,
                                              RecordKind::Intrinsic,
                                              {{"albedo", id + "_albedo.png"},
                                               {"normal", id + "_normal.png"},
                                               {"refl", id + "_refl.png"},
                                               {"mask", id + "_mask.png"}},
                                              RecordSource::Analytic,
                                              seed});
        }
        for (int64_t i = 0; i < count; ++i) {
            std::snprintf(buf, sizeof(buf), "real_%06lld", static_cast<long long>(i));
            const std::string id = buf;
            auto [scene, maps, seed] = render_scene(real_stream, i, id);
            const ImageTensor image =
                phong_composite(maps, scene.light_direction, scene.ambient, derive_seed(seed, 99, 0));
            write_png(dir / (id + "_real.png"), to_unit(image.pixels), BitDepth::Eight);
            Record r{id, RecordKind::Real, {{"real", id + "_real.png"}}, RecordSource::Analytic, seed};
            if (real_ground_truth) {
                encode_intrinsics(maps, dir, id);
                r.paths["albedo"] = id + "_albedo.png";
                r.paths["normal"] = id + "_normal.png";
                r.paths["refl"] = id + "_refl.png";
                r.paths["mask"] = id + "_mask.png";
            } else {
                write_png(dir / (id + "_mask.png"), maps.mask.unsqueeze(0).to(torch::kFloat32), BitDepth::One);
                r.paths["mask"] = id + "_mask.png";
            }
            manifest.records.push_back(std::move(r));
        }
        save_manifest(manifest, dir / "manifest.json");
        return manifest;
    };

    auto train = emit_split(out_dir, options.count, TrainIntrinsic, TrainReal, false);
    if (options.eval_count > 0) emit_split(out_dir / "eval", options.eval_count, EvalIntrinsic, EvalReal, true);
    return train;
}

}  // namespace iae::dataset
