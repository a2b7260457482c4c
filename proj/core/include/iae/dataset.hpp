#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "iae/types.hpp"

namespace iae::dataset {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Analytic scenes
// ---------------------------------------------------------------------------

/// Ray-casts one primitive and returns its G-buffer: exact camera-space
/// normals, unlit part colors, and glossiness-weighted sky reflections.
/// Throws DataError naming scene.id when nothing is visible.
IntrinsicMaps analytic_primitive_gbuffer(const PrimitiveScene& scene, Resolution res);

// Procedural sky used as the environment map of analytic scenes (world space, +Y up).
Rgb sky_radiance(const Vec3& direction);

// Mirror reflection r = v - 2(v.n)n.
Vec3 reflect(const Vec3& view, const Vec3& normal);

/// Pseudo-real shader: Lambert with ambient term plus additive reflections,
/// clamped to [0,1] and returned in [-1,1] encoding. Background pixels get
/// `background`. `light_direction` is camera-space and must be unit length.
ImageTensor phong_composite(const IntrinsicMaps& maps, const Vec3& light_direction, double ambient,
                            const Rgb& background);

// Same, with the background color drawn from `background_seed`.
ImageTensor phong_composite(const IntrinsicMaps& maps, const Vec3& light_direction, double ambient,
                            uint64_t background_seed);

Rgb background_color(uint64_t seed);

// Random scene with the corpus' default camera/light distribution.
PrimitiveScene sample_scene(std::mt19937_64& rng, std::string id);

// ---------------------------------------------------------------------------
// File format
// ---------------------------------------------------------------------------

/// Writes <id>_albedo.png (8-bit), <id>_normal.png (16-bit, (n+1)/2),
/// <id>_refl.png (8-bit) and <id>_mask.png (1-bit) into dir.
void encode_intrinsics(const IntrinsicMaps& maps, const fs::path& dir, const std::string& id);

/// Reads the four channel files written by encode_intrinsics. Decoded normals
/// are zeroed outside the mask. Throws DataError naming the channel/file.
IntrinsicMaps decode_intrinsics(const fs::path& dir, const std::string& id);

// Channel-path variant used for manifest records ("albedo", "normal", "refl", "mask").
IntrinsicMaps decode_intrinsics(const fs::path& root, const std::map<std::string, std::string>& paths);

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

enum class RecordKind { Intrinsic, Real };
enum class RecordSource { Analytic, Mesh, External };

std::string to_string(RecordKind kind);
std::string to_string(RecordSource source);

/// One unpaired sample. Intrinsic records carry albedo/normal/refl/mask paths;
/// real records carry `real` and optionally `mask` (foreground segmentation),
/// and in evaluation manifests also the ground-truth intrinsic channels.
struct Record {
    std::string id;
    RecordKind kind = RecordKind::Intrinsic;
    std::map<std::string, std::string> paths;
    RecordSource source = RecordSource::Analytic;
    uint64_t seed = 0;

    bool has_ground_truth() const;
};

struct DatasetManifest {
    fs::path root;  // directory of manifest.json; record paths are relative to it
    std::optional<Resolution> resolution;
    std::vector<Record> records;

    std::vector<size_t> indices(RecordKind kind) const;
    const Record& find(const std::string& id) const;  // DataError naming the id
};

/// Parses and validates manifest.json (or a directory containing one):
/// unique ids, known kinds, and every referenced file present.
DatasetManifest load_manifest(const fs::path& path);
void save_manifest(const DatasetManifest& manifest, const fs::path& path);

IntrinsicMaps load_intrinsics(const DatasetManifest& manifest, const Record& record);

/// Loads a real record's image in [-1,1]; letterboxed when its size differs from `res`.
ImageTensor load_real(const DatasetManifest& manifest, const Record& record, Resolution res);

/// Foreground mask (H x W bool) of a real record; all-true when it has none.
torch::Tensor load_real_mask(const DatasetManifest& manifest, const Record& record, Resolution res);

/// Network-ready unpaired batch. Intrinsic and real draws are independent.
struct UnpairedBatch {
    torch::Tensor intrinsics;      // B x 9 x H x W, network encoding
    torch::Tensor intrinsic_mask;  // B x 1 x H x W, float {0,1}
    torch::Tensor real;            // B x 3 x H x W, [-1,1]
    torch::Tensor real_mask;       // B x 1 x H x W, float {0,1}
    std::vector<size_t> intrinsic_records;
    std::vector<size_t> real_records;
};

/// Draws batch_size intrinsic and batch_size real records uniformly with
/// replacement, each from its own stream of `rng`. Throws DataError
/// ("no real records" / "no intrinsic records") when a kind is empty.
UnpairedBatch sample_unpaired_batch(const DatasetManifest& manifest, int64_t batch_size, std::mt19937_64& rng,
                                    Resolution res);

/// Stacks the given records into a batch (used by evaluation and the CLI).
UnpairedBatch load_batch(const DatasetManifest& manifest, const std::vector<size_t>& intrinsic_records,
                         const std::vector<size_t>& real_records, Resolution res);

// ---------------------------------------------------------------------------
// Analytic corpus
// ---------------------------------------------------------------------------

struct CorpusOptions {
    int64_t count = 200;       // per domain, training split
    int64_t eval_count = 128;  // per domain, held-out split with paired ground truth
    Resolution resolution{64, 64};
    uint64_t seed = 1;
};

/// Emits <out>/manifest.json (count intrinsic + count pseudo-real records from
/// disjoint scenes) and <out>/eval/manifest.json (eval_count held-out
/// intrinsic records plus eval_count pseudo-real records carrying their ground
/// truth). Returns the training manifest.
DatasetManifest generate_analytic_corpus(const CorpusOptions& options, const fs::path& out_dir);

// Deterministic per-sample seed from (run seed, stream, index).
uint64_t derive_seed(uint64_t run_seed, uint64_t stream, uint64_t index);

}  // namespace iae::dataset
