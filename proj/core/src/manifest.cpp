#include <fstream>
#include <set>

#include <json.hpp>

#include "iae/dataset.hpp"
#include "iae/error.hpp"
#include "iae/image_io.hpp"

namespace iae::dataset {

using nlohmann::json;

std::string to_string(RecordKind kind) { return kind == RecordKind::Intrinsic ? "intrinsic" : "real"; }

std::string to_string(RecordSource source) {
    switch (source) {
        case RecordSource::Analytic: return "analytic";
        case RecordSource::Mesh: return "mesh";
        case RecordSource::External: return "external";
    }
    return "?";
}

namespace {

RecordKind parse_kind(const std::string& s, const std::string& id) {
    if (s == "intrinsic") return RecordKind::Intrinsic;
    if (s == "real") return RecordKind::Real;
    throw DataError("record '" + id + "': unknown kind '" + s + "'");
}

RecordSource parse_source(const std::string& s, const std::string& id) {
    if (s == "analytic") return RecordSource::Analytic;
    if (s == "mesh") return RecordSource::Mesh;
    if (s == "external") return RecordSource::External;
    throw DataError("record '" + id + "': unknown source '" + s + "'");
}

}  // namespace

bool Record::has_ground_truth() const {
    return paths.contains("albedo") && paths.contains("normal") && paths.contains("refl") && paths.contains("mask");
}

std::vector<size_t> DatasetManifest::indices(RecordKind kind) const {
    std::vector<size_t> out;
    for (size_t i = 0; i < records.size(); ++i)
        if (records[i].kind == kind) out.push_back(i);
    return out;
}

const Record& DatasetManifest::find(const std::string& id) const {
    for (const auto& r : records)
        if (r.id == id) return r;
    throw DataError("no record with id '" + id + "'");
}

DatasetManifest load_manifest(const fs::path& path) {
    const fs::path file = fs::is_directory(path) ? path / "manifest.json" : path;
    std::ifstream in(file);
    if (!in) throw DataError("cannot open manifest: " + file.string());

    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw DataError("malformed manifest " + file.string() + ": " + e.what());
    }

    DatasetManifest m;
    m.root = file.parent_path();
    try {
        if (doc.contains("resolution")) {
            const auto& r = doc.at("resolution");
            m.resolution = Resolution{r.at(0).get<int64_t>(), r.at(1).get<int64_t>()};
        }
        std::set<std::string> ids;
        for (const auto& jr : doc.at("records")) {
            Record r;
            r.id = jr.at("id").get<std::string>();
            if (!ids.insert(r.id).second) throw DataError("duplicate record id '" + r.id + "'");
            r.kind = parse_kind(jr.at("kind").get<std::string>(), r.id);
            r.source = parse_source(jr.value("source", std::string("external")), r.id);
            r.seed = jr.value("seed", uint64_t{0});
            for (const auto& [channel, rel] : jr.at("paths").items()) r.paths[channel] = rel.get<std::string>();

            const bool complete = r.kind == RecordKind::Real ? r.paths.contains("real") : r.has_ground_truth();
            if (!complete) throw DataError("record '" + r.id + "': missing required channel paths");
            for (const auto& [channel, rel] : r.paths)
                if (!fs::exists(m.root / rel))
                    throw DataError("record '" + r.id + "': missing " + channel + " file " + (m.root / rel).string());
            m.records.push_back(std::move(r));
        }
    } catch (const json::exception& e) {
        throw DataError("malformed manifest " + file.string() + ": " + e.what());
    }
    return m;
}

void save_manifest(const DatasetManifest& manifest, const fs::path& path) {
    json doc;
    doc["version"] = 1;
    if (manifest.resolution) doc["resolution"] = {manifest.resolution->height, manifest.resolution->width};
    doc["records"] = json::array();
    for (const auto& r : manifest.records) {
        json jr;
        jr["id"] = r.id;
        jr["kind"] = to_string(r.kind);
        jr["paths"] = r.paths;
        jr["source"] = to_string(r.source);
        jr["seed"] = r.seed;
        doc["records"].push_back(std::move(jr));
    }
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw DataError("cannot write manifest: " + path.string());
    out << doc.dump(1) << '\n';
}

IntrinsicMaps load_intrinsics(const DatasetManifest& manifest, const Record& record) {
    if (!record.has_ground_truth()) throw DataError("record '" + record.id + "' carries no intrinsic channels");
    return decode_intrinsics(manifest.root, record.paths);
}

ImageTensor load_real(const DatasetManifest& manifest, const Record& record, Resolution res) {
    auto it = record.paths.find("real");
    if (it == record.paths.end()) throw DataError("record '" + record.id + "' has no real image");
    auto unit = read_png(manifest.root / it->second, 3);
    unit = letterbox_resize(unit, res.height, res.width);
    return ImageTensor{to_signed(unit)};
}

torch::Tensor load_real_mask(const DatasetManifest& manifest, const Record& record, Resolution res) {
    auto it = record.paths.find("mask");
    if (it == record.paths.end()) return torch::ones({res.height, res.width}, torch::kBool);
    auto m = read_png(manifest.root / it->second, 1);
    m = letterbox_resize(m, res.height, res.width);
    return m.squeeze(0) >= 0.5;
}

UnpairedBatch load_batch(const DatasetManifest& manifest, const std::vector<size_t>& intrinsic_records,
                         const std::vector<size_t>& real_records, Resolution res) {
    std::vector<torch::Tensor> stacks, stack_masks, images, image_masks;
    for (size_t idx : intrinsic_records) {
        const IntrinsicMaps maps = load_intrinsics(manifest, manifest.records.at(idx));
        if (maps.height() != res.height || maps.width() != res.width)
            throw DataError("record '" + manifest.records[idx].id + "' has resolution " +
                            std::to_string(maps.height()) + "x" + std::to_string(maps.width()) + ", expected " +
                            res.str());
        stacks.push_back(to_network(maps));
        stack_masks.push_back(maps.mask.unsqueeze(0).to(torch::kFloat32));
    }
    for (size_t idx : real_records) {
        const Record& r = manifest.records.at(idx);
        images.push_back(load_real(manifest, r, res).pixels);
        image_masks.push_back(load_real_mask(manifest, r, res).unsqueeze(0).to(torch::kFloat32));
    }
    UnpairedBatch b;
    auto stack_or_empty = [](const std::vector<torch::Tensor>& v) {
        return v.empty() ? torch::Tensor() : torch::stack(v);
    };
    b.intrinsics = stack_or_empty(stacks);
    b.intrinsic_mask = stack_or_empty(stack_masks);
    b.real = stack_or_empty(images);
    b.real_mask = stack_or_empty(image_masks);
    b.intrinsic_records = intrinsic_records;
    b.real_records = real_records;
    return b;
}

UnpairedBatch sample_unpaired_batch(const DatasetManifest& manifest, int64_t batch_size, std::mt19937_64& rng,
                                    Resolution res) {
    if (batch_size <= 0) throw ConfigError("batch_size must be positive");
    const auto intrinsic = manifest.indices(RecordKind::Intrinsic);
    const auto real = manifest.indices(RecordKind::Real);
    if (intrinsic.empty()) throw DataError("no intrinsic records");
    if (real.empty()) throw DataError("no real records");

    // Two child streams seeded from the caller's rng: draws in one domain never
    // depend on how many draws the other domain consumed.
    std::mt19937_64 intrinsic_rng(rng());
    std::mt19937_64 real_rng(rng());
    std::uniform_int_distribution<size_t> pick_intrinsic(0, intrinsic.size() - 1);
    std::uniform_int_distribution<size_t> pick_real(0, real.size() - 1);

    std::vector<size_t> ii, ri;
    for (int64_t k = 0; k < batch_size; ++k) ii.push_back(intrinsic[pick_intrinsic(intrinsic_rng)]);
    for (int64_t k = 0; k < batch_size; ++k) ri.push_back(real[pick_real(real_rng)]);
    return load_batch(manifest, ii, ri, res);
}

}  // namespace iae::dataset
