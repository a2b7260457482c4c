#include <sstream>

#include "iae/error.hpp"
#include "iae/trainer.hpp"

namespace iae::trainer {
namespace {

constexpr int64_t kFormatVersion = 1;

void write_module(torch::serialize::OutputArchive& root, const std::string& key, const torch::nn::Module& module) {
    torch::serialize::OutputArchive sub;
    module.save(sub);
    root.write(key, sub);
}

void read_module(torch::serialize::InputArchive& root, const std::string& key, torch::nn::Module& module) {
    torch::serialize::InputArchive sub;
    if (!root.try_read(key, sub)) throw DataError("checkpoint is missing '" + key + "'");
    module.load(sub);
}

c10::IValue read_value(torch::serialize::InputArchive& root, const std::string& key) {
    c10::IValue value;
    if (!root.try_read(key, value)) throw DataError("checkpoint is missing '" + key + "'");
    return value;
}

}  // namespace

void Trainer::save_checkpoint(const fs::path& path) const {
    torch::serialize::OutputArchive archive;
    archive.write("format_version", c10::IValue(kFormatVersion));
    archive.write("config", c10::IValue(serialize(config_)));
    archive.write("config_hash", c10::IValue(config_.hash()));
    archive.write("step", c10::IValue(step_));
    std::ostringstream rng;
    rng << data_rng_;
    archive.write("data_rng", c10::IValue(rng.str()));

    write_module(archive, "renderer", *models_.renderer);
    write_module(archive, "decomposer", *models_.decomposer);
    write_module(archive, "d_image", *models_.d_image);
    write_module(archive, "d_intrinsic", *models_.d_intrinsic);
    torch::serialize::OutputArchive g, d;
    opt_g_->save(g);
    opt_d_->save(d);
    archive.write("opt_g", g);
    archive.write("opt_d", d);

    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    archive.save_to(tmp.string());
    fs::rename(tmp, path);
}

Trainer Trainer::load_checkpoint(const fs::path& path, const std::optional<TrainConfig>& expected) {
    if (!fs::exists(path)) throw DataError("checkpoint not found: " + path.string());
    torch::serialize::InputArchive archive;
    try {
        archive.load_from(path.string());
    } catch (const c10::Error& e) {
        throw DataError("cannot read checkpoint " + path.string() + ": " + e.what_without_backtrace());
    }
    if (read_value(archive, "format_version").toInt() != kFormatVersion)
        throw DataError("unsupported checkpoint format: " + path.string());

    TrainConfig stored = parse_config(read_value(archive, "config").toStringRef());
    const std::string stored_hash = read_value(archive, "config_hash").toStringRef();
    if (stored.hash() != stored_hash) throw DataError("checkpoint config hash is inconsistent: " + path.string());
    if (expected && expected->hash() != stored_hash)
        throw ConfigError("checkpoint " + path.string() + " was written with config " + stored_hash +
                          ", expected " + expected->hash());

    Trainer trainer(stored);
    trainer.step_ = read_value(archive, "step").toInt();
    std::istringstream rng(read_value(archive, "data_rng").toStringRef());
    rng >> trainer.data_rng_;
    if (!rng) throw DataError("checkpoint has a corrupt data rng state: " + path.string());

    try {
        read_module(archive, "renderer", *trainer.models_.renderer);
        read_module(archive, "decomposer", *trainer.models_.decomposer);
        read_module(archive, "d_image", *trainer.models_.d_image);
        read_module(archive, "d_intrinsic", *trainer.models_.d_intrinsic);
        torch::serialize::InputArchive g, d;
        if (!archive.try_read("opt_g", g) || !archive.try_read("opt_d", d))
            throw DataError("checkpoint is missing optimizer state: " + path.string());
        trainer.opt_g_->load(g);
        trainer.opt_d_->load(d);
    } catch (const c10::Error& e) {
        throw DataError("checkpoint " + path.string() + " does not match its config: " + e.what_without_backtrace());
    }
    return trainer;
}

}  // namespace iae::trainer
