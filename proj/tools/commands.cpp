#include "commands.hpp"

#include <fstream>
#include <iostream>

#include "iae/dataset.hpp"
#include "iae/error.hpp"
#include "iae/evaluation.hpp"
#include "iae/grid.hpp"
#include "iae/image_io.hpp"
#include "iae/trainer.hpp"

namespace iae::cli {
namespace {

using trainer::TrainConfig;

void apply_overrides(TrainConfig& config, const std::vector<std::string>& overrides) {
    for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("override '" + kv + "' is not of the form key=value");
        trainer::apply_override(config, kv.substr(0, eq), kv.substr(eq + 1));
    }
}

// Corpus root (with eval/manifest.json) or an evaluation manifest directly.
dataset::DatasetManifest load_eval_manifest(const fs::path& data) {
    if (fs::is_directory(data) && fs::exists(data / "eval" / "manifest.json"))
        return dataset::load_manifest(data / "eval");
    return dataset::load_manifest(data);
}

void check_writable_parent(const fs::path& file) {
    const auto parent = file.has_parent_path() ? file.parent_path() : fs::path(".");
    if (fs::exists(parent) && !fs::is_directory(parent))
        throw ConfigError("output location is not a directory: " + parent.string());
}

void ensure_parent(const fs::path& file) {
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
}

std::string slug(const trainer::AblationConfig& a) {
    std::string s;
    auto add = [&](const std::string& part) { s += (s.empty() ? "" : "+") + part; };
    if (!a.shared_discriminator) add("no_shared_d");
    if (!a.decomposition_cycle) add("no_dec_cycle");
    if (a.drop_inputs.albedo) add("no_A");
    if (a.drop_inputs.normals) add("no_N");
    if (a.drop_inputs.reflections) add("no_F");
    return s.empty() ? "full" : s;
}

}  // namespace

int cmd_gen_data(const GenDataArgs& args) {
    dataset::CorpusOptions options;
    options.count = args.count;
    options.eval_count = args.eval_count;
    options.resolution = parse_resolution(args.resolution);
    options.seed = args.seed;
    if (options.count <= 0) throw ConfigError("--count must be positive");
    if (options.eval_count < 0) throw ConfigError("--eval-count must be non-negative");
    if (fs::exists(args.out) && !fs::is_directory(args.out))
        throw ConfigError("--out is not a directory: " + args.out.string());

    const auto manifest = dataset::generate_analytic_corpus(options, args.out);
    std::cout << (args.out / "manifest.json").string() << "\n";
    std::cerr << manifest.indices(dataset::RecordKind::Intrinsic).size() << " intrinsic + "
              << manifest.indices(dataset::RecordKind::Real).size() << " pseudo-real training records, "
              << options.eval_count << " + " << options.eval_count << " held-out\n";
    return 0;
}

int cmd_train(const TrainArgs& args) {
    TrainConfig config = trainer::load_config(args.config);
    apply_overrides(config, args.overrides);
    if (args.seed) config.seed = *args.seed;
    config.validate();

    const auto train = dataset::load_manifest(args.data);
    trainer::FitOptions options;
    options.resume = args.resume;
    options.extractor = args.extractor;
    options.quiet = args.quiet;
    if (args.eval_data) options.eval_manifest = load_eval_manifest(*args.eval_data);
    if (args.resume && !fs::exists(*args.resume)) throw DataError("checkpoint not found: " + args.resume->string());
    if (fs::exists(args.out) && !fs::is_directory(args.out))
        throw ConfigError("--out is not a directory: " + args.out.string());

    const auto result = trainer::fit(config, train, args.out, options);
    std::cout << result.final_checkpoint.string() << "\n";
    return 0;
}

int cmd_eval(const EvalArgs& args) {
    const auto manifest = load_eval_manifest(args.data);
    auto extractor = evaluation::make_extractor(args.extractor);
    check_writable_parent(args.out);
    auto ckpt = trainer::Trainer::load_checkpoint(args.checkpoint);
    const auto& config = ckpt.config();

    evaluation::EvalOptions options;
    options.kid_seed = args.seed;
    options.drop_inputs = config.ablation.drop_inputs;
    auto& models = ckpt.models();
    models.train(false);
    auto renderer = [&](const torch::Tensor& x) { return models.renderer->forward(x); };
    auto decomposer = [&](const torch::Tensor& x) { return models.decomposer->forward(x); };
    const auto report = evaluation::evaluate(renderer, decomposer, manifest, *extractor, config.resolution, options);

    ensure_parent(args.out);
    std::ofstream out(args.out);
    if (!out) throw DataError("cannot write report: " + args.out.string());
    out << evaluation::to_json(report) << "\n";
    std::cout << evaluation::to_json(report) << "\n";
    return 0;
}

int cmd_render(const RenderArgs& args) {
    ChannelSet drop = ChannelSet::parse(args.drop);
    check_writable_parent(args.out);
    const auto manifest = dataset::load_manifest(args.data);
    const auto& record = manifest.find(args.id);
    if (!record.has_ground_truth()) throw DataError("record '" + args.id + "' carries no intrinsic maps");
    const auto maps = dataset::decode_intrinsics(manifest.root, record.paths);
    auto ckpt = trainer::Trainer::load_checkpoint(args.checkpoint);
    const auto res = ckpt.config().resolution;
    if (maps.height() != res.height || maps.width() != res.width)
        throw DataError("record '" + args.id + "' is " + std::to_string(maps.height()) + "x" +
                        std::to_string(maps.width()) + ", checkpoint expects " + res.str());

    const auto& trained = ckpt.config().ablation.drop_inputs;
    drop.albedo |= trained.albedo;
    drop.normals |= trained.normals;
    drop.reflections |= trained.reflections;

    auto& models = ckpt.models();
    models.train(false);
    torch::NoGradGuard no_grad;
    const auto stack = networks::ablate_inputs(to_network(maps), drop);
    const auto image = networks::render(models.renderer, stack);
    ensure_parent(args.out);
    write_png(args.out, to_unit(image).clamp(0.0, 1.0), BitDepth::Eight);
    std::cout << args.out.string() << "\n";
    return 0;
}

int cmd_decompose(const DecomposeArgs& args) {
    if (fs::exists(args.out) && !fs::is_directory(args.out))
        throw ConfigError("--out is not a directory: " + args.out.string());
    const auto input = read_png(args.image, 3);
    auto ckpt = trainer::Trainer::load_checkpoint(args.checkpoint);
    const auto res = ckpt.config().resolution;
    auto& models = ckpt.models();
    models.train(false);
    torch::NoGradGuard no_grad;
    const auto image = to_signed(letterbox_resize(input, res.height, res.width, 0.0));
    const auto stack = networks::decompose(models.decomposer, image);
    const auto tiles = stack_tiles(stack);

    fs::create_directories(args.out);
    const std::string stem = args.image.stem().string();
    const auto albedo = args.out / (stem + "_albedo.png");
    const auto normal = args.out / (stem + "_normal.png");
    const auto refl = args.out / (stem + "_refl.png");
    const auto grid = args.out / (stem + "_grid.png");
    write_png(albedo, tiles[0].clamp(0.0, 1.0), BitDepth::Eight);
    write_png(normal, tiles[1].clamp(0.0, 1.0), BitDepth::Sixteen);
    write_png(refl, tiles[2].clamp(0.0, 1.0), BitDepth::Eight);
    write_png_grid(grid, tile_grid({{image_tile(image), tiles[0], tiles[1], tiles[2]}}));
    for (const auto& p : {albedo, normal, refl, grid}) std::cout << p.string() << "\n";
    return 0;
}

int cmd_ablate(const AblateArgs& args) {
    TrainConfig base = args.config ? trainer::load_config(*args.config) : TrainConfig{};
    apply_overrides(base, args.overrides);
    base.validate();
    if (fs::exists(args.out) && !fs::is_directory(args.out))
        throw ConfigError("--out is not a directory: " + args.out.string());
    const std::vector<uint64_t> seeds = args.seeds.empty() ? std::vector<uint64_t>{base.seed} : args.seeds;

    fs::create_directories(args.out);
    for (auto config : trainer::ablation_grid(base)) {
        for (uint64_t seed : seeds) {
            config.seed = seed;
            std::string name = slug(config.ablation);
            if (!args.seeds.empty()) name += "_s" + std::to_string(seed);
            const auto path = args.out / (name + ".txt");
            trainer::save_config(config, path);
            std::cout << config.tag() << "\t" << seed << "\t" << path.string() << "\n";
        }
    }
    return 0;
}

}  // namespace iae::cli
