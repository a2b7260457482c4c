#include <iostream>

#include <CLI11.hpp>
#include <torch/torch.h>

#include "commands.hpp"
#include "iae/error.hpp"

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kData = 3, kNumeric = 4 };

}  // namespace

int main(int argc, char** argv) {
    using namespace iae::cli;
    CLI::App app{"Intrinsic autoencoder: joint neural rendering and intrinsic decomposition"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "intra-op threads (0 keeps the torch default)")->check(CLI::NonNegativeNumber);

    GenDataArgs gen;
    auto* gen_cmd = app.add_subcommand("gen-data", "generate the analytic primitive corpus");
    gen_cmd->add_option("--count", gen.count, "training records per domain");
    gen_cmd->add_option("--eval-count", gen.eval_count, "held-out records per domain");
    gen_cmd->add_option("--res", gen.resolution, "resolution HxW");
    gen_cmd->add_option("--seed", gen.seed);
    gen_cmd->add_option("--out", gen.out, "output directory");

    TrainArgs train;
    auto* train_cmd = app.add_subcommand("train", "train R and H jointly");
    train_cmd->add_option("--config", train.config, "key = value config file")->required();
    train_cmd->add_option("--data", train.data, "training corpus directory or manifest")->required();
    train_cmd->add_option("--out", train.out, "run directory")->required();
    train_cmd->add_option("--resume", train.resume, "checkpoint to continue from");
    train_cmd->add_option("--set", train.overrides, "config override key=value (repeatable)");
    train_cmd->add_option("--seed", train.seed, "overrides the config seed");
    train_cmd->add_option("--eval-data", train.eval_data, "held-out corpus for periodic evaluation");
    train_cmd->add_option("--extractor", train.extractor, "random | external:PATH");
    train_cmd->add_flag("--quiet", train.quiet);

    EvalArgs eval;
    auto* eval_cmd = app.add_subcommand("eval", "score a checkpoint on held-out data");
    eval_cmd->add_option("--ckpt", eval.checkpoint)->required();
    eval_cmd->add_option("--data", eval.data, "corpus directory (uses eval/) or evaluation manifest")->required();
    eval_cmd->add_option("--extractor", eval.extractor, "random | external:PATH");
    eval_cmd->add_option("--out", eval.out, "JSON report path");
    eval_cmd->add_option("--seed", eval.seed, "seed of the KID block sampler");

    RenderArgs render;
    auto* render_cmd = app.add_subcommand("render", "render one intrinsic record with R");
    render_cmd->add_option("--ckpt", render.checkpoint)->required();
    render_cmd->add_option("--data", render.data)->required();
    render_cmd->add_option("--id", render.id)->required();
    render_cmd->add_option("--out", render.out, "output PNG")->required();
    render_cmd->add_option("--drop", render.drop, "channel groups zeroed at the input, e.g. F or A,N");

    DecomposeArgs decompose;
    auto* decompose_cmd = app.add_subcommand("decompose", "split an image into albedo, normals and reflections");
    decompose_cmd->add_option("--ckpt", decompose.checkpoint)->required();
    decompose_cmd->add_option("--image", decompose.image, "input PNG")->required();
    decompose_cmd->add_option("--out", decompose.out, "output directory")->required();

    AblateArgs ablate;
    auto* ablate_cmd = app.add_subcommand("ablate", "write the six ablation configs");
    ablate_cmd->add_option("--config", ablate.config, "base config (defaults when omitted)");
    ablate_cmd->add_option("--out", ablate.out, "output directory")->required();
    ablate_cmd->add_option("--set", ablate.overrides, "config override key=value (repeatable)");
    ablate_cmd->add_option("--seeds", ablate.seeds, "one config per seed")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }
    if (threads > 0) torch::set_num_threads(threads);

    try {
        if (*gen_cmd) return cmd_gen_data(gen);
        if (*train_cmd) return cmd_train(train);
        if (*eval_cmd) return cmd_eval(eval);
        if (*render_cmd) return cmd_render(render);
        if (*decompose_cmd) return cmd_decompose(decompose);
        if (*ablate_cmd) return cmd_ablate(ablate);
    } catch (const iae::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const iae::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kData;
    } catch (const iae::NumericError& e) {
        std::cerr << "numeric failure in " << e.term() << ": " << e.what() << "\n";
        return kNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailure;
    }
    return kFailure;
}
