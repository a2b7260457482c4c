#include "iae/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>

#include "iae/error.hpp"
#include "iae/evaluation.hpp"
#include "iae/grid.hpp"

namespace iae::trainer {

using losses::LossReport;

namespace {

torch::optim::Adam make_adam(const std::vector<torch::Tensor>& params, const TrainConfig& c) {
    return torch::optim::Adam(params,
                              torch::optim::AdamOptions(c.learning_rate).betas({c.adam_beta1, c.adam_beta2}));
}

void set_requires_grad(const std::vector<torch::Tensor>& params, bool on) {
    for (auto p : params) p.requires_grad_(on);
}

double checked(const torch::Tensor& t, const char* term) {
    const double v = t.item<double>();
    if (!std::isfinite(v)) throw NumericError(term, std::string("non-finite loss term: ") + term);
    return v;
}

}  // namespace

Trainer::Trainer(TrainConfig config) : config_(std::move(config)) {
    config_.validate();
    models_ = networks::make_models(config_.networks, config_.seed);
    models_.train(true);
    opt_g_ = std::make_unique<torch::optim::Adam>(make_adam(models_.generator_parameters(), config_));
    opt_d_ = std::make_unique<torch::optim::Adam>(make_adam(models_.discriminator_parameters(), config_));
    data_rng_.seed(dataset::derive_seed(config_.seed, 0x5eed, 0));
}

std::pair<size_t, size_t> Trainer::discriminator_term_counts() const {
    const auto& a = config_.ablation;
    const size_t image = 2 + ((a.shared_discriminator && a.decomposition_cycle) ? 1 : 0);
    const size_t intrinsic = 2 + (a.shared_discriminator ? 1 : 0);
    return {image, intrinsic};
}

void Trainer::set_learning_rate() {
    if (!config_.lr_decay) return;
    const double progress = static_cast<double>(step_) / static_cast<double>(config_.max_steps);
    const double lr = config_.learning_rate * std::min(1.0, std::max(0.0, 2.0 * (1.0 - progress)));
    for (auto* opt : {opt_g_.get(), opt_d_.get()})
        for (auto& group : opt->param_groups()) static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
}

namespace {

struct Fakes {
    std::vector<torch::Tensor> image;
    std::vector<torch::Tensor> intrinsic;
};

Fakes fakes_of(const CycleOutputs& c, const AblationConfig& ab) {
    Fakes f;
    f.image.push_back(c.i_hat_s);
    if (ab.shared_discriminator && ab.decomposition_cycle) f.image.push_back(c.i_hat_r);
    f.intrinsic.push_back(c.m_hat_r);
    if (ab.shared_discriminator) f.intrinsic.push_back(c.m_hat_s);
    return f;
}

}  // namespace

CycleOutputs Trainer::forward_cycles(const dataset::UnpairedBatch& batch) {
    const auto& drop = config_.ablation.drop_inputs;
    auto render = [&](const torch::Tensor& stack) {
        return models_.renderer->forward(networks::ablate_inputs(stack, drop));
    };
    CycleOutputs c;
    c.m_s = batch.intrinsics;
    c.i_r = batch.real;
    c.mask_s = batch.intrinsic_mask;
    c.mask_r = batch.real_mask;
    c.i_hat_s = render(c.m_s);
    c.m_hat_s = models_.decomposer->forward(c.i_hat_s);
    c.m_hat_r = models_.decomposer->forward(c.i_r);
    if (config_.ablation.decomposition_cycle) c.i_hat_r = render(c.m_hat_r);
    return c;
}

AdversarialTerms Trainer::discriminator_losses(const CycleOutputs& cycles) {
    const Fakes fakes = fakes_of(cycles, config_.ablation);
    std::vector<torch::Tensor> image, intrinsic;
    for (const auto& f : fakes.image) image.push_back(f.detach());
    for (const auto& f : fakes.intrinsic) intrinsic.push_back(f.detach());
    losses::Discriminator d_image = [&](const torch::Tensor& x) { return models_.d_image->forward(x); };
    losses::Discriminator d_intrinsic = [&](const torch::Tensor& x) { return models_.d_intrinsic->forward(x); };
    return {losses::discriminator_loss(d_image, cycles.i_r, image, config_.adversarial),
            losses::discriminator_loss(d_intrinsic, cycles.m_s, intrinsic, config_.adversarial)};
}

void Trainer::update_discriminators(const CycleOutputs& cycles, LossReport& report) {
    auto terms = discriminator_losses(cycles);
    report.d_loss_I = checked(terms.image.value, "d_loss_I");
    report.d_loss_M = checked(terms.intrinsic.value, "d_loss_M");
    opt_d_->zero_grad();
    (terms.image.value + terms.intrinsic.value).backward();
    opt_d_->step();
}

void Trainer::update_generators(const CycleOutputs& c, LossReport& report) {
    const auto& ab = config_.ablation;
    const auto& w = config_.weights;
    const Fakes fakes = fakes_of(c, ab);
    losses::Discriminator d_image = [&](const torch::Tensor& x) { return models_.d_image->forward(x); };
    losses::Discriminator d_intrinsic = [&](const torch::Tensor& x) { return models_.d_intrinsic->forward(x); };

    // Discriminator weights frozen for the generator update.
    const auto d_params = models_.discriminator_parameters();
    set_requires_grad(d_params, false);
    try {
        auto g_i = losses::generator_loss(d_image, fakes.image, config_.adversarial);
        auto g_m = losses::generator_loss(d_intrinsic, fakes.intrinsic, config_.adversarial);
        auto l_ren = losses::smooth_l1(c.m_hat_s, c.m_s, w.smooth_l1_beta);
        torch::Tensor l_dec = torch::zeros({}, c.i_r.options());
        if (ab.decomposition_cycle) {
            l_dec = config_.dec_distance == losses::CycleDistance::L1
                        ? losses::l1(c.i_hat_r, c.i_r)
                        : losses::smooth_l1(c.i_hat_r, c.i_r, w.smooth_l1_beta);
        }
        auto l_norm = losses::unit_norm_penalty(c.m_hat_r.narrow(1, channels::kNormals, 3), c.mask_r) +
                      losses::unit_norm_penalty(c.m_hat_s.narrow(1, channels::kNormals, 3), c.mask_s);

        report.l_ren = checked(l_ren, "l_ren");
        report.l_dec = checked(l_dec, "l_dec");
        report.l_norm = checked(l_norm, "l_norm");
        report.l_adv_I = checked(g_i.value, "l_adv_I");
        report.l_adv_M = checked(g_m.value, "l_adv_M");

        auto total = losses::generator_objective(l_ren, l_dec, l_norm, g_i.value, g_m.value, w);
        opt_g_->zero_grad();
        total.backward();
        opt_g_->step();
    } catch (...) {
        set_requires_grad(d_params, true);
        throw;
    }
    set_requires_grad(d_params, true);
}

LossReport Trainer::train_step(const dataset::UnpairedBatch& batch) {
    set_learning_rate();
    LossReport report;
    const CycleOutputs cycles = forward_cycles(batch);
    update_discriminators(cycles, report);
    update_generators(cycles, report);
    std::tie(report.total_G, report.total_D) = losses::joint_objective(report, config_.weights);
    if (!std::isfinite(report.total_G)) throw NumericError("total_G", "non-finite loss term: total_G");
    ++step_;
    return report;
}

FitResult fit(const TrainConfig& config, const dataset::DatasetManifest& train, const fs::path& out_dir,
              const FitOptions& options) {
    config.validate();
    if (train.indices(dataset::RecordKind::Intrinsic).empty()) throw DataError("no intrinsic records");
    if (train.indices(dataset::RecordKind::Real).empty()) throw DataError("no real records");
    if (train.resolution && !(*train.resolution == config.resolution))
        throw ConfigError("dataset resolution " + train.resolution->str() + " differs from config resolution " +
                          config.resolution.str());

    std::unique_ptr<evaluation::FeatureExtractor> extractor;
    if (config.eval_every > 0 && options.eval_manifest)
        extractor = evaluation::make_extractor(options.extractor, config.resolution);

    std::optional<Trainer> trainer;
    if (options.resume) trainer.emplace(Trainer::load_checkpoint(*options.resume, config));
    else trainer.emplace(config);

    fs::create_directories(out_dir);
    save_config(config, out_dir / "config.txt");
    std::ofstream log(out_dir / "log.jsonl", options.resume ? std::ios::app : std::ios::trunc);
    std::ofstream metrics_log(out_dir / "metrics.jsonl", options.resume ? std::ios::app : std::ios::trunc);

    FitResult result;
    const std::string tag = config.tag();
    const auto started = std::chrono::steady_clock::now();
    while (trainer->step() < config.max_steps) {
        auto batch = dataset::sample_unpaired_batch(train, config.batch_size, trainer->data_rng(), config.resolution);
        const LossReport report = trainer->train_step(batch);
        const int64_t step = trainer->step();
        log << losses::to_json_line(report, step, tag) << '\n';

        const bool last = step == config.max_steps;
        if (config.grid_every > 0 && (step % config.grid_every == 0 || last)) {
            torch::NoGradGuard no_grad;
            write_png_grid(out_dir / ("grid_" + std::to_string(step) + ".png"),
                           training_grid(trainer->models(), batch, config.ablation.drop_inputs));
        }
        if (config.checkpoint_every > 0 && step % config.checkpoint_every == 0 && !last) {
            auto path = out_dir / ("ckpt_" + std::to_string(step) + ".pt");
            trainer->save_checkpoint(path);
            result.checkpoints.push_back(path);
        }
        if (extractor && (step % config.eval_every == 0 || last)) {
            auto report_eval = evaluation::evaluate(trainer->models(), config.ablation.drop_inputs,
                                                    *options.eval_manifest, *extractor, config.resolution);
            trainer->models().train(true);
            MetricSnapshot snap{step, evaluation::to_json(report_eval)};
            metrics_log << "{\"step\":" << step << ",\"metrics\":" << snap.report_json << "}\n";
            metrics_log.flush();
            result.history.push_back(std::move(snap));
        }
        if (!options.quiet && (step % 100 == 0 || last)) {
            const double elapsed =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
            std::cerr << "[" << tag << "] step " << step << "/" << config.max_steps << "  G " << report.total_G
                      << "  D " << report.total_D << "  (" << elapsed << " s)\n";
            log.flush();
        }
    }
    result.final_checkpoint = out_dir / "final.pt";
    trainer->save_checkpoint(result.final_checkpoint);
    result.checkpoints.push_back(result.final_checkpoint);
    return result;
}

}  // namespace iae::trainer
