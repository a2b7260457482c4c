#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "iae/dataset.hpp"
#include "iae/losses.hpp"
#include "iae/networks.hpp"

namespace iae::trainer {

namespace fs = std::filesystem;

/// Switches reproducing the baseline columns of the ablation study.
struct AblationConfig {
    // false: reconstructions (R(H(I_r)) for D_I, H(R(M_s)) for D_M) are not adversarial samples.
    bool shared_discriminator = true;
    // false: no L_dec and no D_I term on R(H(I_r)) ("only rendering cycle").
    bool decomposition_cycle = true;
    // Channel groups zeroed at the renderer input.
    ChannelSet drop_inputs;

    bool operator==(const AblationConfig&) const = default;
};

struct TrainConfig {
    double learning_rate = 2e-4;
    double adam_beta1 = 0.5;
    double adam_beta2 = 0.999;
    bool lr_decay = false;  // linear decay to zero over the second half of training
    int64_t batch_size = 8;
    int64_t max_steps = 20000;
    Resolution resolution{64, 64};
    uint64_t seed = 0;

    losses::LossWeights weights;
    losses::AdversarialMode adversarial = losses::AdversarialMode::NonSaturating;
    losses::CycleDistance dec_distance = losses::CycleDistance::L1;
    AblationConfig ablation;
    networks::NetworkOptions networks;

    int64_t checkpoint_every = 1000;  // 0 disables periodic checkpoints
    int64_t grid_every = 1000;        // 0 disables image grids
    int64_t eval_every = 0;           // 0 disables periodic evaluation

    /// Row label in the ablation table: "full", "w/o Shared Discr", "w/o Decom. Cyc.",
    /// "w/o A", ... (combinations joined with " + ").
    std::string tag() const;

    // ConfigError on any invariant violation (positive lr/batch/steps, stride divisibility, ...).
    void validate() const;

    /// 16 hex digits, FNV-1a over serialize(*this).
    std::string hash() const;
};

/// Canonical `key = value` text, one key per line, every key present.
std::string serialize(const TrainConfig& config);

/// Parses `key = value` lines ('#' starts a comment). Keys not listed by
/// serialize() are errors; missing keys keep their defaults.
TrainConfig parse_config(const std::string& text);
TrainConfig load_config(const fs::path& path);
void save_config(const TrainConfig& config, const fs::path& path);

// Applies one `key=value` override with the same validation as the file parser.
void apply_override(TrainConfig& config, const std::string& key, const std::string& value);

/// The six ablation rows: full, w/o shared D, w/o decomposition cycle, w/o A,
/// w/o N, w/o F. Each differs from `base` only in its ablation fields.
std::vector<TrainConfig> ablation_grid(const TrainConfig& base);

/// Training state of one run: networks, both Adam optimizers, the data rng and
/// the step counter. Discriminators and generators are updated by separate
/// optimizers and never touch each other's parameters.
/// Forward passes of both cycles for one batch.
struct CycleOutputs {
    torch::Tensor m_s, i_r;            // inputs
    torch::Tensor mask_s, mask_r;      // B x 1 x H x W foreground masks
    torch::Tensor i_hat_s, m_hat_s;    // R(M_s), H(R(M_s))
    torch::Tensor m_hat_r, i_hat_r;    // H(I_r), R(H(I_r)) (undefined without the decomposition cycle)
};

struct AdversarialTerms {
    losses::AdversarialLoss image;      // D_I
    losses::AdversarialLoss intrinsic;  // D_M
};

class Trainer {
public:
    explicit Trainer(TrainConfig config);

    /// One discriminator update followed by one generator update.
    /// Throws NumericError naming the first non-finite term.
    losses::LossReport train_step(const dataset::UnpairedBatch& batch);

    // The phases of train_step, exposed for inspection.
    CycleOutputs forward_cycles(const dataset::UnpairedBatch& batch);
    /// Discriminator objectives on detached fakes under the current ablation.
    AdversarialTerms discriminator_losses(const CycleOutputs& cycles);
    void update_discriminators(const CycleOutputs& cycles, losses::LossReport& report);
    void update_generators(const CycleOutputs& cycles, losses::LossReport& report);

    /// Number of adversarial terms entering each discriminator loss under the
    /// current ablation (3 when shared, 2 otherwise, for D_I and D_M).
    std::pair<size_t, size_t> discriminator_term_counts() const;

    void save_checkpoint(const fs::path& path) const;

    /// Restores a checkpoint written by save_checkpoint. The stored config
    /// hash must match `expected` when given; throws ConfigError otherwise.
    static Trainer load_checkpoint(const fs::path& path, const std::optional<TrainConfig>& expected = std::nullopt);

    const TrainConfig& config() const { return config_; }
    int64_t step() const { return step_; }
    networks::Models& models() { return models_; }
    const networks::Models& models() const { return models_; }
    std::mt19937_64& data_rng() { return data_rng_; }

private:
    TrainConfig config_;
    networks::Models models_;
    std::unique_ptr<torch::optim::Adam> opt_g_;
    std::unique_ptr<torch::optim::Adam> opt_d_;
    std::mt19937_64 data_rng_;
    int64_t step_ = 0;

    void set_learning_rate();
};

struct MetricSnapshot {
    int64_t step = 0;
    std::string report_json;
};

struct FitResult {
    fs::path final_checkpoint;
    std::vector<fs::path> checkpoints;
    std::vector<MetricSnapshot> history;
};

struct FitOptions {
    std::optional<fs::path> resume;
    std::optional<dataset::DatasetManifest> eval_manifest;
    std::string extractor = "random";
    bool quiet = false;
};

/// Runs train_step until config.max_steps with periodic checkpoints, image
/// grids and (optional) evaluation. Writes into out_dir:
///   config.txt, log.jsonl (one LossReport per step), ckpt_<step>.pt,
///   final.pt, grid_<step>.png, metrics.jsonl.
FitResult fit(const TrainConfig& config, const dataset::DatasetManifest& train, const fs::path& out_dir,
              const FitOptions& options = {});

}  // namespace iae::trainer
