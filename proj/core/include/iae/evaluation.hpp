#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include <Eigen/Dense>
#include <torch/torch.h>

#include "iae/dataset.hpp"
#include "iae/losses.hpp"
#include "iae/networks.hpp"

namespace iae::evaluation {

namespace fs = std::filesystem;

// ----------------------------------------------------------------------
// Feature extractors
// ----------------------------------------------------------------------

/// Fixed image -> feature mapping. Inputs are B x 3 x H x W in [-1,1];
/// outputs are B x dim() float64.
class FeatureExtractor {
public:
    virtual ~FeatureExtractor() = default;
    virtual torch::Tensor features(const torch::Tensor& images) = 0;
    virtual int64_t dim() const = 0;
    virtual std::string name() const = 0;
};

/// Three strided convolutions with weights drawn once from a seeded generator,
/// leaky ReLU activations and global average pooling of the last layer.
class RandomConvExtractor : public FeatureExtractor {
public:
    explicit RandomConvExtractor(uint64_t seed = 0, int64_t dim = 64);
    torch::Tensor features(const torch::Tensor& images) override;
    int64_t dim() const override { return dim_; }
    std::string name() const override { return "random"; }

private:
    int64_t dim_;
    std::vector<torch::Tensor> weights_;
};

/// TorchScript module mapping B x 3 x H x W in [-1,1] to B x d features.
class TorchScriptExtractor : public FeatureExtractor {
public:
    explicit TorchScriptExtractor(const fs::path& path);
    ~TorchScriptExtractor() override;
    torch::Tensor features(const torch::Tensor& images) override;
    int64_t dim() const override { return dim_; }
    std::string name() const override { return "external:" + path_.string(); }

private:
    struct Module;
    std::unique_ptr<Module> module_;
    fs::path path_;
    int64_t dim_ = 0;
};

/// "random" or "external:PATH". Throws ConfigError on anything else and
/// DataError when the external module cannot be loaded.
std::unique_ptr<FeatureExtractor> make_extractor(const std::string& spec, Resolution probe_resolution = {});

// Runs the extractor over a N x 3 x H x W tensor in chunks; returns N x d.
Eigen::MatrixXd extract(FeatureExtractor& extractor, const torch::Tensor& images, int64_t chunk = 32);

// ----------------------------------------------------------------------
// Metrics
// ----------------------------------------------------------------------

/// Frechet distance between Gaussian fits of the rows of a and b:
///   |mu_a - mu_b|^2 + Tr(Sa + Sb - 2 (Sa^(1/2) Sb Sa^(1/2))^(1/2)),
/// with eps * I added to both covariances. Each set needs at least d + 1 rows.
double fid(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double eps = 1e-6);

struct KidResult {
    double value = 0.0;  // x100
    double std = 0.0;    // x100, over blocks (0 for a single block)
    int64_t blocks = 0;
    int64_t block_size = 0;
};

/// Unbiased squared MMD with kernel (x.y / d + 1)^3, reported x100. Rows of each
/// set are put in a canonical order (by a hash of their values) before blocks
/// are drawn; the result is independent of input order. The cross term skips
/// the pairs (a_i, b_i) of each block; kid(a, a) is exactly 0.
/// When both sets have the same size and fit in one block that block is used;
/// otherwise `blocks` random blocks of size min(n_a, n_b, block_size).
KidResult kid(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, int64_t block_size = 1000, int64_t blocks = 100,
              uint64_t seed = 0);

/// Mean angle in degrees between renormalized pred and gt over masked pixels.
/// pred, gt: [B x] 3 x H x W; mask: [B x] [1 x] H x W (bool or {0,1}).
/// Throws std::invalid_argument on an empty mask or mismatched shapes.
double normal_error_deg(const torch::Tensor& pred, const torch::Tensor& gt, const torch::Tensor& mask);

/// Mean absolute difference of [0,1] maps over masked pixels, on the 0-255 scale.
double map_error_l1(const torch::Tensor& pred, const torch::Tensor& gt, const torch::Tensor& mask);

// ----------------------------------------------------------------------
// Checkpoint evaluation
// ----------------------------------------------------------------------

struct SampleCounts {
    int64_t fid = 0;             // rendered and real images, each
    int64_t kid = 0;
    int64_t decomposition = 0;   // images scored for normal/albedo/reflection error
    int64_t reconstruction = 0;
};

struct MetricReport {
    double fid = 0.0;
    double kid = 0.0;  // x100
    double kid_std = 0.0;
    double normal_err_deg = 0.0;
    double albedo_err = 0.0;      // 0-255 scale
    double reflection_err = 0.0;  // 0-255 scale
    double recon_l1 = 0.0;        // mean |R(H(I)) - I| in [-1,1] units
    std::string extractor;
    SampleCounts n_samples;
};

std::string to_json(const MetricReport& report);

struct EvalOptions {
    int64_t batch_size = 16;
    uint64_t kid_seed = 0;
    ChannelSet drop_inputs;  // applied at the renderer input
};

/// Renders every held-out intrinsic record and compares the images with the
/// held-out real records (FID/KID); decomposes every real record carrying
/// ground truth and scores it (normal/albedo/reflection error on the ground
/// truth mask, reconstruction L1 on all pixels). Networks run without grad.
MetricReport evaluate(const losses::Mapping& renderer, const losses::Mapping& decomposer,
                      const dataset::DatasetManifest& eval_manifest, FeatureExtractor& extractor, Resolution res,
                      const EvalOptions& options = {});

MetricReport evaluate(networks::Models& models, const ChannelSet& drop, const dataset::DatasetManifest& eval_manifest,
                      FeatureExtractor& extractor, Resolution res);

/// Loads a trainer checkpoint and evaluates it under the ablation it was trained with.
MetricReport evaluate_checkpoint(const fs::path& checkpoint, const dataset::DatasetManifest& eval_manifest,
                                 FeatureExtractor& extractor);

}  // namespace iae::evaluation
