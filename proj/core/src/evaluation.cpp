#include "iae/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>
#include <stdexcept>

#include <json.hpp>
#include <torch/script.h>

#include "iae/error.hpp"
#include "iae/trainer.hpp"

namespace iae::evaluation {

// ----------------------------------------------------------------------
// Extractors
// ----------------------------------------------------------------------

RandomConvExtractor::RandomConvExtractor(uint64_t seed, int64_t dim) : dim_(dim) {
    if (dim <= 0) throw ConfigError("feature dimension must be positive");
    auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
    const std::vector<std::pair<int64_t, int64_t>> shapes = {{3, 32}, {32, 64}, {64, dim}};
    const std::vector<int64_t> kernels = {5, 3, 3};
    for (size_t i = 0; i < shapes.size(); ++i) {
        const auto [in, out] = shapes[i];
        const int64_t k = kernels[i];
        const double scale = std::sqrt(2.0 / static_cast<double>(in * k * k));
        weights_.push_back(torch::randn({out, in, k, k}, gen, torch::kFloat32) * scale);
    }
}

torch::Tensor RandomConvExtractor::features(const torch::Tensor& images) {
    torch::NoGradGuard no_grad;
    if (images.dim() != 4 || images.size(1) != 3) throw std::invalid_argument("extractor expects B x 3 x H x W");
    auto x = images.to(torch::kFloat32);
    for (size_t i = 0; i < weights_.size(); ++i) {
        const int64_t pad = weights_[i].size(2) / 2;
        x = torch::conv2d(x, weights_[i], {}, 2, pad);
        x = torch::leaky_relu(x, 0.2);
    }
    return x.mean({2, 3}).to(torch::kFloat64);
}

struct TorchScriptExtractor::Module {
    torch::jit::script::Module module;
};

TorchScriptExtractor::TorchScriptExtractor(const fs::path& path) : module_(std::make_unique<Module>()), path_(path) {
    if (!fs::exists(path)) throw DataError("feature extractor not found: " + path.string());
    try {
        module_->module = torch::jit::load(path.string());
    } catch (const c10::Error& e) {
        throw DataError("cannot load feature extractor " + path.string() + ": " + e.what_without_backtrace());
    }
    module_->module.eval();
}

TorchScriptExtractor::~TorchScriptExtractor() = default;

torch::Tensor TorchScriptExtractor::features(const torch::Tensor& images) {
    torch::NoGradGuard no_grad;
    auto out = module_->module.forward({images.to(torch::kFloat32)}).toTensor();
    out = out.reshape({out.size(0), -1}).to(torch::kFloat64);
    if (dim_ == 0) dim_ = out.size(1);
    if (out.size(1) != dim_) throw DataError("feature extractor changed its output dimension");
    return out;
}

std::unique_ptr<FeatureExtractor> make_extractor(const std::string& spec, Resolution probe_resolution) {
    if (spec == "random") return std::make_unique<RandomConvExtractor>();
    const std::string prefix = "external:";
    if (spec.rfind(prefix, 0) == 0 && spec.size() > prefix.size()) {
        auto ex = std::make_unique<TorchScriptExtractor>(spec.substr(prefix.size()));
        ex->features(torch::zeros({2, 3, probe_resolution.height, probe_resolution.width}));
        return ex;
    }
    throw ConfigError("extractor must be 'random' or 'external:PATH', got '" + spec + "'");
}

Eigen::MatrixXd extract(FeatureExtractor& extractor, const torch::Tensor& images, int64_t chunk) {
    std::vector<torch::Tensor> parts;
    for (int64_t i = 0; i < images.size(0); i += chunk)
        parts.push_back(extractor.features(images.narrow(0, i, std::min(chunk, images.size(0) - i))));
    auto all = torch::cat(parts, 0).contiguous();
    Eigen::MatrixXd out(all.size(0), all.size(1));
    auto acc = all.accessor<double, 2>();
    for (int64_t r = 0; r < out.rows(); ++r)
        for (int64_t c = 0; c < out.cols(); ++c) out(r, c) = acc[r][c];
    return out;
}

// ----------------------------------------------------------------------
// FID
// ----------------------------------------------------------------------

namespace {

Eigen::MatrixXd covariance(const Eigen::MatrixXd& x, const Eigen::RowVectorXd& mean) {
    const Eigen::MatrixXd centered = x.rowwise() - mean;
    return centered.transpose() * centered / static_cast<double>(x.rows() - 1);
}

Eigen::MatrixXd symmetric_sqrt(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()));
    const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

double fid(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double eps) {
    if (a.cols() != b.cols()) throw std::invalid_argument("fid: feature dimensions differ");
    const int64_t d = a.cols();
    const int64_t minimum = d + 1;
    if (a.rows() < minimum || b.rows() < minimum)
        throw std::invalid_argument("fid: each set needs at least " + std::to_string(minimum) + " samples (d + 1), got " +
                                    std::to_string(a.rows()) + " and " + std::to_string(b.rows()));
    const Eigen::RowVectorXd mu_a = a.colwise().mean();
    const Eigen::RowVectorXd mu_b = b.colwise().mean();
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
    const Eigen::MatrixXd sa = covariance(a, mu_a) + eps * eye;
    const Eigen::MatrixXd sb = covariance(b, mu_b) + eps * eye;

    const Eigen::MatrixXd root_a = symmetric_sqrt(sa);
    const Eigen::MatrixXd inner = root_a * sb * root_a;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
    const double trace_sqrt = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

    const double value = (mu_a - mu_b).squaredNorm() + sa.trace() + sb.trace() - 2.0 * trace_sqrt;
    return std::max(0.0, value);
}

// ----------------------------------------------------------------------
// KID
// ----------------------------------------------------------------------

namespace {

uint64_t row_hash(const Eigen::MatrixXd& x, Eigen::Index r) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        double v = x(r, c);
        if (v == 0.0) v = 0.0;  // fold -0
        unsigned char bytes[sizeof(double)];
        std::memcpy(bytes, &v, sizeof(double));
        for (unsigned char byte : bytes) {
            h ^= byte;
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

Eigen::MatrixXd canonical_order(const Eigen::MatrixXd& x) {
    std::vector<Eigen::Index> order(x.rows());
    std::iota(order.begin(), order.end(), 0);
    std::vector<uint64_t> hashes(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) hashes[r] = row_hash(x, r);
    std::sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) {
        if (hashes[i] != hashes[j]) return hashes[i] < hashes[j];
        for (Eigen::Index c = 0; c < x.cols(); ++c)
            if (x(i, c) != x(j, c)) return x(i, c) < x(j, c);
        return false;
    });
    Eigen::MatrixXd out(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) out.row(r) = x.row(order[r]);
    return out;
}

double mmd_block(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    const double m = static_cast<double>(x.rows());
    const double d = static_cast<double>(x.cols());
    auto kernel = [d](const Eigen::MatrixXd& p, const Eigen::MatrixXd& q) {
        return ((p * q.transpose()).array() / d + 1.0).cube().matrix().eval();
    };
    const Eigen::MatrixXd kxx = kernel(x, x);
    const Eigen::MatrixXd kyy = kernel(y, y);
    const Eigen::MatrixXd kxy = kernel(x, y);
    const double norm = m * (m - 1.0);
    const double xx = (kxx.sum() - kxx.trace()) / norm;
    const double yy = (kyy.sum() - kyy.trace()) / norm;
    const double xy = (kxy.sum() - kxy.trace()) / norm;
    return xx + yy - 2.0 * xy;
}

}  // namespace

KidResult kid(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, int64_t block_size, int64_t blocks, uint64_t seed) {
    if (a.cols() != b.cols()) throw std::invalid_argument("kid: feature dimensions differ");
    if (a.rows() < 2 || b.rows() < 2) throw std::invalid_argument("kid: each set needs at least 2 samples");
    if (block_size < 2 || blocks < 1) throw std::invalid_argument("kid: block_size must be >= 2 and blocks >= 1");
    const Eigen::MatrixXd ca = canonical_order(a);
    const Eigen::MatrixXd cb = canonical_order(b);

    KidResult result;
    if (a.rows() == b.rows() && a.rows() <= block_size) {
        result.value = 100.0 * mmd_block(ca, cb);
        result.blocks = 1;
        result.block_size = a.rows();
        return result;
    }

    const int64_t m = std::min<int64_t>({a.rows(), b.rows(), block_size});
    std::mt19937_64 rng(seed);
    auto subset = [&](const Eigen::MatrixXd& x) {
        std::vector<Eigen::Index> idx(x.rows());
        std::iota(idx.begin(), idx.end(), 0);
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(m);
        std::sort(idx.begin(), idx.end());
        Eigen::MatrixXd out(m, x.cols());
        for (int64_t i = 0; i < m; ++i) out.row(i) = x.row(idx[i]);
        return out;
    };
    std::vector<double> values;
    for (int64_t k = 0; k < blocks; ++k) {
        const Eigen::MatrixXd xa = subset(ca);
        const Eigen::MatrixXd xb = subset(cb);
        values.push_back(100.0 * mmd_block(xa, xb));
    }
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    result.value = mean;
    result.std = values.size() > 1 ? std::sqrt(var / static_cast<double>(values.size() - 1)) : 0.0;
    result.blocks = blocks;
    result.block_size = m;
    return result;
}

// ----------------------------------------------------------------------
// Intrinsic errors
// ----------------------------------------------------------------------

namespace {

// Brings maps to B x C x H x W and the mask to B x 1 x H x W float64.
std::pair<torch::Tensor, torch::Tensor> batched(const torch::Tensor& maps, const torch::Tensor& mask) {
    auto m = maps.dim() == 3 ? maps.unsqueeze(0) : maps;
    auto k = mask;
    if (k.dim() == 2) k = k.unsqueeze(0).unsqueeze(0);
    else if (k.dim() == 3) k = k.unsqueeze(maps.dim() == 4 ? 1 : 0);
    if (m.dim() != 4 || k.dim() != 4 || k.size(1) != 1 || k.size(0) != m.size(0) || k.size(2) != m.size(2) ||
        k.size(3) != m.size(3))
        throw std::invalid_argument("mask shape does not match the maps");
    return {m.to(torch::kFloat64), (k.to(torch::kFloat64) > 0.5).to(torch::kFloat64)};
}

}  // namespace

double normal_error_deg(const torch::Tensor& pred, const torch::Tensor& gt, const torch::Tensor& mask) {
    if (pred.sizes() != gt.sizes()) throw std::invalid_argument("normal_error: shape mismatch");
    auto [p, w] = batched(pred, mask);
    auto g = (gt.dim() == 3 ? gt.unsqueeze(0) : gt).to(torch::kFloat64);
    if (p.size(1) != 3) throw std::invalid_argument("normal_error: expected 3 channels");
    const double count = w.sum().item<double>();
    if (count == 0.0) throw std::invalid_argument("normal_error: empty mask");
    auto pn = p / torch::linalg_vector_norm(p, 2, torch::IntArrayRef{1}, true).clamp_min(1e-12);
    auto gn = g / torch::linalg_vector_norm(g, 2, torch::IntArrayRef{1}, true).clamp_min(1e-12);
    auto cosine = (pn * gn).sum(1, true).clamp(-1.0, 1.0);
    auto degrees = torch::acos(cosine) * (180.0 / M_PI);
    return (degrees * w).sum().item<double>() / count;
}

double map_error_l1(const torch::Tensor& pred, const torch::Tensor& gt, const torch::Tensor& mask) {
    if (pred.sizes() != gt.sizes()) throw std::invalid_argument("map_error_l1: shape mismatch");
    auto [p, w] = batched(pred, mask);
    auto g = (gt.dim() == 3 ? gt.unsqueeze(0) : gt).to(torch::kFloat64);
    const double count = w.sum().item<double>() * static_cast<double>(p.size(1));
    if (count == 0.0) throw std::invalid_argument("map_error_l1: empty mask");
    return 255.0 * ((p - g).abs() * w).sum().item<double>() / count;
}

// ----------------------------------------------------------------------
// Checkpoint evaluation
// ----------------------------------------------------------------------

std::string to_json(const MetricReport& r) {
    nlohmann::ordered_json j;
    j["fid"] = r.fid;
    j["kid"] = r.kid;
    j["kid_std"] = r.kid_std;
    j["normal_err_deg"] = r.normal_err_deg;
    j["albedo_err"] = r.albedo_err;
    j["reflection_err"] = r.reflection_err;
    j["recon_l1"] = r.recon_l1;
    j["extractor"] = r.extractor;
    j["n_samples"] = {{"fid", r.n_samples.fid},
                      {"kid", r.n_samples.kid},
                      {"normal_err_deg", r.n_samples.decomposition},
                      {"albedo_err", r.n_samples.decomposition},
                      {"reflection_err", r.n_samples.decomposition},
                      {"recon_l1", r.n_samples.reconstruction}};
    return j.dump();
}

namespace {

std::vector<std::vector<size_t>> chunks(const std::vector<size_t>& idx, int64_t size) {
    std::vector<std::vector<size_t>> out;
    for (size_t i = 0; i < idx.size(); i += static_cast<size_t>(size))
        out.emplace_back(idx.begin() + i, idx.begin() + std::min(idx.size(), i + static_cast<size_t>(size)));
    return out;
}

}  // namespace

MetricReport evaluate(const losses::Mapping& renderer, const losses::Mapping& decomposer,
                      const dataset::DatasetManifest& eval_manifest, FeatureExtractor& extractor, Resolution res,
                      const EvalOptions& options) {
    torch::NoGradGuard no_grad;
    using dataset::RecordKind;
    const auto intrinsic = eval_manifest.indices(RecordKind::Intrinsic);
    const auto real = eval_manifest.indices(RecordKind::Real);
    if (intrinsic.empty()) throw DataError("evaluation manifest has no intrinsic records");
    if (real.empty()) throw DataError("evaluation manifest has no real records");

    const auto minimum = static_cast<size_t>(extractor.dim() + 1);
    if (intrinsic.size() < minimum || real.size() < minimum)
        throw DataError("evaluation needs at least " + std::to_string(minimum) + " intrinsic and " +
                        std::to_string(minimum) + " real records for " + extractor.name() + " features, got " +
                        std::to_string(intrinsic.size()) + " and " + std::to_string(real.size()));

    MetricReport report;
    report.extractor = extractor.name();

    std::vector<torch::Tensor> rendered;
    for (const auto& part : chunks(intrinsic, options.batch_size)) {
        auto batch = dataset::load_batch(eval_manifest, part, {}, res);
        rendered.push_back(renderer(networks::ablate_inputs(batch.intrinsics, options.drop_inputs)));
    }

    std::vector<torch::Tensor> real_images;
    std::vector<torch::Tensor> pred_n, pred_a, pred_f, gt_n, gt_a, gt_f, gt_mask;
    double recon_sum = 0.0;
    int64_t recon_count = 0;
    for (const auto& part : chunks(real, options.batch_size)) {
        auto batch = dataset::load_batch(eval_manifest, {}, part, res);
        real_images.push_back(batch.real);

        auto stack = decomposer(batch.real);
        auto recon = renderer(networks::ablate_inputs(stack, options.drop_inputs));
        recon_sum += (recon - batch.real).abs().to(torch::kFloat64).sum().item<double>();
        recon_count += batch.real.numel();

        for (size_t i = 0; i < part.size(); ++i) {
            const auto& record = eval_manifest.records[part[i]];
            if (!record.has_ground_truth()) continue;
            auto truth = dataset::decode_intrinsics(eval_manifest.root, record.paths);
            auto s = stack[static_cast<int64_t>(i)];
            pred_a.push_back(to_unit(s.narrow(0, channels::kAlbedo, 3)).clamp(0.0, 1.0));
            pred_n.push_back(s.narrow(0, channels::kNormals, 3));
            pred_f.push_back(to_unit(s.narrow(0, channels::kReflections, 3)).clamp(0.0, 1.0));
            gt_a.push_back(truth.albedo);
            gt_n.push_back(truth.normals);
            gt_f.push_back(truth.reflections);
            gt_mask.push_back(truth.mask.unsqueeze(0));
        }
    }

    const auto fake = extract(extractor, torch::cat(rendered, 0));
    const auto real_features = extract(extractor, torch::cat(real_images, 0));
    report.fid = fid(fake, real_features);
    const auto k = kid(fake, real_features, 1000, 100, options.kid_seed);
    report.kid = k.value;
    report.kid_std = k.std;
    report.n_samples.fid = std::min(fake.rows(), real_features.rows());
    report.n_samples.kid = k.block_size;

    report.recon_l1 = recon_sum / static_cast<double>(recon_count);
    report.n_samples.reconstruction = static_cast<int64_t>(real.size());

    if (!gt_n.empty()) {
        auto mask = torch::stack(gt_mask);
        report.normal_err_deg = normal_error_deg(torch::stack(pred_n), torch::stack(gt_n), mask);
        report.albedo_err = map_error_l1(torch::stack(pred_a), torch::stack(gt_a), mask);
        report.reflection_err = map_error_l1(torch::stack(pred_f), torch::stack(gt_f), mask);
        report.n_samples.decomposition = static_cast<int64_t>(gt_n.size());
    }
    return report;
}

MetricReport evaluate(networks::Models& models, const ChannelSet& drop, const dataset::DatasetManifest& eval_manifest,
                      FeatureExtractor& extractor, Resolution res) {
    models.train(false);
    EvalOptions options;
    options.drop_inputs = drop;
    auto renderer = [&](const torch::Tensor& x) { return models.renderer->forward(x); };
    auto decomposer = [&](const torch::Tensor& x) { return models.decomposer->forward(x); };
    return evaluate(renderer, decomposer, eval_manifest, extractor, res, options);
}

MetricReport evaluate_checkpoint(const fs::path& checkpoint, const dataset::DatasetManifest& eval_manifest,
                                 FeatureExtractor& extractor) {
    auto trainer = trainer::Trainer::load_checkpoint(checkpoint);
    const auto& config = trainer.config();
    return evaluate(trainer.models(), config.ablation.drop_inputs, eval_manifest, extractor, config.resolution);
}

}  // namespace iae::evaluation
