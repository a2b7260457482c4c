#include "iae/losses.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "iae/error.hpp"

namespace iae::losses {

void LossWeights::validate() const {
    auto ok = [](double v) { return std::isfinite(v) && v >= 0.0; };
    if (!ok(w_cyc)) throw ConfigError("w_cyc must be finite and non-negative");
    if (!ok(w_norm)) throw ConfigError("w_norm must be finite and non-negative");
    if (!ok(w_adv)) throw ConfigError("w_adv must be finite and non-negative");
    if (!(std::isfinite(smooth_l1_beta) && smooth_l1_beta > 0.0)) throw ConfigError("smooth_l1_beta must be positive");
}

std::string to_string(AdversarialMode mode) {
    return mode == AdversarialMode::NonSaturating ? "nonsaturating" : "lsgan";
}

AdversarialMode parse_adversarial_mode(const std::string& text) {
    if (text == "nonsaturating") return AdversarialMode::NonSaturating;
    if (text == "lsgan") return AdversarialMode::LeastSquares;
    throw ConfigError("adversarial mode must be 'nonsaturating' or 'lsgan', got '" + text + "'");
}

std::string to_string(CycleDistance d) { return d == CycleDistance::L1 ? "l1" : "smooth_l1"; }

CycleDistance parse_cycle_distance(const std::string& text) {
    if (text == "l1") return CycleDistance::L1;
    if (text == "smooth_l1") return CycleDistance::SmoothL1;
    throw ConfigError("cycle distance must be 'l1' or 'smooth_l1', got '" + text + "'");
}

std::string to_json_line(const LossReport& r, int64_t step, const std::string& tag) {
    nlohmann::ordered_json j;
    j["step"] = step;
    j["tag"] = tag;
    j["l_ren"] = r.l_ren;
    j["l_dec"] = r.l_dec;
    j["l_norm"] = r.l_norm;
    j["l_adv_I"] = r.l_adv_I;
    j["l_adv_M"] = r.l_adv_M;
    j["d_loss_I"] = r.d_loss_I;
    j["d_loss_M"] = r.d_loss_M;
    j["total_G"] = r.total_G;
    j["total_D"] = r.total_D;
    return j.dump();
}

torch::Tensor smooth_l1(const torch::Tensor& pred, const torch::Tensor& target, double beta) {
    if (pred.sizes() != target.sizes()) throw std::invalid_argument("smooth_l1: shape mismatch");
    if (!(beta > 0.0)) throw std::invalid_argument("smooth_l1: beta must be positive");
    auto diff = (pred - target).abs();
    auto quadratic = 0.5 * diff * diff / beta;
    auto linear = diff - 0.5 * beta;
    return torch::where(diff < beta, quadratic, linear).mean();
}

torch::Tensor l1(const torch::Tensor& pred, const torch::Tensor& target) {
    if (pred.sizes() != target.sizes()) throw std::invalid_argument("l1: shape mismatch");
    return (pred - target).abs().mean();
}

torch::Tensor rendering_cycle_loss(const Mapping& renderer, const Mapping& decomposer, const torch::Tensor& m_s,
                                   double beta) {
    return smooth_l1(decomposer(renderer(m_s)), m_s, beta);
}

torch::Tensor decomposition_cycle_loss(const Mapping& renderer, const Mapping& decomposer, const torch::Tensor& i_r,
                                       CycleDistance distance, double beta) {
    auto reconstructed = renderer(decomposer(i_r));
    return distance == CycleDistance::L1 ? l1(reconstructed, i_r) : smooth_l1(reconstructed, i_r, beta);
}

torch::Tensor unit_norm_penalty(const torch::Tensor& normals, const torch::Tensor& mask) {
    auto length = torch::linalg_vector_norm(normals, 2, torch::IntArrayRef{1}, /*keepdim=*/true);
    auto deviation = (1.0 - length).abs();
    if (!mask.defined()) return deviation.mean();
    auto weight = mask.to(deviation.scalar_type());
    auto count = weight.sum();
    if (count.item<double>() == 0.0) return (deviation * 0.0).sum();
    return (deviation * weight).sum() / count;
}

torch::Tensor norm_loss(const Mapping& normal_head, const torch::Tensor& i_r, const torch::Tensor& mask_r,
                        const torch::Tensor& rendered_s, const torch::Tensor& mask_s) {
    return unit_norm_penalty(normal_head(i_r), mask_r) + unit_norm_penalty(normal_head(rendered_s), mask_s);
}

namespace {

// Average of per-scale patch means.
torch::Tensor scale_mean(const std::vector<torch::Tensor>& per_scale) {
    if (per_scale.empty()) throw std::invalid_argument("discriminator returned no scales");
    auto total = per_scale.front().mean();
    for (size_t s = 1; s < per_scale.size(); ++s) total = total + per_scale[s].mean();
    return total / static_cast<double>(per_scale.size());
}

enum class Target { Real, Fake };

torch::Tensor adversarial_term(const std::vector<torch::Tensor>& logits, Target target, AdversarialMode mode) {
    std::vector<torch::Tensor> per_scale;
    per_scale.reserve(logits.size());
    for (const auto& l : logits) {
        if (mode == AdversarialMode::NonSaturating) {
            auto p = torch::sigmoid(l).clamp(kProbabilityEps, 1.0 - kProbabilityEps);
            per_scale.push_back(target == Target::Real ? -torch::log(p) : -torch::log(1.0 - p));
        } else {
            per_scale.push_back(target == Target::Real ? (l - 1.0).pow(2) : l.pow(2));
        }
    }
    return scale_mean(per_scale);
}

AdversarialLoss sum_terms(std::vector<torch::Tensor> terms) {
    AdversarialLoss out;
    out.value = terms.front();
    for (size_t i = 1; i < terms.size(); ++i) out.value = out.value + terms[i];
    out.terms = std::move(terms);
    return out;
}

std::vector<torch::Tensor> defined_fakes(const torch::Tensor& primary, const torch::Tensor& reconstruction,
                                         const torch::Tensor& real) {
    if (primary.sizes() != real.sizes()) throw std::invalid_argument("adversarial loss: fake/real shape mismatch");
    std::vector<torch::Tensor> fakes{primary};
    if (reconstruction.defined()) {
        if (reconstruction.sizes() != real.sizes())
            throw std::invalid_argument("adversarial loss: reconstruction/real shape mismatch");
        fakes.push_back(reconstruction);
    }
    return fakes;
}

AdversarialPair shared_pair(const Discriminator& d, const torch::Tensor& real, const std::vector<torch::Tensor>& fakes,
                            AdversarialMode mode) {
    std::vector<torch::Tensor> detached;
    for (const auto& f : fakes) detached.push_back(f.detach());
    return AdversarialPair{generator_loss(d, fakes, mode), discriminator_loss(d, real, detached, mode)};
}

}  // namespace

AdversarialLoss discriminator_loss(const Discriminator& d, const torch::Tensor& real,
                                   const std::vector<torch::Tensor>& fakes, AdversarialMode mode) {
    std::vector<torch::Tensor> terms{adversarial_term(d(real), Target::Real, mode)};
    for (const auto& f : fakes) terms.push_back(adversarial_term(d(f), Target::Fake, mode));
    return sum_terms(std::move(terms));
}

AdversarialLoss generator_loss(const Discriminator& d, const std::vector<torch::Tensor>& fakes,
                               AdversarialMode mode) {
    if (fakes.empty()) throw std::invalid_argument("generator_loss: no fakes");
    std::vector<torch::Tensor> terms;
    for (const auto& f : fakes) terms.push_back(adversarial_term(d(f), Target::Real, mode));
    return sum_terms(std::move(terms));
}

AdversarialPair shared_adv_image_loss(const Discriminator& d_image, const torch::Tensor& i_r,
                                      const torch::Tensor& i_hat_s, const torch::Tensor& i_hat_r,
                                      AdversarialMode mode) {
    return shared_pair(d_image, i_r, defined_fakes(i_hat_s, i_hat_r, i_r), mode);
}

AdversarialPair shared_adv_intrinsic_loss(const Discriminator& d_intrinsic, const torch::Tensor& m_s,
                                          const torch::Tensor& m_hat_r, const torch::Tensor& m_hat_s,
                                          AdversarialMode mode) {
    return shared_pair(d_intrinsic, m_s, defined_fakes(m_hat_r, m_hat_s, m_s), mode);
}

std::pair<double, double> joint_objective(const LossReport& r, const LossWeights& w) {
    const double total_g = w.w_cyc * (r.l_ren + r.l_dec) + w.w_norm * r.l_norm + w.w_adv * (r.l_adv_I + r.l_adv_M);
    const double total_d = r.d_loss_I + r.d_loss_M;
    return {total_g, total_d};
}

torch::Tensor generator_objective(const torch::Tensor& l_ren, const torch::Tensor& l_dec,
                                  const torch::Tensor& l_norm, const torch::Tensor& g_image,
                                  const torch::Tensor& g_intrinsic, const LossWeights& w) {
    return w.w_cyc * (l_ren + l_dec) + w.w_norm * l_norm + w.w_adv * (g_image + g_intrinsic);
}

}  // namespace iae::losses
