#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

namespace iae::losses {

/// Weights of the joint objective. Defaults: cycle emphasis 10, unit
/// normalization and adversarial weights, smooth-L1 beta 0.1 in [-1,1] units.
struct LossWeights {
    double w_cyc = 10.0;
    double w_norm = 1.0;
    double w_adv = 1.0;
    double smooth_l1_beta = 0.1;

    void validate() const;  // ConfigError on negative/non-finite weights or beta <= 0
};

enum class AdversarialMode { NonSaturating, LeastSquares };
enum class CycleDistance { L1, SmoothL1 };

std::string to_string(AdversarialMode mode);
AdversarialMode parse_adversarial_mode(const std::string& text);
std::string to_string(CycleDistance d);
CycleDistance parse_cycle_distance(const std::string& text);

// Probabilities are clamped to [eps, 1 - eps] before taking logs.
inline constexpr double kProbabilityEps = 1e-7;

/// Scalar values of every term for one training step.
struct LossReport {
    double l_ren = 0.0;
    double l_dec = 0.0;
    double l_norm = 0.0;
    double l_adv_I = 0.0;  // generator side of the image adversarial loss
    double l_adv_M = 0.0;  // generator side of the intrinsic adversarial loss
    double d_loss_I = 0.0;
    double d_loss_M = 0.0;
    double total_G = 0.0;
    double total_D = 0.0;

    bool operator==(const LossReport&) const = default;
};

/// One JSON object per line: {"step":..,"tag":..,"l_ren":..,...}.
std::string to_json_line(const LossReport& report, int64_t step, const std::string& tag);

using Mapping = std::function<torch::Tensor(const torch::Tensor&)>;
using Discriminator = std::function<std::vector<torch::Tensor>(const torch::Tensor&)>;

// ----------------------------------------------------------------------
// Distances
// ----------------------------------------------------------------------

/// Mean over elements of 0.5 x^2 / beta if |x| < beta, else |x| - 0.5 beta.
torch::Tensor smooth_l1(const torch::Tensor& pred, const torch::Tensor& target, double beta);

// Mean absolute error.
torch::Tensor l1(const torch::Tensor& pred, const torch::Tensor& target);

// ----------------------------------------------------------------------
// Cycle losses
// ----------------------------------------------------------------------

// L_ren = smooth_l1(H(R(m_s)), m_s).
torch::Tensor rendering_cycle_loss(const Mapping& renderer, const Mapping& decomposer, const torch::Tensor& m_s,
                                   double beta);

// L_dec = |R(H(i_r)) - i_r|_1 (mean); smooth-L1 when requested.
torch::Tensor decomposition_cycle_loss(const Mapping& renderer, const Mapping& decomposer, const torch::Tensor& i_r,
                                       CycleDistance distance = CycleDistance::L1, double beta = 0.1);

/// Mean of |1 - |n[p]|_2| over pixels where mask > 0. normals: B x 3 x H x W,
/// mask: B x 1 x H x W (or undefined for all pixels). Zero when the mask is empty.
torch::Tensor unit_norm_penalty(const torch::Tensor& normals, const torch::Tensor& mask = {});

/// L_norm = penalty(H_N(i_r)) + penalty(H_N(rendered_s)), each term averaged
/// over its own foreground.
torch::Tensor norm_loss(const Mapping& normal_head, const torch::Tensor& i_r, const torch::Tensor& mask_r,
                        const torch::Tensor& rendered_s, const torch::Tensor& mask_s);

// ----------------------------------------------------------------------
// Shared adversarial losses
// ----------------------------------------------------------------------

/// Adversarial loss with its per-term breakdown.
struct AdversarialLoss {
    torch::Tensor value;               // sum of terms
    std::vector<torch::Tensor> terms;  // one scalar per real/fake input, in call order
};

/// Discriminator objective under the minimization convention:
///   -[log D(real) + sum_k log(1 - D(fake_k))]   (non-saturating mode)
///   (D(real) - 1)^2 + sum_k D(fake_k)^2          (least-squares mode)
/// Each term is averaged over patches, then over scales. Callers pass detached
/// fakes when only the discriminator should receive gradients.
AdversarialLoss discriminator_loss(const Discriminator& d, const torch::Tensor& real,
                                   const std::vector<torch::Tensor>& fakes, AdversarialMode mode);

/// Generator counterpart on the fakes: -sum_k log D(fake_k), or sum_k (D(fake_k) - 1)^2.
AdversarialLoss generator_loss(const Discriminator& d, const std::vector<torch::Tensor>& fakes,
                               AdversarialMode mode);

struct AdversarialPair {
    AdversarialLoss g;
    AdversarialLoss d;
};

/// Shared image loss on D_I: real I_r, fakes R(M_s) and (when shared) R(H(I_r)).
/// Passing an undefined i_hat_r gives the unshared variant. Throws
/// std::invalid_argument on mismatched shapes.
AdversarialPair shared_adv_image_loss(const Discriminator& d_image, const torch::Tensor& i_r,
                                      const torch::Tensor& i_hat_s, const torch::Tensor& i_hat_r,
                                      AdversarialMode mode = AdversarialMode::NonSaturating);

/// Shared intrinsic loss on D_M: real M_s, fakes H(I_r) and (when shared) H(R(M_s)).
AdversarialPair shared_adv_intrinsic_loss(const Discriminator& d_intrinsic, const torch::Tensor& m_s,
                                          const torch::Tensor& m_hat_r, const torch::Tensor& m_hat_s,
                                          AdversarialMode mode = AdversarialMode::NonSaturating);

// ----------------------------------------------------------------------
// Joint objective
// ----------------------------------------------------------------------

/// total_G = w_cyc (l_ren + l_dec) + w_norm l_norm + w_adv (l_adv_I + l_adv_M);
/// total_D = d_loss_I + d_loss_M.
std::pair<double, double> joint_objective(const LossReport& report, const LossWeights& weights);

// Tensor form used for backpropagation; same formula as joint_objective.
torch::Tensor generator_objective(const torch::Tensor& l_ren, const torch::Tensor& l_dec,
                                  const torch::Tensor& l_norm, const torch::Tensor& g_image,
                                  const torch::Tensor& g_intrinsic, const LossWeights& weights);

}  // namespace iae::losses
