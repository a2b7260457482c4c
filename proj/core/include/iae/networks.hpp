#pragma once

#include <cstdint>
#include <vector>

#include <torch/torch.h>

#include "iae/types.hpp"

namespace iae::networks {

// ----------------------------------------------------------------------
// Options
// ----------------------------------------------------------------------

/// Coarse-to-fine generator: one global generator at half resolution and one
/// local enhancer at full resolution. The global branch runs at 2 x width.
struct RendererOptions {
    int64_t width = 32;
    int64_t global_downsample = 2;
    int64_t global_blocks = 3;
    int64_t local_blocks = 2;
    int64_t in_channels = channels::kStack;
    int64_t out_channels = channels::kImage;

    // Spatial dims must be divisible by this.
    int64_t stride() const { return int64_t{2} << global_downsample; }
};

/// One decomposer head: ResNet with `blocks` residual blocks between
/// `downsample` strided convolutions and matching transposed convolutions.
struct DecomposerOptions {
    int64_t width = 32;
    int64_t downsample = 2;
    int64_t blocks = 5;

    int64_t stride() const { return int64_t{1} << downsample; }
};

/// Multi-scale PatchGAN. Each scale has `layers` stride-2 convolutions
/// (kernel 4, padding 1) followed by two stride-1 3x3 convolutions, so a scale
/// fed H x W emits (H / 2^layers) x (W / 2^layers) logits. Scale k sees the
/// input average-pooled k times.
struct DiscriminatorOptions {
    int64_t width = 32;
    int64_t layers = 3;
    int64_t scales = 2;
    int64_t in_channels = channels::kImage;

    int64_t scale_stride(int64_t scale) const { return int64_t{1} << (layers + scale); }
    int64_t stride() const { return scale_stride(scales - 1); }
};

struct NetworkOptions {
    RendererOptions renderer;
    DecomposerOptions decomposer;
    DiscriminatorOptions discriminator;  // in_channels is set per discriminator

    /// Least common multiple of all network strides; resolutions must be divisible by it.
    int64_t stride() const;
};

// ----------------------------------------------------------------------
// Building blocks
// ----------------------------------------------------------------------

// conv-IN-ReLU-conv-IN with reflection padding, identity skip.
struct ResnetBlockImpl : torch::nn::Module {
    explicit ResnetBlockImpl(int64_t channels);
    torch::Tensor forward(const torch::Tensor& x);

    torch::nn::Sequential body{nullptr};
};
TORCH_MODULE(ResnetBlock);

// ----------------------------------------------------------------------
// R: intrinsics -> image
// ----------------------------------------------------------------------

struct RendererNetImpl : torch::nn::Module {
    explicit RendererNetImpl(const RendererOptions& options = {});

    // x: B x 9 x H x W in network encoding. Returns B x 3 x H x W in [-1,1].
    torch::Tensor forward(const torch::Tensor& x);

    RendererOptions options;
    torch::nn::AvgPool2d downsample_input{nullptr};
    torch::nn::Sequential global_front{nullptr};  // features at half resolution, 2*width channels
    torch::nn::Sequential local_front{nullptr};
    torch::nn::Sequential local_back{nullptr};
};
TORCH_MODULE(RendererNet);

// ----------------------------------------------------------------------
// H: image -> intrinsics
// ----------------------------------------------------------------------

struct DecomposerHeadImpl : torch::nn::Module {
    DecomposerHeadImpl(const DecomposerOptions& options, bool bounded);
    torch::Tensor forward(const torch::Tensor& x);

    DecomposerOptions options;
    bool bounded;  // tanh output when true
    torch::nn::Sequential model{nullptr};
};
TORCH_MODULE(DecomposerHead);

/// Three independent heads H_A, H_N, H_F (no shared parameters). H_N is
/// unbounded; unit length is encouraged only through the normalization loss.
struct DecomposerNetImpl : torch::nn::Module {
    explicit DecomposerNetImpl(const DecomposerOptions& options = {});

    // x: B x 3 x H x W. Returns B x 9 x H x W ordered [A, N, F].
    torch::Tensor forward(const torch::Tensor& x);

    DecomposerOptions options;
    DecomposerHead albedo{nullptr};
    DecomposerHead normals{nullptr};
    DecomposerHead reflections{nullptr};
};
TORCH_MODULE(DecomposerNet);

// ----------------------------------------------------------------------
// D_I / D_M
// ----------------------------------------------------------------------

struct PatchDiscriminatorImpl : torch::nn::Module {
    explicit PatchDiscriminatorImpl(const DiscriminatorOptions& options);
    torch::Tensor forward(const torch::Tensor& x);

    torch::nn::Sequential model{nullptr};
};
TORCH_MODULE(PatchDiscriminator);

struct MultiscaleDiscriminatorImpl : torch::nn::Module {
    explicit MultiscaleDiscriminatorImpl(const DiscriminatorOptions& options);

    /// Raw logits per scale, full resolution first. Throws std::invalid_argument
    /// when the channel count does not match options.in_channels.
    std::vector<torch::Tensor> forward(const torch::Tensor& x);

    DiscriminatorOptions options;
    std::vector<PatchDiscriminator> scales;
    torch::nn::AvgPool2d pool{nullptr};
};
TORCH_MODULE(MultiscaleDiscriminator);

// ----------------------------------------------------------------------
// Operations
// ----------------------------------------------------------------------

// Batched or single (C x H x W) input; single inputs are returned unbatched.
torch::Tensor render(RendererNet& net, const torch::Tensor& stack);
torch::Tensor decompose(DecomposerNet& net, const torch::Tensor& image);
std::vector<torch::Tensor> discriminate(MultiscaleDiscriminator& net, const torch::Tensor& x);

/// Replaces the dropped channel groups with zero maps; the channel count is
/// unchanged. On a network stack "zero" is the encoded zero of each group
/// (-1 for albedo/reflections, 0 for normals); both overloads agree under
/// to_network.
torch::Tensor ablate_inputs(const torch::Tensor& stack, const ChannelSet& drop);
IntrinsicMaps ablate_inputs(const IntrinsicMaps& maps, const ChannelSet& drop);

int64_t parameter_count(const torch::nn::Module& module);

// ----------------------------------------------------------------------
// The four trainable networks of one model
// ----------------------------------------------------------------------

struct Models {
    RendererNet renderer{nullptr};
    DecomposerNet decomposer{nullptr};
    MultiscaleDiscriminator d_image{nullptr};
    MultiscaleDiscriminator d_intrinsic{nullptr};

    std::vector<torch::Tensor> generator_parameters() const;
    std::vector<torch::Tensor> discriminator_parameters() const;
    void train(bool on = true);
};

/// Builds all networks with weights drawn from the global torch RNG after
/// seeding it with `seed`, so equal seeds give bit-identical initializations.
Models make_models(const NetworkOptions& options, uint64_t seed);

}  // namespace iae::networks
