#include "iae/networks.hpp"

#include <numeric>
#include <stdexcept>

namespace iae::networks {

namespace nn = torch::nn;

namespace {

nn::Conv2d conv(int64_t in, int64_t out, int64_t kernel, int64_t stride = 1, int64_t padding = 0) {
    return nn::Conv2d(nn::Conv2dOptions(in, out, kernel).stride(stride).padding(padding));
}

nn::InstanceNorm2d instance_norm(int64_t channels) {
    return nn::InstanceNorm2d(nn::InstanceNorm2dOptions(channels).affine(false).track_running_stats(false));
}

// 3x3 stride-2 downsampling (padding 1 halves even sizes exactly).
void append_down(nn::Sequential& seq, int64_t in, int64_t out) {
    seq->push_back(conv(in, out, 3, 2, 1));
    seq->push_back(instance_norm(out));
    seq->push_back(nn::ReLU(true));
}

void append_up(nn::Sequential& seq, int64_t in, int64_t out) {
    seq->push_back(nn::ConvTranspose2d(nn::ConvTranspose2dOptions(in, out, 3).stride(2).padding(1).output_padding(1)));
    seq->push_back(instance_norm(out));
    seq->push_back(nn::ReLU(true));
}

void append_stem(nn::Sequential& seq, int64_t in, int64_t out) {
    seq->push_back(nn::ReflectionPad2d(3));
    seq->push_back(conv(in, out, 7));
    seq->push_back(instance_norm(out));
    seq->push_back(nn::ReLU(true));
}

void append_head(nn::Sequential& seq, int64_t in, int64_t out) {
    seq->push_back(nn::ReflectionPad2d(3));
    seq->push_back(conv(in, out, 7));
}

torch::Tensor batched(const torch::Tensor& x, int64_t channels_dim_size, bool& was_single) {
    was_single = x.dim() == 3;
    auto b = was_single ? x.unsqueeze(0) : x;
    if (b.dim() != 4) throw std::invalid_argument("expected a C x H x W or B x C x H x W tensor");
    if (channels_dim_size > 0 && b.size(1) != channels_dim_size)
        throw std::invalid_argument("expected " + std::to_string(channels_dim_size) + " channels, got " +
                                    std::to_string(b.size(1)));
    return b;
}

}  // namespace

int64_t NetworkOptions::stride() const {
    return std::lcm(std::lcm(renderer.stride(), decomposer.stride()), discriminator.stride());
}

ResnetBlockImpl::ResnetBlockImpl(int64_t channels) {
    body = nn::Sequential(nn::ReflectionPad2d(1), conv(channels, channels, 3), instance_norm(channels),
                          nn::ReLU(true), nn::ReflectionPad2d(1), conv(channels, channels, 3),
                          instance_norm(channels));
    register_module("body", body);
}

torch::Tensor ResnetBlockImpl::forward(const torch::Tensor& x) { return x + body->forward(x); }

// ----------------------------------------------------------------------
// RendererNet
// ----------------------------------------------------------------------

RendererNetImpl::RendererNetImpl(const RendererOptions& opts) : options(opts) {
    const int64_t local = options.width;
    const int64_t global = 2 * options.width;

    downsample_input = nn::AvgPool2d(nn::AvgPool2dOptions(3).stride(2).padding(1).count_include_pad(false));

    // Global generator without its output layer: stem, downsampling, residual
    // blocks, upsampling back to half resolution with `global` channels.
    global_front = nn::Sequential();
    append_stem(global_front, options.in_channels, global);
    int64_t ch = global;
    for (int64_t i = 0; i < options.global_downsample; ++i, ch *= 2) append_down(global_front, ch, ch * 2);
    for (int64_t i = 0; i < options.global_blocks; ++i) global_front->push_back(ResnetBlock(ch));
    for (int64_t i = 0; i < options.global_downsample; ++i, ch /= 2) append_up(global_front, ch, ch / 2);

    // Local enhancer: full-resolution stem downsampled once to meet the global features.
    local_front = nn::Sequential();
    append_stem(local_front, options.in_channels, local);
    append_down(local_front, local, global);

    local_back = nn::Sequential();
    for (int64_t i = 0; i < options.local_blocks; ++i) local_back->push_back(ResnetBlock(global));
    append_up(local_back, global, local);
    append_head(local_back, local, options.out_channels);
    local_back->push_back(nn::Tanh());

    register_module("downsample_input", downsample_input);
    register_module("global_front", global_front);
    register_module("local_front", local_front);
    register_module("local_back", local_back);
}

torch::Tensor RendererNetImpl::forward(const torch::Tensor& x) {
    auto coarse = global_front->forward(downsample_input->forward(x));
    return local_back->forward(local_front->forward(x) + coarse);
}

// ----------------------------------------------------------------------
// DecomposerNet
// ----------------------------------------------------------------------

DecomposerHeadImpl::DecomposerHeadImpl(const DecomposerOptions& opts, bool bounded_output)
    : options(opts), bounded(bounded_output) {
    model = nn::Sequential();
    append_stem(model, channels::kImage, options.width);
    int64_t ch = options.width;
    for (int64_t i = 0; i < options.downsample; ++i, ch *= 2) append_down(model, ch, ch * 2);
    for (int64_t i = 0; i < options.blocks; ++i) model->push_back(ResnetBlock(ch));
    for (int64_t i = 0; i < options.downsample; ++i, ch /= 2) append_up(model, ch, ch / 2);
    append_head(model, ch, 3);
    if (bounded) model->push_back(nn::Tanh());
    register_module("model", model);
}

torch::Tensor DecomposerHeadImpl::forward(const torch::Tensor& x) { return model->forward(x); }

DecomposerNetImpl::DecomposerNetImpl(const DecomposerOptions& opts) : options(opts) {
    albedo = register_module("albedo", DecomposerHead(options, true));
    normals = register_module("normals", DecomposerHead(options, false));
    reflections = register_module("reflections", DecomposerHead(options, true));
}

torch::Tensor DecomposerNetImpl::forward(const torch::Tensor& x) {
    return torch::cat({albedo->forward(x), normals->forward(x), reflections->forward(x)}, 1);
}

// ----------------------------------------------------------------------
// Discriminators
// ----------------------------------------------------------------------

PatchDiscriminatorImpl::PatchDiscriminatorImpl(const DiscriminatorOptions& options) {
    model = nn::Sequential();
    int64_t ch = options.in_channels;
    int64_t next = options.width;
    for (int64_t i = 0; i < options.layers; ++i) {
        model->push_back(conv(ch, next, 4, 2, 1));
        if (i > 0) model->push_back(instance_norm(next));
        model->push_back(nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2).inplace(true)));
        ch = next;
        next = std::min<int64_t>(next * 2, options.width * 8);
    }
    model->push_back(conv(ch, next, 3, 1, 1));
    model->push_back(instance_norm(next));
    model->push_back(nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2).inplace(true)));
    model->push_back(conv(next, 1, 3, 1, 1));
    register_module("model", model);
}

torch::Tensor PatchDiscriminatorImpl::forward(const torch::Tensor& x) { return model->forward(x); }

MultiscaleDiscriminatorImpl::MultiscaleDiscriminatorImpl(const DiscriminatorOptions& opts) : options(opts) {
    for (int64_t s = 0; s < options.scales; ++s)
        scales.push_back(register_module("scale" + std::to_string(s), PatchDiscriminator(options)));
    pool = nn::AvgPool2d(nn::AvgPool2dOptions(3).stride(2).padding(1).count_include_pad(false));
    register_module("pool", pool);
}

std::vector<torch::Tensor> MultiscaleDiscriminatorImpl::forward(const torch::Tensor& x) {
    if (x.dim() != 4 || x.size(1) != options.in_channels)
        throw std::invalid_argument("discriminator expects " + std::to_string(options.in_channels) +
                                    " input channels, got " + (x.dim() == 4 ? std::to_string(x.size(1)) : "rank " + std::to_string(x.dim())));
    std::vector<torch::Tensor> out;
    auto input = x;
    for (size_t s = 0; s < scales.size(); ++s) {
        if (s > 0) input = pool->forward(input);
        out.push_back(scales[s]->forward(input));
    }
    return out;
}

// ----------------------------------------------------------------------
// Operations
// ----------------------------------------------------------------------

torch::Tensor render(RendererNet& net, const torch::Tensor& stack) {
    bool single = false;
    auto out = net->forward(batched(stack, net->options.in_channels, single));
    return single ? out.squeeze(0) : out;
}

torch::Tensor decompose(DecomposerNet& net, const torch::Tensor& image) {
    bool single = false;
    auto out = net->forward(batched(image, channels::kImage, single));
    return single ? out.squeeze(0) : out;
}

std::vector<torch::Tensor> discriminate(MultiscaleDiscriminator& net, const torch::Tensor& x) {
    bool single = false;
    auto scores = net->forward(batched(x, 0, single));
    if (single)
        for (auto& s : scores) s = s.squeeze(0);
    return scores;
}

torch::Tensor ablate_inputs(const torch::Tensor& stack, const ChannelSet& drop) {
    if (drop.empty()) return stack;
    const int64_t channel_dim = stack.dim() == 4 ? 1 : 0;
    if (stack.size(channel_dim) != channels::kStack)
        throw std::invalid_argument("ablate_inputs expects a 9-channel stack");
    auto out = stack.clone();
    // Encoded zero of each group: -1 for albedo/reflections, 0 for normals.
    if (drop.albedo) out.narrow(channel_dim, channels::kAlbedo, 3).fill_(-1.0);
    if (drop.normals) out.narrow(channel_dim, channels::kNormals, 3).fill_(0.0);
    if (drop.reflections) out.narrow(channel_dim, channels::kReflections, 3).fill_(-1.0);
    return out;
}

IntrinsicMaps ablate_inputs(const IntrinsicMaps& maps, const ChannelSet& drop) {
    IntrinsicMaps out = maps;
    if (drop.albedo) out.albedo = torch::zeros_like(maps.albedo);
    if (drop.normals) out.normals = torch::zeros_like(maps.normals);
    if (drop.reflections) out.reflections = torch::zeros_like(maps.reflections);
    return out;
}

int64_t parameter_count(const torch::nn::Module& module) {
    int64_t n = 0;
    for (const auto& p : module.parameters()) n += p.numel();
    return n;
}

std::vector<torch::Tensor> Models::generator_parameters() const {
    auto params = renderer->parameters();
    for (auto& p : decomposer->parameters()) params.push_back(p);
    return params;
}

std::vector<torch::Tensor> Models::discriminator_parameters() const {
    auto params = d_image->parameters();
    for (auto& p : d_intrinsic->parameters()) params.push_back(p);
    return params;
}

void Models::train(bool on) {
    renderer->train(on);
    decomposer->train(on);
    d_image->train(on);
    d_intrinsic->train(on);
}

Models make_models(const NetworkOptions& options, uint64_t seed) {
    torch::manual_seed(seed);
    Models m;
    m.renderer = RendererNet(options.renderer);
    m.decomposer = DecomposerNet(options.decomposer);
    auto d_opts = options.discriminator;
    d_opts.in_channels = channels::kImage;
    m.d_image = MultiscaleDiscriminator(d_opts);
    d_opts.in_channels = channels::kStack;
    m.d_intrinsic = MultiscaleDiscriminator(d_opts);
    return m;
}

}  // namespace iae::networks
