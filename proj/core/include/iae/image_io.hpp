#pragma once

#include <filesystem>

#include <torch/torch.h>

namespace iae {

enum class BitDepth { One = 1, Eight = 8, Sixteen = 16 };

/// Writes a C x H x W float tensor with values in [0,1] as PNG (C = 1 or 3).
/// Values are clamped and rounded to the nearest code of the bit depth.
/// BitDepth::One requires C = 1 and thresholds at 0.5.
void write_png(const std::filesystem::path& path, const torch::Tensor& chw, BitDepth depth);

/// Reads a PNG of any depth/color type into a float C x H x W tensor in [0,1],
/// with C = `channels` (1 or 3). Gray is replicated, alpha dropped, RGB
/// converted to luma for C = 1. Throws DataError naming the file.
torch::Tensor read_png(const std::filesystem::path& path, int channels,
                       torch::ScalarType dtype = torch::kFloat32);

struct PngInfo {
    int width = 0;
    int height = 0;
    int bit_depth = 0;
    int channels = 0;
};

// Header-only probe; throws DataError when the file is not a PNG.
PngInfo probe_png(const std::filesystem::path& path);

/// Bilinear resize preserving aspect ratio, padded with `fill` to exactly
/// height x width (letterbox). Input/output are C x H x W float.
torch::Tensor letterbox_resize(const torch::Tensor& chw, int64_t height, int64_t width, double fill = 0.0);

}  // namespace iae
