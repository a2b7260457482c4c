#pragma once

#include <filesystem>
#include <vector>

#include <torch/torch.h>

#include "iae/dataset.hpp"
#include "iae/networks.hpp"

namespace iae {

/// Tiles equally sized 3 x H x W tiles in [0,1] into one image. rows[r][c] is
/// placed at row r, column c; short rows are padded with the fill value.
torch::Tensor tile_grid(const std::vector<std::vector<torch::Tensor>>& rows, int64_t padding = 2, double fill = 1.0);

void write_png_grid(const std::filesystem::path& path, const torch::Tensor& grid);

/// Display tiles for a network stack (B x 9 x H x W or 9 x H x W): albedo and
/// reflections mapped to [0,1], normals renormalized and encoded as (n+1)/2.
std::vector<torch::Tensor> stack_tiles(const torch::Tensor& stack, int64_t index = 0);
torch::Tensor image_tile(const torch::Tensor& image, int64_t index = 0);

/// One column per sample (at most `columns`), inputs above outputs:
/// A, N, F | R(M_s) | H(R(M_s)) A, N, F | I_r | H(I_r) A, N, F | R(H(I_r)).
torch::Tensor training_grid(networks::Models& models, const dataset::UnpairedBatch& batch, const ChannelSet& drop,
                            int64_t columns = 4);

}  // namespace iae
