#include "iae/grid.hpp"

#include <stdexcept>

#include "iae/image_io.hpp"

namespace iae {

torch::Tensor tile_grid(const std::vector<std::vector<torch::Tensor>>& rows, int64_t padding, double fill) {
    if (rows.empty() || rows.front().empty()) throw std::invalid_argument("tile_grid: no tiles");
    const auto& first = rows.front().front();
    const int64_t h = first.size(1), w = first.size(2);
    size_t columns = 0;
    for (const auto& row : rows) columns = std::max(columns, row.size());
    const int64_t n_rows = static_cast<int64_t>(rows.size());
    const int64_t n_cols = static_cast<int64_t>(columns);
    auto grid = torch::full({3, n_rows * h + (n_rows + 1) * padding, n_cols * w + (n_cols + 1) * padding}, fill,
                            torch::kFloat32);
    for (int64_t r = 0; r < n_rows; ++r) {
        for (int64_t c = 0; c < static_cast<int64_t>(rows[r].size()); ++c) {
            const auto& tile = rows[r][c];
            if (tile.dim() != 3 || tile.size(0) != 3 || tile.size(1) != h || tile.size(2) != w)
                throw std::invalid_argument("tile_grid: tiles must all be 3 x H x W of the same size");
            const int64_t y = padding + r * (h + padding), x = padding + c * (w + padding);
            grid.narrow(1, y, h).narrow(2, x, w).copy_(tile.to(torch::kFloat32).clamp(0.0, 1.0));
        }
    }
    return grid;
}

void write_png_grid(const std::filesystem::path& path, const torch::Tensor& grid) {
    write_png(path, grid, BitDepth::Eight);
}

std::vector<torch::Tensor> stack_tiles(const torch::Tensor& stack, int64_t index) {
    auto s = (stack.dim() == 4 ? stack[index] : stack).detach().to(torch::kFloat32);
    auto normals = s.narrow(0, channels::kNormals, 3);
    normals = normals / torch::linalg_vector_norm(normals, 2, torch::IntArrayRef{0}, true).clamp_min(1e-6);
    return {to_unit(s.narrow(0, channels::kAlbedo, 3)), to_unit(normals),
            to_unit(s.narrow(0, channels::kReflections, 3))};
}

torch::Tensor image_tile(const torch::Tensor& image, int64_t index) {
    return to_unit((image.dim() == 4 ? image[index] : image).detach().to(torch::kFloat32));
}

torch::Tensor training_grid(networks::Models& models, const dataset::UnpairedBatch& batch, const ChannelSet& drop,
                            int64_t columns) {
    torch::NoGradGuard no_grad;
    const int64_t n = std::min({columns, batch.intrinsics.size(0), batch.real.size(0)});
    auto m_s = batch.intrinsics.narrow(0, 0, n);
    auto i_r = batch.real.narrow(0, 0, n);
    auto i_hat_s = models.renderer->forward(networks::ablate_inputs(m_s, drop));
    auto m_hat_s = models.decomposer->forward(i_hat_s);
    auto m_hat_r = models.decomposer->forward(i_r);
    auto i_hat_r = models.renderer->forward(networks::ablate_inputs(m_hat_r, drop));

    std::vector<std::vector<torch::Tensor>> rows(12);
    for (int64_t k = 0; k < n; ++k) {
        auto in = stack_tiles(m_s, k);
        auto rec = stack_tiles(m_hat_s, k);
        auto dec = stack_tiles(m_hat_r, k);
        const std::vector<torch::Tensor> column = {in[0],  in[1],  in[2],  image_tile(i_hat_s, k),
                                                   rec[0], rec[1], rec[2], image_tile(i_r, k),
                                                   dec[0], dec[1], dec[2], image_tile(i_hat_r, k)};
        for (size_t r = 0; r < column.size(); ++r) rows[r].push_back(column[r]);
    }
    return tile_grid(rows);
}

}  // namespace iae
