#include "iae/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

#include "iae/error.hpp"

namespace iae {
namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) throw DataError("cannot open file: " + path.string());
    return f;
}

[[noreturn]] void png_error_fn(png_structp png, png_const_charp msg) {
    auto* what = static_cast<std::string*>(png_get_error_ptr(png));
    if (what) *what = msg;
    png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

}  // namespace

void write_png(const std::filesystem::path& path, const torch::Tensor& chw, BitDepth depth) {
    if (chw.dim() != 3 || (chw.size(0) != 1 && chw.size(0) != 3))
        throw DataError("write_png expects a 1- or 3-channel CHW tensor: " + path.string());
    const int channels = static_cast<int>(chw.size(0));
    const int height = static_cast<int>(chw.size(1));
    const int width = static_cast<int>(chw.size(2));
    if (depth == BitDepth::One && channels != 1)
        throw DataError("1-bit PNG must be single channel: " + path.string());

    // HWC, clamped, quantized.
    auto hwc = chw.detach().to(torch::kFloat64).clamp(0.0, 1.0).permute({1, 2, 0}).contiguous();
    const double* src = hwc.data_ptr<double>();
    const size_t n = static_cast<size_t>(height) * width * channels;

    std::vector<png_byte> rows;
    size_t row_bytes = 0;
    if (depth == BitDepth::Sixteen) {
        row_bytes = static_cast<size_t>(width) * channels * 2;
        rows.resize(row_bytes * height);
        for (size_t i = 0; i < n; ++i) {
            auto code = static_cast<uint16_t>(std::lround(src[i] * 65535.0));
            rows[2 * i] = static_cast<png_byte>(code >> 8);
            rows[2 * i + 1] = static_cast<png_byte>(code & 0xff);
        }
    } else if (depth == BitDepth::Eight) {
        row_bytes = static_cast<size_t>(width) * channels;
        rows.resize(row_bytes * height);
        for (size_t i = 0; i < n; ++i) rows[i] = static_cast<png_byte>(std::lround(src[i] * 255.0));
    } else {
        row_bytes = (static_cast<size_t>(width) + 7) / 8;
        rows.assign(row_bytes * height, 0);
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x)
                if (src[static_cast<size_t>(y) * width + x] >= 0.5)
                    rows[y * row_bytes + x / 8] |= static_cast<png_byte>(0x80 >> (x % 8));
    }

    auto file = open_file(path, "wb");
    std::string err;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw DataError("PNG encode failed for " + path.string() + ": " + err);
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, width, height, static_cast<int>(depth),
                 channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    // Fixed compression settings keep output byte-identical across runs.
    png_set_compression_level(png, 6);
    png_write_info(png, info);
    for (int y = 0; y < height; ++y) png_write_row(png, rows.data() + y * row_bytes);
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

PngInfo probe_png(const std::filesystem::path& path) {
    auto file = open_file(path, "rb");
    png_byte sig[8] = {};
    if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        throw DataError("not a PNG file: " + path.string());
    std::string err;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("PNG decode failed for " + path.string() + ": " + err);
    }
    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    PngInfo out;
    out.width = static_cast<int>(png_get_image_width(png, info));
    out.height = static_cast<int>(png_get_image_height(png, info));
    out.bit_depth = png_get_bit_depth(png, info);
    out.channels = png_get_channels(png, info);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

torch::Tensor read_png(const std::filesystem::path& path, int channels, torch::ScalarType dtype) {
    if (channels != 1 && channels != 3) throw DataError("read_png: channels must be 1 or 3");
    if (!std::filesystem::exists(path)) throw DataError("missing file: " + path.string());
    auto file = open_file(path, "rb");
    png_byte sig[8] = {};
    if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        throw DataError("not a PNG file: " + path.string());

    std::string err;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("PNG decode failed for " + path.string() + ": " + err);
    }
    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    const int width = static_cast<int>(png_get_image_width(png, info));
    const int height = static_cast<int>(png_get_image_height(png, info));
    const int out_depth = png_get_bit_depth(png, info);
    const int src_channels = png_get_channels(png, info);
    const size_t row_bytes = png_get_rowbytes(png, info);

    std::vector<png_byte> buffer(row_bytes * height);
    std::vector<png_bytep> row_ptrs(height);
    for (int y = 0; y < height; ++y) row_ptrs[y] = buffer.data() + y * row_bytes;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("PNG decode failed for " + path.string() + ": " + err);
    }
    png_read_image(png, row_ptrs.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    // 1-bit gray was expanded to 8-bit with codes {0, 255}.
    const double max_code = out_depth == 16 ? 65535.0 : 255.0;
    auto sample = [&](int y, int x, int c) -> double {
        const png_byte* row = buffer.data() + y * row_bytes;
        if (out_depth == 16) {
            size_t i = (static_cast<size_t>(x) * src_channels + c) * 2;
            return static_cast<double>((row[i] << 8) | row[i + 1]) / max_code;
        }
        return static_cast<double>(row[static_cast<size_t>(x) * src_channels + c]) / max_code;
    };

    auto out = torch::empty({channels, height, width}, torch::kFloat64);
    auto acc = out.accessor<double, 3>();
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            if (src_channels >= 3) {
                if (channels == 3) {
                    for (int c = 0; c < 3; ++c) acc[c][y][x] = sample(y, x, c);
                } else {
                    acc[0][y][x] = 0.299 * sample(y, x, 0) + 0.587 * sample(y, x, 1) + 0.114 * sample(y, x, 2);
                }
            } else {
                const double v = sample(y, x, 0);
                for (int c = 0; c < channels; ++c) acc[c][y][x] = v;
            }
        }
    }
    return out.to(dtype);
}

torch::Tensor letterbox_resize(const torch::Tensor& chw, int64_t height, int64_t width, double fill) {
    const int64_t src_h = chw.size(1);
    const int64_t src_w = chw.size(2);
    if (src_h == height && src_w == width) return chw;
    const double scale = std::min(static_cast<double>(height) / src_h, static_cast<double>(width) / src_w);
    const auto new_h = std::max<int64_t>(1, std::lround(src_h * scale));
    const auto new_w = std::max<int64_t>(1, std::lround(src_w * scale));
    auto resized = torch::nn::functional::interpolate(
                       chw.unsqueeze(0).to(torch::kFloat32),
                       torch::nn::functional::InterpolateFuncOptions()
                           .size(std::vector<int64_t>{new_h, new_w})
                           .mode(torch::kBilinear)
                           .align_corners(false))
                       .squeeze(0);
    auto out = torch::full({chw.size(0), height, width}, fill, torch::kFloat32);
    const int64_t top = (height - new_h) / 2;
    const int64_t left = (width - new_w) / 2;
    out.narrow(1, top, new_h).narrow(2, left, new_w).copy_(resized);
    return out;
}

}  // namespace iae
