#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <torch/torch.h>

namespace iae {

using Vec3 = Eigen::Vector3d;
using Rgb = Eigen::Vector3d;

struct Resolution {
    int64_t height = 64;
    int64_t width = 64;

    bool operator==(const Resolution&) const = default;
    std::string str() const { return std::to_string(height) + "x" + std::to_string(width); }
};

// Parses "HxW" (e.g. "64x64"); throws ConfigError on malformed or non-positive input.
Resolution parse_resolution(const std::string& text);

// Channel layout of the 9-channel network stack.
namespace channels {
inline constexpr int64_t kAlbedo = 0;
inline constexpr int64_t kNormals = 3;
inline constexpr int64_t kReflections = 6;
inline constexpr int64_t kStack = 9;
inline constexpr int64_t kImage = 3;
}  // namespace channels

/// Per-pixel intrinsic decomposition M = {A, N, F} of one view, in file-domain
/// ranges: albedo and reflections in [0,1], normals as camera-space vectors.
/// Every tensor is float32 CHW (mask is bool HW). Background pixels are zero
/// in all three maps; the mask is authoritative.
struct IntrinsicMaps {
    torch::Tensor albedo;       // 3 x H x W
    torch::Tensor normals;      // 3 x H x W
    torch::Tensor reflections;  // 3 x H x W
    torch::Tensor mask;         // H x W, bool

    int64_t height() const { return albedo.size(1); }
    int64_t width() const { return albedo.size(2); }

    static IntrinsicMaps zeros(Resolution res);

    // Throws DataError when shapes disagree or dtypes are wrong.
    void validate() const;
};

/// RGB image in network encoding: float32 3 x H x W, values in [-1, 1].
struct ImageTensor {
    torch::Tensor pixels;

    int64_t height() const { return pixels.size(1); }
    int64_t width() const { return pixels.size(2); }
};

// [0,1] file range <-> [-1,1] network range.
inline torch::Tensor to_signed(const torch::Tensor& unit) { return unit * 2.0 - 1.0; }
inline torch::Tensor to_unit(const torch::Tensor& signed_values) { return (signed_values + 1.0) * 0.5; }

/// Packs maps into the 9-channel network stack [A, N, F]: albedo and
/// reflections mapped to [-1,1], normals kept as-is. Background stays at the
/// encoded zero of each channel (-1 for A/F, 0 for N).
torch::Tensor to_network(const IntrinsicMaps& maps);

/// Inverse of to_network; the mask is supplied separately.
IntrinsicMaps from_network(const torch::Tensor& stack, const torch::Tensor& mask);

enum class IntrinsicChannel { Albedo, Normals, Reflections };

/// Set of intrinsic channels, used for input ablations ("w/o A" etc.).
struct ChannelSet {
    bool albedo = false;
    bool normals = false;
    bool reflections = false;

    bool empty() const { return !albedo && !normals && !reflections; }
    bool contains(IntrinsicChannel c) const;
    bool operator==(const ChannelSet&) const = default;

    // "A,N,F" style; "" or "none" for the empty set.
    static ChannelSet parse(const std::string& text);
    std::string str() const;
};

struct CameraSample {
    Vec3 position{0.0, 1.0, -4.0};
    Vec3 look_at{0.0, 0.0, 0.0};
    double fov_y_deg = 40.0;
};

enum class PrimitiveShape { Sphere, Box, Capsule };

std::string to_string(PrimitiveShape shape);
PrimitiveShape parse_shape(const std::string& text);

/// Analytic scene: one primitive at the world origin, body + up to four part colors.
struct PrimitiveScene {
    std::string id;
    PrimitiveShape shape = PrimitiveShape::Sphere;
    Rgb body_color{0.8, 0.1, 0.1};
    std::vector<Rgb> part_colors;
    double glossiness = 0.5;
    Vec3 light_direction{0.0, 0.0, 1.0};  // camera space, unit length
    double yaw_deg = 0.0;                 // object rotation about world +Y
    double ambient = 0.2;
    CameraSample camera;

    // Throws DataError naming the scene id on invariant violations.
    void validate() const;
};

}  // namespace iae
