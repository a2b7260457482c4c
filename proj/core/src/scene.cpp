#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>

#include <Eigen/Geometry>

#include "iae/dataset.hpp"
#include "iae/error.hpp"
#include "iae/types.hpp"

namespace iae {

Resolution parse_resolution(const std::string& text) {
    const auto x = text.find_first_of("xX");
    if (x == std::string::npos) throw ConfigError("resolution must be HxW, got '" + text + "'");
    try {
        size_t used_h = 0;
        size_t used_w = 0;
        const std::string hs = text.substr(0, x);
        const std::string ws = text.substr(x + 1);
        Resolution r{std::stoll(hs, &used_h), std::stoll(ws, &used_w)};
        if (used_h != hs.size() || used_w != ws.size()) throw std::invalid_argument("trailing");
        if (r.height <= 0 || r.width <= 0) throw ConfigError("resolution must be positive, got '" + text + "'");
        return r;
    } catch (const std::logic_error&) {
        throw ConfigError("resolution must be HxW, got '" + text + "'");
    }
}

IntrinsicMaps IntrinsicMaps::zeros(Resolution res) {
    IntrinsicMaps m;
    m.albedo = torch::zeros({3, res.height, res.width});
    m.normals = torch::zeros({3, res.height, res.width});
    m.reflections = torch::zeros({3, res.height, res.width});
    m.mask = torch::zeros({res.height, res.width}, torch::kBool);
    return m;
}

void IntrinsicMaps::validate() const {
    if (!albedo.defined() || !normals.defined() || !reflections.defined() || !mask.defined())
        throw DataError("intrinsic maps: undefined channel");
    for (const auto* t : {&albedo, &normals, &reflections}) {
        if (t->dim() != 3 || t->size(0) != 3) throw DataError("intrinsic maps: channels must be 3 x H x W");
        if (t->sizes() != albedo.sizes()) throw DataError("intrinsic maps: channel shapes differ");
    }
    if (mask.dim() != 2 || mask.size(0) != albedo.size(1) || mask.size(1) != albedo.size(2))
        throw DataError("intrinsic maps: mask shape differs from channels");
    if (mask.scalar_type() != torch::kBool) throw DataError("intrinsic maps: mask must be bool");
}

torch::Tensor to_network(const IntrinsicMaps& maps) {
    auto fg = maps.mask.unsqueeze(0).to(torch::kFloat32);
    // Encoded background is exactly (-1, 0, -1).
    return torch::cat({to_signed(maps.albedo * fg), maps.normals * fg, to_signed(maps.reflections * fg)}, 0);
}

IntrinsicMaps from_network(const torch::Tensor& stack, const torch::Tensor& mask) {
    auto fg = mask.unsqueeze(0).to(stack.scalar_type());
    IntrinsicMaps m;
    m.albedo = to_unit(stack.narrow(0, channels::kAlbedo, 3)).clamp(0.0, 1.0) * fg;
    m.normals = stack.narrow(0, channels::kNormals, 3) * fg;
    m.reflections = to_unit(stack.narrow(0, channels::kReflections, 3)).clamp(0.0, 1.0) * fg;
    m.mask = mask.to(torch::kBool);
    return m;
}

bool ChannelSet::contains(IntrinsicChannel c) const {
    switch (c) {
        case IntrinsicChannel::Albedo: return albedo;
        case IntrinsicChannel::Normals: return normals;
        case IntrinsicChannel::Reflections: return reflections;
    }
    return false;
}

ChannelSet ChannelSet::parse(const std::string& text) {
    ChannelSet s;
    if (text.empty() || text == "none") return s;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item.erase(std::remove_if(item.begin(), item.end(), ::isspace), item.end());
        if (item == "A") s.albedo = true;
        else if (item == "N") s.normals = true;
        else if (item == "F") s.reflections = true;
        else throw ConfigError("unknown intrinsic channel '" + item + "' (expected A, N or F)");
    }
    return s;
}

std::string ChannelSet::str() const {
    std::string out;
    auto add = [&](bool on, const char* name) {
        if (!on) return;
        if (!out.empty()) out += ",";
        out += name;
    };
    add(albedo, "A");
    add(normals, "N");
    add(reflections, "F");
    return out.empty() ? "none" : out;
}

std::string to_string(PrimitiveShape shape) {
    switch (shape) {
        case PrimitiveShape::Sphere: return "sphere";
        case PrimitiveShape::Box: return "box";
        case PrimitiveShape::Capsule: return "capsule";
    }
    return "?";
}

PrimitiveShape parse_shape(const std::string& text) {
    if (text == "sphere") return PrimitiveShape::Sphere;
    if (text == "box") return PrimitiveShape::Box;
    if (text == "capsule") return PrimitiveShape::Capsule;
    throw ConfigError("unknown primitive shape '" + text + "'");
}

void PrimitiveScene::validate() const {
    auto fail = [&](const std::string& what) { throw DataError("scene '" + id + "': " + what); };
    auto in_unit_cube = [](const Rgb& c) { return (c.array() >= 0.0).all() && (c.array() <= 1.0).all(); };
    if (std::abs(light_direction.norm() - 1.0) > 1e-6) fail("light_direction must be unit length");
    if (!(glossiness >= 0.0 && glossiness <= 1.0)) fail("glossiness must lie in [0,1]");
    if (!(ambient >= 0.0 && ambient <= 1.0)) fail("ambient must lie in [0,1]");
    if (!in_unit_cube(body_color)) fail("body_color outside [0,1]^3");
    if (part_colors.size() > 4) fail("at most 4 part colors");
    for (const auto& c : part_colors)
        if (!in_unit_cube(c)) fail("part color outside [0,1]^3");
    if (!(camera.fov_y_deg > 0.0 && camera.fov_y_deg < 180.0)) fail("fov_y must lie in (0,180)");
    if ((camera.position - camera.look_at).norm() < 1e-9) fail("camera position equals look_at");
}

namespace dataset {
namespace {

constexpr double kSphereRadius = 0.9;
const Vec3 kBoxHalf{0.95, 0.55, 0.7};
constexpr double kCapsuleHalfLength = 0.6;
constexpr double kCapsuleRadius = 0.5;

struct Hit {
    double t = std::numeric_limits<double>::infinity();
    Vec3 normal = Vec3::Zero();  // object space
};

std::optional<double> ray_sphere(const Vec3& o, const Vec3& d, const Vec3& center, double radius) {
    const Vec3 oc = o - center;
    const double b = oc.dot(d);
    const double c = oc.squaredNorm() - radius * radius;
    const double disc = b * b - c;
    if (disc < 0.0) return std::nullopt;
    const double s = std::sqrt(disc);
    if (const double t0 = -b - s; t0 > 1e-9) return t0;
    if (const double t1 = -b + s; t1 > 1e-9) return t1;
    return std::nullopt;
}

std::optional<Hit> intersect_sphere(const Vec3& o, const Vec3& d) {
    auto t = ray_sphere(o, d, Vec3::Zero(), kSphereRadius);
    if (!t) return std::nullopt;
    return Hit{*t, (o + *t * d).normalized()};
}

std::optional<Hit> intersect_box(const Vec3& o, const Vec3& d) {
    double t_near = -std::numeric_limits<double>::infinity();
    double t_far = std::numeric_limits<double>::infinity();
    int axis = -1;
    double sign = 0.0;
    for (int a = 0; a < 3; ++a) {
        if (std::abs(d[a]) < 1e-12) {
            if (std::abs(o[a]) > kBoxHalf[a]) return std::nullopt;
            continue;
        }
        double t0 = (-kBoxHalf[a] - o[a]) / d[a];
        double t1 = (kBoxHalf[a] - o[a]) / d[a];
        double s = -1.0;
        if (t0 > t1) {
            std::swap(t0, t1);
            s = 1.0;
        }
        if (t0 > t_near) {
            t_near = t0;
            axis = a;
            sign = s;
        }
        t_far = std::min(t_far, t1);
    }
    if (t_near > t_far || t_near <= 1e-9 || axis < 0) return std::nullopt;
    Hit h;
    h.t = t_near;
    h.normal[axis] = sign;
    return h;
}

std::optional<Hit> intersect_capsule(const Vec3& o, const Vec3& d) {
    // Axis along object X, from -L to +L.
    Hit best;
    // Cylinder y^2 + z^2 = r^2.
    const double a = d.y() * d.y() + d.z() * d.z();
    if (a > 1e-12) {
        const double b = o.y() * d.y() + o.z() * d.z();
        const double c = o.y() * o.y() + o.z() * o.z() - kCapsuleRadius * kCapsuleRadius;
        const double disc = b * b - a * c;
        if (disc >= 0.0) {
            const double t = (-b - std::sqrt(disc)) / a;
            const Vec3 p = o + t * d;
            if (t > 1e-9 && std::abs(p.x()) <= kCapsuleHalfLength) {
                best.t = t;
                best.normal = Vec3(0.0, p.y(), p.z()).normalized();
            }
        }
    }
    for (double end : {-kCapsuleHalfLength, kCapsuleHalfLength}) {
        const Vec3 center(end, 0.0, 0.0);
        if (auto t = ray_sphere(o, d, center, kCapsuleRadius); t && *t < best.t) {
            const Vec3 p = o + *t * d;
            // Only the outward hemisphere of each cap belongs to the capsule surface.
            if (end < 0.0 ? p.x() <= end : p.x() >= end) {
                best.t = *t;
                best.normal = (p - center).normalized();
            }
        }
    }
    if (!std::isfinite(best.t)) return std::nullopt;
    return best;
}

// 0 = body; 1..4 select part_colors[k-1] when present.
int part_of(PrimitiveShape shape, const Vec3& p, const Vec3& n) {
    switch (shape) {
        case PrimitiveShape::Sphere:
            if (p.y() > 0.6) return 1;
            if (std::abs(p.y()) < 0.12) return 2;
            if (p.x() > 0.65) return 3;
            if (p.z() < -0.7) return 4;
            return 0;
        case PrimitiveShape::Box:
            if (n.y() > 0.5) return 1;
            if (std::abs(n.x()) > 0.5) return 2;
            if (n.z() > 0.5 && p.y() > 0.15) return 3;
            if (n.z() < -0.5 && p.y() > 0.15) return 4;
            return 0;
        case PrimitiveShape::Capsule:
            if (std::abs(p.x()) > kCapsuleHalfLength) return 1;
            if (std::abs(p.x()) < 0.1) return 2;
            if (p.y() > 0.35) return 3;
            if (p.z() < -0.35) return 4;
            return 0;
    }
    return 0;
}

Vec3 rotate_y(const Vec3& v, double radians) {
    const double c = std::cos(radians);
    const double s = std::sin(radians);
    return {c * v.x() + s * v.z(), v.y(), -s * v.x() + c * v.z()};
}

struct CameraFrame {
    Vec3 forward;
    Vec3 right;
    Vec3 up;
};

CameraFrame camera_frame(const CameraSample& cam) {
    CameraFrame f;
    f.forward = (cam.look_at - cam.position).normalized();
    Vec3 world_up(0.0, 1.0, 0.0);
    if (std::abs(f.forward.dot(world_up)) > 0.999) world_up = Vec3(0.0, 0.0, 1.0);
    f.right = f.forward.cross(world_up).normalized();
    f.up = f.right.cross(f.forward);
    return f;
}

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

uint64_t derive_seed(uint64_t run_seed, uint64_t stream, uint64_t index) {
    return splitmix64(splitmix64(splitmix64(run_seed) ^ stream) ^ index);
}

Vec3 reflect(const Vec3& view, const Vec3& normal) { return view - 2.0 * view.dot(normal) * normal; }

Rgb sky_radiance(const Vec3& direction) {
    const Vec3 d = direction.normalized();
    const Rgb horizon(0.85, 0.88, 0.92);
    const Rgb zenith(0.22, 0.42, 0.82);
    const Rgb ground(0.24, 0.21, 0.18);
    Rgb c;
    if (d.y() >= 0.0) {
        const double t = std::pow(d.y(), 0.6);
        c = (1.0 - t) * horizon + t * zenith;
    } else {
        const double t = std::min(1.0, -d.y() * 3.0);
        c = (1.0 - t) * (0.6 * horizon) + t * ground;
    }
    const Vec3 sun = Vec3(0.5, 0.7, -0.3).normalized();
    c += Rgb::Constant(0.8 * std::pow(std::max(0.0, d.dot(sun)), 64.0));
    return c.cwiseMax(0.0).cwiseMin(1.0);
}

IntrinsicMaps analytic_primitive_gbuffer(const PrimitiveScene& scene, Resolution res) {
    if (res.height <= 0 || res.width <= 0) throw DataError("scene '" + scene.id + "': resolution must be positive");
    scene.validate();

    IntrinsicMaps maps = IntrinsicMaps::zeros(res);
    auto albedo = maps.albedo.accessor<float, 3>();
    auto normals = maps.normals.accessor<float, 3>();
    auto refl = maps.reflections.accessor<float, 3>();
    auto mask = maps.mask.accessor<bool, 2>();

    const CameraFrame frame = camera_frame(scene.camera);
    const double tan_half = std::tan(scene.camera.fov_y_deg * std::numbers::pi / 360.0);
    const double aspect = static_cast<double>(res.width) / static_cast<double>(res.height);
    const double yaw = scene.yaw_deg * std::numbers::pi / 180.0;
    const Vec3 origin_obj = rotate_y(scene.camera.position, -yaw);

    int64_t covered = 0;
    for (int64_t y = 0; y < res.height; ++y) {
        const double sy = (1.0 - 2.0 * (static_cast<double>(y) + 0.5) / res.height) * tan_half;
        for (int64_t x = 0; x < res.width; ++x) {
            const double sx = (2.0 * (static_cast<double>(x) + 0.5) / res.width - 1.0) * tan_half * aspect;
            const Vec3 dir = (frame.forward + sx * frame.right + sy * frame.up).normalized();
            const Vec3 dir_obj = rotate_y(dir, -yaw);

            std::optional<Hit> hit;
            switch (scene.shape) {
                case PrimitiveShape::Sphere: hit = intersect_sphere(origin_obj, dir_obj); break;
                case PrimitiveShape::Box: hit = intersect_box(origin_obj, dir_obj); break;
                case PrimitiveShape::Capsule: hit = intersect_capsule(origin_obj, dir_obj); break;
            }
            if (!hit) continue;
            ++covered;

            const Vec3 p_obj = origin_obj + hit->t * dir_obj;
            const Vec3 n_world = rotate_y(hit->normal, yaw).normalized();
            const Vec3 n_cam(n_world.dot(frame.right), n_world.dot(frame.up), -n_world.dot(frame.forward));

            const int part = part_of(scene.shape, p_obj, hit->normal);
            const Rgb& color = (part == 0 || part > static_cast<int>(scene.part_colors.size()))
                                   ? scene.body_color
                                   : scene.part_colors[static_cast<size_t>(part - 1)];
            const Rgb env = scene.glossiness * sky_radiance(reflect(dir, n_world));

            mask[y][x] = true;
            for (int c = 0; c < 3; ++c) {
                albedo[c][y][x] = static_cast<float>(color[c]);
                normals[c][y][x] = static_cast<float>(n_cam[c]);
                refl[c][y][x] = static_cast<float>(env[c]);
            }
        }
    }
    if (covered == 0) throw DataError("scene '" + scene.id + "': object fully out of frame");
    return maps;
}

Rgb background_color(uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Rgb c;
    for (int i = 0; i < 3; ++i) c[i] = u(rng);
    return c;
}

ImageTensor phong_composite(const IntrinsicMaps& maps, const Vec3& light_direction, double ambient,
                            const Rgb& background) {
    maps.validate();
    if (std::abs(light_direction.norm() - 1.0) > 1e-6) throw DataError("phong_composite: light must be unit length");
    if (!(ambient >= 0.0 && ambient <= 1.0)) throw DataError("phong_composite: ambient must lie in [0,1]");

    auto light = torch::tensor({light_direction.x(), light_direction.y(), light_direction.z()}, torch::kFloat64)
                     .view({3, 1, 1});
    auto n = maps.normals.to(torch::kFloat64);
    auto lambert = (n * light).sum(0, true).clamp_min(0.0);
    auto shaded = maps.albedo.to(torch::kFloat64) * (ambient + (1.0 - ambient) * lambert) +
                  maps.reflections.to(torch::kFloat64);
    shaded = shaded.clamp(0.0, 1.0);

    auto bg = torch::tensor({background.x(), background.y(), background.z()}, torch::kFloat64)
                  .view({3, 1, 1})
                  .expand_as(shaded);
    auto fg = maps.mask.unsqueeze(0).expand_as(shaded);
    auto unit = torch::where(fg, shaded, bg);
    return ImageTensor{to_signed(unit).to(torch::kFloat32)};
}

ImageTensor phong_composite(const IntrinsicMaps& maps, const Vec3& light_direction, double ambient,
                            uint64_t background_seed) {
    return phong_composite(maps, light_direction, ambient, background_color(background_seed));
}

PrimitiveScene sample_scene(std::mt19937_64& rng, std::string id) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> g(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
    auto color = [&] { return Rgb(uniform(0.05, 0.95), uniform(0.05, 0.95), uniform(0.05, 0.95)); };

    PrimitiveScene s;
    s.id = std::move(id);
    s.shape = static_cast<PrimitiveShape>(std::uniform_int_distribution<int>(0, 2)(rng));
    s.body_color = color();
    const int parts = std::uniform_int_distribution<int>(0, 4)(rng);
    for (int i = 0; i < parts; ++i) s.part_colors.push_back(color());
    s.glossiness = u(rng);
    s.ambient = uniform(0.15, 0.3);
    s.yaw_deg = uniform(0.0, 360.0);

    // Key light from the upper left of the camera, jittered.
    Vec3 light = Vec3(-0.4, 0.6, 0.7).normalized() + 0.15 * Vec3(g(rng), g(rng), g(rng));
    light.z() = std::max(light.z(), 0.2);
    s.light_direction = light.normalized();

    const double azimuth = uniform(0.0, 2.0 * std::numbers::pi);
    const double radius = uniform(3.6, 5.2);
    const double height = uniform(0.3, 2.5);
    s.camera.position = Vec3(radius * std::cos(azimuth), height, radius * std::sin(azimuth));
    s.camera.look_at = Vec3(0.0, uniform(-0.1, 0.1), 0.0);
    s.camera.fov_y_deg = uniform(34.0, 42.0);
    return s;
}

}  // namespace dataset
}  // namespace iae
