#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>

#include "iae/error.hpp"
#include "iae/trainer.hpp"

namespace iae::trainer {
namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::logic_error&) {
        throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
    }
}

int64_t parse_int(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        long long i = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return i;
    } catch (const std::logic_error&) {
        throw ConfigError("key '" + key + "': expected an integer, got '" + v + "'");
    }
}

uint64_t parse_uint(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
        unsigned long long i = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return i;
    } catch (const std::logic_error&) {
        throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("key '" + key + "': expected true/false, got '" + v + "'");
}

struct Field {
    const char* key;
    std::function<std::string(const TrainConfig&)> get;
    std::function<void(TrainConfig&, const std::string&)> set;
};

#define IAE_DOUBLE(name, member)                                                          \
    Field{name, [](const TrainConfig& c) { return fmt_double(c.member); },               \
          [](TrainConfig& c, const std::string& v) { c.member = parse_double(name, v); }}
#define IAE_INT(name, member)                                                             \
    Field{name, [](const TrainConfig& c) { return std::to_string(c.member); },           \
          [](TrainConfig& c, const std::string& v) { c.member = parse_int(name, v); }}
#define IAE_BOOL(name, member)                                                            \
    Field{name, [](const TrainConfig& c) { return std::string(c.member ? "true" : "false"); }, \
          [](TrainConfig& c, const std::string& v) { c.member = parse_bool(name, v); }}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        IAE_DOUBLE("learning_rate", learning_rate),
        IAE_DOUBLE("adam_beta1", adam_beta1),
        IAE_DOUBLE("adam_beta2", adam_beta2),
        IAE_BOOL("lr_decay", lr_decay),
        IAE_INT("batch_size", batch_size),
        IAE_INT("max_steps", max_steps),
        Field{"resolution", [](const TrainConfig& c) { return c.resolution.str(); },
              [](TrainConfig& c, const std::string& v) { c.resolution = parse_resolution(v); }},
        Field{"seed", [](const TrainConfig& c) { return std::to_string(c.seed); },
              [](TrainConfig& c, const std::string& v) { c.seed = parse_uint("seed", v); }},
        IAE_DOUBLE("w_cyc", weights.w_cyc),
        IAE_DOUBLE("w_norm", weights.w_norm),
        IAE_DOUBLE("w_adv", weights.w_adv),
        IAE_DOUBLE("smooth_l1_beta", weights.smooth_l1_beta),
        Field{"adversarial_mode", [](const TrainConfig& c) { return losses::to_string(c.adversarial); },
              [](TrainConfig& c, const std::string& v) { c.adversarial = losses::parse_adversarial_mode(v); }},
        Field{"dec_distance", [](const TrainConfig& c) { return losses::to_string(c.dec_distance); },
              [](TrainConfig& c, const std::string& v) { c.dec_distance = losses::parse_cycle_distance(v); }},
        IAE_BOOL("ablation.shared_discriminator", ablation.shared_discriminator),
        IAE_BOOL("ablation.decomposition_cycle", ablation.decomposition_cycle),
        Field{"ablation.drop_inputs", [](const TrainConfig& c) { return c.ablation.drop_inputs.str(); },
              [](TrainConfig& c, const std::string& v) { c.ablation.drop_inputs = ChannelSet::parse(v); }},
        IAE_INT("renderer.width", networks.renderer.width),
        IAE_INT("renderer.global_downsample", networks.renderer.global_downsample),
        IAE_INT("renderer.global_blocks", networks.renderer.global_blocks),
        IAE_INT("renderer.local_blocks", networks.renderer.local_blocks),
        IAE_INT("decomposer.width", networks.decomposer.width),
        IAE_INT("decomposer.downsample", networks.decomposer.downsample),
        IAE_INT("decomposer.blocks", networks.decomposer.blocks),
        IAE_INT("discriminator.width", networks.discriminator.width),
        IAE_INT("discriminator.layers", networks.discriminator.layers),
        IAE_INT("discriminator.scales", networks.discriminator.scales),
        IAE_INT("checkpoint_every", checkpoint_every),
        IAE_INT("grid_every", grid_every),
        IAE_INT("eval_every", eval_every),
    };
    return table;
}

#undef IAE_DOUBLE
#undef IAE_INT
#undef IAE_BOOL

}  // namespace

std::string TrainConfig::tag() const {
    std::vector<std::string> parts;
    if (!ablation.shared_discriminator) parts.emplace_back("w/o Shared Discr");
    if (!ablation.decomposition_cycle) parts.emplace_back("w/o Decom. Cyc.");
    if (ablation.drop_inputs.albedo) parts.emplace_back("w/o A");
    if (ablation.drop_inputs.normals) parts.emplace_back("w/o N");
    if (ablation.drop_inputs.reflections) parts.emplace_back("w/o F");
    if (parts.empty()) return "full";
    std::string out = parts.front();
    for (size_t i = 1; i < parts.size(); ++i) out += " + " + parts[i];
    return out;
}

void TrainConfig::validate() const {
    if (!(std::isfinite(learning_rate) && learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) throw ConfigError("adam_beta1 must lie in [0,1)");
    if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) throw ConfigError("adam_beta2 must lie in [0,1)");
    if (batch_size <= 0) throw ConfigError("batch_size must be positive");
    if (max_steps <= 0) throw ConfigError("max_steps must be positive");
    if (checkpoint_every < 0 || grid_every < 0 || eval_every < 0)
        throw ConfigError("checkpoint_every, grid_every and eval_every must be non-negative");
    weights.validate();

    const auto& n = networks;
    if (n.renderer.width <= 0 || n.decomposer.width <= 0 || n.discriminator.width <= 0)
        throw ConfigError("network widths must be positive");
    if (n.renderer.global_downsample < 0 || n.renderer.global_blocks < 0 || n.renderer.local_blocks < 0 ||
        n.decomposer.downsample < 0 || n.decomposer.blocks < 0)
        throw ConfigError("network depths must be non-negative");
    if (n.discriminator.layers <= 0 || n.discriminator.scales <= 0)
        throw ConfigError("discriminator layers and scales must be positive");
    const int64_t stride = n.stride();
    if (resolution.height % stride != 0 || resolution.width % stride != 0)
        throw ConfigError("resolution " + resolution.str() + " is not divisible by the network stride " +
                          std::to_string(stride));
}

std::string TrainConfig::hash() const {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : serialize(*this)) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

std::string serialize(const TrainConfig& config) {
    std::ostringstream os;
    for (const auto& f : fields()) os << f.key << " = " << f.get(config) << '\n';
    return os.str();
}

void apply_override(TrainConfig& config, const std::string& key, const std::string& value) {
    for (const auto& f : fields()) {
        if (key == f.key) {
            f.set(config, trim(value));
            return;
        }
    }
    throw ConfigError("unknown config key '" + key + "'");
}

TrainConfig parse_config(const std::string& text) {
    TrainConfig config;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
        apply_override(config, trim(line.substr(0, eq)), line.substr(eq + 1));
    }
    return config;
}

TrainConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

void save_config(const TrainConfig& config, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write config file: " + path.string());
    out << "# " << config.tag() << '\n' << serialize(config);
}

std::vector<TrainConfig> ablation_grid(const TrainConfig& base) {
    std::vector<TrainConfig> grid;
    auto variant = [&](auto&& edit) {
        TrainConfig c = base;
        c.ablation = AblationConfig{};
        edit(c.ablation);
        grid.push_back(c);
    };
    variant([](AblationConfig&) {});
    variant([](AblationConfig& a) { a.shared_discriminator = false; });
    variant([](AblationConfig& a) { a.decomposition_cycle = false; });
    variant([](AblationConfig& a) { a.drop_inputs.albedo = true; });
    variant([](AblationConfig& a) { a.drop_inputs.normals = true; });
    variant([](AblationConfig& a) { a.drop_inputs.reflections = true; });
    return grid;
}

}  // namespace iae::trainer
