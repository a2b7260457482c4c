#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace iae::cli {

namespace fs = std::filesystem;

struct GenDataArgs {
    int64_t count = 200;
    int64_t eval_count = 128;
    std::string resolution = "64x64";
    uint64_t seed = 1;
    fs::path out = "data";
};

struct TrainArgs {
    fs::path config;
    fs::path data;
    fs::path out;
    std::optional<fs::path> resume;
    std::vector<std::string> overrides;  // key=value
    std::optional<uint64_t> seed;
    std::optional<fs::path> eval_data;
    std::string extractor = "random";
    bool quiet = false;
};

struct EvalArgs {
    fs::path checkpoint;
    fs::path data;
    std::string extractor = "random";
    fs::path out = "report.json";
    uint64_t seed = 0;
};

struct RenderArgs {
    fs::path checkpoint;
    fs::path data;
    std::string id;
    fs::path out;
    std::string drop = "none";
};

struct DecomposeArgs {
    fs::path checkpoint;
    fs::path image;
    fs::path out;
};

struct AblateArgs {
    std::optional<fs::path> config;
    fs::path out;
    std::vector<std::string> overrides;
    std::vector<uint64_t> seeds;
};

int cmd_gen_data(const GenDataArgs& args);
int cmd_train(const TrainArgs& args);
int cmd_eval(const EvalArgs& args);
int cmd_render(const RenderArgs& args);
int cmd_decompose(const DecomposeArgs& args);
int cmd_ablate(const AblateArgs& args);

}  // namespace iae::cli
