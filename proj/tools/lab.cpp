// lab <experiment> --config <file> [--seed S] [--threads K] [--out DIR]
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "hyperlab/experiment.hpp"

using namespace hyperlab;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

ConfigFormat format_of(const std::string& path) {
    auto dot = path.rfind('.');
    std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
    if (ext == "json") return ConfigFormat::Json;
    if (ext == "toml") return ConfigFormat::Toml;
    return ConfigFormat::Auto;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hyperlab experiment runner"};
    std::string experiment, config_path, out_dir;
    std::uint64_t seed = 0;
    int threads = 1;
    bool echo = false;
    app.add_option("experiment", experiment,
                   "pressure | spherical | filtered | strongconv | schreier | gromov | appendixA | consistency")
        ->required();
    app.add_option("--config", config_path, "TOML or JSON config file")->required();
    auto* seed_opt = app.add_option("--seed", seed, "64-bit seed (overrides the config and LAB_SEED)");
    auto* threads_opt = app.add_option("--threads", threads, "worker threads (1 is the bit-reproducible mode)");
    auto* out_opt = app.add_option("--out", out_dir, "output directory");
    app.add_flag("--echo-config", echo, "print the validated config and exit");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(ErrorKind::Config);
    }

    try {
        ConfigOverrides ov;
        ov.kind = experiment;
        if (*seed_opt) ov.seed = seed;
        if (*threads_opt) ov.threads = threads;
        if (*out_opt) ov.output = out_dir;
        if (const char* env = std::getenv("LAB_SEED")) {
            try {
                std::size_t pos = 0;
                std::string s(env);
                ov.seed_fallback = std::stoull(s, &pos, 10);
                if (pos != s.size()) throw std::invalid_argument(s);
            } catch (const std::exception&) {
                throw ConfigError(std::string("LAB_SEED: not a decimal integer: ") + env);
            }
        }
        ExperimentConfig cfg = validate_config(read_file(config_path), format_of(config_path), ov);
        if (echo) {
            std::cout << canonical_config(cfg).dump(2) << '\n';
            return 0;
        }
        RunResult res = run_experiment(cfg);
        std::cout << "experiment " << kind_name(cfg.kind) << " config_hash " << config_hash(cfg) << " wrote";
        for (const auto& f : res.files) std::cout << ' ' << f;
        std::cout << " manifest.json in " << cfg.output << " (" << res.wall_seconds << " s)\n";
        if (!res.summary.empty()) std::cout << res.summary.dump() << '\n';
        return 0;
    } catch (const LabError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(ErrorKind::Numerical);
    }
}
