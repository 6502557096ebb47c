#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "hyperlab/model.hpp"

namespace hyperlab {

enum class ExperimentKind { Pressure, Spherical, Filtered, StrongConv, Schreier, Gromov, AppendixA, Consistency };

std::string kind_name(ExperimentKind kind);
ExperimentKind parse_kind(const std::string& name);  // ConfigError on unknown names

struct ModelSpec {
    bool perturbed = false;  // true when epsilon is given
    double kappa = 1.0;
    double epsilon = 0.0;
    double bump_radius = 1.5;
    std::string group_file;  // empty: Bolza
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::Pressure;
    std::uint64_t seed = 0;
    ModelSpec model;
    std::string output = "lab_out";
    int threads = 1;
    nlohmann::json params;  // knobs of this experiment, fully defaulted
};

struct ConfigOverrides {
    std::optional<std::string> kind;
    std::optional<std::uint64_t> seed;           // wins over the file
    std::optional<std::uint64_t> seed_fallback;  // used when the file has none
    std::optional<int> threads;
    std::optional<std::string> output;
};

enum class ConfigFormat { Auto, Json, Toml };

// TOML or JSON text to a JSON tree (Auto: JSON when the text starts with '{')
nlohmann::json parse_config_text(const std::string& text, ConfigFormat format = ConfigFormat::Auto);
ExperimentConfig validate_config(const std::string& text, ConfigFormat format = ConfigFormat::Auto,
                                 const ConfigOverrides& overrides = {});
ExperimentConfig validate_config(const nlohmann::json& raw, const ConfigOverrides& overrides = {});
nlohmann::json default_params(ExperimentKind kind);

// Deterministic echo of the validated config; the hash covers everything but
// the output directory and thread count.
nlohmann::json canonical_config(const ExperimentConfig& cfg);
std::string config_hash(const ExperimentConfig& cfg);

FuchsianGroup load_group(const ModelSpec& spec);
SurfaceModel build_model(const ModelSpec& spec, const FuchsianGroup& group);

// Runs fn(0..count-1) on `threads` workers; results must be written by index.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn);

struct OrbitRecord {
    Word word;
    double length = 0;
    double lambda = 0;
    double det_term = 0;
    double residual = 0;
};
struct OrbitOptions {
    double closure_tol = 1e-9;
    bool numerical = false;       // close constant-curvature orbits numerically as well
    bool poincare_data = false;   // measure |det(I - P)| instead of using 4 sinh^2(lambda/2)
    int threads = 1;
};
// Primitive closed geodesics of the model with length <= max_length. For
// epsilon >= 0 the perturbed metric dominates the hyperbolic one, so the base
// enumeration to the same length is complete.
std::vector<OrbitRecord> collect_orbits(const SurfaceModel& model, const FuchsianGroup& group, double max_length,
                                        const OrbitOptions& opt = {});

struct RunResult {
    std::vector<std::string> files;
    nlohmann::json summary;
    double wall_seconds = 0;
};
RunResult run_experiment(const ExperimentConfig& cfg);

}  // namespace hyperlab
