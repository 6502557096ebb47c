#include "hyperlab/experiment.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <Eigen/Core>
#include <boost/version.hpp>

#include "toml.hpp"

#include "hyperlab/fourier.hpp"
#include "hyperlab/pressure.hpp"
#include "hyperlab/randrep.hpp"
#include "hyperlab/spherical.hpp"

namespace hyperlab {

using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

const std::vector<std::pair<ExperimentKind, std::string>>& kind_table() {
    static const std::vector<std::pair<ExperimentKind, std::string>> t = {
        {ExperimentKind::Pressure, "pressure"},     {ExperimentKind::Spherical, "spherical"},
        {ExperimentKind::Filtered, "filtered"},     {ExperimentKind::StrongConv, "strongconv"},
        {ExperimentKind::Schreier, "schreier"},     {ExperimentKind::Gromov, "gromov"},
        {ExperimentKind::AppendixA, "appendixA"},   {ExperimentKind::Consistency, "consistency"},
    };
    return t;
}

json toml_to_json(const toml::node& node) {
    if (auto* tbl = node.as_table()) {
        json out = json::object();
        for (const auto& [k, v] : *tbl) out[std::string(k.str())] = toml_to_json(v);
        return out;
    }
    if (auto* arr = node.as_array()) {
        json out = json::array();
        for (const auto& v : *arr) out.push_back(toml_to_json(v));
        return out;
    }
    if (auto* v = node.as_integer()) return json(v->get());
    if (auto* v = node.as_floating_point()) return json(v->get());
    if (auto* v = node.as_boolean()) return json(v->get());
    if (auto* v = node.as_string()) return json(v->get());
    throw ConfigError("unsupported TOML value (dates and times are not accepted)");
}

bool is_integer(const json& v) { return v.is_number_integer() || v.is_number_unsigned(); }

// Merge `value` over the default `def`, checking types. `path` names the key.
json merge_typed(const json& def, const json& value, const std::string& path) {
    if (def.is_number_float()) {
        if (!value.is_number()) throw ConfigError(path + ": expected a number");
        return json(value.get<double>());
    }
    if (is_integer(def)) {
        if (!is_integer(value)) throw ConfigError(path + ": expected an integer");
        return value;
    }
    if (def.is_boolean()) {
        if (!value.is_boolean()) throw ConfigError(path + ": expected true or false");
        return value;
    }
    if (def.is_string()) {
        if (!value.is_string()) throw ConfigError(path + ": expected a string");
        return value;
    }
    if (def.is_array()) {
        if (!value.is_array()) throw ConfigError(path + ": expected an array");
        if (def.empty()) return value;  // element checks happen per experiment
        if (value.empty()) throw ConfigError(path + ": grid must be nonempty");
        json out = json::array();
        for (std::size_t i = 0; i < value.size(); ++i)
            out.push_back(merge_typed(def[0], value[i], path + "[" + std::to_string(i) + "]"));
        return out;
    }
    throw ConfigError(path + ": unsupported default type");
}

void require(bool ok, const std::string& path, const std::string& reason) {
    if (!ok) throw ConfigError(path + ": " + reason);
}

void positive(const json& p, const std::string& sec, const std::string& key) {
    const json& v = p.at(key);
    if (v.is_array()) {
        for (std::size_t i = 0; i < v.size(); ++i)
            require(v[i].get<double>() > 0, sec + "." + key + "[" + std::to_string(i) + "]", "must be positive");
    } else {
        require(v.get<double>() > 0, sec + "." + key, "must be positive");
    }
}

void nonnegative(const json& p, const std::string& sec, const std::string& key) {
    const json& v = p.at(key);
    if (v.is_array()) {
        for (std::size_t i = 0; i < v.size(); ++i)
            require(v[i].get<double>() >= 0, sec + "." + key + "[" + std::to_string(i) + "]", "must be nonnegative");
    } else {
        require(v.get<double>() >= 0, sec + "." + key, "must be nonnegative");
    }
}

double max_of(const json& arr) {
    double m = -1e300;
    for (const auto& v : arr) m = std::max(m, v.get<double>());
    return m;
}

void check_word_specs(const json& words, int generators, const std::string& path) {
    for (std::size_t i = 0; i < words.size(); ++i) {
        const std::string wp = path + "[" + std::to_string(i) + "]";
        const json& w = words[i];
        require(w.is_object(), wp, "expected a table with letters and coeffs");
        for (const auto& [k, v] : w.items())
            require(k == "letters" || k == "coeffs", wp + "." + k, "unknown key");
        require(w.contains("letters") && w["letters"].is_array() && !w["letters"].empty(), wp + ".letters",
                "nonempty array of words required");
        require(w.contains("coeffs") && w["coeffs"].is_array(), wp + ".coeffs", "array of numbers required");
        require(w["coeffs"].size() == w["letters"].size(), wp + ".coeffs", "must match letters in length");
        for (std::size_t j = 0; j < w["letters"].size(); ++j) {
            const json& word = w["letters"][j];
            const std::string lp = wp + ".letters[" + std::to_string(j) + "]";
            require(word.is_array(), lp, "expected an array of letters");
            for (const auto& l : word) {
                require(is_integer(l), lp, "letters are nonzero integers");
                int v = l.get<int>();
                require(v != 0 && std::abs(v) <= generators, lp, "letter outside the generators");
            }
            require(w["coeffs"][j].is_number(), wp + ".coeffs[" + std::to_string(j) + "]", "expected a number");
        }
    }
}

void check_params(ExperimentKind kind, const json& p) {
    const std::string sec = kind_name(kind);
    switch (kind) {
        case ExperimentKind::Pressure:
        case ExperimentKind::AppendixA:
            positive(p, sec, "T");
            positive(p, sec, "closure_tol");
            require(p["subwindows"].get<int>() >= 2, sec + ".subwindows", "must be at least 2");
            if (kind == ExperimentKind::AppendixA)
                require(p["q"].size() >= 3, sec + ".q", "second differences need at least three points");
            break;
        case ExperimentKind::Consistency:
            positive(p, sec, "T");
            positive(p, sec, "closure_tol");
            positive(p, sec, "flow_tol");
            positive(p, sec, "annulus_r");
            positive(p, sec, "annulus_c");
            require(p["subwindows"].get<int>() >= 2, sec + ".subwindows", "must be at least 2");
            require(p["annulus_samples"].get<int>() >= 1, sec + ".annulus_samples", "must be positive");
            require(p["poincare_word_length"].get<int>() >= 2, sec + ".poincare_word_length", "must be at least 2");
            break;
        case ExperimentKind::Spherical:
            nonnegative(p, sec, "t");
            positive(p, sec, "grid_h");
            positive(p, sec, "flow_tol");
            require(p["directions"].get<int>() >= 4, sec + ".directions", "must be at least 4");
            require(p["lower_samples"].get<int>() >= 0, sec + ".lower_samples", "must be nonnegative");
            require(p["R"].get<double>() >= max_of(p["t"]) + 2, sec + ".R", "must be at least max t + 2");
            break;
        case ExperimentKind::Filtered:
            positive(p, sec, "h");
            nonnegative(p, sec, "t");
            positive(p, sec, "dr");
            positive(p, sec, "grid_h");
            positive(p, sec, "flow_tol");
            nonnegative(p, sec, "R");
            require(p["max_sector"].get<int>() >= 0, sec + ".max_sector", "must be nonnegative");
            if (p["R"].get<double>() > 0)
                require(p["R"].get<double>() >= max_of(p["t"]) + 2, sec + ".R", "must be at least max t + 2");
            break;
        case ExperimentKind::StrongConv: {
            const std::string g = p["group"].get<std::string>();
            require(g == "free" || g == "surface", sec + ".group", "must be \"free\" or \"surface\"");
            const int gens = p["generators"].get<int>();
            require(gens >= 1, sec + ".generators", "must be positive");
            for (std::size_t i = 0; i < p["n"].size(); ++i)
                require(p["n"][i].get<int>() >= 2, sec + ".n[" + std::to_string(i) + "]", "must be at least 2");
            require(p["trials"].get<int>() >= 1, sec + ".trials", "must be positive");
            require(p["ball_R"].get<int>() >= 2, sec + ".ball_R", "must be at least 2");
            positive(p, sec, "eps");
            check_word_specs(p["words"], g == "free" ? gens : 2 * gens, sec + ".words");
            break;
        }
        case ExperimentKind::Schreier:
            require(p["generators"].get<int>() >= 1, sec + ".generators", "must be positive");
            for (std::size_t i = 0; i < p["n"].size(); ++i)
                require(p["n"][i].get<int>() >= 2, sec + ".n[" + std::to_string(i) + "]", "must be at least 2");
            require(p["trials"].get<int>() >= 1, sec + ".trials", "must be positive");
            break;
        case ExperimentKind::Gromov:
            require(p["triangles"].get<int>() >= 1, sec + ".triangles", "must be positive");
            positive(p, sec, "max_radius");
            positive(p, sec, "divergence_r");
            positive(p, sec, "eta");
            positive(p, sec, "flow_tol");
            break;
    }
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t parse_seed(const json& v, const std::string& path) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer()) {
        require(v.get<std::int64_t>() >= 0, path, "must be nonnegative");
        return static_cast<std::uint64_t>(v.get<std::int64_t>());
    }
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        require(!s.empty() && s.find_first_not_of("0123456789") == std::string::npos, path,
                "expected a decimal integer");
        try {
            std::size_t pos = 0;
            auto r = std::stoull(s, &pos, 10);
            return r;
        } catch (const std::exception&) {
            throw ConfigError(path + ": does not fit in 64 bits");
        }
    }
    throw ConfigError(path + ": expected an integer");
}

// ---- CSV output ------------------------------------------------------------

std::string num(double v) {
    if (!std::isfinite(v)) return "";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}
std::string num(int v) { return std::to_string(v); }
std::string num(std::uint64_t v) { return std::to_string(v); }

std::string word_string(const Word& w) {
    std::string s;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (i) s += ' ';
        s += std::to_string(w[i]);
    }
    return s;
}

class CsvFile {
public:
    CsvFile(const std::filesystem::path& path, std::vector<std::string> header, std::string hash)
        : out_(path), hash_(std::move(hash)) {
        if (!out_) throw ConfigError("cannot write " + path.string());
        header.push_back("config_hash");
        line(header);
    }
    void row(std::vector<std::string> cells) {
        cells.push_back(hash_);
        line(cells);
    }

private:
    void line(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
        out_ << '\n';
    }
    std::ofstream out_;
    std::string hash_;
};

struct RunContext {
    const ExperimentConfig& cfg;
    std::filesystem::path dir;
    std::string hash;
    RunResult result;

    CsvFile csv(const std::string& name, std::vector<std::string> header) {
        result.files.push_back(name);
        return CsvFile(dir / name, std::move(header), hash);
    }
};

std::vector<double> doubles(const json& arr) {
    std::vector<double> v;
    for (const auto& x : arr) v.push_back(x.get<double>());
    return v;
}
std::vector<int> ints(const json& arr) {
    std::vector<int> v;
    for (const auto& x : arr) v.push_back(x.get<int>());
    return v;
}

bool contains_q(const std::vector<double>& qs, double q) {
    return std::any_of(qs.begin(), qs.end(), [q](double x) { return std::abs(x - q) < 1e-12; });
}

// ---- runners ---------------------------------------------------------------

PressureCurve orbit_pressure(RunContext& ctx, const json& p, const std::vector<double>& qs, bool write_orbits) {
    FuchsianGroup G = load_group(ctx.cfg.model);
    SurfaceModel model = build_model(ctx.cfg.model, G);
    const double T = p["T"].get<double>();
    OrbitOptions oo;
    oo.closure_tol = p["closure_tol"].get<double>();
    if (p.contains("numerical_closure")) oo.numerical = p["numerical_closure"].get<bool>();
    if (p.contains("measure_poincare")) oo.poincare_data = p["measure_poincare"].get<bool>();
    oo.threads = ctx.cfg.threads;
    auto orbits = collect_orbits(model, G, T + 1, oo);
    if (write_orbits) {
        auto f = ctx.csv("orbits.csv", {"word", "length", "lambda", "det_term", "residual"});
        for (const auto& o : orbits)
            f.row({word_string(o.word), num(o.length), num(o.lambda), num(o.det_term), num(o.residual)});
    }
    std::vector<OrbitSample> samples;
    samples.reserve(orbits.size());
    for (const auto& o : orbits) samples.push_back({o.length, o.lambda});
    auto curve = pressure_curve(samples, qs, T, p["subwindows"].get<int>());
    ctx.result.summary["orbits_total"] = orbits.size();
    ctx.result.summary["orbits_in_window"] = curve.orbit_count;
    ctx.result.summary["gamma0_hat"] = curve.gamma0;
    return curve;
}

void write_pressure_csv(RunContext& ctx, const PressureCurve& curve, const std::vector<double>& qs) {
    const bool has_delta = contains_q(qs, 2.0);
    auto f = ctx.csv("pressure.csv", {"q", "beta_hat", "stderr", "T", "n_orbits", "delta0_hat", "gamma0_hat"});
    json betas = json::object();
    for (const auto& s : curve.samples) {
        f.row({num(s.q), num(s.beta), num(s.stderr_), num(curve.T), num(curve.orbit_count),
               has_delta ? num(curve.delta0) : "", num(curve.gamma0)});
        betas[num(s.q)] = s.beta;
    }
    ctx.result.summary["beta_hat"] = betas;
    if (has_delta) ctx.result.summary["delta0_hat"] = curve.delta0;
}

void run_pressure(RunContext& ctx) {
    const json& p = ctx.cfg.params;
    auto qs = doubles(p["q"]);
    auto curve = orbit_pressure(ctx, p, qs, p["write_orbits"].get<bool>());
    write_pressure_csv(ctx, curve, qs);
}

void run_appendix_a(RunContext& ctx) {
    const json& p = ctx.cfg.params;
    auto qs = doubles(p["q"]);
    std::sort(qs.begin(), qs.end());
    auto curve = orbit_pressure(ctx, p, qs, p["write_orbits"].get<bool>());
    write_pressure_csv(ctx, curve, qs);
    auto rep = appendix_a_report(curve);
    auto f = ctx.csv("appendixA.csv", {"quantity", "q", "value", "stderr", "sigmas"});
    auto sig = [](double v, double s) { return s > 0 ? v / s : std::nan(""); };
    f.row({"convexity_margin", "", num(rep.convexity_margin), num(rep.convexity_stderr),
           num(sig(rep.convexity_margin, rep.convexity_stderr))});
    for (const auto& m : rep.margins)
        f.row({"beta_plus_gamma_margin", num(m.q), num(m.value), num(m.stderr_), num(sig(m.value, m.stderr_))});
    for (const auto& d : rep.derivatives)
        f.row({"slope_plus_gamma0", num(d.q), num(d.value), num(d.stderr_), num(sig(d.value, d.stderr_))});
    ctx.result.summary["convexity_sigmas"] = sig(rep.convexity_margin, rep.convexity_stderr);
}

void run_consistency(RunContext& ctx) {
    const json& p = ctx.cfg.params;
    auto qs = doubles(p["q"]);
    auto curve = orbit_pressure(ctx, p, qs, false);
    FuchsianGroup G = load_group(ctx.cfg.model);
    SurfaceModel model = build_model(ctx.cfg.model, G);
    const double tol = p["flow_tol"].get<double>();
    std::vector<AnnulusPressure> ann(qs.size());
    std::vector<CriticalExponent> poi(qs.size());
    parallel_for(2 * qs.size(), ctx.cfg.threads, [&](std::size_t k) {
        std::size_t i = k / 2;
        if (k % 2 == 0)
            ann[i] = annulus_pressure(model, qs[i], p["annulus_r"].get<double>(), p["annulus_c"].get<double>(),
                                      p["annulus_samples"].get<int>(), splitmix(ctx.cfg.seed + i), tol);
        else
            poi[i] = poincare_critical_exponent(model, G, qs[i], p["poincare_word_length"].get<int>(), tol);
    });
    auto f = ctx.csv("consistency.csv", {"q", "orbit_window", "orbit_stderr", "annulus", "annulus_stderr",
                                         "poincare", "poincare_stderr", "max_pairwise_gap"});
    double worst = 0;
    for (std::size_t i = 0; i < qs.size(); ++i) {
        const auto& s = curve.at(qs[i]);
        double a = s.beta, b = ann[i].slope, c = poi[i].s;
        double gap = std::max({std::abs(a - b), std::abs(a - c), std::abs(b - c)});
        worst = std::max(worst, gap);
        f.row({num(qs[i]), num(a), num(s.stderr_), num(b), num(ann[i].slope_stderr), num(c), num(poi[i].stderr_),
               num(gap)});
    }
    ctx.result.summary["max_pairwise_gap"] = worst;
}

void run_spherical(RunContext& ctx) {
    const json& p = ctx.cfg.params;
    FuchsianGroup G = load_group(ctx.cfg.model);
    SurfaceModel model = build_model(ctx.cfg.model, G);
    auto ts = doubles(p["t"]);
    GridSpec spec;
    spec.h = p["grid_h"].get<double>();
    spec.directions = p["directions"].get<int>();
    spec.tol = p["flow_tol"].get<double>();
    const double R = p["R"].get<double>();
    const int samples = p["lower_samples"].get<int>();
    std::vector<NormEstimate> power(ts.size());
    std::vector<McEstimate> lower(ts.size());
    std::vector<bool> has_lower(ts.size(), false);
    parallel_for(2 * ts.size(), ctx.cfg.threads, [&](std::size_t k) {
        std::size_t i = k / 2;
        if (k % 2 == 0) {
            power[i] = sm_norm_power(model, ts[i], R, spec);
        } else if (samples > 0 && ts[i] >= 1) {
            lower[i] = sm_norm_lower(model, 0.0, ts[i], samples, splitmix(ctx.cfg.seed + i), spec.tol);
            has_lower[i] = true;
        }
    });
    const bool exact = model.is_constant_curvature();
    auto f = ctx.csv("spherical.csv", {"t", "norm_power", "norm_exact", "lower_bound", "lower_stderr", "R", "grid_h"});
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        double ex = exact ? exact_norm_hyperbolic(2, model.kappa() * ts[i]) : std::nan("");
        f.row({num(ts[i]), num(power[i].norm), num(ex), has_lower[i] ? num(lower[i].value) : "",
               has_lower[i] ? num(lower[i].stderr_) : "", num(power[i].R), num(power[i].h)});
        if (ts[i] >= 4 - 1e-12 && ts[i] <= 8 + 1e-12 && power[i].norm > 0) {
            xs.push_back(ts[i]);
            ys.push_back(std::log(power[i].norm / ts[i]));
        }
    }
    if (xs.size() >= 2) ctx.result.summary["log_slope_4_8"] = fit_slope(xs, ys);
}

void run_filtered(RunContext& ctx) {
    const json& p = ctx.cfg.params;
    FuchsianGroup G = load_group(ctx.cfg.model);
    SurfaceModel model = build_model(ctx.cfg.model, G);
    auto hs = doubles(p["h"]);
    auto ts = doubles(p["t"]);
    double R = p["R"].get<double>();
    if (R <= 0) R = max_of(p["t"]) + 3.1;
    FilteredNormOptions opt;
    opt.dr = p["dr"].get<double>();
    opt.max_sector = p["max_sector"].get<int>();
    opt.grid_h = p["grid_h"].get<double>();
    opt.tol = p["flow_tol"].get<double>();
    opt.force_generic = p["force_generic"].get<bool>();
    std::vector<FilteredNorm> res(hs.size() * ts.size());
    parallel_for(res.size(), ctx.cfg.threads, [&](std::size_t k) {
        res[k] = filtered_norm(model, plateau_profile, hs[k / ts.size()], ts[k % ts.size()], R, opt);
    });
    auto f = ctx.csv("filtered.csv", {"h", "t", "norm_hat", "bound_value", "ratio", "N_modes", "grid_h"});
    for (std::size_t k = 0; k < res.size(); ++k)
        f.row({num(hs[k / ts.size()]), num(ts[k % ts.size()]), num(res[k].norm), num(res[k].bound_value),
               num(res[k].ratio), num(res[k].modes), num(res[k].grid_h)});
}

std::vector<GroupAlgebraElement> word_elements(const json& p) {
    std::vector<GroupAlgebraElement> out;
    const int gens = p["generators"].get<int>();
    const bool free = p["group"].get<std::string>() == "free";
    if (p["words"].empty()) {
        out.push_back(GroupAlgebraElement::adjacency(free ? gens : 2 * gens));
        return out;
    }
    for (const auto& w : p["words"]) {
        GroupAlgebraElement e;
        for (std::size_t j = 0; j < w["letters"].size(); ++j)
            e.add(w["letters"][j].get<Word>(), w["coeffs"][j].get<double>());
        out.push_back(e);
    }
    return out;
}

void run_strongconv(RunContext& ctx) {
    const json& p = ctx.cfg.params;
    const bool free = p["group"].get<std::string>() == "free";
    const GroupKind kind = free ? GroupKind::Free : GroupKind::Surface;
    const int gens = p["generators"].get<int>();
    const int ballR = p["ball_R"].get<int>();
    const int trials = p["trials"].get<int>();
    const double eps = p["eps"].get<double>();
    auto ns = ints(p["n"]);
    auto words = word_elements(p);

    std::vector<BallNorm> ball(words.size());
    for (std::size_t w = 0; w < words.size(); ++w) ball[w] = regular_norm_ball(words[w], kind, gens, ballR);

    const std::size_t per_word = ns.size() * trials;
    std::vector<SpectralReport> reps(words.size() * per_word);
    parallel_for(reps.size(), ctx.cfg.threads, [&](std::size_t k) {
        std::size_t w = k / per_word, rest = k % per_word;
        std::size_t ni = rest / trials, t = rest % trials;
        // the single-trial call reproduces the seed of trial t in a batch run
        std::uint64_t seed0 = splitmix(ctx.cfg.seed ^ (0x1000193ULL * (w + 1)) ^ (0x5bd1e995ULL * (ni + 1))) +
                              0x9E3779B97F4A7C15ULL * t;
        reps[k] = strong_convergence_trials(words[w], kind, gens, ns[ni], 1, seed0, ball[w].norm, eps,
                                            static_cast<int>(w));
    });

    auto f = ctx.csv("strongconv.csv", {"group", "n", "seed", "word_id", "norm_rep", "norm_regular_ball", "ball_R",
                                        "gap", "accepted"});
    json fractions = json::array();
    for (std::size_t w = 0; w < words.size(); ++w)
        for (std::size_t ni = 0; ni < ns.size(); ++ni) {
            int acc = 0;
            double top = -1e300;
            for (int t = 0; t < trials; ++t) {
                const auto& r = reps[w * per_word + ni * trials + t];
                double norm = r.norm_rep[0];
                bool ok = norm <= ball[w].norm + eps;
                acc += ok;
                if (std::isfinite(r.top_new[0])) top = std::max(top, r.top_new[0]);
                f.row({free ? "free" : "surface", num(ns[ni]), num(r.seeds[0]), num(static_cast<int>(w)), num(norm),
                       num(ball[w].norm), num(ballR), num(norm - ball[w].norm), ok ? "1" : "0"});
            }
            fractions.push_back({{"word_id", w},
                                 {"n", ns[ni]},
                                 {"accepted_fraction", static_cast<double>(acc) / trials},
                                 {"max_top_new", top > -1e300 ? json(top) : json(nullptr)},
                                 {"norm_regular_ball", ball[w].norm},
                                 {"ball_increment", ball[w].increment}});
        }
    ctx.result.summary["acceptance"] = fractions;
}

void run_schreier(RunContext& ctx) {
    const json& p = ctx.cfg.params;
    auto ns = ints(p["n"]);
    const int trials = p["trials"].get<int>();
    const int gens = p["generators"].get<int>();
    std::vector<SchreierReport> reps(ns.size() * trials);
    std::vector<std::uint64_t> seeds(reps.size());
    for (std::size_t k = 0; k < reps.size(); ++k) seeds[k] = splitmix(ctx.cfg.seed + 0x632BE59BD9B4E019ULL * (k + 1));
    parallel_for(reps.size(), ctx.cfg.threads, [&](std::size_t k) {
        reps[k] = schreier_diagnostics(sample_hom_free(ns[k / trials], gens, seeds[k]));
    });
    std::vector<std::string> header = {"n", "seed", "diameter"};
    for (int r = 1; r <= 6; ++r) header.push_back("treelike_fraction_R" + std::to_string(r));
    auto f = ctx.csv("schreier.csv", header);
    json per_n = json::array();
    for (std::size_t ni = 0; ni < ns.size(); ++ni) {
        double diam = 0, frac2 = 0;
        for (int t = 0; t < trials; ++t) {
            const auto& r = reps[ni * trials + t];
            std::vector<std::string> row = {num(ns[ni]), num(seeds[ni * trials + t]), num(r.diameter)};
            for (double x : r.treelike_fraction) row.push_back(num(x));
            f.row(row);
            diam += r.diameter;
            frac2 += r.treelike_fraction[1];
        }
        per_n.push_back({{"n", ns[ni]},
                         {"mean_diameter_over_log_n", diam / trials / std::log(static_cast<double>(ns[ni]))},
                         {"mean_treelike_fraction_R2", frac2 / trials}});
    }
    ctx.result.summary["per_n"] = per_n;
}

void run_gromov(RunContext& ctx) {
    const json& p = ctx.cfg.params;
    FuchsianGroup G = load_group(ctx.cfg.model);
    SurfaceModel model = build_model(ctx.cfg.model, G);
    const double tol = p["flow_tol"].get<double>();
    const int count = p["triangles"].get<int>();
    const double rmax = p["max_radius"].get<double>();
    std::mt19937_64 rng(ctx.cfg.seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    auto point = [&] {
        // uniform in hyperbolic area on the disk of radius rmax
        double r = std::acosh(1 + U(rng) * (std::cosh(rmax) - 1));
        return std::polar(std::tanh(r / 2), kTwoPi * U(rng));
    };
    std::vector<std::array<cplx, 3>> tri(count);
    std::vector<PhasePoint> lines(count);
    std::vector<std::array<double, 2>> times(count);
    for (int i = 0; i < count; ++i) {
        tri[i] = {point(), point(), point()};
        lines[i] = PhasePoint{std::polar(0.5 * U(rng), kTwoPi * U(rng)), kTwoPi * U(rng)};
        times[i] = {0.5 + U(rng), 1.5 + 2 * U(rng)};
    }
    std::vector<double> delta(count), collinear(count);
    DivergenceFit div;
    parallel_for(2 * count + 1, ctx.cfg.threads, [&](std::size_t k) {
        if (k == static_cast<std::size_t>(2 * count)) {
            const double r = p["divergence_r"].get<double>(), eta = p["eta"].get<double>();
            double J = radial_jacobian(model, 0.0, 0.3, r, tol);
            div = geodesic_divergence(model, 0.0, 0.3, 0.3 + 0.9 * eta / J, r, eta, 64, tol);
            return;
        }
        std::size_t i = k / 2;
        if (k % 2 == 0) {
            delta[i] = gromov_delta(model, tri[i][0], tri[i][1], tri[i][2], tol);
        } else {
            const PhasePoint& s = lines[i];
            cplx a = geodesic_flow(model, s, times[i][0], tol).z, b = geodesic_flow(model, s, times[i][1], tol).z;
            collinear[i] = gromov_delta(model, s.z, a, b, tol);
        }
    });
    auto f = ctx.csv("gromov.csv", {"quantity", "index", "value"});
    for (int i = 0; i < count; ++i) f.row({"triangle_delta", num(i), num(delta[i])});
    for (int i = 0; i < count; ++i) f.row({"collinear_delta", num(i), num(collinear[i])});
    f.row({"divergence_rate", "0", num(div.rate)});
    f.row({"divergence_prefactor", "0", num(div.prefactor)});
    f.row({"divergence_end_separation", "0", num(div.end_separation)});
    ctx.result.summary["max_triangle_delta"] = *std::max_element(delta.begin(), delta.end());
    ctx.result.summary["max_collinear_delta"] = *std::max_element(collinear.begin(), collinear.end());
    ctx.result.summary["divergence_rate"] = div.rate;
}

}  // namespace

std::string kind_name(ExperimentKind kind) {
    for (const auto& [k, n] : kind_table())
        if (k == kind) return n;
    throw ConfigError("unknown experiment kind");
}

ExperimentKind parse_kind(const std::string& name) {
    for (const auto& [k, n] : kind_table())
        if (n == name) return k;
    throw ConfigError("experiment: unknown kind \"" + name + "\"");
}

json default_params(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::Pressure:
        case ExperimentKind::AppendixA:
            return {{"T", kind == ExperimentKind::Pressure ? 10.0 : 10.5},
                    {"q", {0.0, 0.5, 1.0, 1.5, 2.0}},
                    {"subwindows", 10},
                    {"closure_tol", 1e-9},
                    {"write_orbits", true},
                    {"numerical_closure", false},
                    {"measure_poincare", false}};
        case ExperimentKind::Consistency:
            return {{"T", 10.0},
                    {"q", {0.0, 1.0, 2.0}},
                    {"subwindows", 10},
                    {"closure_tol", 1e-9},
                    {"flow_tol", 1e-8},
                    {"annulus_r", 12.0},
                    {"annulus_c", 0.5},
                    {"annulus_samples", 4000},
                    {"poincare_word_length", 6}};
        case ExperimentKind::Spherical:
            return {{"t", {1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0}},
                    {"R", 100.0},
                    {"grid_h", 0.05},
                    {"directions", 96},
                    {"flow_tol", 1e-8},
                    {"lower_samples", 20000}};
        case ExperimentKind::Filtered:
            return {{"h", {0.1}},     {"t", {4.6, 5.75, 6.9}}, {"R", 0.0},           {"dr", 0.1},
                    {"max_sector", 0}, {"grid_h", 0.1},         {"flow_tol", 1e-10}, {"force_generic", false}};
        case ExperimentKind::StrongConv:
            return {{"group", "free"}, {"generators", 2}, {"n", {500}},  {"trials", 50},
                    {"ball_R", 12},    {"eps", 0.2},      {"words", json::array()}};
        case ExperimentKind::Schreier:
            return {{"generators", 2}, {"n", {100, 200, 400, 800}}, {"trials", 8}};
        case ExperimentKind::Gromov:
            return {{"triangles", 200}, {"max_radius", 6.0}, {"divergence_r", 8.0}, {"eta", 0.01}, {"flow_tol", 1e-10}};
    }
    throw ConfigError("unknown experiment kind");
}

json parse_config_text(const std::string& text, ConfigFormat format) {
    if (format == ConfigFormat::Auto) {
        auto pos = text.find_first_not_of(" \t\r\n");
        format = pos != std::string::npos && text[pos] == '{' ? ConfigFormat::Json : ConfigFormat::Toml;
    }
    if (format == ConfigFormat::Json) {
        try {
            return json::parse(text);
        } catch (const json::parse_error& e) {
            throw ConfigError(std::string("JSON parse error: ") + e.what());
        }
    }
    try {
        toml::table tbl = toml::parse(text);
        return toml_to_json(tbl);
    } catch (const toml::parse_error& e) {
        std::ostringstream os;
        os << "TOML parse error at line " << e.source().begin.line << ": " << e.description();
        throw ConfigError(os.str());
    }
}

ExperimentConfig validate_config(const std::string& text, ConfigFormat format, const ConfigOverrides& overrides) {
    return validate_config(parse_config_text(text, format), overrides);
}

ExperimentConfig validate_config(const json& raw, const ConfigOverrides& overrides) {
    if (!raw.is_object()) throw ConfigError("config: top level must be a table");
    ExperimentConfig cfg;

    std::string kind;
    if (raw.contains("experiment")) {
        require(raw["experiment"].is_string(), "experiment", "expected a string");
        kind = raw["experiment"].get<std::string>();
    }
    if (overrides.kind) {
        if (!kind.empty() && kind != *overrides.kind)
            throw ConfigError("experiment: config names \"" + kind + "\" but \"" + *overrides.kind + "\" was requested");
        kind = *overrides.kind;
    }
    if (kind.empty()) throw ConfigError("experiment: required");
    cfg.kind = parse_kind(kind);

    for (const auto& [key, value] : raw.items()) {
        if (key == "experiment" || key == "seed" || key == "model" || key == "output" || key == "threads") continue;
        if (key == kind) continue;
        throw ConfigError(key + ": unknown key");
    }

    if (overrides.seed) {
        cfg.seed = *overrides.seed;
    } else if (raw.contains("seed")) {
        cfg.seed = parse_seed(raw["seed"], "seed");
    } else if (overrides.seed_fallback) {
        cfg.seed = *overrides.seed_fallback;
    } else {
        throw ConfigError("seed required");
    }

    if (raw.contains("model")) {
        const json& m = raw["model"];
        require(m.is_object(), "model", "expected a table");
        for (const auto& [key, value] : m.items()) {
            const std::string path = "model." + key;
            if (key == "kappa" || key == "epsilon" || key == "bump_radius") {
                require(value.is_number(), path, "expected a number");
            } else if (key == "group_file") {
                require(value.is_string(), path, "expected a string");
            } else {
                throw ConfigError(path + ": unknown key");
            }
        }
        if (m.contains("kappa")) cfg.model.kappa = m["kappa"].get<double>();
        require(cfg.model.kappa > 0, "model.kappa", "must be positive");
        if (m.contains("epsilon")) {
            cfg.model.perturbed = true;
            cfg.model.epsilon = m["epsilon"].get<double>();
            require(cfg.model.epsilon >= 0, "model.epsilon", "must be nonnegative");
            require(cfg.model.kappa == 1.0, "model.kappa", "perturbed models are built on curvature -1");
        }
        if (m.contains("bump_radius")) {
            require(cfg.model.perturbed, "model.bump_radius", "requires model.epsilon");
            cfg.model.bump_radius = m["bump_radius"].get<double>();
            require(cfg.model.bump_radius > 0, "model.bump_radius", "must be positive");
        }
        if (m.contains("group_file")) cfg.model.group_file = m["group_file"].get<std::string>();
    }

    if (raw.contains("output")) {
        require(raw["output"].is_string() && !raw["output"].get<std::string>().empty(), "output",
                "expected a nonempty string");
        cfg.output = raw["output"].get<std::string>();
    }
    if (overrides.output) cfg.output = *overrides.output;
    if (raw.contains("threads")) {
        require(is_integer(raw["threads"]), "threads", "expected an integer");
        cfg.threads = raw["threads"].get<int>();
    }
    if (overrides.threads) cfg.threads = *overrides.threads;
    require(cfg.threads >= 1, "threads", "must be at least 1");

    json params = default_params(cfg.kind);
    if (raw.contains(kind)) {
        const json& sec = raw[kind];
        require(sec.is_object(), kind, "expected a table");
        for (const auto& [key, value] : sec.items()) {
            const std::string path = kind + "." + key;
            if (!params.contains(key)) throw ConfigError(path + ": unknown key");
            params[key] = merge_typed(params[key], value, path);
        }
    }
    check_params(cfg.kind, params);
    cfg.params = std::move(params);
    return cfg;
}

json canonical_config(const ExperimentConfig& cfg) {
    json model = json::object();
    if (cfg.model.perturbed) {
        model["epsilon"] = cfg.model.epsilon;
        model["bump_radius"] = cfg.model.bump_radius;
    } else {
        model["kappa"] = cfg.model.kappa;
    }
    if (!cfg.model.group_file.empty()) model["group_file"] = cfg.model.group_file;
    const std::string kind = kind_name(cfg.kind);
    return {{"experiment", kind}, {"seed", cfg.seed},       {"model", model},
            {"output", cfg.output}, {"threads", cfg.threads}, {kind, cfg.params}};
}

std::string config_hash(const ExperimentConfig& cfg) {
    json c = canonical_config(cfg);
    c.erase("output");
    c.erase("threads");
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, fnv1a(c.dump()));
    return buf;
}

FuchsianGroup load_group(const ModelSpec& spec) {
    return spec.group_file.empty() ? FuchsianGroup::bolza() : FuchsianGroup::from_file(spec.group_file);
}

SurfaceModel build_model(const ModelSpec& spec, const FuchsianGroup& group) {
    if (spec.perturbed) return SurfaceModel::perturbed(group, spec.epsilon, spec.bump_radius);
    return SurfaceModel::constant(spec.kappa);
}

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first;
    std::mutex mu;
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(mu);
                if (!first) first = std::current_exception();
                next = count;
            }
        }
    };
    std::vector<std::thread> pool;
    const int n = static_cast<int>(std::min<std::size_t>(threads, count));
    for (int k = 0; k < n; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (first) std::rethrow_exception(first);
}

std::vector<OrbitRecord> collect_orbits(const SurfaceModel& model, const FuchsianGroup& group, double max_length,
                                        const OrbitOptions& opt) {
    if (model.is_perturbed() && model.epsilon() < 0)
        throw InvalidModel("orbit enumeration needs epsilon >= 0 (lengths must dominate the hyperbolic ones)");
    const double kappa = model.is_perturbed() ? 1.0 : model.kappa();
    auto classes = enumerate_closed_geodesics(group, kappa * max_length);
    std::vector<OrbitRecord> out(classes.size());
    if (model.is_constant_curvature() && !opt.numerical) {
        for (std::size_t i = 0; i < classes.size(); ++i) {
            const double lam = classes[i].length;
            out[i] = {classes[i].word, lam / kappa, lam, 4 * std::sinh(lam / 2) * std::sinh(lam / 2), 0.0};
        }
        return out;
    }
    CloseOptions co;
    co.tol = opt.closure_tol;
    const FuchsianGroup* word_group = model.is_perturbed() ? nullptr : &group;
    parallel_for(classes.size(), opt.threads, [&](std::size_t i) {
        ClosedGeodesic geo = close_geodesic(model, classes[i].word, co, word_group);
        OrbitRecord r{classes[i].word, geo.length, geo.unstable_exponent, 0.0, geo.closure_residual};
        r.det_term = opt.poincare_data ? poincare_data(model, geo).det_term
                                       : 4 * std::sinh(r.lambda / 2) * std::sinh(r.lambda / 2);
        out[i] = r;
    });
    out.erase(std::remove_if(out.begin(), out.end(), [&](const OrbitRecord& r) { return r.length > max_length; }),
              out.end());
    std::stable_sort(out.begin(), out.end(),
                     [](const OrbitRecord& a, const OrbitRecord& b) { return a.length < b.length; });
    return out;
}

RunResult run_experiment(const ExperimentConfig& cfg) {
    const auto start = std::chrono::steady_clock::now();
    std::filesystem::path dir(cfg.output);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw ConfigError("output: cannot create " + cfg.output + ": " + ec.message());
    RunContext ctx{cfg, dir, config_hash(cfg), {}};
    ctx.result.summary = json::object();
    switch (cfg.kind) {
        case ExperimentKind::Pressure: run_pressure(ctx); break;
        case ExperimentKind::AppendixA: run_appendix_a(ctx); break;
        case ExperimentKind::Consistency: run_consistency(ctx); break;
        case ExperimentKind::Spherical: run_spherical(ctx); break;
        case ExperimentKind::Filtered: run_filtered(ctx); break;
        case ExperimentKind::StrongConv: run_strongconv(ctx); break;
        case ExperimentKind::Schreier: run_schreier(ctx); break;
        case ExperimentKind::Gromov: run_gromov(ctx); break;
    }
    ctx.result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    json manifest = {
        {"experiment", kind_name(cfg.kind)},
        {"config_hash", ctx.hash},
        {"seed", cfg.seed},
        {"threads", cfg.threads},
        {"wall_time_seconds", ctx.result.wall_seconds},
        {"files", ctx.result.files},
        {"config", canonical_config(cfg)},
        {"summary", ctx.result.summary},
        {"versions",
         {{"hyperlab", kVersion},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"boost", BOOST_LIB_VERSION},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"tomlplusplus", std::to_string(TOML_LIB_MAJOR) + "." + std::to_string(TOML_LIB_MINOR) + "." +
                               std::to_string(TOML_LIB_PATCH)},
          {"compiler", __VERSION__}}},
    };
    std::ofstream mf(dir / "manifest.json");
    if (!mf) throw ConfigError("cannot write manifest.json");
    mf << manifest.dump(2) << '\n';
    return ctx.result;
}

}  // namespace hyperlab
