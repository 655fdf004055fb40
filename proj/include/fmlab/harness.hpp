#pragma once

// Experiment runners, JSON configuration and reports.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "fmlab/corpus.hpp"
#include "fmlab/error.hpp"
#include "fmlab/fracint.hpp"
#include "fmlab/grid.hpp"
#include "fmlab/norms.hpp"
#include "fmlab/semigroup.hpp"

namespace fmlab::harness {

using json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "1.0.0";

// ---------------------------------------------------------------------------
// Configuration

struct Thresholds {
    double drift = 1.5;
    double decay = 0.25;
    double step_slack = 0.10;
    double dilation = 0.05;
    double skip = 1e-12;
    // Input filters for the vanishing-Morrey experiment.
    double vm_slope = 0.9;
    double vmo_slope = 0.75;
    double weak_target = 0.05;
    double lp_growth = 0.20;
    double embedding_stability = 0.20;
    double bmo_stability = 0.10;
    double vmo_ratio = 0.5;
    double fit_stability = 0.20;
    double gaussian_heat = 0.01;
    double gaussian_stability = 0.15;
    double kernel_heat = 0.02;
    double kernel_stability = 0.10;
    double difference_stability = 0.15;
    double domination = 0.01;
    double feynman_kac = 1e-8;
    double closed_form = 1e-12;
};

struct KernelSettings {
    double periodic_L = 8.0;
    std::vector<std::size_t> periodic_N_list{128, 256};
    std::vector<std::size_t> difference_N_list{256, 512};
    std::vector<double> t_list{0.01, 0.1, 1.0};
    std::vector<double> difference_t_list{1.0 / 256, 1.0 / 64, 1.0 / 16, 0.25, 1.0, 4.0};
    std::vector<double> alphas{0.25, 0.5};
    double A = 0.25;
    double A_nonheat = 0.125;
    int semigroup_substeps = 64;
};

struct ExperimentConfig {
    std::string experiment = "thm1";
    int n = 1;
    std::vector<std::size_t> N_list{512, 1024};
    double L = 16.0;
    int padding = 2;

    SemigroupKind kind = SemigroupKind::Heat;
    int substeps = 4;
    std::uint64_t potential_seed = 1;
    double potential_floor = 0.25;
    std::uint64_t coefficient_seed = 1;

    double alpha = 0.5;
    double p = 2.0;
    std::optional<double> lambda;
    std::optional<double> q;

    std::optional<double> t_min;
    std::optional<double> t_max;
    int nodes_per_decade = 16;

    double radii_min_mult = 2.0;
    double radii_max_frac = 0.25;
    double filter_max_frac = 1.0 / 32.0;

    std::uint64_t seed = 1;
    std::vector<Family> families{kAllFamilies.begin(), kAllFamilies.end()};
    int count = 2;
    double rho_reg_cells = 2.0;
    double log_delta = 0.5;
    // Clip radius (cells) of the weak-norm probe.
    double weak_probe_cells = 8.0;
    // Embedding exponent q in M^{q, n(1 - q/p)}.
    double embedding_q = 1.0;

    double dilation = 2.0;
    Thresholds thresholds;
    KernelSettings kernel;
};

inline const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names = {"thm1", "thm2", "cor3", "adams", "examples", "kernel-suite"};
    return names;
}

/// Defaults that differ per experiment.
inline ExperimentConfig default_config(const std::string& experiment) {
    ExperimentConfig c;
    c.experiment = experiment;
    if (experiment == "thm1") {
        c.families = {Family::GaussianBump, Family::SmoothBall, Family::Power, Family::Log, Family::LogPower, Family::Trig};
    } else if (experiment == "thm2") {
        c.N_list = {1024};
        c.radii_max_frac = 0.125;
        c.families = {Family::GaussianBump, Family::SmoothBall, Family::Log};
    } else if (experiment == "cor3") {
        c.N_list = {512, 1024, 2048};
        c.families = {Family::GaussianBump, Family::SmoothBall, Family::Power, Family::Log, Family::LogPower};
    } else if (experiment == "adams") {
        c.alpha = 0.25;
        c.p = 2.0;
        c.lambda = 0.25;
        c.N_list = {512, 1024, 2048};
        c.families = {Family::GaussianBump, Family::SmoothBall, Family::Power, Family::Log, Family::LogPower};
    } else if (experiment == "examples") {
        c.N_list = {512, 1024, 2048};
        c.families = {Family::GaussianBump, Family::SmoothBall, Family::Power, Family::Log, Family::LogPower, Family::Trig};
    } else if (experiment == "kernel-suite") {
        c.N_list = {256, 512, 1024};
        c.substeps = 4;
    } else {
        throw Error(ErrorCode::ConfigInvalid, "unknown experiment '" + experiment + "'");
    }
    return c;
}

namespace detail {

inline bool is_power_of_two(std::size_t v) { return v != 0 && (v & (v - 1)) == 0; }

inline void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : keys) known = known || it.key() == k;
        require(known, ErrorCode::ConfigInvalid, "unknown key '" + it.key() + "' in " + where);
    }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (!j.contains(key) || j.at(key).is_null()) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ConfigInvalid, std::string("bad value for '") + key + "': " + e.what());
    }
}

// Reads a number, "auto" or null into an optional.
inline void read_auto(const json& j, const char* key, std::optional<double>& out) {
    if (!j.contains(key) || j.at(key).is_null()) return;
    const auto& v = j.at(key);
    if (v.is_string()) {
        require(v.get<std::string>() == "auto", ErrorCode::ConfigInvalid, std::string("'") + key + "' must be a number or \"auto\"");
        out.reset();
        return;
    }
    require(v.is_number(), ErrorCode::ConfigInvalid, std::string("'") + key + "' must be a number or \"auto\"");
    out = v.get<double>();
}

inline SemigroupKind parse_kind(const std::string& s) {
    if (s == "heat") return SemigroupKind::Heat;
    if (s == "schrodinger") return SemigroupKind::Schrodinger;
    if (s == "divform") return SemigroupKind::Divform;
    throw Error(ErrorCode::ConfigInvalid, "unknown operator kind '" + s + "'");
}

}  // namespace detail

inline double adams_q(double n, double alpha, double p, double lambda) { return 1.0 / (1.0 / p - alpha / (n - lambda)); }

/// Enforces parameter relations and ranges; fills "auto" values.
inline void validate(ExperimentConfig& c) {
    using detail::is_power_of_two;
    const auto& names = experiment_names();
    require(std::find(names.begin(), names.end(), c.experiment) != names.end(), ErrorCode::ConfigInvalid,
            "unknown experiment '" + c.experiment + "'");
    require(c.n == 1 || c.n == 2, ErrorCode::ConfigInvalid, "grid.n must be 1 or 2");
    require(!c.N_list.empty(), ErrorCode::ConfigInvalid, "grid.N_list is empty");
    for (std::size_t k = 0; k < c.N_list.size(); ++k) {
        require(is_power_of_two(c.N_list[k]) && c.N_list[k] >= 16, ErrorCode::ConfigInvalid,
                "grid.N_list entries must be powers of two >= 16");
        if (k > 0) require(c.N_list[k] > c.N_list[k - 1], ErrorCode::ConfigInvalid, "grid.N_list must increase");
    }
    require(c.L > 0.0 && std::isfinite(c.L), ErrorCode::ConfigInvalid, "grid.L must be positive");
    require(c.padding >= 2, ErrorCode::ConfigInvalid, "grid.padding must be >= 2");
    require(c.alpha > 0.0 && c.alpha < c.n, ErrorCode::ConfigInvalid, "alpha must lie in (0, n)");
    require(c.p >= 1.0, ErrorCode::ConfigInvalid, "p must be >= 1");
    require(c.substeps >= 1, ErrorCode::ConfigInvalid, "operator.substeps must be >= 1");
    require(c.nodes_per_decade >= 8, ErrorCode::ConfigInvalid, "quadrature.nodes_per_decade must be >= 8");
    require(c.count >= 1, ErrorCode::ConfigInvalid, "corpus.count must be >= 1");
    require(!c.families.empty() || c.experiment == "kernel-suite", ErrorCode::ConfigInvalid, "corpus.families is empty");
    require(c.radii_min_mult >= 1.0 && c.radii_max_frac <= 0.25 && c.radii_max_frac > 0.0, ErrorCode::ConfigInvalid,
            "radii must satisfy min_mult >= 1 and max_frac <= 1/4");
    require(c.dilation > 0.0, ErrorCode::ConfigInvalid, "dilation must be positive");
    if (c.kind == SemigroupKind::Schrodinger) {
        require(c.potential_floor > 0.0, ErrorCode::ConfigInvalid,
                "periodic Schrodinger experiments need operator.potential.floor > 0 (decay on constants)");
    }
    if (c.kind == SemigroupKind::Divform) require(c.n == 1, ErrorCode::ConfigInvalid, "divform needs n = 1");

    if (c.experiment == "kernel-suite") {
        const auto& K = c.kernel;
        require(!K.t_list.empty() && !K.difference_t_list.empty() && !K.alphas.empty() && !K.periodic_N_list.empty() &&
                    !K.difference_N_list.empty(),
                ErrorCode::ConfigInvalid, "kernel lists must be non-empty");
        const double t_min = *std::min_element(K.t_list.begin(), K.t_list.end());
        const double h_compact = c.L / static_cast<double>(c.N_list.back());
        const double h_periodic = K.periodic_L / static_cast<double>(K.periodic_N_list.front());
        require(t_min >= h_compact * h_compact && t_min >= h_periodic * h_periodic, ErrorCode::ConfigInvalid,
                "kernel.t_list must stay above h^2 on every fitted grid");
        for (double a : K.alphas) require(a > 0.0 && a < c.n, ErrorCode::ConfigInvalid, "kernel.alphas must lie in (0, n)");
        require(K.A > 0.0 && K.A_nonheat > 0.0 && K.semigroup_substeps >= 1, ErrorCode::ConfigInvalid,
                "kernel.A, kernel.A_nonheat and kernel.semigroup_substeps must be positive");
    }

    const double n = c.n;
    if (c.experiment == "thm1" || c.experiment == "thm2") {
        const double lam = n - c.alpha * c.p;
        require(lam >= 0.0, ErrorCode::ConfigInvalid, "limiting relation needs alpha p <= n");
        if (c.lambda) {
            require(std::abs(*c.lambda - lam) <= 1e-12, ErrorCode::ConfigInvalid,
                    "lambda must equal n - alpha p = " + std::to_string(lam));
        }
        c.lambda = lam;
    } else if (c.experiment == "cor3") {
        const double p = n / c.alpha;
        if (c.p != 2.0 || p != 2.0) {
            require(std::abs(c.p - p) <= 1e-12, ErrorCode::ConfigInvalid, "cor3 needs p = n / alpha = " + std::to_string(p));
        }
        c.p = p;
        c.lambda = 0.0;
        require(c.embedding_q >= 1.0 && c.embedding_q < c.p, ErrorCode::ConfigInvalid, "embedding q must lie in [1, p)");
    } else if (c.experiment == "adams") {
        require(c.lambda.has_value(), ErrorCode::ConfigInvalid, "adams needs an explicit lambda");
        require(*c.lambda > 0.0 && *c.lambda < n - c.alpha * c.p, ErrorCode::ConfigInvalid,
                "adams needs 0 < lambda < n - alpha p");
        const double q = adams_q(n, c.alpha, c.p, *c.lambda);
        if (c.q) {
            require(std::abs(1.0 / *c.q - 1.0 / q) <= 1e-12, ErrorCode::ConfigInvalid,
                    "q must satisfy 1/q = 1/p - alpha/(n - lambda), q = " + std::to_string(q));
        }
        c.q = q;
    } else {
        if (!c.lambda) c.lambda = std::max(0.0, n - c.alpha * c.p);
    }
}

inline ExperimentConfig config_from_json(const json& j, const std::string& experiment_hint = "") {
    using detail::read;
    require(j.is_object(), ErrorCode::ConfigInvalid, "config must be a JSON object");
    std::string name = experiment_hint;
    if (j.contains("experiment")) {
        const auto e = j.at("experiment").get<std::string>();
        require(experiment_hint.empty() || e == experiment_hint, ErrorCode::ConfigInvalid,
                "config is for '" + e + "', not '" + experiment_hint + "'");
        name = e;
    }
    require(!name.empty(), ErrorCode::ConfigInvalid, "config has no experiment name");
    ExperimentConfig c = default_config(name);
    detail::reject_unknown(j, {"experiment", "grid", "operator", "alpha", "p", "lambda", "q", "quadrature", "radii", "corpus",
                               "dilation", "thresholds", "kernel", "weak_probe_cells", "embedding_q"},
                           "config");
    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        detail::reject_unknown(g, {"n", "N_list", "L", "padding"}, "grid");
        read(g, "n", c.n);
        read(g, "N_list", c.N_list);
        read(g, "L", c.L);
        read(g, "padding", c.padding);
    }
    if (j.contains("operator")) {
        const auto& o = j.at("operator");
        detail::reject_unknown(o, {"kind", "substeps", "potential", "coefficient"}, "operator");
        if (o.contains("kind")) c.kind = detail::parse_kind(o.at("kind").get<std::string>());
        read(o, "substeps", c.substeps);
        if (o.contains("potential")) {
            detail::reject_unknown(o.at("potential"), {"seed", "floor"}, "operator.potential");
            read(o.at("potential"), "seed", c.potential_seed);
            read(o.at("potential"), "floor", c.potential_floor);
        }
        if (o.contains("coefficient")) {
            detail::reject_unknown(o.at("coefficient"), {"seed"}, "operator.coefficient");
            read(o.at("coefficient"), "seed", c.coefficient_seed);
        }
    }
    read(j, "alpha", c.alpha);
    read(j, "p", c.p);
    detail::read_auto(j, "lambda", c.lambda);
    detail::read_auto(j, "q", c.q);
    if (j.contains("quadrature")) {
        const auto& q = j.at("quadrature");
        detail::reject_unknown(q, {"tmin", "tmax", "nodes_per_decade"}, "quadrature");
        detail::read_auto(q, "tmin", c.t_min);
        detail::read_auto(q, "tmax", c.t_max);
        read(q, "nodes_per_decade", c.nodes_per_decade);
    }
    if (j.contains("radii")) {
        const auto& r = j.at("radii");
        detail::reject_unknown(r, {"min_mult", "max_frac", "filter_max_frac"}, "radii");
        read(r, "min_mult", c.radii_min_mult);
        read(r, "max_frac", c.radii_max_frac);
        read(r, "filter_max_frac", c.filter_max_frac);
    }
    if (j.contains("corpus")) {
        const auto& k = j.at("corpus");
        detail::reject_unknown(k, {"seed", "families", "count", "rho_reg_cells", "log_delta"}, "corpus");
        read(k, "seed", c.seed);
        read(k, "count", c.count);
        read(k, "rho_reg_cells", c.rho_reg_cells);
        read(k, "log_delta", c.log_delta);
        if (k.contains("families")) {
            c.families.clear();
            try {
                for (const auto& f : k.at("families")) c.families.push_back(parse_family(f.get<std::string>()));
            } catch (const Error& e) {
                throw Error(ErrorCode::ConfigInvalid, e.what());
            }
        }
    }
    read(j, "dilation", c.dilation);
    read(j, "weak_probe_cells", c.weak_probe_cells);
    read(j, "embedding_q", c.embedding_q);
    if (j.contains("thresholds")) {
        const auto& t = j.at("thresholds");
        auto& T = c.thresholds;
        detail::reject_unknown(t, {"drift", "decay", "step_slack", "dilation", "skip", "vm_slope", "vmo_slope", "weak_target",
                                   "lp_growth", "embedding_stability", "bmo_stability", "vmo_ratio", "fit_stability",
                                   "gaussian_heat", "gaussian_stability", "kernel_heat", "kernel_stability",
                                   "difference_stability", "domination", "feynman_kac", "closed_form"},
                               "thresholds");
        read(t, "drift", T.drift);
        read(t, "decay", T.decay);
        read(t, "step_slack", T.step_slack);
        read(t, "dilation", T.dilation);
        read(t, "skip", T.skip);
        read(t, "vm_slope", T.vm_slope);
        read(t, "vmo_slope", T.vmo_slope);
        read(t, "weak_target", T.weak_target);
        read(t, "lp_growth", T.lp_growth);
        read(t, "embedding_stability", T.embedding_stability);
        read(t, "bmo_stability", T.bmo_stability);
        read(t, "vmo_ratio", T.vmo_ratio);
        read(t, "fit_stability", T.fit_stability);
        read(t, "gaussian_heat", T.gaussian_heat);
        read(t, "gaussian_stability", T.gaussian_stability);
        read(t, "kernel_heat", T.kernel_heat);
        read(t, "kernel_stability", T.kernel_stability);
        read(t, "difference_stability", T.difference_stability);
        read(t, "domination", T.domination);
        read(t, "feynman_kac", T.feynman_kac);
        read(t, "closed_form", T.closed_form);
    }
    if (j.contains("kernel")) {
        const auto& k = j.at("kernel");
        auto& K = c.kernel;
        detail::reject_unknown(k, {"periodic_L", "periodic_N_list", "difference_N_list", "t_list", "difference_t_list", "alphas",
                                   "A", "A_nonheat", "semigroup_substeps"},
                               "kernel");
        read(k, "periodic_L", K.periodic_L);
        read(k, "periodic_N_list", K.periodic_N_list);
        read(k, "difference_N_list", K.difference_N_list);
        read(k, "t_list", K.t_list);
        read(k, "difference_t_list", K.difference_t_list);
        read(k, "alphas", K.alphas);
        read(k, "A", K.A);
        read(k, "A_nonheat", K.A_nonheat);
        read(k, "semigroup_substeps", K.semigroup_substeps);
    }
    validate(c);
    return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path, const std::string& experiment_hint = "") {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorCode::IoFailure, "cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ConfigInvalid, "config " + path.string() + " is not valid JSON: " + e.what());
    }
    return config_from_json(j, experiment_hint);
}

inline json to_json(const ExperimentConfig& c) {
    json j;
    j["experiment"] = c.experiment;
    j["grid"] = {{"n", c.n}, {"N_list", c.N_list}, {"L", c.L}, {"padding", c.padding}};
    j["operator"] = {{"kind", to_string(c.kind)},
                     {"substeps", c.substeps},
                     {"potential", {{"seed", c.potential_seed}, {"floor", c.potential_floor}}},
                     {"coefficient", {{"seed", c.coefficient_seed}}}};
    j["alpha"] = c.alpha;
    j["p"] = c.p;
    j["lambda"] = c.lambda ? json(*c.lambda) : json("auto");
    j["q"] = c.q ? json(*c.q) : json("auto");
    j["quadrature"] = {{"tmin", c.t_min ? json(*c.t_min) : json("auto")},
                       {"tmax", c.t_max ? json(*c.t_max) : json("auto")},
                       {"nodes_per_decade", c.nodes_per_decade}};
    j["radii"] = {{"min_mult", c.radii_min_mult}, {"max_frac", c.radii_max_frac}, {"filter_max_frac", c.filter_max_frac}};
    json fams = json::array();
    for (Family f : c.families) fams.push_back(to_string(f));
    j["corpus"] = {{"seed", c.seed}, {"families", fams}, {"count", c.count}, {"rho_reg_cells", c.rho_reg_cells},
                   {"log_delta", c.log_delta}};
    j["dilation"] = c.dilation;
    j["weak_probe_cells"] = c.weak_probe_cells;
    j["embedding_q"] = c.embedding_q;
    const auto& T = c.thresholds;
    j["thresholds"] = {{"drift", T.drift},
                       {"decay", T.decay},
                       {"step_slack", T.step_slack},
                       {"dilation", T.dilation},
                       {"skip", T.skip},
                       {"vm_slope", T.vm_slope},
                       {"vmo_slope", T.vmo_slope},
                       {"weak_target", T.weak_target},
                       {"lp_growth", T.lp_growth},
                       {"embedding_stability", T.embedding_stability},
                       {"bmo_stability", T.bmo_stability},
                       {"vmo_ratio", T.vmo_ratio},
                       {"fit_stability", T.fit_stability},
                       {"gaussian_heat", T.gaussian_heat},
                       {"gaussian_stability", T.gaussian_stability},
                       {"kernel_heat", T.kernel_heat},
                       {"kernel_stability", T.kernel_stability},
                       {"difference_stability", T.difference_stability},
                       {"domination", T.domination},
                       {"feynman_kac", T.feynman_kac},
                       {"closed_form", T.closed_form}};
    if (c.experiment == "kernel-suite") {
        const auto& K = c.kernel;
        j["kernel"] = {{"periodic_L", K.periodic_L},
                       {"periodic_N_list", K.periodic_N_list},
                       {"difference_N_list", K.difference_N_list},
                       {"t_list", K.t_list},
                       {"difference_t_list", K.difference_t_list},
                       {"alphas", K.alphas},
                       {"A", K.A},
                       {"A_nonheat", K.A_nonheat},
                       {"semigroup_substeps", K.semigroup_substeps}};
    }
    return j;
}

// ---------------------------------------------------------------------------
// Reports

struct Row {
    std::size_t N = 0;
    std::string id;
    std::string numerator_norm;
    std::string denominator_norm;
    double numerator = 0.0;
    double denominator = 0.0;
    double ratio = 0.0;
    bool skipped = false;
    std::string note;
};

struct Fit {
    std::string name;
    std::size_t N = 0;
    double value = 0.0;
    json witness;
};

struct Series {
    std::string name;
    std::string x_label;
    std::string y_label;
    std::vector<double> x;
    std::vector<double> y;
};

struct Check {
    std::string name;
    bool pass = false;
    double value = 0.0;
    double threshold = 0.0;
    std::string detail;
};

struct ExperimentReport {
    std::string experiment;
    json config;
    std::vector<Row> rows;
    std::vector<Fit> fits;
    std::vector<Series> series;
    std::vector<Check> checks;
    std::vector<std::string> notes;
    bool pass = false;

    const Check* find_check(const std::string& name) const {
        for (const auto& c : checks) {
            if (c.name == name) return &c;
        }
        return nullptr;
    }
    const Fit* find_fit(const std::string& name, std::size_t N = 0) const {
        for (const auto& f : fits) {
            if (f.name == name && (N == 0 || f.N == N)) return &f;
        }
        return nullptr;
    }

    void add_check(std::string name, bool pass, double value, double threshold, std::string detail) {
        checks.push_back({std::move(name), pass, value, threshold, std::move(detail)});
    }
    void finalize() {
        pass = !checks.empty();
        for (const auto& c : checks) pass = pass && c.pass;
    }
};

namespace detail {

// JSON has no NaN or Inf; those become null.
inline json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace detail

inline json to_json(const ExperimentReport& r) {
    using detail::number;
    json j;
    j["experiment"] = r.experiment;
    j["config"] = r.config;
    json rows = json::array();
    for (const auto& row : r.rows) {
        json x = {{"N", row.N},
                  {"id", row.id},
                  {"numerator_norm", row.numerator_norm},
                  {"denominator_norm", row.denominator_norm},
                  {"numerator", number(row.numerator)},
                  {"denominator", number(row.denominator)},
                  {"ratio", row.skipped ? json(nullptr) : number(row.ratio)},
                  {"skipped", row.skipped}};
        if (!row.note.empty()) x["note"] = row.note;
        rows.push_back(std::move(x));
    }
    j["rows"] = std::move(rows);
    json fits = json::array();
    for (const auto& f : r.fits) fits.push_back({{"name", f.name}, {"N", f.N}, {"value", number(f.value)}, {"witness", f.witness}});
    j["fits"] = std::move(fits);
    json series = json::array();
    for (const auto& s : r.series) {
        json ys = json::array();
        for (double v : s.y) ys.push_back(number(v));
        series.push_back({{"name", s.name}, {"x_label", s.x_label}, {"y_label", s.y_label}, {"x", s.x}, {"y", ys}});
    }
    j["series"] = std::move(series);
    json checks = json::array();
    for (const auto& c : r.checks) {
        checks.push_back({{"name", c.name},
                          {"pass", c.pass},
                          {"value", number(c.value)},
                          {"threshold", number(c.threshold)},
                          {"detail", c.detail}});
    }
    j["checks"] = std::move(checks);
    j["pass"] = r.pass;
    j["notes"] = r.notes;
    j["environment"] = {{"seed", r.config.contains("corpus") ? r.config["corpus"]["seed"] : json(nullptr)}, {"version", kVersion}};
    return j;
}

inline void write_json(const json& j, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorCode::IoFailure, "cannot write " + path.string());
    out << j.dump(2) << '\n';
    require(static_cast<bool>(out), ErrorCode::IoFailure, "write failed for " + path.string());
}

/// One CSV file per series, named <experiment>__<series>.csv.
inline std::vector<std::filesystem::path> write_series_csv(const ExperimentReport& r, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> out;
    for (const auto& s : r.series) {
        std::string name = r.experiment + "__" + s.name;
        for (char& ch : name) {
            if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_' || ch == '.')) ch = '_';
        }
        const auto path = dir / (name + ".csv");
        std::ofstream f(path);
        require(static_cast<bool>(f), ErrorCode::IoFailure, "cannot write " + path.string());
        f.precision(17);
        f << s.x_label << ',' << s.y_label << '\n';
        for (std::size_t i = 0; i < s.x.size(); ++i) f << s.x[i] << ',' << s.y[i] << '\n';
        out.push_back(path);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Building blocks

/// One grid level: spec, corpus drawn on it, backend and radius set.
struct Level {
    GridSpec spec;
    std::vector<TestFunction> corpus;
    SemigroupOperator op;
    std::vector<double> radii;
};

inline GridSpec level_spec(const ExperimentConfig& c, std::size_t N) { return GridSpec(c.n, N, c.L, c.padding); }

inline CorpusSpec corpus_spec(const ExperimentConfig& c, const GridSpec& spec) {
    CorpusSpec cs;
    cs.seed = c.seed;
    cs.families = c.families;
    cs.count = c.count;
    cs.grid = spec;
    cs.rho_reg_cells = c.rho_reg_cells;
    cs.log_delta = c.log_delta;
    cs.power_p = c.p;
    // The borderline member |x|^{-(n - lambda)/p} of M^{p, lambda}.
    if (c.lambda && c.experiment != "cor3" && c.experiment != "examples") {
        cs.power_exponent = (c.n - *c.lambda) / c.p;
    }
    return cs;
}

inline GridFunction potential_on(const ExperimentConfig& c, const GridSpec& spec, double floor) {
    CorpusSpec cs;
    cs.seed = c.potential_seed;
    cs.families = {Family::Potential};
    cs.count = 1;
    cs.grid = spec;
    const auto V = generate(cs)[0].f;
    return transform(V, [floor](double v) { return v + floor; });
}

inline GridFunction coefficient_on(const ExperimentConfig& c, const GridSpec& spec) {
    CorpusSpec cs;
    cs.seed = c.coefficient_seed;
    cs.families = {Family::Coefficient};
    cs.count = 1;
    cs.grid = spec;
    return generate(cs)[0].f;
}

/// Backend on the torus of `spec`.
inline SemigroupOperator make_operator(const ExperimentConfig& c, const GridSpec& spec) {
    switch (c.kind) {
        case SemigroupKind::Heat: return SemigroupOperator::heat(spec);
        case SemigroupKind::Schrodinger:
            return SemigroupOperator::schrodinger(potential_on(c, spec, c.potential_floor).with_support(SupportTag::Periodic),
                                                  c.substeps);
        case SemigroupKind::Divform: return SemigroupOperator::divform(coefficient_on(c, spec));
    }
    throw Error(ErrorCode::ConfigInvalid, "unknown backend");
}

inline FracOperator make_frac(const ExperimentConfig& c, const SemigroupOperator& op, double alpha) {
    auto q = QuadratureSpec::defaults(op.spec(), c.nodes_per_decade);
    if (c.t_min) q.t_min = *c.t_min;
    if (c.t_max) q.t_max = *c.t_max;
    const DcMode dc = op.conserves_constants() ? DcMode::ProjectMeanZero : DcMode::None;
    return FracOperator(op, alpha, q, dc);
}

inline Level make_level(const ExperimentConfig& c, std::size_t N) {
    const GridSpec spec = level_spec(c, N);
    std::vector<TestFunction> corpus = c.families.empty() ? std::vector<TestFunction>{} : generate(corpus_spec(c, spec));
    // Experiments run on the torus; compact draws vanish near the seam.
    for (auto& t : corpus) t.f = t.f.with_support(SupportTag::Periodic);
    return Level{spec, std::move(corpus), make_operator(c, spec), dyadic_radii(spec, c.radii_min_mult, c.radii_max_frac)};
}

enum class RatioKind { Thm1, Cor3, Adams, Embedding, BmoLOverBmo, BmoOverCis };

inline std::string to_string(RatioKind k) {
    switch (k) {
        case RatioKind::Thm1: return "thm1";
        case RatioKind::Cor3: return "cor3";
        case RatioKind::Adams: return "adams";
        case RatioKind::Embedding: return "embedding";
        case RatioKind::BmoLOverBmo: return "bmoL-over-bmo";
        case RatioKind::BmoOverCis: return "bmo-over-cis";
    }
    return "unknown";
}

inline RatioKind parse_ratio_kind(const std::string& s) {
    for (auto k : {RatioKind::Thm1, RatioKind::Cor3, RatioKind::Adams, RatioKind::Embedding, RatioKind::BmoLOverBmo,
                   RatioKind::BmoOverCis}) {
        if (to_string(k) == s) return k;
    }
    throw Error(ErrorCode::UnknownName, "unknown ratio kind '" + s + "'");
}

/// Numerator and denominator for one corpus function.
inline Row ratio_row(const ExperimentConfig& c, const Level& level, const TestFunction& t, RatioKind kind) {
    Row row;
    row.N = level.spec.points_per_axis();
    row.id = t.id;
    const auto& f = t.f;
    const int n = c.n;
    const double lambda = c.lambda.value_or(0.0);
    auto frac = [&] { return frac_apply(make_frac(c, level.op, c.alpha), f); };
    switch (kind) {
        case RatioKind::Thm1:
            row.numerator_norm = "bmo-L(frac f) mean-abs";
            row.denominator_norm = "morrey p=" + std::to_string(c.p) + " lambda=" + std::to_string(lambda);
            row.numerator = bmoL_norm(frac(), level.op, level.radii).value;
            row.denominator = morrey_norm(f, MorreyParams(n, c.p, lambda), level.radii).value;
            break;
        case RatioKind::Cor3:
            row.numerator_norm = "bmo-L(frac f) mean-abs";
            row.denominator_norm = "weak-L^p p=" + std::to_string(c.p);
            row.numerator = bmoL_norm(frac(), level.op, level.radii).value;
            row.denominator = weak_lp_norm(f, c.p);
            break;
        case RatioKind::Adams:
            row.numerator_norm = "morrey(frac f) q=" + std::to_string(*c.q) + " lambda=" + std::to_string(lambda);
            row.denominator_norm = "morrey p=" + std::to_string(c.p) + " lambda=" + std::to_string(lambda);
            row.numerator = morrey_norm(frac(), MorreyParams(n, *c.q, lambda), level.radii).value;
            row.denominator = morrey_norm(f, MorreyParams(n, c.p, lambda), level.radii).value;
            break;
        case RatioKind::Embedding: {
            const double lam = n * (1.0 - c.embedding_q / c.p);
            row.numerator_norm = "morrey q=" + std::to_string(c.embedding_q) + " lambda=" + std::to_string(lam);
            row.denominator_norm = "weak-L^p p=" + std::to_string(c.p);
            row.numerator = morrey_norm(f, MorreyParams(n, c.embedding_q, lam), level.radii).value;
            row.denominator = weak_lp_norm(f, c.p);
            break;
        }
        case RatioKind::BmoLOverBmo:
            row.numerator_norm = "bmo-L mean-abs";
            row.denominator_norm = "bmo mean-abs";
            row.numerator = bmoL_norm(f, level.op, level.radii).value;
            row.denominator = bmo_norm(f, OscillationMode::MeanAbs, level.radii).value;
            break;
        case RatioKind::BmoOverCis:
            row.numerator_norm = "bmo mean-abs";
            row.denominator_norm = "cis p=1";
            row.numerator = bmo_norm(f, OscillationMode::MeanAbs, level.radii).value;
            row.denominator = cis_norm(f, 1.0, level.radii).value;
            break;
    }
    const double scale = std::max(1.0, f.max_abs());
    if (!(row.denominator > c.thresholds.skip * scale)) {
        row.skipped = true;
        row.note = "denominator below skip threshold";
    } else {
        row.ratio = row.numerator / row.denominator;
    }
    return row;
}

inline json ratio_witness(RatioKind kind, std::size_t N, const std::string& id) {
    return {{"kind", "ratio"}, {"ratio", to_string(kind)}, {"N", N}, {"id", id}};
}

/// Scans the corpus of one level; returns the maximal ratio fit.
inline Fit ratio_scan(const ExperimentConfig& c, const Level& level, RatioKind kind, ExperimentReport& rep,
                      const std::function<bool(const TestFunction&)>& keep = nullptr) {
    Fit fit{"max-ratio-" + to_string(kind), level.spec.points_per_axis(), 0.0, json(nullptr)};
    for (const auto& t : level.corpus) {
        if (keep && !keep(t)) continue;
        Row row = ratio_row(c, level, t, kind);
        if (!row.skipped && row.ratio > fit.value) {
            fit.value = row.ratio;
            fit.witness = ratio_witness(kind, row.N, row.id);
        }
        rep.rows.push_back(std::move(row));
    }
    return fit;
}

/// max over consecutive levels of max(a/b, b/a).
inline double drift(const std::vector<double>& v) {
    double d = 1.0;
    for (std::size_t k = 1; k < v.size(); ++k) {
        if (v[k] <= 0.0 || v[k - 1] <= 0.0) return std::numeric_limits<double>::infinity();
        d = std::max(d, std::max(v[k] / v[k - 1], v[k - 1] / v[k]));
    }
    return d;
}

/// max over levels of |v_k / v_0 - 1|.
inline double relative_spread(const std::vector<double>& v) {
    double d = 0.0;
    for (double x : v) d = std::max(d, std::abs(x / v.front() - 1.0));
    return d;
}

inline std::vector<double> as_doubles(const std::vector<std::size_t>& v) { return {v.begin(), v.end()}; }

inline ExperimentReport start(const ExperimentConfig& c) {
    ExperimentReport rep;
    rep.experiment = c.experiment;
    rep.config = to_json(c);
    rep.notes.push_back("suprema run over dyadic radii in [" + std::to_string(c.radii_min_mult) + "h, " +
                        std::to_string(c.radii_max_frac) + "L] and all grid centers; balls are truncated at that radius");
    return rep;
}

/// Refinement series of the maximal ratio with its drift check.
inline std::vector<double> refinement_ratio(const ExperimentConfig& c, const std::vector<Level>& levels, RatioKind kind,
                                            ExperimentReport& rep, const std::string& check_name) {
    std::vector<double> maxima;
    for (const auto& level : levels) {
        Fit fit = ratio_scan(c, level, kind, rep);
        maxima.push_back(fit.value);
        rep.fits.push_back(std::move(fit));
    }
    rep.series.push_back({"max-ratio-" + to_string(kind), "N", "max_ratio", as_doubles(c.N_list), maxima});
    const double d = drift(maxima);
    rep.add_check(check_name, d <= c.thresholds.drift, d, c.thresholds.drift,
                  "max ratio drift between consecutive grid levels");
    return maxima;
}

// ---------------------------------------------------------------------------
// Experiments

/// ||L^{-alpha/2} f||_{BMO_L} / ||f||_{M^{p,lambda}} with lambda = n - alpha p.
inline ExperimentReport run_thm1(const ExperimentConfig& c) {
    ExperimentReport rep = start(c);
    std::vector<Level> levels;
    for (std::size_t N : c.N_list) levels.push_back(make_level(c, N));
    refinement_ratio(c, levels, RatioKind::Thm1, rep, "refinement-drift");

    if (c.kind == SemigroupKind::Heat) {
        // f_delta(x) = f(delta x) lives on the grid shrunk by delta with the same node values.
        const Level& base = levels.back();
        ExperimentConfig cd = c;
        cd.L = c.L / c.dilation;
        const GridSpec sd = base.spec.rescaled(1.0 / c.dilation);
        Level dil{sd, base.corpus, SemigroupOperator::heat(sd), dyadic_radii(sd, c.radii_min_mult, c.radii_max_frac)};
        for (auto& t : dil.corpus) t.f = t.f.with_spec(sd);
        double worst = 0.0;
        std::vector<double> changes;
        for (std::size_t i = 0; i < base.corpus.size(); ++i) {
            const Row a = ratio_row(c, base, base.corpus[i], RatioKind::Thm1);
            const Row b = ratio_row(cd, dil, dil.corpus[i], RatioKind::Thm1);
            if (a.skipped || b.skipped) continue;
            const double ch = std::abs(b.ratio / a.ratio - 1.0);
            changes.push_back(ch);
            worst = std::max(worst, ch);
        }
        rep.series.push_back({"dilation-change", "function_index", "relative_change",
                              [&] {
                                  std::vector<double> x;
                                  for (std::size_t i = 0; i < changes.size(); ++i) x.push_back(static_cast<double>(i));
                                  return x;
                              }(),
                              changes});
        rep.add_check("dilation-invariance", worst <= c.thresholds.dilation, worst, c.thresholds.dilation,
                      "per-function ratio change under x -> " + std::to_string(c.dilation) + " x");
    } else {
        rep.notes.push_back("dilation probe runs for the heat backend only");
    }
    rep.finalize();
    return rep;
}

struct MembershipVerdict {
    bool declared = false;
    double morrey_slope = 0.0;
    double vmo_slope = 0.0;
    bool vm_ok = false;
    bool vmo_ok = false;
    bool included() const { return declared && vm_ok && vmo_ok; }
};

/// Desk-scale evidence that f lies in VM^{p,lambda} and VMO: log-log slopes of
/// the Morrey modulus and of eta(f; r) over [2h, filter_max_frac L].
inline MembershipVerdict vm_membership(const ExperimentConfig& c, const Level& level, const TestFunction& t) {
    MembershipVerdict v;
    v.declared = std::find(t.memberships.begin(), t.memberships.end(), "VM^{p,lambda}") != t.memberships.end();
    const auto radii = dyadic_radii(level.spec, c.radii_min_mult, c.filter_max_frac);
    const MorreyParams mp(c.n, c.p, c.lambda.value_or(0.0));
    std::vector<double> r_eff;
    for (double r : radii) r_eff.push_back(std::pow(BallMask(level.spec, r).measure() / unit_ball_volume(c.n), 1.0 / c.n));
    const auto mod = morrey_modulus_series(t.f, mp, radii);
    std::vector<double> eta;
    for (double r : radii) eta.push_back(vmo_modulus(t.f, r));
    auto positive = [](const std::vector<double>& y) {
        return std::all_of(y.begin(), y.end(), [](double x) { return x > 0.0; });
    };
    v.morrey_slope = positive(mod) ? loglog_slope(r_eff, mod) : 0.0;
    v.vmo_slope = positive(eta) ? loglog_slope(r_eff, eta) : 0.0;
    v.vm_ok = v.morrey_slope >= c.thresholds.vm_slope * mp.bounded_decay_rate();
    v.vmo_ok = v.vmo_slope >= c.thresholds.vmo_slope;
    return v;
}

/// r -> eta_L(L^{-alpha/2} f; r) for VM-verified corpus members.
inline ExperimentReport run_thm2(const ExperimentConfig& c) {
    ExperimentReport rep = start(c);
    const auto& T = c.thresholds;
    std::size_t included = 0;
    for (std::size_t N : c.N_list) {
        const Level level = make_level(c, N);
        const FracOperator frac = make_frac(c, level.op, c.alpha);
        for (const auto& t : level.corpus) {
            const auto v = vm_membership(c, level, t);
            if (!v.included()) {
                std::ostringstream why;
                why << t.id << " @N=" << N << " excluded:";
                if (!v.declared) why << " no declared VM membership;";
                if (!v.vm_ok) why << " Morrey modulus slope " << v.morrey_slope << " below filter;";
                if (!v.vmo_ok) why << " input VMO check failed (eta slope " << v.vmo_slope << ");";
                rep.notes.push_back(why.str());
                continue;
            }
            ++included;
            const auto u = frac_apply(frac, t.f);
            std::vector<double> eta;
            for (double r : level.radii) eta.push_back(vmoL_modulus(u, level.op, r));
            rep.series.push_back({"eta-L/" + t.id + "/N" + std::to_string(N), "radius", "eta_L", level.radii, eta});
            bool monotone = true;
            for (std::size_t k = 0; k + 1 < eta.size(); ++k) monotone = monotone && eta[k] <= (1.0 + T.step_slack) * eta[k + 1];
            const double ratio = eta.back() > 0.0 ? eta.front() / eta.back() : 0.0;
            const bool ok = monotone && ratio <= T.decay;
            Row row;
            row.N = N;
            row.id = t.id;
            row.numerator_norm = "eta_L(frac f; r_min)";
            row.denominator_norm = "eta_L(frac f; r_max)";
            row.numerator = eta.front();
            row.denominator = eta.back();
            row.ratio = ratio;
            if (!monotone) row.note = "series not decreasing within slack";
            rep.rows.push_back(row);
            rep.add_check("decay/" + t.id + "/N" + std::to_string(N), ok, ratio, T.decay,
                          monotone ? "eta_L(r_min)/eta_L(r_max)" : "series not decreasing within per-step slack");
        }
    }
    rep.add_check("vm-filter-nonempty", included > 0, static_cast<double>(included), 1.0,
                  "corpus functions passing the VM^{p,lambda} and VMO input checks");
    rep.finalize();
    return rep;
}

inline double weak_target(int n, double p) { return std::pow(unit_ball_volume(n), 1.0 / p); }

/// BMO_L over weak-L^{n/alpha}, plus the weak-norm probe and the embedding fit.
inline ExperimentReport run_cor3(const ExperimentConfig& c) {
    ExperimentReport rep = start(c);
    const auto& T = c.thresholds;
    std::vector<Level> levels;
    for (std::size_t N : c.N_list) levels.push_back(make_level(c, N));
    refinement_ratio(c, levels, RatioKind::Cor3, rep, "refinement-drift");

    // Embedding weak-L^p into M^{q, n(1 - q/p)}.
    std::vector<double> emb;
    for (const auto& level : levels) {
        Fit fit = ratio_scan(c, level, RatioKind::Embedding, rep);
        fit.name = "embedding-constant";
        emb.push_back(fit.value);
        rep.fits.push_back(std::move(fit));
    }
    rep.series.push_back({"embedding-constant", "N", "C", as_doubles(c.N_list), emb});
    const double es = relative_spread(emb);
    rep.add_check("embedding-stability", es <= T.embedding_stability, es, T.embedding_stability,
                  "fitted embedding constant spread across grid levels");

    // Clipped |x|^{-alpha}: weak norm converges while the L^p norm diverges.
    std::vector<double> weak, strong;
    for (std::size_t N : c.N_list) {
        CorpusSpec cs = corpus_spec(c, level_spec(c, N));
        cs.families = {Family::Power};
        cs.count = 1;
        cs.rho_reg_cells = c.weak_probe_cells;
        cs.power_exponent = c.n / c.p;
        const auto f = generate(cs)[0].f;
        weak.push_back(weak_lp_norm(f, c.p));
        strong.push_back(lp_norm(f, c.p));
    }
    rep.series.push_back({"weak-norm-probe", "N", "weak_norm", as_doubles(c.N_list), weak});
    rep.series.push_back({"lp-norm-probe", "N", "lp_norm", as_doubles(c.N_list), strong});
    const double target = weak_target(c.n, c.p);
    const double werr = std::abs(weak.back() / target - 1.0);
    rep.add_check("weak-norm-limit", werr <= T.weak_target, werr, T.weak_target,
                  "relative distance of the finest weak norm from v_n^{1/p} = " + std::to_string(target));
    double growth = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < strong.size(); ++k) growth = std::min(growth, strong[k] / strong[k - 1] - 1.0);
    if (strong.size() < 2) growth = 0.0;
    rep.add_check("lp-norm-growth", growth >= T.lp_growth, growth, T.lp_growth,
                  "smallest per-refinement growth of the L^p norm of the probe");
    rep.finalize();
    return rep;
}

/// M^{q,lambda} / M^{p,lambda} with 1/q = 1/p - alpha/(n - lambda).
inline ExperimentReport run_adams(const ExperimentConfig& c) {
    ExperimentReport rep = start(c);
    std::vector<Level> levels;
    for (std::size_t N : c.N_list) levels.push_back(make_level(c, N));
    refinement_ratio(c, levels, RatioKind::Adams, rep, "refinement-drift");
    rep.notes.push_back("q = " + std::to_string(*c.q) + " from 1/q = 1/p - alpha/(n - lambda)");
    rep.finalize();
    return rep;
}

/// Poincare, BMO of clipped log, VMO decay of |log|^delta, BMO_L <= C BMO.
inline ExperimentReport run_examples(const ExperimentConfig& c) {
    ExperimentReport rep = start(c);
    const auto& T = c.thresholds;
    std::vector<Level> levels;
    for (std::size_t N : c.N_list) levels.push_back(make_level(c, N));

    // (i) f(x) = x on seam-free balls: discrete closed form (m + 1)/(2m + 1), m = r/h.
    {
        const GridSpec& s = levels.back().spec;
        const double h = s.spacing();
        const auto f = sample(s, [](const Point& x) { return x[0]; }, SupportTag::Periodic);
        const auto grad = gradient_magnitude(f);
        double worst = 0.0;
        double last = 0.0, last_m = 1.0;
        std::vector<double> xs, ys;
        for (double r : levels.back().radii) {
            const double m = std::round(r / h);
            double at_r = 0.0;
            for (std::size_t i = 0; i < s.size(); ++i) {
                const Point x = s.node(i);
                bool seam = false;
                for (int a = 0; a < s.dimension(); ++a) seam = seam || std::abs(x[a]) + r >= 0.5 * s.side_length() - 2.0 * h;
                if (seam) continue;
                if (const auto v = poincare_ratio(f, grad, i, r)) {
                    worst = std::max(worst, std::abs(*v - (m + 1.0) / (2.0 * m + 1.0)));
                    at_r = *v;
                }
            }
            xs.push_back(r);
            ys.push_back(at_r);
            last = at_r;
            last_m = m;
        }
        rep.series.push_back({"poincare-linear", "radius", "ratio", xs, ys});
        rep.add_check("poincare-linear-closed-form", worst <= T.closed_form, worst, T.closed_form,
                      "max |ratio - (m+1)/(2m+1)| over seam-free balls");
        const double gap = std::abs(last - 0.5);
        const double bound = 1.0 / (4.0 * last_m);
        rep.add_check("poincare-linear-half", gap <= bound, gap, bound,
                      "|ratio - 1/2| at the largest radius against h/(4r)");
        rep.notes.push_back("Poincare ratios are normalized by the ball radius r");
    }

    // (ii) clipped log|P|: BMO norm stable across levels.
    {
        std::map<std::string, std::vector<double>> bmo;
        for (const auto& level : levels) {
            for (const auto& t : level.corpus) {
                if (t.family != Family::Log) continue;
                bmo[t.id].push_back(bmo_norm(t.f, OscillationMode::MeanAbs, level.radii).value);
            }
        }
        double worst = 0.0;
        for (const auto& [id, v] : bmo) {
            rep.series.push_back({"bmo-log/" + id, "N", "bmo", as_doubles(c.N_list), v});
            worst = std::max(worst, relative_spread(v));
        }
        if (bmo.empty()) rep.notes.push_back("no log family in corpus; BMO stability not checked");
        else rep.add_check("log-bmo-stability", worst <= T.bmo_stability, worst, T.bmo_stability, "BMO spread across levels");
    }

    // (iii) |log|x||^delta at the finest level.
    {
        const Level& level = levels.back();
        CorpusSpec cs = corpus_spec(c, level.spec);
        cs.families = {Family::LogPower};
        cs.count = 1;
        const auto f = generate(cs)[0].f;
        std::vector<double> eta;
        for (double r : level.radii) eta.push_back(vmo_modulus(f, r));
        rep.series.push_back({"vmo-log-power", "radius", "eta", level.radii, eta});
        const double ratio = eta.front() / eta.back();
        rep.add_check("log-power-vmo-decay", ratio <= T.vmo_ratio, ratio, T.vmo_ratio, "eta(r_min)/eta(r_max)");
    }

    // (iv) BMO_L <= C BMO and the Poincare-type BMO <= C CIS^1 fit.
    for (auto kind : {RatioKind::BmoLOverBmo, RatioKind::BmoOverCis}) {
        std::vector<double> C;
        for (const auto& level : levels) {
            auto smooth = [&](const TestFunction& t) {
                return kind == RatioKind::BmoLOverBmo || t.family == Family::GaussianBump ||
                       t.family == Family::SmoothBall || t.family == Family::Trig;
            };
            Fit fit = ratio_scan(c, level, kind, rep, smooth);
            C.push_back(fit.value);
            rep.fits.push_back(std::move(fit));
        }
        rep.series.push_back({"constant-" + to_string(kind), "N", "C", as_doubles(c.N_list), C});
        const double sp = relative_spread(C);
        rep.add_check("stability-" + to_string(kind), sp <= T.fit_stability && C.front() > 0.0, sp, T.fit_stability,
                      "fitted constant spread across levels");
    }
    rep.finalize();
    return rep;
}

namespace detail {

inline json kernel_witness(const std::string& kind, const std::string& backend, std::size_t N, double L, double t,
                           std::size_t row, std::size_t col, double distance) {
    return {{"kind", kind}, {"backend", backend}, {"N", N}, {"L", L}, {"t", t}, {"row", row}, {"col", col}, {"distance", distance}};
}

}  // namespace detail

/// Gaussian bound, kernel bound, difference-kernel bound and domination fits.
inline ExperimentReport run_kernel_suite(const ExperimentConfig& c) {
    ExperimentReport rep = start(c);
    const auto& T = c.thresholds;
    const auto& K = c.kernel;
    const int n = c.n;
    require(n == 1, ErrorCode::ConfigInvalid, "kernel-suite runs in one dimension");

    // Heat Gaussian bound on the finest compact grid.
    {
        const GridSpec s = level_spec(c, c.N_list.back());
        require_dense_budget(s);
        std::vector<KernelMatrix> ks;
        for (double t : K.t_list) ks.push_back(kernel_matrix(SemigroupOperator::heat(s), t, SupportTag::Compact));
        const auto fit = gaussian_bound_fit(ks, K.A);
        const double ref = std::pow(4.0 * std::numbers::pi, -0.5 * n);
        rep.fits.push_back({"gaussian-heat", s.points_per_axis(), fit.C_fit,
                            detail::kernel_witness("gaussian", "heat-compact", s.points_per_axis(), s.side_length(), fit.witness.t,
                                                   fit.witness.row, fit.witness.col, fit.witness.distance)});
        const double err = std::abs(fit.C_fit / ref - 1.0);
        rep.add_check("gaussian-heat", err <= T.gaussian_heat, err, T.gaussian_heat,
                      "relative distance of C_fit from (4 pi)^{-n/2} at A = " + std::to_string(K.A));
    }

    // Schrodinger and divform Gaussian bounds on the torus, with Feynman-Kac.
    {
        std::vector<double> cs, cd;
        double fk_worst = -std::numeric_limits<double>::infinity();
        double excess = -std::numeric_limits<double>::infinity();
        for (std::size_t N : K.periodic_N_list) {
            const GridSpec s(n, N, K.periodic_L, c.padding);
            require_dense_budget(s);
            const auto V = potential_on(c, s, 0.0).with_support(SupportTag::Periodic);
            const auto S = SemigroupOperator::schrodinger(V, K.semigroup_substeps);
            const auto H = SemigroupOperator::heat(s);
            const auto D = SemigroupOperator::divform(coefficient_on(c, s));
            std::vector<KernelMatrix> ks, kh, kd;
            for (double t : K.t_list) {
                ks.push_back(kernel_matrix(S, t));
                kh.push_back(kernel_matrix(H, t));
                kd.push_back(kernel_matrix(D, t));
                if (N == K.periodic_N_list.front()) {
                    fk_worst = std::max(fk_worst, (ks.back().entries - kh.back().entries).maxCoeff());
                }
            }
            const auto fs = gaussian_bound_fit(ks, K.A_nonheat);
            const auto fh = gaussian_bound_fit(kh, K.A_nonheat);
            const auto fd = gaussian_bound_fit(kd, K.A_nonheat);
            excess = std::max(excess, fs.C_fit - fh.C_fit);
            cs.push_back(fs.C_fit);
            cd.push_back(fd.C_fit);
            rep.fits.push_back({"gaussian-schrodinger", N, fs.C_fit,
                                detail::kernel_witness("gaussian", "schrodinger", N, K.periodic_L, fs.witness.t, fs.witness.row,
                                                       fs.witness.col, fs.witness.distance)});
            rep.fits.push_back({"gaussian-heat-periodic", N, fh.C_fit,
                                detail::kernel_witness("gaussian", "heat", N, K.periodic_L, fh.witness.t, fh.witness.row,
                                                       fh.witness.col, fh.witness.distance)});
            rep.fits.push_back({"gaussian-divform", N, fd.C_fit,
                                detail::kernel_witness("gaussian", "divform", N, K.periodic_L, fd.witness.t, fd.witness.row,
                                                       fd.witness.col, fd.witness.distance)});
        }
        rep.series.push_back({"gaussian-schrodinger", "N", "C_fit", as_doubles(K.periodic_N_list), cs});
        rep.series.push_back({"gaussian-divform", "N", "C_fit", as_doubles(K.periodic_N_list), cd});
        rep.add_check("feynman-kac", fk_worst <= T.feynman_kac, fk_worst, T.feynman_kac,
                      "max over entries of P^V_t - P_t at N = " + std::to_string(K.periodic_N_list.front()));
        rep.add_check("gaussian-schrodinger-below-heat", excess <= T.feynman_kac, excess, T.feynman_kac,
                      "C_fit(schrodinger) - C_fit(heat) on the same torus, A = " + std::to_string(K.A_nonheat));
        const double ss = relative_spread(cs), sd = relative_spread(cd);
        rep.add_check("gaussian-schrodinger-stability", std::isfinite(ss) && ss <= T.gaussian_stability, ss,
                      T.gaussian_stability, "C_fit spread across one refinement, A = " + std::to_string(K.A_nonheat));
        rep.add_check("gaussian-divform-stability", std::isfinite(sd) && sd <= T.gaussian_stability, sd, T.gaussian_stability,
                      "C_fit spread across one refinement, A = " + std::to_string(K.A_nonheat));
    }

    // |K_alpha| |x - y|^{n - alpha} for heat on compact grids.
    {
        const double alpha = c.alpha;
        std::vector<double> C;
        const double ref = 1.0 / riesz_gamma(alpha, n);
        double worst = 0.0;
        for (std::size_t N : c.N_list) {
            const GridSpec s = level_spec(c, N);
            require_dense_budget(s);
            const auto fit = kernel_bound_fit(frac_kernel(make_frac(c, SemigroupOperator::heat(s), alpha)), alpha);
            C.push_back(fit.constant);
            worst = std::max(worst, std::abs(fit.constant / ref - 1.0));
            rep.fits.push_back({"kernel-bound-heat", N, fit.constant,
                                detail::kernel_witness("kernel-bound", "heat-compact", N, s.side_length(), 0.0, fit.row, fit.col,
                                                       fit.distance)});
        }
        rep.series.push_back({"kernel-bound-heat", "N", "C", as_doubles(c.N_list), C});
        rep.add_check("kernel-bound-heat", worst <= T.kernel_heat, worst, T.kernel_heat,
                      "relative distance from 1/gamma(alpha) = " + std::to_string(ref));
        const double sp = relative_spread(C);
        rep.add_check("kernel-bound-stability", sp <= T.kernel_stability, sp, T.kernel_stability, "spread across grid levels");

        // Schrodinger (floored potential) on the torus against heat on the same box.
        const GridSpec s(n, K.periodic_N_list.back(), K.periodic_L, c.padding);
        const auto V = potential_on(c, s, c.potential_floor).with_support(SupportTag::Periodic);
        const FracOperator fs(SemigroupOperator::schrodinger(V, c.substeps), alpha, std::nullopt, DcMode::None);
        const auto ks = kernel_bound_fit(frac_kernel(fs, SupportTag::Periodic), alpha);
        const auto kh = kernel_bound_fit(frac_kernel(FracOperator(SemigroupOperator::heat(s), alpha)), alpha);
        rep.fits.push_back({"kernel-bound-schrodinger", s.points_per_axis(), ks.constant,
                            detail::kernel_witness("kernel-bound", "schrodinger", s.points_per_axis(), s.side_length(), 0.0,
                                                   ks.row, ks.col, ks.distance)});
        rep.add_check("kernel-bound-schrodinger-below-heat", ks.constant <= kh.constant + T.feynman_kac,
                      ks.constant - kh.constant, T.feynman_kac, "fitted constant excess over heat on the same box");
    }

    // Difference kernel (I - e^{-tL}) L^{-alpha/2}.
    for (const auto kind : {SemigroupKind::Heat, SemigroupKind::Schrodinger}) {
        for (double alpha : K.alphas) {
            std::vector<double> C;
            for (std::size_t N : K.difference_N_list) {
                const GridSpec s(n, N, K.periodic_L, c.padding);
                require_dense_budget(s);
                const FracOperator op =
                    kind == SemigroupKind::Heat
                        ? FracOperator(SemigroupOperator::heat(s), alpha)
                        : FracOperator(SemigroupOperator::schrodinger(
                                           potential_on(c, s, c.potential_floor).with_support(SupportTag::Periodic), c.substeps),
                                       alpha, std::nullopt, DcMode::None);
                const auto r = difference_kernel_bound_fit(op, K.difference_t_list);
                C.push_back(r.C_diff);
                json w = detail::kernel_witness("difference", to_string(kind), N, s.side_length(), r.t_at, r.row, r.col,
                                                r.distance);
                w["alpha"] = alpha;
                rep.fits.push_back({"difference-" + to_string(kind) + "-alpha" + std::to_string(alpha), N, r.C_diff, w});
            }
            const std::string name = "difference-" + to_string(kind) + "-alpha" + std::to_string(alpha);
            rep.series.push_back({name, "N", "C_diff", as_doubles(K.difference_N_list), C});
            const double sp = relative_spread(C);
            const bool finite = std::all_of(C.begin(), C.end(), [](double v) { return std::isfinite(v); });
            rep.add_check(name, finite && sp <= T.difference_stability, sp, T.difference_stability,
                          "C_diff spread across one refinement");
        }
    }

    // Pointwise domination by the Riesz potential of |f|.
    {
        const GridSpec s = level_spec(c, c.N_list.back());
        const auto pos = sample(s, [](const Point& x) { return std::exp(-x[0] * x[0]); }, SupportTag::Compact);
        const auto sgn = sample(s, [](const Point& x) { return (1.0 - 2.0 * x[0] * x[0]) * std::exp(-x[0] * x[0]); },
                                SupportTag::Compact);
        const double dh = domination_check(make_frac(c, SemigroupOperator::heat(s), c.alpha), pos);
        const auto S = SemigroupOperator::schrodinger(potential_on(c, s, 0.0), c.substeps);
        const double ds = domination_check(FracOperator(S, c.alpha), sgn);
        rep.fits.push_back({"domination-heat", s.points_per_axis(), dh, json(nullptr)});
        rep.fits.push_back({"domination-schrodinger", s.points_per_axis(), ds, json(nullptr)});
        rep.add_check("domination-heat", dh <= 1.0 + T.domination, dh, 1.0 + T.domination, "max |L^{-a/2} f| / I_a|f|, f >= 0");
        rep.add_check("domination-schrodinger", ds <= 1.0 + T.domination, ds, 1.0 + T.domination,
                      "max |L^{-a/2} f| / I_a|f|, signed f");
    }
    rep.notes.push_back("periodic fits use torus distance; compact fits restrict to the inner half-box");
    rep.notes.push_back("Schrodinger fractional kernels on the torus use the potential plus a floor of " +
                        std::to_string(c.potential_floor));
    rep.finalize();
    return rep;
}

inline ExperimentReport run(const ExperimentConfig& c) {
    if (c.experiment == "thm1") return run_thm1(c);
    if (c.experiment == "thm2") return run_thm2(c);
    if (c.experiment == "cor3") return run_cor3(c);
    if (c.experiment == "adams") return run_adams(c);
    if (c.experiment == "examples") return run_examples(c);
    if (c.experiment == "kernel-suite") return run_kernel_suite(c);
    throw Error(ErrorCode::ConfigInvalid, "unknown experiment '" + c.experiment + "'");
}

// ---------------------------------------------------------------------------
// Witness re-evaluation

/// Recomputes the value a fit witness points at.
inline double reevaluate(const ExperimentConfig& c, const json& w) {
    require(w.is_object() && w.contains("kind"), ErrorCode::InvalidArgument, "witness has no kind");
    const std::string kind = w.at("kind").get<std::string>();
    const auto N = w.at("N").get<std::size_t>();
    if (kind == "ratio") {
        const RatioKind rk = parse_ratio_kind(w.at("ratio").get<std::string>());
        const Level level = make_level(c, N);
        const std::string id = w.at("id").get<std::string>();
        for (const auto& t : level.corpus) {
            if (t.id == id) return ratio_row(c, level, t, rk).ratio;
        }
        throw Error(ErrorCode::InvalidArgument, "witness id " + id + " not in corpus");
    }
    const std::string backend = w.at("backend").get<std::string>();
    const double L = w.at("L").get<double>();
    const auto row = w.at("row").get<std::size_t>();
    const auto col = w.at("col").get<std::size_t>();
    const double t = w.at("t").get<double>();
    const GridSpec s(c.n, N, L, c.padding);
    auto schrodinger = [&](double floor, int substeps) {
        return SemigroupOperator::schrodinger(potential_on(c, s, floor).with_support(SupportTag::Periodic), substeps);
    };
    if (kind == "gaussian") {
        if (backend == "heat-compact") return gaussian_bound_ratio(kernel_matrix(SemigroupOperator::heat(s), t, SupportTag::Compact), row, col, c.kernel.A);
        if (backend == "heat") return gaussian_bound_ratio(kernel_matrix(SemigroupOperator::heat(s), t), row, col, c.kernel.A_nonheat);
        if (backend == "schrodinger") {
            return gaussian_bound_ratio(kernel_matrix(schrodinger(0.0, c.kernel.semigroup_substeps), t), row, col,
                                        c.kernel.A_nonheat);
        }
        if (backend == "divform") {
            return gaussian_bound_ratio(kernel_matrix(SemigroupOperator::divform(coefficient_on(c, s)), t), row, col,
                                        c.kernel.A_nonheat);
        }
    }
    if (kind == "kernel-bound") {
        KernelMatrix K = backend == "heat-compact"
                             ? frac_kernel(make_frac(c, SemigroupOperator::heat(s), c.alpha))
                             : frac_kernel(FracOperator(schrodinger(c.potential_floor, c.substeps), c.alpha, std::nullopt, DcMode::None),
                                           SupportTag::Periodic);
        const double d = node_distance(s, K.support, row, col);
        return std::abs(K.entries(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col))) * std::pow(d, c.n - c.alpha);
    }
    if (kind == "difference") {
        const double alpha = w.at("alpha").get<double>();
        const FracOperator op = backend == "heat"
                                    ? FracOperator(SemigroupOperator::heat(s), alpha)
                                    : FracOperator(schrodinger(c.potential_floor, c.substeps), alpha, std::nullopt, DcMode::None);
        const auto Kf = frac_kernel(op, SupportTag::Periodic);
        const auto P = kernel_matrix(op.semigroup(), t, SupportTag::Periodic);
        const auto D = difference_kernel(Kf, P);
        const double d = node_distance(s, SupportTag::Periodic, row, col);
        return std::abs(D(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col))) * std::pow(d, c.n - alpha + 2.0) / t;
    }
    throw Error(ErrorCode::InvalidArgument, "cannot re-evaluate witness of kind " + kind + "/" + backend);
}

/// Combines reports into {experiments: [...], pass}.
inline json merge_reports(const std::vector<json>& reports) {
    json out;
    out["experiments"] = json::array();
    bool pass = !reports.empty();
    for (const auto& r : reports) {
        require(r.is_object() && r.contains("experiment") && r.contains("pass"), ErrorCode::InvalidArgument,
                "input is not an experiment report");
        pass = pass && r.at("pass").get<bool>();
        out["experiments"].push_back(r);
    }
    out["pass"] = pass;
    return out;
}

}  // namespace fmlab::harness
