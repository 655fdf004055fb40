#pragma once

// Command-line front end: gen-corpus, kernel-suite, verify, norms, report-merge.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "fmlab/harness.hpp"
#include "fmlab/io.hpp"

namespace fmlab::cli {

inline constexpr int kExitPass = 0;
inline constexpr int kExitFail = 1;
inline constexpr int kExitInput = 2;

namespace detail {

using harness::json;

inline harness::ExperimentConfig config_for(const std::string& experiment, const std::string& path) {
    if (!path.empty()) {
        require(std::filesystem::exists(path), ErrorCode::IoFailure, "config file not found: " + path);
        return harness::load_config(path, experiment);
    }
    auto c = harness::default_config(experiment);
    harness::validate(c);
    return c;
}

inline void emit(const json& j, const std::string& out_path, std::ostream& out) {
    if (out_path.empty()) {
        out << j.dump(2) << '\n';
    } else {
        const std::filesystem::path p(out_path);
        if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
        harness::write_json(j, p);
    }
}

inline int run_experiment(const harness::ExperimentConfig& c, const std::string& out_path, const std::string& csv_dir,
                          std::ostream& out) {
    const auto rep = harness::run(c);
    if (!out_path.empty()) emit(harness::to_json(rep), out_path, out);
    if (!csv_dir.empty()) harness::write_series_csv(rep, csv_dir);
    for (const auto& chk : rep.checks) {
        out << (chk.pass ? "PASS " : "FAIL ") << rep.experiment << ' ' << chk.name << " value=" << chk.value
            << " threshold=" << chk.threshold << '\n';
    }
    for (const auto& note : rep.notes) out << "note: " << note << '\n';
    out << rep.experiment << ": " << (rep.pass ? "PASS" : "FAIL") << '\n';
    return rep.pass ? kExitPass : kExitFail;
}

inline int gen_corpus(const std::string& config_path, const std::string& out_path, const std::string& mgf_dir,
                      std::ostream& out) {
    harness::ExperimentConfig c;
    if (config_path.empty()) {
        c = harness::default_config("thm1");
        c.families.assign(kAllFamilies.begin(), kAllFamilies.end());
        harness::validate(c);
    } else {
        c = config_for("", config_path);
    }
    json manifest;
    manifest["seed"] = c.seed;
    manifest["levels"] = json::array();
    for (std::size_t N : c.N_list) {
        const auto spec = harness::level_spec(c, N);
        json level = {{"N", N}, {"L", c.L}, {"n", c.n}, {"functions", json::array()}};
        for (const auto& t : generate(harness::corpus_spec(c, spec))) {
            json params = json::object();
            for (const auto& [k, v] : t.parameters) params[k] = v;
            json entry = {{"id", t.id},
                          {"family", to_string(t.family)},
                          {"support", to_string(t.f.support())},
                          {"memberships", t.memberships},
                          {"parameters", params}};
            if (!mgf_dir.empty()) {
                std::filesystem::create_directories(mgf_dir);
                const auto file = std::filesystem::path(mgf_dir) / (t.id + "_N" + std::to_string(N) + ".mgf");
                io::write_grid(t.f, file);
                entry["file"] = file.string();
            }
            level["functions"].push_back(std::move(entry));
        }
        manifest["levels"].push_back(std::move(level));
    }
    emit(manifest, out_path, out);
    return kExitPass;
}

inline int norms(const std::string& file, double p, double lambda, const std::string& out_path, std::ostream& out) {
    const GridFunction f = io::read_grid(file);
    const auto& spec = f.spec();
    const auto radii = dyadic_radii(spec);
    const auto heat = SemigroupOperator::heat(spec);
    const MorreyParams mp(spec.dimension(), p, lambda);
    const auto m = morrey_norm(f, mp, radii);
    const auto b = bmo_norm(f, OscillationMode::MeanAbs, radii);
    const auto bl = bmoL_norm(f, heat, radii);
    json j;
    j["file"] = file;
    j["grid"] = {{"n", spec.dimension()}, {"N", spec.points_per_axis()}, {"L", spec.side_length()},
                 {"support", to_string(f.support())}};
    j["p"] = p;
    j["lambda"] = lambda;
    j["lp"] = harness::detail::number(lp_norm(f, p));
    j["weak_lp"] = harness::detail::number(weak_lp_norm(f, p));
    j["morrey"] = {{"value", harness::detail::number(m.value)}, {"center", m.center}, {"radius", m.radius}};
    j["bmo"] = {{"value", harness::detail::number(b.value)}, {"center", b.center}, {"radius", b.radius}};
    j["bmo_heat"] = {{"value", harness::detail::number(bl.value)}, {"center", bl.center}, {"radius", bl.radius}};
    j["vmo_rmin"] = harness::detail::number(vmo_modulus(f, radii.front()));
    j["notes"] = m.notes;
    emit(j, out_path, out);
    return kExitPass;
}

inline int report_merge(const std::vector<std::string>& files, const std::string& out_path, std::ostream& out) {
    std::vector<json> reports;
    for (const auto& file : files) {
        std::ifstream in(file);
        require(static_cast<bool>(in), ErrorCode::IoFailure, "cannot open report " + file);
        try {
            reports.push_back(json::parse(in));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::ConfigInvalid, file + " is not valid JSON: " + e.what());
        }
    }
    const json merged = harness::merge_reports(reports);
    emit(merged, out_path, out);
    return merged.at("pass").get<bool>() ? kExitPass : kExitFail;
}

}  // namespace detail

/// Runs the CLI; returns the process exit code.
inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"fmlab: fractional integrals, Morrey and BMO experiments on grids", "fmlab"};
    app.require_subcommand(1, 1);

    std::string config, out_path, csv_dir, mgf_dir, norms_file;
    std::string experiment;
    std::vector<std::string> merge_files;
    double p = 2.0, lambda = 0.0;

    auto* gen = app.add_subcommand("gen-corpus", "draw the seeded corpus and write a manifest");
    gen->add_option("--config", config, "JSON config");
    gen->add_option("--out", out_path, "manifest JSON path");
    gen->add_option("--mgf", mgf_dir, "directory for MGF1 grid files");

    auto* kernel = app.add_subcommand("kernel-suite", "Gaussian, kernel, difference and domination fits");
    kernel->add_option("--config", config, "JSON config");
    kernel->add_option("--out", out_path, "JSON report path");
    kernel->add_option("--csv", csv_dir, "directory for CSV series");

    auto* verify = app.add_subcommand("verify", "run one experiment");
    verify->add_option("experiment", experiment, "thm1|thm2|cor3|adams|examples")
        ->required()
        ->check(CLI::IsMember({"thm1", "thm2", "cor3", "adams", "examples"}));
    verify->add_option("--config", config, "JSON config");
    verify->add_option("--out", out_path, "JSON report path");
    verify->add_option("--csv", csv_dir, "directory for CSV series");

    auto* nrm = app.add_subcommand("norms", "norms of one MGF1 grid file");
    nrm->add_option("file", norms_file, "MGF1 file")->required();
    nrm->add_option("--p", p, "exponent p");
    nrm->add_option("--lambda", lambda, "Morrey lambda");
    nrm->add_option("--out", out_path, "JSON output path");

    auto* merge = app.add_subcommand("report-merge", "combine experiment reports");
    merge->add_option("reports", merge_files, "report JSON files")->required();
    merge->add_option("--out", out_path, "merged JSON path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitPass;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitPass;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kExitInput;
    }

    try {
        if (gen->parsed()) return detail::gen_corpus(config, out_path, mgf_dir, out);
        if (kernel->parsed()) {
            return detail::run_experiment(detail::config_for("kernel-suite", config), out_path, csv_dir, out);
        }
        if (verify->parsed()) return detail::run_experiment(detail::config_for(experiment, config), out_path, csv_dir, out);
        if (nrm->parsed()) return detail::norms(norms_file, p, lambda, out_path, out);
        if (merge->parsed()) return detail::report_merge(merge_files, out_path, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        switch (e.code()) {
            case ErrorCode::ConfigInvalid:
            case ErrorCode::IoFailure:
            case ErrorCode::UnknownName:
            case ErrorCode::BadMagic:
            case ErrorCode::Truncated:
            case ErrorCode::InvalidArgument:
            case ErrorCode::OutOfRange:
            case ErrorCode::NonPowerOfTwo:
            case ErrorCode::SpecMismatch: return kExitInput;
            default: return kExitFail;
        }
    } catch (const nlohmann::json::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    }
    err << app.help();
    return kExitInput;
}

}  // namespace fmlab::cli
