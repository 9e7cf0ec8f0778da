// metastab: run the named numerical studies and write CSV + provenance.
#include <CLI11.hpp>
#include <fmt/format.h>

#include <iostream>
#include <optional>

#include "metastab/error.hpp"
#include "metastab/experiments.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kNumericalFailure = 3;

struct RunFlags {
    std::string study;
    std::vector<double> mu;
    std::optional<double> mass, p, q, m, grid_l, dt, cfl;
    std::optional<std::size_t> grid_n;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    std::string config_file;
    std::vector<std::string> settings;
};

metastab::ExperimentConfig build_config(const RunFlags& f) {
    using metastab::format_value;
    metastab::ExperimentConfig c;
    if (!f.config_file.empty()) metastab::load_config_file(c, f.config_file);
    if (!f.study.empty()) c.name = f.study;
    if (!f.mu.empty()) c.mu_list = f.mu;
    if (f.mass) c.mass = f.mass;
    if (f.p) c.p = f.p;
    if (f.q) c.q = f.q;
    if (f.m) c.m = f.m;
    if (f.grid_n) c.grid_n = f.grid_n;
    if (f.grid_l) c.grid_l = f.grid_l;
    if (f.dt) c.solver.dt = *f.dt;
    if (f.cfl) c.solver.cfl_safety = *f.cfl;
    if (f.out) c.output_dir = *f.out;
    if (f.seed) c.seed = *f.seed;
    for (const auto& s : f.settings) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw metastab::ConfigError(fmt::format("--set expects key=value, got '{}'", s));
        metastab::apply_setting(c, s.substr(0, eq), s.substr(eq + 1));
    }
    return c;
}

int run_study(const RunFlags& flags) {
    const auto config = build_config(flags);
    metastab::validate(config);
    fmt::print(stderr, "running {} (config {})\n", config.name, metastab::config_hash(config));
    const auto result = metastab::run(config);
    metastab::emit_csv(result, config.output_dir);
    fmt::print("{} rows -> {}/{}.csv\n", result.rows.size(), config.output_dir.string(), result.experiment);
    for (const auto& f : result.failures) fmt::print(stderr, "failure: {}\n", f);
    return result.numerical_failure ? kNumericalFailure : kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Metastability studies for the rescaled viscous Burgers equation"};
    app.require_subcommand(1);

    auto* list = app.add_subcommand("list", "List registered studies");

    RunFlags flags;
    auto* run = app.add_subcommand("run", "Run one study and write CSV files");
    run->add_option("study", flags.study, "Study name (see 'metastab list')");
    run->add_option("--mu", flags.mu, "Viscosity; repeat for a sweep")->take_all();
    run->add_option("--mass", flags.mass, "Mass M");
    run->add_option("--p", flags.p, "Negative-lobe parameter p");
    run->add_option("--q", flags.q, "Positive-lobe parameter q");
    run->add_option("--m", flags.m, "Weight exponent of L^2(m), > 3/2");
    run->add_option("--grid-n", flags.grid_n, "Number of grid points");
    run->add_option("--grid-l", flags.grid_l, "Domain half-width");
    run->add_option("--dt", flags.dt, "Fixed time step (default: CFL-limited)");
    run->add_option("--cfl", flags.cfl, "CFL safety factor in (0, 1]");
    run->add_option("--out", flags.out, "Output directory");
    run->add_option("--seed", flags.seed, "Seed for randomized initial data");
    run->add_option("--config", flags.config_file, "key=value file; flags override it")->check(CLI::ExistingFile);
    run->add_option("--set", flags.settings, "Extra study knob, key=value (repeatable)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (*list) {
            for (const auto& name : metastab::registered_studies()) {
                fmt::print("{:<20} {}\n", name, metastab::study_summary(name));
            }
            return kOk;
        }
        return run_study(flags);
    } catch (const metastab::ConfigError& e) {
        fmt::print(stderr, "config error: {}\n", e.what());
        return kConfigError;
    } catch (const metastab::NumericalError& e) {
        fmt::print(stderr, "numerical failure: {}\n", e.what());
        return kNumericalFailure;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    }
}
