#include "chiralhom/chiralhom.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace chiralhom;

namespace {

struct Common {
    std::string config;
    std::string out;
    long long seed = -1;
    unsigned threads = 0;
    bool verbose = false;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config, "JSON run configuration")->required();
    sub->add_option("--out", c.out, "output directory (overrides output_dir)");
    sub->add_option("--seed", c.seed, "run a single seed instead of the configured list");
    sub->add_option("--threads", c.threads, "worker threads (default: hardware concurrency)");
    sub->add_flag("--verbose,-v", c.verbose, "print every check");
}

RunConfig prepare(const Common& c) {
    RunConfig cfg = load_config(c.config);
    if (!c.out.empty()) cfg.output_dir = c.out;
    if (c.seed >= 0) cfg.seeds = {static_cast<std::uint64_t>(c.seed)};
    cfg.threads = c.threads ? c.threads : std::max(1u, std::thread::hardware_concurrency());
    cfg.verbose = c.verbose;
    return cfg;
}

int finish(const RunReport& rep, const RunConfig& cfg) {
    const fs::path dir(cfg.output_dir);
    write_json(dir / "report.json", rep.to_json());
    std::size_t failed = 0, skipped = 0;
    for (const auto& c : rep.checks) {
        if (c.skipped) ++skipped;
        else if (!c.pass()) ++failed;
        if (cfg.verbose || (!c.skipped && !c.pass()))
            std::cout << (c.skipped ? "SKIP " : c.pass() ? "PASS " : "FAIL ") << c.name << "  value=" << fmt(c.value)
                      << " target=" << fmt(c.target) << " (" << c.comparison << ")\n";
    }
    std::cout << rep.experiment << ": " << rep.checks.size() - failed - skipped << " passed, " << failed << " failed, "
              << skipped << " skipped; report in " << (dir / "report.json").string() << "\n";
    return failed ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Homogenized chiral micromagnetics for random laminates and checkerboards"};
    app.require_subcommand(1);
    Common common;
    auto* validate = app.add_subcommand("validate-laminate", "closed-form and RVE effective tensors of a laminate");
    auto* helix = app.add_subcommand("helix", "minimize the homogenized energy on a column and fit a helix");
    auto* sweep = app.add_subcommand("gamma-sweep", "minimum energies of the heterogeneous model as eps decreases");
    auto* birk = app.add_subcommand("birkhoff", "spatial averages over growing windows");
    auto* corr = app.add_subcommand("correctors", "solve the cell problems on an RVE");
    auto* eval = app.add_subcommand("energy-eval", "evaluate all energy terms for one magnetization");
    for (auto* s : {validate, helix, sweep, birk, corr, eval}) add_common(s, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        RunConfig cfg = prepare(common);
        const fs::path dir(cfg.output_dir);
        if (validate->parsed()) return finish(run_laminate_validation(cfg), cfg);
        if (helix->parsed()) {
            std::vector<HelixRun> runs;
            const RunReport rep = run_helix_experiment(cfg, &runs);
            for (const auto& r : runs) {
                const std::string tag = "seed" + std::to_string(r.seed);
                write_grid(dir / (tag + ".chmg"), r.trace.final_state);
                write_atomic(dir / (tag + "_column.csv"), column_csv(r.trace.final_state));
                write_atomic(dir / (tag + "_trace.csv"), trace_csv(r.trace));
            }
            return finish(rep, cfg);
        }
        if (sweep->parsed()) {
            SweepResult res;
            const RunReport rep = run_gamma_sweep(cfg, &res);
            std::string csv = "eps,cells,seed,energy_per_area,relative_gap\n";
            for (std::size_t e = 0; e < res.epsilons.size(); ++e)
                for (std::size_t s = 0; s < cfg.seeds.size(); ++s)
                    csv += fmt(res.epsilons[e]) + "," + std::to_string(res.cells[e]) + "," + std::to_string(cfg.seeds[s]) +
                           "," + fmt(res.energy[e][s]) + "," + fmt(res.gap[e][s]) + "\n";
            write_atomic(dir / "sweep.csv", csv);
            return finish(rep, cfg);
        }
        if (birk->parsed()) {
            std::string csv;
            const RunReport rep = run_birkhoff(cfg, &csv);
            write_atomic(dir / "birkhoff.csv", csv);
            return finish(rep, cfg);
        }
        if (corr->parsed()) {
            CorrectorSet set;
            const RunReport rep = run_correctors(cfg, &set);
            write_json(dir / "correctors.json", to_json(set));
            return finish(rep, cfg);
        }
        if (eval->parsed()) {
            Magnetization m;
            const RunReport rep = run_energy_eval(cfg, &m);
            write_grid(dir / "state.chmg", m);
            return finish(rep, cfg);
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
