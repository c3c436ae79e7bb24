// trapscore: score mosquito traps by how well they anticipate human WNV cases.

#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "trapscore/error.hpp"
#include "trapscore/kernels.hpp"
#include "trapscore/pipeline.hpp"

namespace {

using trapscore::pipeline::RunConfig;

struct Options {
    std::string config_file;
    std::map<std::string, std::string> values;
    bool skip_invalid = false;
    bool no_random_effect = false;
};

void add_options(CLI::App* cmd, Options& o) {
    cmd->add_option("--config", o.config_file, "flat key = value config file (flags take precedence)");
    static const std::map<std::string, std::string> help{
        {"data", "directory with pools.csv, sites.csv, cases.csv and dag.txt"},
        {"pools", "pools CSV (default DATA/pools.csv)"},
        {"sites", "sites CSV (default DATA/sites.csv)"},
        {"cases", "human cases CSV (default DATA/cases.csv)"},
        {"dag", "causal DAG edge list (default DATA/dag.txt)"},
        {"out", "output directory"},
        {"m", "sensitivity weight in (0, 1], default 0.9"},
        {"seed", "random seed"},
        {"nu", "Matern smoothness: fixed:<value> or grid"},
        {"grouping", "pooled MLE grouping: trap_week or trap_day"},
        {"threshold-split", "ROC used for the fold threshold: test or train"},
        {"threshold-scope", "per_fold or global threshold"},
        {"radius-km", "case-to-trap radius for labels, default 1.5"},
        {"lead-weeks", "weeks after collection that count, default 2"},
        {"n-boot", "bootstrap replicates (>= 100), default 500"},
        {"grid-points", "ADRF grid size, default 50"},
        {"exposures", "comma-separated exposures (default: all measured DAG nodes)"},
        {"outcome", "score or score_prime"},
        {"threads", "worker threads for folds and bootstrap"},
        {"world", "simulate: fixture, quality or recovery"},
        {"n-traps", "simulate: number of traps"}};
    for (const auto& [key, text] : help) cmd->add_option("--" + key, o.values[key], text);
    cmd->add_flag("--skip-invalid", o.skip_invalid, "drop invalid input rows with a warning");
    cmd->add_flag("--no-random-effect", o.no_random_effect, "fit the fixed-effects logistic model only");
}

RunConfig build_config(CLI::App* cmd, const Options& o) {
    RunConfig c;
    if (!o.config_file.empty()) trapscore::pipeline::apply_config_file(c, o.config_file);
    for (const auto& [key, value] : o.values)
        if (cmd->count("--" + key) > 0) trapscore::pipeline::apply_setting(c, key, value);
    if (o.skip_invalid) c.skip_invalid = true;
    if (o.no_random_effect) c.random_effect = false;
    c.validate();
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Score mosquito traps by their ability to anticipate human West Nile virus cases"};
    app.require_subcommand(1);
    bool show_isa = false;
    app.add_flag("--isa", show_isa, "print the active SIMD kernel set to stderr");

    struct Sub {
        const char* name;
        const char* help;
        void (*run)(const RunConfig&, std::ostream&);
    };
    const Sub subs[] = {
        {"simulate", "generate a synthetic surveillance world", trapscore::pipeline::cmd_simulate},
        {"phase1", "fit the spatial model and cross-validate traps", trapscore::pipeline::cmd_phase1},
        {"phase2", "score traps from the phase-1 confusion table", trapscore::pipeline::cmd_phase2},
        {"phase3", "causal dose-response of trap scores on site covariates", trapscore::pipeline::cmd_phase3},
        {"all", "phase1, phase2 and phase3 in sequence", trapscore::pipeline::cmd_all},
    };
    std::map<std::string, Options> opts;
    std::map<std::string, CLI::App*> cmds;
    for (const auto& s : subs) {
        cmds[s.name] = app.add_subcommand(s.name, s.help);
        add_options(cmds[s.name], opts[s.name]);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    if (show_isa) std::cerr << "kernels: " << trapscore::kernels::isa_name(trapscore::kernels::active_isa()) << '\n';

    for (const auto& s : subs) {
        auto* cmd = cmds[s.name];
        if (!cmd->parsed()) continue;
        try {
            const auto config = build_config(cmd, opts[s.name]);
            s.run(config, std::cerr);
            return 0;
        } catch (const trapscore::ConfigError& e) {
            std::cerr << "error: " << e.what() << '\n';
            return 2;
        } catch (const trapscore::InputError& e) {
            std::cerr << "error: " << e.what() << '\n';
            return 2;
        } catch (const trapscore::SchemaError& e) {
            std::cerr << "error: " << e.what() << '\n';
            return 2;
        } catch (const trapscore::ParseError& e) {
            std::cerr << "error: " << e.what() << '\n';
            return 2;
        } catch (const trapscore::ValidationError& e) {
            std::cerr << "error: " << e.what() << '\n';
            return 2;
        } catch (const trapscore::ReferentialError& e) {
            std::cerr << "error: " << e.what() << '\n';
            return 2;
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << '\n';
            return 1;
        }
    }
    return 2;
}
