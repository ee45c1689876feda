// koopnet: simulate IFO / Bak-Sneppen networks and run windowed Koopman analysis.
//
//   koopnet simulate --model ifo --rows 8 --cols 8 --epsilon 0.145 --gamma 2 --dt 0.01 --steps 2500 --seed 7
//   koopnet analyze  --input out/snapshots.csv --window 200
//   koopnet pipeline --model bs --n 100 --steps 2500 --seed 7

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "koopnet/cli.hpp"

namespace {

using namespace koopnet;

struct Flags {
    std::string model = "ifo";
    std::string boundary = "open";
    std::string observable = "phase";
    std::string direction = "either";
    std::string formats = "csv,report";
    std::string output_dir;
    std::string meta;
    std::optional<std::size_t> rank;
};

void add_model_flags(CLI::App* cmd, cli::RunConfig& cfg, Flags& f) {
    cmd->add_option("--meta", f.meta, "Load parameters from a meta.csv written by an earlier run")->check(CLI::ExistingFile);
    cmd->add_option("--model", f.model, "Model to simulate: ifo or bs")->check(CLI::IsMember({"ifo", "bs"}));
    cmd->add_option("--steps", cfg.steps, "Number of iterations / snapshots");
    cmd->add_option("--seed", cfg.ifo.seed, "RNG seed");
    cmd->add_option("--rows", cfg.ifo.rows, "IFO lattice rows");
    cmd->add_option("--cols", cfg.ifo.cols, "IFO lattice columns");
    cmd->add_option("--epsilon", cfg.ifo.epsilon, "IFO coupling strength");
    cmd->add_option("--gamma", cfg.ifo.gamma, "IFO convexity parameter");
    cmd->add_option("--e-crit", cfg.ifo.e_crit, "IFO firing threshold");
    cmd->add_option("--dt", cfg.ifo.dt, "IFO integration / sampling step");
    cmd->add_option("--boundary", f.boundary, "IFO lattice boundary: open or periodic")
        ->check(CLI::IsMember({"open", "periodic"}));
    cmd->add_option("--observable", f.observable, "IFO snapshot observable: phase or energy")
        ->check(CLI::IsMember({"phase", "energy"}));
    cmd->add_option("--n", cfg.bs.n, "Bak-Sneppen ring size");
}

void add_analysis_flags(CLI::App* cmd, cli::AnalysisConfig& a, Flags& f) {
    cmd->add_option("--window", a.window_len, "Snapshots per analysis window");
    cmd->add_option("--stride", a.stride, "Window stride (default: window length)");
    cmd->add_option("--rank", f.rank, "Maximum DMD rank (default: numerical rank)");
    cmd->add_option("--jump-threshold", a.jump_threshold, "Amplitude fold change that flags a transition");
    cmd->add_option("--direction", f.direction, "Amplitude jump direction: rise, fall or either")
        ->check(CLI::IsMember({"rise", "fall", "either"}));
    cmd->add_option("--threads", a.threads, "Worker threads for window analysis");
}

void add_output_flags(CLI::App* cmd, Flags& f) {
    cmd->add_option("--out,-o", f.output_dir,
                    std::string("Output directory (default: $") + cli::kOutputDirEnv + " or ./koopnet_out)");
    cmd->add_option("--formats", f.formats, "Comma list of outputs: csv,report");
}

/// Applies string flags, honouring --meta as the base and explicit flags on top.
cli::RunConfig finish_config(CLI::App* cmd, cli::RunConfig cfg, const Flags& f) {
    if (!f.meta.empty()) {
        cli::RunConfig from_meta = cli::read_meta(f.meta);
        // Explicit flags override the loaded values.
        auto keep = [&](const char* name) {
            const auto* opt = cmd->get_option_no_throw(name);
            return opt != nullptr && opt->count() > 0;
        };
        if (!keep("--model")) cfg.model = from_meta.model;
        if (!keep("--steps")) cfg.steps = from_meta.steps;
        if (!keep("--seed")) cfg.ifo.seed = from_meta.ifo.seed;
        if (!keep("--rows")) cfg.ifo.rows = from_meta.ifo.rows;
        if (!keep("--cols")) cfg.ifo.cols = from_meta.ifo.cols;
        if (!keep("--epsilon")) cfg.ifo.epsilon = from_meta.ifo.epsilon;
        if (!keep("--gamma")) cfg.ifo.gamma = from_meta.ifo.gamma;
        if (!keep("--e-crit")) cfg.ifo.e_crit = from_meta.ifo.e_crit;
        if (!keep("--dt")) cfg.ifo.dt = from_meta.ifo.dt;
        if (!keep("--boundary")) cfg.ifo.boundary = from_meta.ifo.boundary;
        if (!keep("--observable")) cfg.observable = from_meta.observable;
        if (!keep("--n")) cfg.bs.n = from_meta.bs.n;
        if (!keep("--window")) cfg.analysis.window_len = from_meta.analysis.window_len;
        if (!keep("--stride")) cfg.analysis.stride = from_meta.analysis.stride;
        if (!keep("--rank")) cfg.analysis.rank = from_meta.analysis.rank;
        if (!keep("--jump-threshold")) cfg.analysis.jump_threshold = from_meta.analysis.jump_threshold;
        if (!keep("--direction")) cfg.analysis.direction = from_meta.analysis.direction;
        if (keep("--model")) cfg.model = cli::parse_model(f.model);
        if (keep("--boundary")) cfg.ifo.boundary = ifo::parse_boundary(f.boundary);
        if (keep("--observable")) cfg.observable = cli::parse_observable(f.observable);
        if (keep("--direction")) cfg.analysis.direction = analysis::parse_direction(f.direction);
        if (keep("--rank")) cfg.analysis.rank = f.rank;
    } else {
        cfg.model = cli::parse_model(f.model);
        cfg.ifo.boundary = ifo::parse_boundary(f.boundary);
        cfg.observable = cli::parse_observable(f.observable);
        cfg.analysis.direction = analysis::parse_direction(f.direction);
        cfg.analysis.rank = f.rank;
    }
    cfg.bs.seed = cfg.ifo.seed;
    cfg.formats = cli::parse_formats(f.formats);
    if (!f.output_dir.empty()) cfg.output_dir = f.output_dir;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Koopman spectral analysis of self-organizing network simulations"};
    app.require_subcommand(1);

    cli::RunConfig sim_cfg;
    Flags sim_flags;
    auto* simulate = app.add_subcommand("simulate", "Simulate a model and write snapshots.csv, events.csv, meta.csv");
    add_model_flags(simulate, sim_cfg, sim_flags);
    add_output_flags(simulate, sim_flags);

    cli::AnalysisConfig ana_cfg;
    Flags ana_flags;
    std::string input;
    std::optional<double> input_dt;
    auto* analyze = app.add_subcommand("analyze", "Windowed Koopman analysis of a snapshots.csv file");
    analyze->add_option("--input,-i", input, "Snapshot CSV file")->required()->check(CLI::ExistingFile);
    analyze->add_option("--dt", input_dt, "Sampling interval (default: '# dt=' comment in the file, else 1)");
    add_analysis_flags(analyze, ana_cfg, ana_flags);
    add_output_flags(analyze, ana_flags);

    cli::RunConfig pipe_cfg;
    Flags pipe_flags;
    auto* pipeline = app.add_subcommand("pipeline", "simulate followed by analyze in one invocation");
    add_model_flags(pipeline, pipe_cfg, pipe_flags);
    add_analysis_flags(pipeline, pipe_cfg.analysis, pipe_flags);
    add_output_flags(pipeline, pipe_flags);

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate->parsed()) {
            const auto cfg = finish_config(simulate, sim_cfg, sim_flags);
            const auto out = cli::cmd_simulate(cfg);
            std::cout << "wrote " << out.snapshots.steps() << " x " << out.snapshots.nodes() << " snapshots to "
                      << cfg.output_dir.string() << "\n";
        } else if (analyze->parsed()) {
            ana_cfg.direction = analysis::parse_direction(ana_flags.direction);
            ana_cfg.rank = ana_flags.rank;
            const auto formats = cli::parse_formats(ana_flags.formats);
            const auto dir = ana_flags.output_dir.empty() ? cli::default_output_dir()
                                                          : std::filesystem::path(ana_flags.output_dir);
            const auto out = cli::cmd_analyze(input, ana_cfg, dir, formats, input_dt);
            std::cout << "analyzed " << out.windows.size() << " windows into " << dir.string() << "\n";
            if (out.transition.transition_window) {
                std::cout << "transition at window " << *out.transition.transition_window << " (ratio "
                          << out.transition.jump_ratio << ")\n";
            } else {
                std::cout << "no transition detected\n";
            }
            for (const auto& w : out.warnings) std::cerr << "warning: " << w << "\n";
        } else if (pipeline->parsed()) {
            const auto cfg = finish_config(pipeline, pipe_cfg, pipe_flags);
            const auto out = cli::cmd_pipeline(cfg);
            std::cout << "simulated " << out.simulation.snapshots.steps() << " steps, analyzed "
                      << out.analysis.windows.size() << " windows into " << cfg.output_dir.string() << "\n";
            if (out.analysis.transition.transition_window) {
                std::cout << "transition at window " << *out.analysis.transition.transition_window << " (ratio "
                          << out.analysis.transition.jump_ratio << ")\n";
            } else {
                std::cout << "no transition detected\n";
            }
            for (const auto& w : out.analysis.warnings) std::cerr << "warning: " << w << "\n";
        }
    } catch (const koopnet::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return EXIT_FAILURE;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return EXIT_FAILURE;
    }
    return EXIT_SUCCESS;
}
