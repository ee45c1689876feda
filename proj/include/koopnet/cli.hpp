#pragma once

// Command implementations behind the koopnet executable: simulate a model,
// analyze a snapshot file, or both in one go. Everything here writes plain
// CSV plus an optional Markdown report.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "koopnet/analysis.hpp"
#include "koopnet/bak_sneppen.hpp"
#include "koopnet/csv.hpp"
#include "koopnet/dmd.hpp"
#include "koopnet/error.hpp"
#include "koopnet/ifo.hpp"
#include "koopnet/snapshot.hpp"

namespace koopnet::cli {

namespace fs = std::filesystem;

enum class Model { ifo, bs };
enum class Observable { phase, energy };

inline std::string_view to_string(Model m) { return m == Model::ifo ? "ifo" : "bs"; }
inline std::string_view to_string(Observable o) { return o == Observable::phase ? "phase" : "energy"; }

inline Model parse_model(std::string_view s) {
    if (s == "ifo") return Model::ifo;
    if (s == "bs") return Model::bs;
    throw ConfigError("unknown model '" + std::string(s) + "' (expected ifo or bs)");
}

inline Observable parse_observable(std::string_view s) {
    if (s == "phase") return Observable::phase;
    if (s == "energy") return Observable::energy;
    throw ConfigError("unknown observable '" + std::string(s) + "' (expected phase or energy)");
}

/// Environment variable naming the default output directory.
inline constexpr const char* kOutputDirEnv = "KOOPNET_OUTPUT_DIR";

inline fs::path default_output_dir() {
    if (const char* v = std::getenv(kOutputDirEnv); v != nullptr && *v != '\0') return v;
    return "koopnet_out";
}

struct AnalysisConfig {
    std::size_t window_len = analysis::kDefaultWindow;
    std::size_t stride = 0;
    std::optional<std::size_t> rank;
    double jump_threshold = analysis::kDefaultJumpThreshold;
    analysis::JumpDirection direction = analysis::JumpDirection::either;
    unsigned threads = 1;

    void validate() const {
        if (window_len < 2) throw ConfigError("analysis: window must be >= 2");
        if (rank && *rank < 1) throw ConfigError("analysis: rank must be >= 1");
        if (!(jump_threshold > 1.0)) throw ConfigError("analysis: jump threshold must exceed 1");
        if (threads < 1) throw ConfigError("analysis: threads must be >= 1");
    }
};

struct Formats {
    bool csv = true;
    bool report = true;
};

inline Formats parse_formats(std::string_view list) {
    Formats f{false, false};
    std::size_t start = 0;
    while (start <= list.size()) {
        const auto pos = list.find(',', start);
        const auto item = list.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
        if (item == "csv") {
            f.csv = true;
        } else if (item == "report") {
            f.report = true;
        } else if (!item.empty()) {
            throw ConfigError("unknown format '" + std::string(item) + "' (expected csv and/or report)");
        }
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return f;
}

struct RunConfig {
    Model model = Model::ifo;
    ifo::IfoParams ifo;
    bs::BsParams bs;
    Observable observable = Observable::phase;
    std::size_t steps = 2500;
    AnalysisConfig analysis;
    fs::path output_dir = default_output_dir();
    Formats formats;

    [[nodiscard]] std::uint64_t seed() const { return model == Model::ifo ? ifo.seed : bs.seed; }

    void validate() const {
        if (model == Model::ifo) {
            ifo.validate();
        } else {
            bs.validate();
        }
        if (steps < 2) throw ConfigError("steps must be >= 2");
        analysis.validate();
    }
};

/// Key/value table that, fed back through `--meta`, repeats the run exactly.
inline csv::Table meta_table(const RunConfig& c) {
    csv::Table t({"key", "value"});
    auto add = [&](std::string k, std::string v) { t.add_row({std::move(k), std::move(v)}); };
    add("model", std::string(to_string(c.model)));
    add("steps", std::to_string(c.steps));
    add("seed", std::to_string(c.seed()));
    add("rng", "mt19937_64 53-bit uniform doubles");
    if (c.model == Model::ifo) {
        add("rows", std::to_string(c.ifo.rows));
        add("cols", std::to_string(c.ifo.cols));
        add("boundary", std::string(ifo::to_string(c.ifo.boundary)));
        add("epsilon", csv::format_double(c.ifo.epsilon));
        add("gamma", csv::format_double(c.ifo.gamma));
        add("e_crit", csv::format_double(c.ifo.e_crit));
        add("dt", csv::format_double(c.ifo.dt));
        add("observable", std::string(to_string(c.observable)));
    } else {
        add("n", std::to_string(c.bs.n));
        add("dt", "1");
    }
    add("window", std::to_string(c.analysis.window_len));
    add("stride", std::to_string(c.analysis.stride == 0 ? c.analysis.window_len : c.analysis.stride));
    add("rank", c.analysis.rank ? std::to_string(*c.analysis.rank) : "auto");
    add("jump_threshold", csv::format_double(c.analysis.jump_threshold));
    add("jump_direction", std::string(analysis::to_string(c.analysis.direction)));
    return t;
}

inline std::size_t parse_count(const std::string& v, const std::string& key) {
    try {
        std::size_t used = 0;
        const auto n = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return static_cast<std::size_t>(n);
    } catch (const std::exception&) {
        throw ConfigError("meta: '" + key + "' expects a non-negative integer, got '" + v + "'");
    }
}

/// Rebuilds a RunConfig from meta.csv. Output directory and formats are not
/// part of the experiment and keep their current values in `base`.
inline RunConfig read_meta(const fs::path& path, RunConfig base = {}) {
    const auto parsed = csv::parse(csv::read_file(path), path.string());
    std::map<std::string, std::string> kv;
    for (const auto& [line, fields] : parsed.rows) kv[fields.at(0)] = fields.at(1);
    auto get = [&](const std::string& k) -> std::optional<std::string> {
        auto it = kv.find(k);
        return it == kv.end() ? std::nullopt : std::optional<std::string>(it->second);
    };
    auto num = [&](const std::string& k, double& dst) {
        if (auto v = get(k)) dst = csv::parse_double(*v);
    };
    RunConfig c = std::move(base);
    if (auto v = get("model")) c.model = parse_model(*v);
    if (auto v = get("steps")) c.steps = parse_count(*v, "steps");
    if (auto v = get("seed")) c.ifo.seed = c.bs.seed = parse_count(*v, "seed");
    if (auto v = get("rows")) c.ifo.rows = parse_count(*v, "rows");
    if (auto v = get("cols")) c.ifo.cols = parse_count(*v, "cols");
    if (auto v = get("boundary")) c.ifo.boundary = ifo::parse_boundary(*v);
    num("epsilon", c.ifo.epsilon);
    num("gamma", c.ifo.gamma);
    num("e_crit", c.ifo.e_crit);
    if (c.model == Model::ifo) num("dt", c.ifo.dt);
    if (auto v = get("observable")) c.observable = parse_observable(*v);
    if (auto v = get("n")) c.bs.n = parse_count(*v, "n");
    if (auto v = get("window")) c.analysis.window_len = parse_count(*v, "window");
    if (auto v = get("stride")) c.analysis.stride = parse_count(*v, "stride");
    if (auto v = get("rank")) c.analysis.rank = *v == "auto" ? std::nullopt : std::optional(parse_count(*v, "rank"));
    num("jump_threshold", c.analysis.jump_threshold);
    if (auto v = get("jump_direction")) c.analysis.direction = analysis::parse_direction(*v);
    return c;
}

inline void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

struct SimulationOutput {
    SnapshotMatrix snapshots;
    std::vector<ifo::AvalancheRecord> avalanches;
    std::vector<std::size_t> min_history;
};

inline SimulationOutput run_model(const RunConfig& c) {
    if (c.model == Model::ifo) {
        auto run = ifo::simulate_ifo(c.ifo, c.steps);
        auto snaps = c.observable == Observable::energy ? ifo::to_energy(run.snapshots, c.ifo.gamma)
                                                        : std::move(run.snapshots);
        return {std::move(snaps), std::move(run.avalanches), {}};
    }
    auto run = bs::simulate_bs(c.bs, c.steps);
    return {std::move(run.snapshots), {}, std::move(run.min_history)};
}

inline csv::Table events_table(const RunConfig& c, const SimulationOutput& out) {
    if (c.model == Model::ifo) {
        csv::Table t({"start_time", "size", "participants"});
        for (const auto& a : out.avalanches) {
            std::string parts;
            for (std::size_t i = 0; i < a.participants.size(); ++i) {
                if (i) parts += ';';
                parts += std::to_string(a.participants[i]);
            }
            t.add_row({csv::format_double(a.start_time), std::to_string(a.size), parts});
        }
        return t;
    }
    csv::Table t({"iteration", "min_index"});
    for (std::size_t k = 0; k < out.min_history.size(); ++k) {
        t.add_row({std::to_string(k), std::to_string(out.min_history[k])});
    }
    return t;
}

/// Simulates the configured model and writes snapshots.csv, events.csv and meta.csv.
inline SimulationOutput cmd_simulate(const RunConfig& c) {
    c.validate();
    ensure_dir(c.output_dir);
    auto out = run_model(c);
    csv::write_snapshots(c.output_dir / "snapshots.csv", out.snapshots);
    csv::write_atomic(c.output_dir / "events.csv", events_table(c, out).str());
    csv::write_atomic(c.output_dir / "meta.csv", meta_table(c).str());
    return out;
}

struct AnalysisOutput {
    std::vector<analysis::WindowAnalysis> windows;
    analysis::TransitionReport transition;
    std::vector<std::string> warnings;
};

namespace detail {

inline std::string group_name(const analysis::WindowAnalysis& w, std::size_t k) {
    return std::find(w.fast_group.begin(), w.fast_group.end(), k) != w.fast_group.end() ? "fast" : "slow";
}

inline csv::Table spectrum_table(const analysis::WindowAnalysis& w) {
    csv::Table t({"re_lambda", "im_lambda", "re_mu", "im_mu", "amplitude", "mode_norm", "group"});
    const auto& r = w.result;
    for (std::size_t k = 0; k < r.rank; ++k) {
        const auto i = static_cast<Eigen::Index>(k);
        t.add_row({csv::format_double(r.eigenvalues(i).real()), csv::format_double(r.eigenvalues(i).imag()),
                   csv::format_double(r.continuous(i).real()), csv::format_double(r.continuous(i).imag()),
                   csv::format_double(r.amplitude(k)), csv::format_double(r.modes.col(i).norm()),
                   r.zero_eigenvalue[k] ? "fast" : group_name(w, k)});
    }
    return t;
}

struct NamedMode {
    std::string name;
    analysis::ModeEntry entry;
};

inline std::vector<NamedMode> report_modes(const analysis::WindowAnalysis& w) {
    std::vector<NamedMode> modes;
    const auto dom = analysis::dominant_modes(w.result, 2);
    for (std::size_t i = 0; i < dom.size(); ++i) modes.push_back({"dominant_" + std::to_string(i + 1), dom[i]});
    try {
        modes.push_back({"zero_frequency", analysis::zero_frequency_mode(w.result)});
    } catch (const NotFoundError&) {
    }
    try {
        modes.push_back({"avalanche", analysis::zero_frequency_mode(w.result, {.frequency_tol = std::nullopt, .skip_stationary = true})});
    } catch (const NotFoundError&) {
    }
    return modes;
}

inline csv::Table modes_table(const std::vector<NamedMode>& modes, const std::vector<std::string>& labels) {
    csv::Table t({"mode", "node", "re_v", "im_v", "abs_v"});
    for (const auto& m : modes) {
        for (Eigen::Index i = 0; i < m.entry.mode.size(); ++i) {
            const auto v = m.entry.mode(i);
            t.add_row({m.name, labels[static_cast<std::size_t>(i)], csv::format_double(v.real()),
                       csv::format_double(v.imag()), csv::format_double(std::abs(v))});
        }
    }
    return t;
}

inline csv::Table amplitudes_table(const std::vector<analysis::WindowAnalysis>& windows) {
    csv::Table t({"window_index", "max_amplitude", "amp_1", "amp_2", "amp_3", "amp_4", "amp_5",
                  "stationary_amplitude"});
    for (const auto& w : windows) {
        std::vector<std::string> row{std::to_string(w.window_index), csv::format_double(w.max_amplitude)};
        for (std::size_t k = 0; k < 5; ++k) {
            row.push_back(k < w.dominant_amplitudes.size() ? csv::format_double(w.dominant_amplitudes[k]) : "");
        }
        const auto s = w.degenerate ? std::nullopt : analysis::stationary_mode_index(w.result);
        row.push_back(s ? csv::format_double(w.result.amplitude(*s)) : "");
        t.add_row(std::move(row));
    }
    return t;
}

inline csv::Table transition_table(const analysis::TransitionReport& rep) {
    csv::Table t({"window", "ratio", "threshold", "direction"});
    if (rep.transition_window) {
        t.add_row({std::to_string(*rep.transition_window), csv::format_double(rep.jump_ratio),
                   csv::format_double(rep.criterion.jump_threshold), rep.jump_ratio >= 1.0 ? "rise" : "fall"});
    }
    return t;
}

inline std::string format_groups(const analysis::SpatialPattern& p, const std::vector<std::string>& labels) {
    std::string out;
    for (const auto& g : p.groups) {
        if (g.size() < 2) continue;
        if (!out.empty()) out += ", ";
        out += labels[g.first] + ".." + labels[g.last] + " (|v| " + csv::format_double(g.min_magnitude).substr(0, 8) +
               "-" + csv::format_double(g.max_magnitude).substr(0, 8) + ")";
    }
    return out.empty() ? "none" : out;
}

inline std::string short_num(double v) {
    std::ostringstream ss;
    ss.precision(4);
    ss << v;
    return ss.str();
}

inline std::string report_md(const std::string& input, const SnapshotMatrix& s, const AnalysisConfig& cfg,
                             const AnalysisOutput& out) {
    const auto labels = s.effective_labels();
    std::ostringstream md;
    md << "# Koopman window analysis\n\n";
    md << "- input: `" << input << "`\n";
    md << "- snapshots: " << s.steps() << " x " << s.nodes() << " nodes, dt = " << csv::format_double(s.dt()) << "\n";
    md << "- windows: " << out.windows.size() << " of " << cfg.window_len << " snapshots, stride "
       << (cfg.stride == 0 ? cfg.window_len : cfg.stride) << "\n";
    md << "- rank: " << (cfg.rank ? std::to_string(*cfg.rank) : std::string("numerical")) << "\n\n";

    md << "## Transition\n\n";
    const auto& tr = out.transition;
    if (tr.transition_window) {
        const auto& w = out.windows[*tr.transition_window];
        md << "Transition flagged at window " << *tr.transition_window << " (steps " << w.start_step << "-"
           << w.end_step << "): maximum mode amplitude " << (tr.jump_ratio >= 1.0 ? "rose" : "fell") << " by a factor of "
           << short_num(tr.fold_change) << " (threshold " << short_num(tr.criterion.jump_threshold) << ", direction "
           << analysis::to_string(tr.criterion.direction) << ").\n";
        if (tr.qualifying_boundaries > 1) {
            md << "\n" << tr.qualifying_boundaries << " window boundaries met the criterion; the first is reported.\n";
        }
    } else {
        md << "No transition: no window boundary changed the maximum mode amplitude by a factor of "
           << short_num(tr.criterion.jump_threshold) << " or more.\n";
    }

    md << "\n## Windows\n\n";
    md << "| window | steps | rank | max amplitude | slow | fast | dominant mu |\n";
    md << "|---|---|---|---|---|---|---|\n";
    for (const auto& w : out.windows) {
        md << "| " << w.window_index << " | " << w.start_step << "-" << w.end_step << " | ";
        if (w.degenerate) {
            md << "- | - | - | - | degenerate |\n";
            continue;
        }
        const auto mu = w.result.continuous(0);
        md << w.result.rank << " | " << short_num(w.max_amplitude) << " | " << w.slow_group.size() << " | "
           << w.fast_group.size() << " | " << short_num(mu.real()) << (mu.imag() < 0 ? " - " : " + ")
           << short_num(std::abs(mu.imag())) << "i |\n";
    }

    md << "\n## Spatial groups\n\n";
    md << "Contiguous node runs whose mode magnitudes agree within 10%.\n\n";
    for (const auto& w : out.windows) {
        if (w.degenerate) continue;
        md << "- window " << w.window_index << ":";
        const auto dom = analysis::dominant_modes(w.result, 2);
        if (dom.size() >= 2) {
            md << " dominant mode 2: " << format_groups(analysis::spatial_pattern(dom[1].mode, labels), labels) << ";";
        }
        try {
            const auto zf = analysis::zero_frequency_mode(w.result, {.frequency_tol = std::nullopt, .skip_stationary = true});
            md << " avalanche mode: " << format_groups(analysis::spatial_pattern(zf.mode, labels), labels);
        } catch (const NotFoundError&) {
            md << " avalanche mode: none";
        }
        md << "\n";
    }

    if (!out.warnings.empty()) {
        md << "\n## Warnings\n\n";
        for (const auto& wmsg : out.warnings) md << "- " << wmsg << "\n";
    }
    return md.str();
}

}  // namespace detail

/// Windowed Koopman analysis of a snapshot matrix, writing per-window spectra
/// and modes, amplitude series, the transition verdict and report.md.
inline AnalysisOutput analyze_snapshots(const SnapshotMatrix& s, const AnalysisConfig& cfg, const fs::path& output_dir,
                                        const Formats& formats, const std::string& input_name) {
    cfg.validate();
    ensure_dir(output_dir);
    AnalysisOutput out;
    out.windows = analysis::windowed_dmd(s, {cfg.window_len, cfg.stride, cfg.rank, cfg.threads});
    for (const auto& w : out.windows) {
        if (w.degenerate) out.warnings.push_back("window " + std::to_string(w.window_index) + ": " + w.warning);
    }
    if (out.windows.size() >= 2) {
        out.transition = analysis::detect_transition(std::span<const analysis::WindowAnalysis>(out.windows),
                                                     {cfg.jump_threshold, cfg.direction});
    } else {
        out.transition.criterion = {cfg.jump_threshold, cfg.direction};
        out.transition.max_amplitudes = {out.windows.front().max_amplitude};
        out.warnings.push_back("a single window cannot show a transition");
    }

    const auto labels = s.effective_labels();
    if (formats.csv) {
        for (const auto& w : out.windows) {
            const auto suffix = "_w" + std::to_string(w.window_index) + ".csv";
            if (w.degenerate) {
                csv::write_atomic(output_dir / ("spectrum" + suffix),
                                  csv::Table({"re_lambda", "im_lambda", "re_mu", "im_mu", "amplitude", "mode_norm",
                                              "group"})
                                      .str());
                csv::write_atomic(output_dir / ("modes" + suffix),
                                  csv::Table({"mode", "node", "re_v", "im_v", "abs_v"}).str());
                continue;
            }
            csv::write_atomic(output_dir / ("spectrum" + suffix), detail::spectrum_table(w).str());
            csv::write_atomic(output_dir / ("modes" + suffix),
                              detail::modes_table(detail::report_modes(w), labels).str());
        }
        csv::write_atomic(output_dir / "amplitudes.csv", detail::amplitudes_table(out.windows).str());
        csv::write_atomic(output_dir / "transition.csv", detail::transition_table(out.transition).str());
    }
    if (formats.report) {
        csv::write_atomic(output_dir / "report.md", detail::report_md(input_name, s, cfg, out));
    }
    return out;
}

inline AnalysisOutput cmd_analyze(const fs::path& input, const AnalysisConfig& cfg, const fs::path& output_dir,
                                  const Formats& formats = {}, std::optional<double> dt = std::nullopt) {
    const auto s = csv::read_snapshots(input, dt);
    return analyze_snapshots(s, cfg, output_dir, formats, input.string());
}

struct PipelineOutput {
    SimulationOutput simulation;
    AnalysisOutput analysis;
};

/// cmd_simulate followed by cmd_analyze on the snapshots it just wrote.
inline PipelineOutput cmd_pipeline(const RunConfig& c) {
    auto sim = cmd_simulate(c);
    auto ana = cmd_analyze(c.output_dir / "snapshots.csv", c.analysis, c.output_dir, c.formats);
    return {std::move(sim), std::move(ana)};
}

}  // namespace koopnet::cli
