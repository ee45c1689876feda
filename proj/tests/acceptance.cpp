// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <sys/wait.h>

#include "koopnet/analysis.hpp"
#include "koopnet/bak_sneppen.hpp"
#include "koopnet/cli.hpp"
#include "koopnet/dmd.hpp"
#include "koopnet/ifo.hpp"
#include "support.hpp"

namespace {

using namespace koopnet;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

constexpr std::size_t kSeeds = 20;

struct Verdict {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int prec = 3) {
    std::ostringstream ss;
    ss.precision(prec);
    ss << v;
    return ss.str();
}

/// f(seed) for seeds 0..kSeeds-1 on a few worker threads, results in seed order.
template <class F>
auto per_seed(F f) {
    std::vector<decltype(f(std::uint64_t{}))> out(kSeeds);
    std::atomic<std::size_t> next{0};
    const unsigned workers = std::clamp(std::thread::hardware_concurrency(), 1U, 4U);
    std::vector<std::future<void>> jobs;
    for (unsigned t = 0; t < workers; ++t) {
        jobs.push_back(std::async(std::launch::async, [&] {
            for (std::size_t s = next++; s < kSeeds; s = next++) out[s] = f(s);
        }));
    }
    for (auto& j : jobs) j.get();
    return out;
}

Verdict dmd_oracle() {
    const auto t0 = Clock::now();
    Rng rng(20240601);
    double worst = 0.0;
    std::size_t ok = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + static_cast<std::size_t>(trial % 5);
        const auto sys = testsupport::random_linear_system(rng, n);
        const auto data = testsupport::iterate(sys.a, testsupport::random_vector(rng, n), 50);
        const auto res = dmd::dmd(SnapshotMatrix(data, 1.0));
        const double err = testsupport::match_error(testsupport::to_vector(res.eigenvalues), sys.eigenvalues);
        worst = std::max(worst, err);
        if (err < 1e-8) ++ok;
    }
    const double secs = seconds_since(t0);
    return {ok == 200 && secs < 10.0, std::to_string(ok) + "/200 systems within 1e-8 (worst " + fmt(worst) + "), " +
                                          fmt(secs, 2) + " s"};
}

struct IfoSeedResult {
    std::optional<ifo::SyncOnset> onset;
    // spectral reconfiguration after onset
    bool have_post_window = false;
    bool reconfigured = false;
    double slow_max = 0.0;
    double fast_min = 0.0;
    double slowest = 0.0;
    double bound = 0.0;
    // amplitude jump
    std::optional<std::size_t> transition;
    std::size_t qualifying = 0;
    double jump_ratio = 0.0;
    double fold = 0.0;
    bool transition_ok = false;
};

IfoSeedResult ifo_seed(std::uint64_t seed) {
    ifo::IfoParams p;  // 8x8 open, epsilon 0.145, gamma 2, dt 0.01
    p.seed = seed;
    const auto run = ifo::simulate_ifo(p, 5000);
    IfoSeedResult r;
    r.onset = ifo::synchronization_onset(run.avalanches, p.nodes());
    analysis::WindowOptions opt;
    opt.window_len = 200;
    const auto windows = analysis::windowed_dmd(run.snapshots, opt);
    const auto rep = analysis::detect_transition(std::span<const analysis::WindowAnalysis>(windows));
    r.transition = rep.transition_window;
    r.qualifying = rep.qualifying_boundaries;
    r.jump_ratio = rep.jump_ratio;
    r.fold = rep.fold_change;
    if (!r.onset) return r;

    const std::size_t onset_window = r.onset->step / 200;
    r.transition_ok = r.transition && r.qualifying == 1 && r.fold >= 1e2 &&
                      (*r.transition + 1 >= onset_window && *r.transition <= onset_window + 1);

    for (const auto& w : windows) {
        if (w.start_step < r.onset->step || w.degenerate) continue;
        r.have_post_window = true;
        auto rate = [&](std::size_t k) { return std::abs(w.result.continuous(static_cast<Eigen::Index>(k)).real()); };
        r.slow_max = 0.0;
        r.slowest = std::numeric_limits<double>::infinity();
        for (auto k : w.slow_group) {
            r.slow_max = std::max(r.slow_max, rate(k));
            r.slowest = std::min(r.slowest, rate(k));
        }
        r.fast_min = std::numeric_limits<double>::infinity();
        for (auto k : w.fast_group) r.fast_min = std::min(r.fast_min, rate(k));
        const double period_time = static_cast<double>(r.onset->period) * p.dt;
        r.bound = 0.1 * (2.0 * std::numbers::pi / period_time);
        r.reconfigured = !w.fast_group.empty() && !w.slow_group.empty() && r.fast_min >= 10.0 * r.slow_max &&
                         r.slowest < r.bound;
        break;
    }
    return r;
}

struct BsSeedResult {
    double plateau = 0.0;
    double threshold = 0.0;
    std::vector<double> stationary;
};

BsSeedResult bs_seed(std::uint64_t seed) {
    constexpr std::size_t iterations = 100000;
    const auto run = bs::simulate_bs({100, seed}, iterations);
    const std::size_t tail_start = iterations - iterations / 5;
    BsSeedResult r;
    r.plateau = run.snapshots.data().bottomRows(static_cast<Eigen::Index>(iterations - tail_start)).mean();
    r.threshold = bs::estimate_threshold(run.snapshots, tail_start);
    const auto tail = run.snapshots.data().bottomRows(static_cast<Eigen::Index>(iterations - tail_start));
    r.stationary.assign(tail.data(), tail.data() + tail.size());
    return r;
}

struct Localization {
    std::size_t windows = 0;
    std::size_t hits = 0;
    double mean_jaccard = 0.0;
};

Localization bs_localization(std::uint64_t seed) {
    constexpr std::size_t n = 100;
    const auto run = bs::simulate_bs({n, seed}, 2500);
    analysis::WindowOptions opt;
    opt.window_len = 200;
    const auto windows = analysis::windowed_dmd(run.snapshots, opt);
    Localization loc;
    for (const auto& w : windows) {
        ++loc.windows;
        if (w.degenerate) continue;
        std::set<std::size_t> replaced;
        for (std::size_t k = w.start_step + 1; k < w.end_step; ++k) {
            const auto i = run.min_history[k];
            replaced.insert((i + n - 1) % n);
            replaced.insert(i);
            replaced.insert((i + 1) % n);
        }
        analysis::ModeEntry zf;
        try {
            zf = analysis::zero_frequency_mode(w.result, {.frequency_tol = std::nullopt, .skip_stationary = true});
        } catch (const NotFoundError&) {
            continue;
        }
        const auto pattern = analysis::spatial_pattern(zf.mode);
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return pattern.nodes[a].magnitude > pattern.nodes[b].magnitude;
        });
        const std::set<std::size_t> top(order.begin(), order.begin() + n / 4);
        std::size_t inter = 0;
        for (auto i : top) inter += replaced.count(i);
        const double jac = static_cast<double>(inter) / static_cast<double>(top.size() + replaced.size() - inter);
        loc.mean_jaccard += jac;
        if (jac >= 0.3) ++loc.hits;
    }
    loc.mean_jaccard /= static_cast<double>(std::max<std::size_t>(loc.windows, 1));
    return loc;
}

int run_suite(const char* exe) {
    const std::string cmd = std::string("\"") + exe + "\" \"[property]\" >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

Verdict invariant_suites() {
    const std::vector<std::pair<std::string, const char*>> suites{
        {"ifo", KOOPNET_TEST_IFO}, {"bak_sneppen", KOOPNET_TEST_BS}, {"dmd", KOOPNET_TEST_DMD},
        {"analysis", KOOPNET_TEST_ANALYSIS}, {"csv", KOOPNET_TEST_CSV}};
    std::string failed;
    for (const auto& [name, exe] : suites) {
        if (run_suite(exe) != 0) failed += (failed.empty() ? "" : ", ") + name;
    }
    return {failed.empty(), failed.empty() ? "all property suites pass" : "failing property suites: " + failed};
}

std::map<std::string, std::string> csv_files(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().extension() == ".csv") out[e.path().filename().string()] = csv::read_file(e.path());
    }
    return out;
}

Verdict determinism() {
    const auto root = fs::temp_directory_path() / "koopnet_acceptance";
    std::string detail;
    bool pass = true;
    for (auto model : {cli::Model::ifo, cli::Model::bs}) {
        std::map<std::string, std::string> files[2];
        for (int rep = 0; rep < 2; ++rep) {
            cli::RunConfig c;
            c.model = model;
            c.ifo.seed = 7;
            c.bs = {100, 7};
            c.steps = 2500;
            c.output_dir = root / (std::string(cli::to_string(model)) + std::to_string(rep));
            fs::remove_all(c.output_dir);
            cli::cmd_pipeline(c);
            files[rep] = csv_files(c.output_dir);
        }
        const bool same = !files[0].empty() && files[0] == files[1];
        pass = pass && same;
        detail += std::string(cli::to_string(model)) + ": " + std::to_string(files[0].size()) + " CSV files " +
                  (same ? "identical" : "differ") + "; ";
    }
    fs::remove_all(root);
    return {pass, detail.substr(0, detail.size() - 2)};
}

}  // namespace

int main() {
    std::vector<std::pair<std::string, Verdict>> verdicts;
    auto report = [&](const std::string& name, Verdict v) {
        std::printf("criterion %s: %s  %s\n", name.c_str(), v.pass ? "PASS" : "FAIL", v.detail.c_str());
        std::fflush(stdout);
        verdicts.emplace_back(name, std::move(v));
    };

    report("1 (DMD eigenvalue oracle)", dmd_oracle());

    const auto t_ifo = Clock::now();
    const auto ifo_runs = per_seed(ifo_seed);
    const double ifo_secs = seconds_since(t_ifo);
    {
        std::size_t synced = 0;
        std::string onsets;
        for (const auto& r : ifo_runs) {
            if (r.onset) {
                ++synced;
                onsets += std::to_string(r.onset->step) + " ";
            } else {
                onsets += "- ";
            }
        }
        report("2 (IFO synchronization)",
               {synced * 10 >= kSeeds * 9 && ifo_secs < 30.0,
                std::to_string(synced) + "/20 seeds synchronize; onset steps " + onsets + "; " + fmt(ifo_secs, 2) +
                    " s for 20 runs of 5000 steps with windowed analysis"});
    }
    {
        std::size_t checked = 0;
        std::size_t ok = 0;
        double worst_sep = std::numeric_limits<double>::infinity();
        double worst_slow = 0.0;
        double bound = 0.0;
        for (const auto& r : ifo_runs) {
            if (!r.have_post_window) continue;
            ++checked;
            if (r.reconfigured) ++ok;
            worst_sep = std::min(worst_sep, r.slow_max > 0.0 ? r.fast_min / r.slow_max
                                                             : std::numeric_limits<double>::infinity());
            worst_slow = std::max(worst_slow, r.slowest);
            bound = r.bound;
        }
        report("3 (spectral reconfiguration after synchronization)",
               {checked > 0 && ok == checked,
                std::to_string(ok) + "/" + std::to_string(checked) +
                    " synchronized runs split into slow and fast groups; smallest fast/slow rate ratio " +
                    fmt(worst_sep) + "; slowest |Re mu| up to " + fmt(worst_slow) + " (bound " + fmt(bound) + ")"});
    }
    {
        std::size_t ok = 0;
        double min_fold = std::numeric_limits<double>::infinity();
        std::string where;
        for (const auto& r : ifo_runs) {
            if (r.transition_ok) {
                ++ok;
                min_fold = std::min(min_fold, r.fold);
            }
            where += (r.transition ? std::to_string(*r.transition) : std::string("-")) + "/" +
                     (r.onset ? std::to_string(r.onset->step / 200) : std::string("-")) + " ";
        }
        double typical_ratio = 0.0;
        for (const auto& r : ifo_runs) {
            if (r.transition_ok) {
                typical_ratio = r.jump_ratio;
                break;
            }
        }
        report("4 (amplitude-jump transition)",
               {ok * 10 >= kSeeds * 9,
                std::to_string(ok) + "/20 seeds flag exactly one transition at or next to the onset window; "
                "smallest fold change " + fmt(min_fold) + " (e.g. ratio " + fmt(typical_ratio) +
                    "); transition/onset windows " + where});
    }

    const auto t_bs = Clock::now();
    const auto bs_runs = per_seed(bs_seed);
    const double bs_secs = seconds_since(t_bs);
    {
        std::size_t ok = 0;
        double lo = 1.0;
        double hi = 0.0;
        for (const auto& r : bs_runs) {
            if (r.plateau >= 0.75 && r.plateau <= 0.85) ++ok;
            lo = std::min(lo, r.plateau);
            hi = std::max(hi, r.plateau);
        }
        report("5 (Bak-Sneppen plateau)", {ok * 20 >= kSeeds * 19 && bs_secs < 20.0,
                                           std::to_string(ok) + "/20 seeds in [0.75, 0.85] (range " + fmt(lo, 4) +
                                               " to " + fmt(hi, 4) + "); " + fmt(bs_secs, 2) + " s for 20 runs"});
    }
    {
        std::vector<double> est;
        for (const auto& r : bs_runs) est.push_back(r.threshold);
        const double mean = std::accumulate(est.begin(), est.end(), 0.0) / static_cast<double>(est.size());
        double var = 0.0;
        for (double e : est) var += (e - mean) * (e - mean);
        const double sd = std::sqrt(var / static_cast<double>(est.size() - 1));
        std::size_t below = 0;
        std::size_t total = 0;
        for (const auto& r : bs_runs) {
            for (double x : r.stationary) below += x < r.threshold - 0.05 ? 1 : 0;
            total += r.stationary.size();
        }
        const double frac = static_cast<double>(below) / static_cast<double>(total);
        report("6 (Bak-Sneppen stationary support)",
               {sd < 0.02 && frac < 0.02, "x_crit estimate " + fmt(mean, 4) + " +- " + fmt(sd, 2) +
                                              " across seeds (needs < 0.02); fraction below estimate - 0.05 is " +
                                              fmt(100.0 * frac, 3) + "% (needs < 2%)"});
    }
    {
        const auto locs = per_seed(bs_localization);
        std::size_t windows = 0;
        std::size_t hits = 0;
        double mean = 0.0;
        for (const auto& l : locs) {
            windows += l.windows;
            hits += l.hits;
            mean += l.mean_jaccard * static_cast<double>(l.windows);
        }
        mean /= static_cast<double>(windows);
        const double rate = static_cast<double>(hits) / static_cast<double>(windows);
        report("7 (zero-frequency avalanche localization)",
               {rate >= 0.8, std::to_string(hits) + "/" + std::to_string(windows) + " windows (" +
                                 fmt(100.0 * rate, 3) + "%) reach Jaccard >= 0.3; mean Jaccard " + fmt(mean)});
    }

    report("8 (invariant suites)", invariant_suites());
    report("9 (pipeline determinism)", determinism());

    const auto failed = std::count_if(verdicts.begin(), verdicts.end(), [](const auto& v) { return !v.second.pass; });
    std::printf("%zu/%zu criteria pass\n", verdicts.size() - static_cast<std::size_t>(failed), verdicts.size());
    return failed == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
