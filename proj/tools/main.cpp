// cmreduce: cubic-metric reduction of OFDM symbols by conditional-expectation
// sign selection, with Monte Carlo simulation and oracle cross-checks.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cmreduce/baselines.hpp"
#include "cmreduce/constellation.hpp"
#include "cmreduce/errors.hpp"
#include "cmreduce/harness.hpp"
#include "cmreduce/ofdm.hpp"
#include "cmreduce/rng.hpp"
#include "cmreduce/sign_select.hpp"

namespace {

using namespace cmr;

struct CommonFlags {
    std::string scheme = "qam16";
    std::size_t n = 64;
    int oversampling = 4;
    std::size_t n_fixed = 0;
    std::string variant = "alg1";
    std::uint64_t seed = 1;
};

std::vector<cxd> read_symbol_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open symbol file " + path.string());
    }
    std::vector<cxd> symbols;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos) {
            throw std::invalid_argument("symbol file line " + std::to_string(line_no) +
                                        ": expected 're,im'");
        }
        try {
            symbols.emplace_back(std::stod(line.substr(0, comma)),
                                 std::stod(line.substr(comma + 1)));
        } catch (const std::exception&) {
            throw std::invalid_argument("symbol file line " + std::to_string(line_no) +
                                        ": expected 're,im'");
        }
    }
    if (symbols.empty()) {
        throw std::invalid_argument("symbol file " + path.string() + " holds no symbols");
    }
    return symbols;
}

void write_signal_file(const TimeSignal& sig, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open " + path.string());
    }
    for (const auto& s : sig.samples) {
        char buf[80];
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", s.real(), s.imag());
        out << buf;
    }
}

std::string sign_string(const std::vector<int>& signs) {
    std::string out = "[";
    for (std::size_t i = 0; i < signs.size(); ++i) {
        out += signs[i] > 0 ? "+1" : "-1";
        if (i + 1 < signs.size()) {
            out += ", ";
        }
    }
    return out + "]";
}

void print_summary(const Summary& s, const ExperimentConfig& cfg) {
    std::printf("symbols=%zu scheme=%s N=%zu L=%d nf=%zu reducer=%s variant=%s rate_loss=%.4f\n",
                s.n_symbols, to_string(cfg.scheme).c_str(), cfg.n_subcarriers, cfg.oversampling,
                cfg.n_fixed, to_string(cfg.reducer).c_str(), to_string(cfg.variant).c_str(),
                s.rate_loss);
    std::printf("  orig RCM       = %.4f dB    reduced RCM     = %.4f dB\n", s.rcm_db_before,
                s.rcm_db_after);
    std::printf("  mean SRCM      = %.4f dB    mean SRCM after = %.4f dB\n",
                s.mean_srcm_db_before, s.mean_srcm_db_after);
    std::printf("  max SRCM after = %.4f dB    P(eta_after > 6) = %.4f\n", s.max_srcm_db_after,
                s.frac_eta_after_above_6);
    if (s.cm_db_before) {
        std::printf("  orig CM        = %.4f dB    reduced CM      = %.4f dB\n", *s.cm_db_before,
                    *s.cm_db_after);
    }
}

SignProblem problem_from_flags(const CommonFlags& flags,
                               const std::optional<std::string>& symbol_file) {
    const Constellation full = build_constellation(parse_scheme(flags.scheme));
    const HalfConstellation half = half_constellation(full);

    SignProblem prob;
    prob.oversampling = flags.oversampling;
    prob.sigma_b_sq = full.sigma_b_sq;
    prob.n_fixed = flags.n_fixed;
    if (symbol_file) {
        prob.symbols = read_symbol_file(*symbol_file);
        validate_membership(prob, half);
    } else {
        std::mt19937_64 rng(per_symbol_seed(flags.seed, 0));
        prob.symbols = draw_frame(full, half, flags.n, flags.n_fixed, rng);
    }
    prob.validate();
    return prob;
}

int cmd_reduce(const CommonFlags& flags, const std::optional<std::string>& symbol_file,
               bool show_trace, const std::optional<std::string>& signal_out) {
    const SignProblem prob = problem_from_flags(flags, symbol_file);
    const RuleVariant variant = parse_variant(flags.variant);

    const double eta_before = srcm(synthesize(prob.frame_with_signs(
        std::vector<int>(prob.n(), +1))));
    const auto outcome = ce_reduce(prob, variant);
    const double eta_after = srcm(outcome.signal);

    std::printf("x* = %s\n", sign_string(outcome.signs).c_str());
    std::printf("eta before = %.6f (%.4f dB)\n", eta_before, srcm_db(eta_before));
    std::printf("eta after  = %.6f (%.4f dB)\n", eta_after, srcm_db(eta_after));
    if (show_trace) {
        std::printf("trace (j, delta, sign):\n");
        for (const auto& step : outcome.trace) {
            std::printf("  %4zu  % .6e  %+d\n", step.index, step.statistic, step.sign);
        }
    }
    if (signal_out) {
        write_signal_file(outcome.signal, *signal_out);
        std::printf("signal written to %s (%zu samples)\n", signal_out->c_str(),
                    outcome.signal.samples.size());
    }
    return 0;
}

struct PresetRun {
    std::string suffix;
    ExperimentConfig config;
};

std::vector<PresetRun> preset_runs(const std::string& name) {
    auto base = [](std::size_t n, std::size_t nf, Reducer red, std::uint64_t seed) {
        ExperimentConfig cfg;
        cfg.n_subcarriers = n;
        cfg.n_fixed = nf;
        cfg.reducer = red;
        cfg.n_symbols = 2000;
        cfg.master_seed = seed;
        cfg.slm.candidates = 100;
        return cfg;
    };
    if (name == "table1-n64") return {{"", base(64, 0, Reducer::Ce, 1001)}};
    if (name == "table1-n512") return {{"", base(512, 0, Reducer::Ce, 1002)}};
    if (name == "table1-n1024") return {{"", base(1024, 0, Reducer::Ce, 1003)}};
    if (name == "fig2") {
        return {{"-n64", base(64, 0, Reducer::Ce, 2001)},
                {"-n64-pruned", base(64, 32, Reducer::Ce, 2002)},
                {"-n1024", base(1024, 0, Reducer::Ce, 2003)},
                {"-n1024-pruned", base(1024, 512, Reducer::Ce, 2004)}};
    }
    if (name == "fig3-slm") {
        return {{"-slm-n64", base(64, 0, Reducer::Slm, 3001)},
                {"-slm-n1024", base(1024, 0, Reducer::Slm, 3002)},
                {"-ce-n64", base(64, 0, Reducer::Ce, 3003)},
                {"-ce-n1024", base(1024, 0, Reducer::Ce, 3004)}};
    }
    if (name == "pruned-half") {
        return {{"-n64", base(64, 32, Reducer::Ce, 4001)},
                {"-n1024", base(1024, 512, Reducer::Ce, 4002)}};
    }
    throw config_error("unknown preset '" + name +
                       "' (expected table1-n64, table1-n512, table1-n1024, fig2, fig3-slm, "
                       "pruned-half)");
}

void write_run_outputs(const ExperimentResult& result, const std::filesystem::path& stem,
                       std::vector<std::filesystem::path>& written) {
    written.push_back(std::filesystem::path(stem).concat(".csv"));
    written.push_back(std::filesystem::path(stem).concat(".summary.json"));
    persist(result, stem);

    std::vector<double> before_db(result.records.size());
    std::vector<double> after_db(result.records.size());
    for (std::size_t i = 0; i < result.records.size(); ++i) {
        before_db[i] = result.records[i].srcm_db_before;
        after_db[i] = result.records[i].srcm_db_after;
    }
    const std::size_t points =
        std::min<std::size_t>(101, std::max<std::size_t>(2, result.records.size()));
    const auto ccdf_before = std::filesystem::path(stem).concat(".ccdf_before.csv");
    const auto ccdf_after = std::filesystem::path(stem).concat(".ccdf_after.csv");
    written.push_back(ccdf_before);
    write_ccdf_csv(ccdf(before_db, points), ccdf_before);
    written.push_back(ccdf_after);
    write_ccdf_csv(ccdf(after_db, points), ccdf_after);
}

int cmd_simulate(ExperimentConfig cfg, const std::optional<std::string>& preset,
                 const std::optional<std::string>& out_stem, unsigned workers) {
    std::vector<PresetRun> runs;
    if (preset) {
        runs = preset_runs(*preset);
    } else {
        runs.push_back({"", cfg});
    }

    std::vector<std::filesystem::path> written;
    try {
        for (const auto& run : runs) {
            run.config.validate();
            const auto result = run_experiment(run.config, workers);
            print_summary(summarize(result), run.config);
            if (out_stem) {
                const auto stem = std::filesystem::path(*out_stem + run.suffix);
                write_run_outputs(result, stem, written);
                std::printf("  outputs: %s{.csv,.summary.json,.ccdf_before.csv,.ccdf_after.csv}\n",
                            stem.string().c_str());
            }
        }
    } catch (...) {
        for (const auto& path : written) {
            std::error_code ec;
            std::filesystem::remove(path, ec);
        }
        throw;
    }
    return 0;
}

int cmd_oracle(const CommonFlags& flags, std::size_t frames, bool variance_check,
               std::vector<double> alphas, std::size_t variance_frames) {
    const Constellation full = build_constellation(parse_scheme(flags.scheme));
    const HalfConstellation half = half_constellation(full);
    const double slack = 1e-12;

    if (frames < 1) {
        throw std::invalid_argument("oracle: --frames must be >= 1");
    }
    if (flags.n_fixed > flags.n) {
        throw std::invalid_argument("oracle: --nf must not exceed --n");
    }
    if (flags.n - flags.n_fixed > 16) {
        throw capacity_error(
            "oracle: exact conditional expectations need N - nf <= 16; reduce --n or raise --nf");
    }

    std::size_t violations = 0;
    double worst_gap_alg1 = 0.0;
    double worst_gap_chi2 = 0.0;
    double sum_gap_alg1 = 0.0;
    double sum_gap_chi2 = 0.0;

    for (std::size_t f = 0; f < frames; ++f) {
        std::mt19937_64 rng(per_symbol_seed(flags.seed, f));
        SignProblem prob;
        prob.symbols = draw_frame(full, half, flags.n, flags.n_fixed, rng);
        prob.n_fixed = flags.n_fixed;
        prob.oversampling = flags.oversampling;
        prob.sigma_b_sq = full.sigma_b_sq;

        const double init = initial_expectation(prob, ExactCeMode::exhaustive());
        const auto exact = exact_ce_reduce(prob, ExactCeMode::exhaustive());

        // (a) non-increasing conditional expectations
        double prev = init;
        for (const auto& step : exact.trace) {
            if (step.cond_expectation > prev + slack * std::max(1.0, std::abs(prev))) {
                ++violations;
                std::printf("frame %zu: trace increases at j=%zu (%.17g > %.17g)\n", f, step.index,
                            step.cond_expectation, prev);
            }
            prev = step.cond_expectation;
        }

        // (b) guaranteed reduction
        const double eta_exact = srcm(synthesize(prob.frame_with_signs(exact.signs)));
        if (eta_exact > init + slack * std::max(1.0, init)) {
            ++violations;
            std::printf("frame %zu: final eta %.17g exceeds initial expectation %.17g\n", f,
                        eta_exact, init);
        }

        // (c) closed-form variants vs exact CE (reported, not asserted)
        const double eta_alg1 =
            srcm(ce_reduce(prob, RuleVariant::Alg1Printed).signal);
        const double eta_chi2 =
            srcm(ce_reduce(prob, RuleVariant::Chi2Scaled).signal);
        sum_gap_alg1 += eta_alg1 - eta_exact;
        sum_gap_chi2 += eta_chi2 - eta_exact;
        worst_gap_alg1 = std::max(worst_gap_alg1, eta_alg1 - eta_exact);
        worst_gap_chi2 = std::max(worst_gap_chi2, eta_chi2 - eta_exact);

        // (d) exhaustive optimum dominates everything
        const auto best = exhaustive_sign_search(prob);
        const double floor = best.eta_min - slack * std::max(1.0, best.eta_min);
        for (const double eta : {eta_exact, eta_alg1, eta_chi2}) {
            if (eta < floor) {
                ++violations;
                std::printf("frame %zu: eta %.17g beats the exhaustive minimum %.17g\n", f, eta,
                            best.eta_min);
            }
        }
    }

    std::printf("oracle: %zu frames, %zu violations\n", frames, violations);
    std::printf("  mean eta gap vs exact-CE: alg1 %+0.6f, chi2 %+0.6f\n",
                sum_gap_alg1 / static_cast<double>(frames),
                sum_gap_chi2 / static_cast<double>(frames));
    std::printf("  max  eta gap vs exact-CE: alg1 %+0.6f, chi2 %+0.6f\n", worst_gap_alg1,
                worst_gap_chi2);

    if (variance_check) {
        const auto profile = conditional_variance_profile(parse_scheme(flags.scheme), flags.n,
                                                          flags.oversampling, alphas, variance_frames,
                                                          flags.seed);
        std::printf("conditional variance profile (N=%zu, %zu frames):\n", flags.n, variance_frames);
        std::printf("  %-6s %-10s %-10s %-10s %-10s\n", "alpha", "var_re", "var_im", "cov",
                    "(1-a)/2");
        for (const auto& pt : profile) {
            std::printf("  %-6.3f %-10.5f %-10.5f %-10.5f %-10.5f\n", pt.alpha, pt.var_re,
                        pt.var_im, pt.cov_re_im, 0.5 * (1.0 - pt.alpha));
        }
    }
    return violations == 0 ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cubic-metric reduction of OFDM symbols by sign selection.\n"
                 "Worker count for simulations: CMREDUCE_WORKERS environment variable."};
    app.require_subcommand(1);

    CommonFlags flags;
    std::optional<std::string> symbol_file;
    std::optional<std::string> signal_out;
    bool show_trace = false;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--scheme", flags.scheme, "Modulation scheme: qpsk, qam16, qam64");
        cmd->add_option("--n", flags.n, "Number of subcarriers N");
        cmd->add_option("--l", flags.oversampling, "Oversampling factor L (>= 2)");
        cmd->add_option("--nf", flags.n_fixed, "Fixed full-constellation prefix length N_f");
        cmd->add_option("--seed", flags.seed, "Master seed");
    };

    auto* reduce = app.add_subcommand("reduce", "Reduce a single OFDM symbol");
    add_common(reduce);
    reduce->add_option("--variant", flags.variant, "Decision rule: alg1 or chi2");
    reduce->add_option("--in", symbol_file, "Input symbol file, one 're,im' per line");
    reduce->add_flag("--trace", show_trace, "Print the per-iteration decision trace");
    reduce->add_option("--signal-out", signal_out, "Write the reduced time signal to this file");

    auto* simulate = app.add_subcommand("simulate", "Run a Monte Carlo experiment");
    std::optional<std::string> config_path;
    std::optional<std::string> preset;
    std::optional<std::string> out_stem;
    std::string sim_scheme = "qam16", sim_variant = "alg1", sim_reducer = "ce";
    std::size_t sim_n = 64, sim_nf = 0, sim_symbols = 1000, sim_slm_s = 100;
    int sim_l = 4;
    std::uint64_t sim_seed = 1;
    double cm_kslp = 0.0, cm_kbw = 0.0, cm_rcmref = 0.0;
    unsigned workers = 0;
    simulate->add_option("--config", config_path, "JSON experiment config (flags override)");
    simulate->add_option("--preset", preset,
                         "Canned scenario: table1-n64, table1-n512, table1-n1024, fig2, fig3-slm, "
                         "pruned-half");
    auto* on = simulate->add_option("--n", sim_n, "Number of subcarriers N");
    auto* ol = simulate->add_option("--l", sim_l, "Oversampling factor L");
    auto* oscheme = simulate->add_option("--scheme", sim_scheme, "qpsk, qam16, qam64");
    auto* onf = simulate->add_option("--nf", sim_nf, "Fixed prefix length N_f");
    auto* ovariant = simulate->add_option("--variant", sim_variant, "alg1 or chi2");
    auto* oreducer = simulate->add_option("--reducer", sim_reducer, "ce, slm, none, exhaustive");
    auto* oslm = simulate->add_option("--slm-s", sim_slm_s, "SLM candidate count S");
    auto* osym = simulate->add_option("--symbols", sim_symbols, "Monte Carlo symbol count");
    auto* oseed = simulate->add_option("--seed", sim_seed, "Master seed");
    auto* okslp = simulate->add_option("--cm-kslp", cm_kslp, "CM slope factor K_slp");
    auto* okbw = simulate->add_option("--cm-kbw", cm_kbw, "CM bandwidth factor K_bw (dB)");
    auto* orcmref = simulate->add_option("--cm-rcmref", cm_rcmref, "Reference RCM (dB)");
    simulate->add_option("--out", out_stem, "Output stem for csv/summary/ccdf files");
    simulate->add_option("--workers", workers, "Worker threads (default: CMREDUCE_WORKERS or all)");

    auto* oracle = app.add_subcommand("oracle", "Exact-CE and exhaustive-search cross-checks");
    add_common(oracle);
    std::size_t frames = 100;
    bool variance_check = false;
    std::size_t variance_frames = 100;
    std::vector<double> alphas{0.0, 0.25, 0.5, 0.75};
    oracle->add_option("--frames", frames, "Number of random frames to check");
    oracle->add_flag("--variance-check", variance_check, "Also report the conditional variance profile");
    oracle->add_option("--variance-frames", variance_frames, "Frames for the variance profile");
    oracle->add_option("--alphas", alphas, "Decided fractions for the variance profile");

    CLI11_PARSE(app, argc, argv);

    try {
        if (reduce->parsed()) {
            return cmd_reduce(flags, symbol_file, show_trace, signal_out);
        }
        if (simulate->parsed()) {
            ExperimentConfig cfg;
            if (config_path) {
                std::ifstream in(*config_path);
                if (!in) {
                    throw std::runtime_error("cannot open config " + *config_path);
                }
                nlohmann::json j;
                try {
                    in >> j;
                } catch (const nlohmann::json::exception& e) {
                    throw schema_error(std::string("config json: ") + e.what());
                }
                cfg = config_from_json(j);
            }
            if (*on) cfg.n_subcarriers = sim_n;
            if (*ol) cfg.oversampling = sim_l;
            if (*oscheme) cfg.scheme = parse_scheme(sim_scheme);
            if (*onf) cfg.n_fixed = sim_nf;
            if (*ovariant) cfg.variant = parse_variant(sim_variant);
            if (*oreducer) cfg.reducer = parse_reducer(sim_reducer);
            if (*oslm) cfg.slm.candidates = sim_slm_s;
            if (*osym) cfg.n_symbols = sim_symbols;
            if (*oseed) cfg.master_seed = sim_seed;
            if (*okslp || *okbw || *orcmref) {
                CmParams p;
                p.k_slp = *okslp ? cm_kslp : 1.0;
                p.k_bw = cm_kbw;
                p.rcm_ref_db = cm_rcmref;
                cfg.cm = p;
            }
            return cmd_simulate(cfg, preset, out_stem, workers);
        }
        if (oracle->parsed()) {
            return cmd_oracle(flags, frames, variance_check, alphas, variance_frames);
        }
    } catch (const CLI::Error& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
