#ifndef CMREDUCE_HARNESS_HPP
#define CMREDUCE_HARNESS_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cmreduce/baselines.hpp"
#include "cmreduce/constellation.hpp"
#include "cmreduce/ofdm.hpp"
#include "cmreduce/sign_select.hpp"

namespace cmr {

enum class Reducer { None, Ce, Slm, Exhaustive };

Reducer parse_reducer(std::string_view id); // "none" | "ce" | "slm" | "exhaustive"
std::string to_string(Reducer r);

/// Full description of one Monte Carlo run. Per-symbol randomness is derived
/// from (master_seed, symbol index), so results are independent of the worker
/// count and of scheduling order.
struct ExperimentConfig {
    std::size_t n_subcarriers = 64;
    int oversampling = 4;
    Scheme scheme = Scheme::Qam16;
    std::size_t n_fixed = 0;
    Reducer reducer = Reducer::Ce;
    RuleVariant variant = RuleVariant::Alg1Printed;
    SlmConfig slm{};               ///< candidates/alphabet when reducer == Slm
    std::size_t n_symbols = 1000;
    std::uint64_t master_seed = 1;
    std::optional<CmParams> cm;

    void validate() const; // throws config_error
};

struct SymbolRecord {
    std::uint64_t index = 0;
    std::uint64_t seed = 0;
    double eta_before = 0.0;       ///< linear symbol metric of the unreduced frame
    double eta_after = 0.0;
    double srcm_db_before = 0.0;
    double srcm_db_after = 0.0;
    std::int64_t elapsed_ns = 0;   ///< reducer wall time; informational only
};

struct ExperimentResult {
    ExperimentConfig config;
    std::vector<SymbolRecord> records;
    PooledMoments pooled_before; ///< second/sixth moments pooled across all symbols
    PooledMoments pooled_after;
};

/// Runs the configured experiment. workers = 0 picks the CMREDUCE_WORKERS
/// environment variable, falling back to the hardware concurrency.
ExperimentResult run_experiment(const ExperimentConfig& cfg, unsigned workers = 0);

struct CcdfPoint {
    double threshold_db = 0.0;
    double probability = 0.0; ///< fraction of values strictly above the threshold
};

struct CcdfTable {
    std::vector<CcdfPoint> points;
};

/// Exceedance table over n_points thresholds spanning [min, max] uniformly.
CcdfTable ccdf(std::span<const double> values_db, std::size_t n_points);

struct Summary {
    std::size_t n_symbols = 0;
    double rate_loss = 0.0;
    double rcm_db_before = 0.0; ///< pooled, whole-run
    double rcm_db_after = 0.0;
    double mean_srcm_db_before = 0.0;
    double mean_srcm_db_after = 0.0;
    double max_srcm_db_after = 0.0;
    double max_eta_after = 0.0;
    double frac_eta_after_above_6 = 0.0; ///< asymptotic upper-bound exceedance
    std::optional<double> cm_db_before;
    std::optional<double> cm_db_after;
};

Summary summarize(const ExperimentResult& result);

/// Writes <stem>.csv (per-symbol records) and <stem>.summary.json (config
/// echo, pooled moments, aggregates). Round-trip exact for all record fields.
void persist(const ExperimentResult& result, const std::filesystem::path& stem);
ExperimentResult load(const std::filesystem::path& stem);

void write_ccdf_csv(const CcdfTable& table, const std::filesystem::path& path);

nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const nlohmann::json& j);

/// Empirical check of the conditional signal moments: with frames drawn from
/// the half constellation and the first j = alpha*N signs treated as decided,
/// the per-sample conditional variance of the real and imaginary parts is
/// sum_{k>=j} Re/Im(c_k e_k)^2 / (sigma_b_sq*N). As N grows this approaches
/// (1-alpha)/2 per component with zero cross-covariance, which is what the
/// chi-squared decision rule assumes.
struct VarianceCheckPoint {
    double alpha = 0.0;
    double var_re = 0.0;
    double var_im = 0.0;
    double cov_re_im = 0.0;
};

std::vector<VarianceCheckPoint> conditional_variance_profile(Scheme scheme, std::size_t n,
                                                             int oversampling,
                                                             std::span<const double> alphas,
                                                             std::size_t n_frames,
                                                             std::uint64_t master_seed);

} // namespace cmr

#endif
