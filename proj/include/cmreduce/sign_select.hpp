#ifndef CMREDUCE_SIGN_SELECT_HPP
#define CMREDUCE_SIGN_SELECT_HPP

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "cmreduce/constellation.hpp"
#include "cmreduce/ofdm.hpp"

namespace cmr {

/// Which closed-form decision statistic drives the sequential sign selection.
///
/// Alg1Printed sums |p|^6 + 18|p|^4 + 72|p|^2 differences on the unnormalized
/// cumulative signal. Chi2Scaled evaluates the same polynomial on the
/// non-centrality parameters lambda = |E[s(n)]|^2 / sigma_{s,j}^2 with
/// sigma_{s,j}^2 = (1 - j/N)/2, so the per-iteration scaling differs between
/// the two. They are not algebraically identical; both are provided.
enum class RuleVariant { Alg1Printed, Chi2Scaled };

RuleVariant parse_variant(std::string_view id); // "alg1" | "chi2"
std::string to_string(RuleVariant v);

/// Sign-selection input: N symbols of which the first n_fixed carry
/// full-constellation data (sign fixed to +1) and the rest come from the
/// half constellation with a selectable sign.
struct SignProblem {
    std::vector<cxd> symbols;
    std::size_t n_fixed = 0;
    int oversampling = 4;
    double sigma_b_sq = 1.0;

    std::size_t n() const { return symbols.size(); }
    std::size_t n_selectable() const { return symbols.size() - n_fixed; }
    void validate() const; // throws std::invalid_argument

    SymbolFrame frame_with_signs(std::span<const int> signs) const;
};

/// Checks that prefix symbols belong to the full constellation and selectable
/// symbols to the half constellation. Throws std::invalid_argument.
void validate_membership(const SignProblem& p, const HalfConstellation& hc);

struct DecisionStep {
    std::size_t index = 0;      ///< subcarrier whose sign was decided
    double statistic = 0.0;     ///< Delta_j (exact-CE runs: g+ - g-)
    int sign = +1;              ///< chosen sign
    double cond_expectation = 0.0; ///< min(g+, g-) for exact-CE runs, NaN otherwise
};

using DecisionTrace = std::vector<DecisionStep>;

struct ReductionOutcome {
    std::vector<int> signs;  ///< length N, +1 on the fixed prefix
    DecisionTrace trace;     ///< one record per selectable index
    TimeSignal signal;       ///< synthesized c (.) x*, unit-power normalized
};

/// Sequential sign selection by the conditional-expectation decision rule.
///
/// Maintains the unnormalized cumulative signal h (prefix subcarriers summed
/// up front); at iteration j compares the statistic of h + c_j e_j against
/// h - c_j e_j and keeps the better branch. sign(0) resolves to +1.
ReductionOutcome ce_reduce(const SignProblem& p, RuleVariant variant);

/// The per-iteration statistic Delta_j, factored out of ce_reduce.
/// h and contribution (= c_j e_j) are unnormalized length-LN vectors.
/// Positive Delta means the -1 branch wins.
double decision_statistic(std::span<const cxd> h, std::span<const cxd> contribution,
                          RuleVariant variant, std::size_t j, const SignProblem& p);

/// How exact conditional expectations are evaluated: full enumeration of the
/// undecided signs, or a sample average over k shared completions.
struct ExactCeMode {
    enum class Kind { Exhaustive, SampleAverage };
    Kind kind = Kind::Exhaustive;
    std::size_t samples = 0;
    std::uint64_t seed = 0;

    static ExactCeMode exhaustive() { return {}; }
    static ExactCeMode sample_average(std::size_t k, std::uint64_t seed) {
        return {Kind::SampleAverage, k, seed};
    }
};

struct ExactCeOutcome {
    std::vector<int> signs;
    DecisionTrace trace; ///< cond_expectation populated at every step
};

/// Reference implementation of the CE Method: at each iteration the
/// conditional expectations g_j+- of the symbol metric are computed exactly
/// (enumeration; requires N - n_fixed <= 16) or by a common-random-numbers
/// sample average, and the smaller branch is taken (ties to +1).
ExactCeOutcome exact_ce_reduce(const SignProblem& p, const ExactCeMode& mode);

/// E over the undecided signs of the symbol metric before any decision.
double initial_expectation(const SignProblem& p, const ExactCeMode& mode);

} // namespace cmr

#endif
