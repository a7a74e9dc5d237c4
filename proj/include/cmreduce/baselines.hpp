#ifndef CMREDUCE_BASELINES_HPP
#define CMREDUCE_BASELINES_HPP

#include <cstdint>
#include <string_view>
#include <vector>

#include "cmreduce/ofdm.hpp"
#include "cmreduce/sign_select.hpp"

namespace cmr {

enum class PhaseAlphabet { Pm1, QpskPhases };

PhaseAlphabet parse_alphabet(std::string_view id); // "pm1" | "qpsk_phases"
std::string to_string(PhaseAlphabet a);

struct SlmConfig {
    std::size_t candidates = 100;                       ///< S
    PhaseAlphabet alphabet = PhaseAlphabet::QpskPhases; ///< per-entry phase set
    std::uint64_t seed = 0;

    void validate() const; // candidates >= 1
};

struct SlmOutcome {
    SymbolFrame best;
    double eta = 0.0;
    std::size_t candidate_index = 0;
};

/// Selected Mapping: candidate 0 is the identity phase vector, candidates
/// 1..S-1 carry pseudo-random per-subcarrier phases from the alphabet. The
/// candidate of minimum symbol metric wins; ties go to the lowest index.
SlmOutcome slm_reduce(const SymbolFrame& frame, const SlmConfig& cfg);

struct ExhaustiveOutcome {
    std::vector<int> signs;
    double eta_min = 0.0;
};

/// Global optimum over all 2^(N - n_fixed) sign vectors (at most 20
/// selectable signs). Ties resolve to the lexicographically smallest sign
/// vector with +1 ordered before -1.
ExhaustiveOutcome exhaustive_sign_search(const SignProblem& p);

/// Uniform i.i.d. signs on the selectable indices, +1 on the fixed prefix.
std::vector<int> random_signs(const SignProblem& p, std::uint64_t seed);

} // namespace cmr

#endif
