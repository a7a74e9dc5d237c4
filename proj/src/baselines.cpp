#include "cmreduce/baselines.hpp"

#include <array>
#include <bit>
#include <random>
#include <stdexcept>

#include "cmreduce/detail/tones.hpp"
#include "cmreduce/errors.hpp"
#include "cmreduce/rng.hpp"

namespace cmr {

namespace {

constexpr std::size_t kExhaustiveLimit = 20;

double raw_pow6_sum(const std::vector<cxd>& sig) {
    double acc = 0.0;
    for (const auto& s : sig) {
        const double p = std::norm(s);
        acc += p * p * p;
    }
    return acc;
}

} // namespace

PhaseAlphabet parse_alphabet(std::string_view id) {
    if (id == "pm1") return PhaseAlphabet::Pm1;
    if (id == "qpsk_phases") return PhaseAlphabet::QpskPhases;
    throw config_error("unknown phase alphabet '" + std::string(id) +
                       "' (expected pm1 or qpsk_phases)");
}

std::string to_string(PhaseAlphabet a) {
    return a == PhaseAlphabet::Pm1 ? "pm1" : "qpsk_phases";
}

void SlmConfig::validate() const {
    if (candidates < 1) {
        throw std::invalid_argument("SlmConfig: need at least one candidate representation");
    }
}

SlmOutcome slm_reduce(const SymbolFrame& frame, const SlmConfig& cfg) {
    cfg.validate();
    frame.validate();

    static constexpr std::array<cxd, 4> kQpskPhases = {
        cxd{1.0, 0.0}, cxd{0.0, 1.0}, cxd{-1.0, 0.0}, cxd{0.0, -1.0}};

    std::mt19937_64 rng(cfg.seed);
    SlmOutcome best;
    best.best = frame;
    best.eta = srcm(synthesize(frame));
    best.candidate_index = 0;

    SymbolFrame candidate = frame;
    for (std::size_t s = 1; s < cfg.candidates; ++s) {
        for (std::size_t k = 0; k < frame.data.size(); ++k) {
            const cxd phase = cfg.alphabet == PhaseAlphabet::Pm1
                                  ? cxd{(rng() & 1u) ? -1.0 : 1.0, 0.0}
                                  : kQpskPhases[rng() & 3u];
            candidate.data[k] = frame.data[k] * phase;
        }
        const double eta = srcm(synthesize(candidate));
        if (eta < best.eta) {
            best.best = candidate;
            best.eta = eta;
            best.candidate_index = s;
        }
    }
    return best;
}

ExhaustiveOutcome exhaustive_sign_search(const SignProblem& p) {
    p.validate();
    const std::size_t r = p.n_selectable();
    if (r > kExhaustiveLimit) {
        throw capacity_error("exhaustive_sign_search: at most " +
                             std::to_string(kExhaustiveLimit) + " selectable signs, got " +
                             std::to_string(r));
    }

    const std::size_t total = p.n() * static_cast<std::size_t>(p.oversampling);
    const auto w = detail::unit_tone_table(total);

    // With no fixed prefix the whole signal negates under x -> -x, so eta is
    // shared within each {x, -x} pair and the first selectable sign can be
    // pinned to +1. That halves the search and makes the returned optimum the
    // canonical (lexicographically smallest, +1 < -1) pair member by
    // construction. A nonzero prefix breaks that symmetry: enumerate fully.
    const std::size_t pinned = (p.n_fixed == 0 && r > 0) ? 1 : 0;
    const std::size_t free = r - pinned;
    std::vector<std::vector<cxd>> tones(free, std::vector<cxd>(total));
    for (std::size_t o = 0; o < free; ++o) {
        const std::size_t k = p.n_fixed + pinned + o;
        detail::fill_tone(tones[o], w, p.symbols[k], k);
    }

    // Start from the all-plus vector, walk the free signs in Gray-code order.
    std::vector<cxd> sig(total, cxd{0.0, 0.0});
    std::vector<cxd> tone(total);
    for (std::size_t k = 0; k < p.n_fixed + pinned; ++k) {
        detail::fill_tone(tone, w, p.symbols[k], k);
        for (std::size_t i = 0; i < total; ++i) {
            sig[i] += tone[i];
        }
    }
    for (std::size_t o = 0; o < free; ++o) {
        for (std::size_t i = 0; i < total; ++i) {
            sig[i] += tones[o][i];
        }
    }

    const double nfac = p.sigma_b_sq * static_cast<double>(p.n());
    const double denom = static_cast<double>(total) * nfac * nfac * nfac;
    std::vector<int> cur(free, +1);

    // Lexicographic key with +1 < -1: the first free index is the most
    // significant bit, a -1 sign sets the bit.
    std::uint32_t key = 0;
    double best_eta = raw_pow6_sum(sig) / denom;
    std::uint32_t best_key = key;

    const std::uint64_t count = std::uint64_t{1} << free;
    for (std::uint64_t step = 1; step < count; ++step) {
        const std::size_t flip = static_cast<std::size_t>(std::countr_zero(step));
        const double delta = -2.0 * static_cast<double>(cur[flip]);
        const auto& t = tones[flip];
        for (std::size_t i = 0; i < total; ++i) {
            sig[i] += delta * t[i];
        }
        cur[flip] = -cur[flip];
        key ^= std::uint32_t{1} << (free - 1 - flip);

        const double eta = raw_pow6_sum(sig) / denom;
        if (eta < best_eta || (eta == best_eta && key < best_key)) {
            best_eta = eta;
            best_key = key;
        }
    }

    ExhaustiveOutcome out;
    out.signs.assign(p.n(), +1);
    for (std::size_t o = 0; o < free; ++o) {
        out.signs[p.n_fixed + pinned + o] = (best_key >> (free - 1 - o)) & 1u ? -1 : +1;
    }
    out.eta_min = best_eta;
    return out;
}

std::vector<int> random_signs(const SignProblem& p, std::uint64_t seed) {
    p.validate();
    std::mt19937_64 rng(seed);
    return draw_signs(p.n(), p.n_fixed, rng);
}

} // namespace cmr
