#include "cmreduce/sign_select.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "cmreduce/detail/tones.hpp"
#include "cmreduce/errors.hpp"

namespace cmr {

namespace {

constexpr std::size_t kExactCeLimit = 16;

double sixth_moment_poly(double x) {
    // x^3 + 18 x^2 + 72 x; the third noncentral chi-squared moment minus its
    // constant term, which cancels in every +/- comparison.
    return x * (x * (x + 18.0) + 72.0);
}

double statistic_kernel(std::span<const cxd> h, std::span<const cxd> contribution,
                        RuleVariant variant, std::size_t j, const SignProblem& prob) {
    const std::size_t total = h.size();
    double acc = 0.0;
    if (variant == RuleVariant::Alg1Printed) {
        for (std::size_t i = 0; i < total; ++i) {
            const double np = std::norm(h[i] + contribution[i]);
            const double nm = std::norm(h[i] - contribution[i]);
            acc += sixth_moment_poly(np) - sixth_moment_poly(nm);
        }
    } else {
        const double n_sub = static_cast<double>(prob.n());
        // alpha = j/N, clamped to (N-1)/N so the final-iteration variance
        // sigma_{s,j}^2 = (1 - alpha)/2 stays positive.
        const double alpha = static_cast<double>(std::min(j, prob.n() - 1)) / n_sub;
        const double sigma_sq = 0.5 * (1.0 - alpha);
        const double scale = 1.0 / (prob.sigma_b_sq * n_sub * sigma_sq);
        for (std::size_t i = 0; i < total; ++i) {
            const double lp = std::norm(h[i] + contribution[i]) * scale;
            const double lm = std::norm(h[i] - contribution[i]) * scale;
            acc += sixth_moment_poly(lp) - sixth_moment_poly(lm);
        }
    }
    return acc;
}

// Unnormalized sixth-moment sum of base + rest (used inside enumeration loops).
double raw_pow6_sum(std::span<const cxd> base, std::span<const cxd> rest) {
    double acc = 0.0;
    for (std::size_t i = 0; i < base.size(); ++i) {
        const double p = std::norm(base[i] + rest[i]);
        acc += p * p * p;
    }
    return acc;
}

struct ExactCeContext {
    std::size_t total = 0;
    double eta_denom = 0.0; // LN * (sigma_b_sq * N)^3
    std::vector<std::vector<cxd>> tone_symbols; // c_k e_k for selectable k, indexed from n_fixed
};

ExactCeContext make_exact_context(const SignProblem& p) {
    ExactCeContext ctx;
    ctx.total = p.n() * static_cast<std::size_t>(p.oversampling);
    const double norm = p.sigma_b_sq * static_cast<double>(p.n());
    ctx.eta_denom = static_cast<double>(ctx.total) * norm * norm * norm;
    const auto w = detail::unit_tone_table(ctx.total);
    ctx.tone_symbols.resize(p.n_selectable());
    for (std::size_t k = p.n_fixed; k < p.n(); ++k) {
        ctx.tone_symbols[k - p.n_fixed].resize(ctx.total);
        detail::fill_tone(ctx.tone_symbols[k - p.n_fixed], w, p.symbols[k], k);
    }
    return ctx;
}

std::vector<cxd> prefix_signal(const SignProblem& p, std::size_t total) {
    const auto w = detail::unit_tone_table(total);
    std::vector<cxd> h(total, cxd{0.0, 0.0});
    std::vector<cxd> tone(total);
    for (std::size_t k = 0; k < p.n_fixed; ++k) {
        detail::fill_tone(tone, w, p.symbols[k], k);
        for (std::size_t i = 0; i < total; ++i) {
            h[i] += tone[i];
        }
    }
    return h;
}

// Mean of the unnormalized sixth-moment sum of (base + sum_k x_k tones[k])
// over all 2^R completions x in {-1,+1}^R, enumerated in Gray-code order.
double exhaustive_mean_pow6(std::span<const cxd> base,
                            const std::vector<std::span<const cxd>>& tones,
                            std::vector<cxd>& rest_buf) {
    const std::size_t r = tones.size();
    const std::size_t total = base.size();
    rest_buf.assign(total, cxd{0.0, 0.0});
    std::vector<int> cur(r, +1);
    for (const auto& t : tones) {
        for (std::size_t i = 0; i < total; ++i) {
            rest_buf[i] += t[i];
        }
    }
    double acc = raw_pow6_sum(base, rest_buf);
    const std::uint64_t count = std::uint64_t{1} << r;
    for (std::uint64_t step = 1; step < count; ++step) {
        const std::size_t flip = static_cast<std::size_t>(std::countr_zero(step));
        const double delta = -2.0 * static_cast<double>(cur[flip]);
        const auto& t = tones[flip];
        for (std::size_t i = 0; i < total; ++i) {
            rest_buf[i] += delta * t[i];
        }
        cur[flip] = -cur[flip];
        acc += raw_pow6_sum(base, rest_buf);
    }
    return acc / static_cast<double>(count);
}

} // namespace

RuleVariant parse_variant(std::string_view id) {
    if (id == "alg1") return RuleVariant::Alg1Printed;
    if (id == "chi2") return RuleVariant::Chi2Scaled;
    throw config_error("unknown rule variant '" + std::string(id) + "' (expected alg1 or chi2)");
}

std::string to_string(RuleVariant v) {
    return v == RuleVariant::Alg1Printed ? "alg1" : "chi2";
}

void SignProblem::validate() const {
    if (symbols.empty()) {
        throw std::invalid_argument("SignProblem: symbol vector must be nonempty");
    }
    if (n_fixed > symbols.size()) {
        throw std::invalid_argument("SignProblem: n_fixed must not exceed the symbol count");
    }
    if (oversampling < 2) {
        throw std::invalid_argument("SignProblem: oversampling factor must be >= 2");
    }
    if (!(sigma_b_sq > 0.0)) {
        throw std::invalid_argument("SignProblem: sigma_b_sq must be positive");
    }
}

SymbolFrame SignProblem::frame_with_signs(std::span<const int> signs) const {
    if (signs.size() != symbols.size()) {
        throw std::invalid_argument("frame_with_signs: sign vector length mismatch");
    }
    SymbolFrame frame;
    frame.data.resize(symbols.size());
    for (std::size_t k = 0; k < symbols.size(); ++k) {
        frame.data[k] = static_cast<double>(signs[k]) * symbols[k];
    }
    frame.sigma_b_sq = sigma_b_sq;
    frame.oversampling = oversampling;
    return frame;
}

void validate_membership(const SignProblem& p, const HalfConstellation& hc) {
    auto contains = [](const std::vector<cxd>& points, cxd y) {
        return std::find(points.begin(), points.end(), y) != points.end();
    };
    for (std::size_t k = 0; k < p.n(); ++k) {
        if (k < p.n_fixed) {
            if (!contains(hc.parent.points, p.symbols[k])) {
                throw std::invalid_argument("symbol " + std::to_string(k) +
                                            " is not a constellation point");
            }
        } else if (!contains(hc.points, p.symbols[k])) {
            throw std::invalid_argument("symbol " + std::to_string(k) +
                                        " is not a half-constellation point");
        }
    }
}

double decision_statistic(std::span<const cxd> h, std::span<const cxd> contribution,
                          RuleVariant variant, std::size_t j, const SignProblem& p) {
    if (h.size() != contribution.size()) {
        throw std::invalid_argument("decision_statistic: vector length mismatch");
    }
    return statistic_kernel(h, contribution, variant, j, p);
}

ReductionOutcome ce_reduce(const SignProblem& p, RuleVariant variant) {
    p.validate();
    const std::size_t n = p.n();
    const std::size_t total = n * static_cast<std::size_t>(p.oversampling);
    const auto w = detail::unit_tone_table(total);

    std::vector<cxd> h(total, cxd{0.0, 0.0});
    std::vector<cxd> contribution(total);
    for (std::size_t k = 0; k < p.n_fixed; ++k) {
        detail::fill_tone(contribution, w, p.symbols[k], k);
        for (std::size_t i = 0; i < total; ++i) {
            h[i] += contribution[i];
        }
    }

    ReductionOutcome out;
    out.signs.assign(n, +1);
    out.trace.reserve(p.n_selectable());
    for (std::size_t j = p.n_fixed; j < n; ++j) {
        detail::fill_tone(contribution, w, p.symbols[j], j);
        const double delta = statistic_kernel(h, contribution, variant, j, p);
        const int sign = delta > 0.0 ? -1 : +1;
        const double s = static_cast<double>(sign);
        for (std::size_t i = 0; i < total; ++i) {
            h[i] += s * contribution[i];
        }
        out.signs[j] = sign;
        out.trace.push_back({j, delta, sign, std::numeric_limits<double>::quiet_NaN()});
    }

    const double scale = 1.0 / std::sqrt(p.sigma_b_sq * static_cast<double>(n));
    out.signal.samples.resize(total);
    for (std::size_t i = 0; i < total; ++i) {
        out.signal.samples[i] = h[i] * scale;
    }
    return out;
}

ExactCeOutcome exact_ce_reduce(const SignProblem& p, const ExactCeMode& mode) {
    p.validate();
    const std::size_t n = p.n();
    if (mode.kind == ExactCeMode::Kind::Exhaustive && p.n_selectable() > kExactCeLimit) {
        throw capacity_error("exact_ce_reduce: exhaustive mode supports at most " +
                             std::to_string(kExactCeLimit) + " selectable signs, got " +
                             std::to_string(p.n_selectable()));
    }
    if (mode.kind == ExactCeMode::Kind::SampleAverage && mode.samples < 1) {
        throw std::invalid_argument("exact_ce_reduce: sample average needs k >= 1 realizations");
    }

    auto ctx = make_exact_context(p);
    std::vector<cxd> h = prefix_signal(p, ctx.total);

    ExactCeOutcome out;
    out.signs.assign(n, +1);
    out.trace.reserve(p.n_selectable());

    std::mt19937_64 rng(mode.seed);
    std::vector<cxd> base_p(ctx.total);
    std::vector<cxd> base_m(ctx.total);
    std::vector<cxd> rest(ctx.total);

    for (std::size_t j = p.n_fixed; j < n; ++j) {
        const auto& tone_j = ctx.tone_symbols[j - p.n_fixed];
        for (std::size_t i = 0; i < ctx.total; ++i) {
            base_p[i] = h[i] + tone_j[i];
            base_m[i] = h[i] - tone_j[i];
        }

        double g_plus = 0.0;
        double g_minus = 0.0;
        const std::size_t r = n - 1 - j; // undecided signs after this one
        if (mode.kind == ExactCeMode::Kind::Exhaustive) {
            std::vector<std::span<const cxd>> tail;
            tail.reserve(r);
            for (std::size_t k = j + 1; k < n; ++k) {
                tail.emplace_back(ctx.tone_symbols[k - p.n_fixed]);
            }
            g_plus = exhaustive_mean_pow6(base_p, tail, rest) / ctx.eta_denom;
            g_minus = exhaustive_mean_pow6(base_m, tail, rest) / ctx.eta_denom;
        } else {
            // Common random numbers: each completion scores both branches.
            double acc_p = 0.0;
            double acc_m = 0.0;
            for (std::size_t sample = 0; sample < mode.samples; ++sample) {
                std::fill(rest.begin(), rest.end(), cxd{0.0, 0.0});
                for (std::size_t k = j + 1; k < n; ++k) {
                    const double x = (rng() & 1u) ? -1.0 : 1.0;
                    const auto& t = ctx.tone_symbols[k - p.n_fixed];
                    for (std::size_t i = 0; i < ctx.total; ++i) {
                        rest[i] += x * t[i];
                    }
                }
                acc_p += raw_pow6_sum(base_p, rest);
                acc_m += raw_pow6_sum(base_m, rest);
            }
            g_plus = acc_p / (static_cast<double>(mode.samples) * ctx.eta_denom);
            g_minus = acc_m / (static_cast<double>(mode.samples) * ctx.eta_denom);
        }

        const double delta = g_plus - g_minus;
        const int sign = delta > 0.0 ? -1 : +1;
        h = (sign == +1) ? base_p : base_m;
        out.signs[j] = sign;
        out.trace.push_back({j, delta, sign, std::min(g_plus, g_minus)});
    }
    return out;
}

double initial_expectation(const SignProblem& p, const ExactCeMode& mode) {
    p.validate();
    if (mode.kind == ExactCeMode::Kind::Exhaustive && p.n_selectable() > kExactCeLimit) {
        throw capacity_error("initial_expectation: exhaustive mode supports at most " +
                             std::to_string(kExactCeLimit) + " selectable signs, got " +
                             std::to_string(p.n_selectable()));
    }
    if (mode.kind == ExactCeMode::Kind::SampleAverage && mode.samples < 1) {
        throw std::invalid_argument("initial_expectation: sample average needs k >= 1 realizations");
    }

    auto ctx = make_exact_context(p);
    const std::vector<cxd> h = prefix_signal(p, ctx.total);
    std::vector<cxd> rest(ctx.total);

    if (mode.kind == ExactCeMode::Kind::Exhaustive) {
        std::vector<std::span<const cxd>> tail;
        tail.reserve(p.n_selectable());
        for (const auto& t : ctx.tone_symbols) {
            tail.emplace_back(t);
        }
        return exhaustive_mean_pow6(h, tail, rest) / ctx.eta_denom;
    }

    std::mt19937_64 rng(mode.seed);
    double acc = 0.0;
    for (std::size_t sample = 0; sample < mode.samples; ++sample) {
        std::fill(rest.begin(), rest.end(), cxd{0.0, 0.0});
        for (const auto& t : ctx.tone_symbols) {
            const double x = (rng() & 1u) ? -1.0 : 1.0;
            for (std::size_t i = 0; i < ctx.total; ++i) {
                rest[i] += x * t[i];
            }
        }
        acc += raw_pow6_sum(h, rest);
    }
    return acc / (static_cast<double>(mode.samples) * ctx.eta_denom);
}

} // namespace cmr
