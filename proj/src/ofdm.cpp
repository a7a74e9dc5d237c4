#include "cmreduce/ofdm.hpp"

#include <cmath>
#include <cstring>
#include <map>
#include <mutex>
#include <stdexcept>

#include <fftw3.h>

namespace cmr {

namespace {

// FFTW plan creation is not thread-safe; execution via fftw_execute_dft is.
// Plans are cached per transform size and reused with caller buffers.
class InverseFftPlans {
public:
    static InverseFftPlans& instance() {
        static InverseFftPlans plans;
        return plans;
    }

    void execute(std::size_t size, fftw_complex* in, fftw_complex* out) {
        fftw_plan plan = nullptr;
        {
            std::lock_guard<std::mutex> lock(mutex_);
            auto it = cache_.find(size);
            if (it == cache_.end()) {
                // Plan on scratch buffers so caller data is never clobbered by planning.
                fftw_complex* scratch = fftw_alloc_complex(size);
                plan = fftw_plan_dft_1d(static_cast<int>(size), scratch, scratch,
                                        FFTW_BACKWARD, FFTW_ESTIMATE);
                fftw_free(scratch);
                cache_.emplace(size, plan);
            } else {
                plan = it->second;
            }
        }
        fftw_execute_dft(plan, in, out);
    }

private:
    InverseFftPlans() = default;
    ~InverseFftPlans() {
        for (auto& [size, plan] : cache_) {
            fftw_destroy_plan(plan);
        }
    }

    std::mutex mutex_;
    std::map<std::size_t, fftw_plan> cache_;
};

} // namespace

void SymbolFrame::validate() const {
    if (data.empty()) {
        throw std::invalid_argument("SymbolFrame: data must hold at least one subcarrier symbol");
    }
    if (oversampling < 2) {
        throw std::invalid_argument("SymbolFrame: oversampling factor must be >= 2");
    }
    if (!(sigma_b_sq > 0.0)) {
        throw std::invalid_argument("SymbolFrame: sigma_b_sq must be positive");
    }
}

void CmParams::validate() const {
    if (k_slp == 0.0) {
        throw std::invalid_argument("CmParams: k_slp must be nonzero");
    }
}

TimeSignal synthesize(const SymbolFrame& frame) {
    frame.validate();
    const std::size_t n = frame.n_subcarriers();
    const std::size_t total = n * static_cast<std::size_t>(frame.oversampling);

    fftw_complex* buf = fftw_alloc_complex(total);
    std::memset(buf, 0, total * sizeof(fftw_complex));
    for (std::size_t k = 0; k < n; ++k) {
        buf[k][0] = frame.data[k].real();
        buf[k][1] = frame.data[k].imag();
    }
    InverseFftPlans::instance().execute(total, buf, buf);

    // FFTW_BACKWARD computes the unnormalized sum over e^{+j2pi k n/total}.
    const double scale = 1.0 / std::sqrt(frame.sigma_b_sq * static_cast<double>(n));
    TimeSignal sig;
    sig.samples.resize(total);
    for (std::size_t i = 0; i < total; ++i) {
        sig.samples[i] = cxd(buf[i][0] * scale, buf[i][1] * scale);
    }
    fftw_free(buf);
    return sig;
}

double srcm(const TimeSignal& sig) {
    if (sig.samples.empty()) {
        throw std::invalid_argument("srcm: signal must be nonempty");
    }
    double acc = 0.0;
    for (const auto& s : sig.samples) {
        const double p = std::norm(s);
        acc += p * p * p;
    }
    return acc / static_cast<double>(sig.samples.size());
}

double srcm_db(double eta) {
    if (!(eta > 0.0)) {
        throw std::domain_error("srcm_db: eta must be positive");
    }
    return 10.0 * std::log10(eta);
}

double rcm_db(const TimeSignal& sig) {
    if (sig.samples.empty()) {
        throw std::invalid_argument("rcm_db: signal must be nonempty");
    }
    PooledMoments pooled;
    pooled.add(sig);
    return pooled.rcm_db();
}

double cm_db(double rcm_db_value, const CmParams& p) {
    p.validate();
    return (rcm_db_value - p.rcm_ref_db) / p.k_slp + p.k_bw;
}

PooledMoments PooledMoments::from_sums(double sum_pow2, double sum_pow6,
                                       std::uint64_t sample_count) {
    PooledMoments p;
    p.sum_pow2_ = sum_pow2;
    p.sum_pow6_ = sum_pow6;
    p.count_ = sample_count;
    return p;
}

void PooledMoments::add(const TimeSignal& sig) {
    double acc2 = 0.0;
    double acc6 = 0.0;
    for (const auto& s : sig.samples) {
        const double p = std::norm(s);
        acc2 += p;
        acc6 += p * p * p;
    }
    sum_pow2_ += acc2;
    sum_pow6_ += acc6;
    count_ += sig.samples.size();
}

void PooledMoments::add_means(double mean_pow2, double mean_pow6, std::uint64_t sample_count) {
    sum_pow2_ += mean_pow2 * static_cast<double>(sample_count);
    sum_pow6_ += mean_pow6 * static_cast<double>(sample_count);
    count_ += sample_count;
}

double PooledMoments::mean_pow2() const {
    if (count_ == 0) {
        throw std::domain_error("PooledMoments: no samples accumulated");
    }
    return sum_pow2_ / static_cast<double>(count_);
}

double PooledMoments::mean_pow6() const {
    if (count_ == 0) {
        throw std::domain_error("PooledMoments: no samples accumulated");
    }
    return sum_pow6_ / static_cast<double>(count_);
}

double PooledMoments::rcm_db() const {
    const double m2 = mean_pow2();
    if (!(m2 > 0.0)) {
        throw std::domain_error("rcm_db: signal power is zero");
    }
    return 10.0 * std::log10(mean_pow6() / (m2 * m2 * m2));
}

} // namespace cmr
