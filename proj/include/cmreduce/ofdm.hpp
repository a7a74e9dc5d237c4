#ifndef CMREDUCE_OFDM_HPP
#define CMREDUCE_OFDM_HPP

#include <complex>
#include <cstdint>
#include <vector>

namespace cmr {

using cxd = std::complex<double>;

/// One OFDM symbol's frequency-domain data. The data vector holds the modulated
/// subcarrier symbols; sigma_b_sq is the mean symbol energy of the source
/// constellation and normalizes the synthesized signal to unit expected power.
struct SymbolFrame {
    std::vector<cxd> data;
    double sigma_b_sq = 1.0;
    int oversampling = 4;

    std::size_t n_subcarriers() const { return data.size(); }
    void validate() const; // throws std::invalid_argument
};

struct TimeSignal {
    std::vector<cxd> samples;
};

/// Hardware-measured cubic-metric calibration constants. Never computed here;
/// supplied by the user when CM output is wanted.
struct CmParams {
    double rcm_ref_db = 0.0;
    double k_slp = 1.0;
    double k_bw = 0.0;

    void validate() const; // k_slp must be nonzero
};

/// Oversampled discrete-time baseband OFDM symbol:
///   samples[n] = 1/sqrt(sigma_b_sq*N) * sum_k data[k] * e^{j*2*pi*k*n/(L*N)},
/// n = 0 .. L*N-1. Computed as a zero-padded size-L*N inverse FFT.
TimeSignal synthesize(const SymbolFrame& frame);

/// Symbol raw cubic metric: mean over samples of |s|^6 (linear, unit rms assumed).
double srcm(const TimeSignal& sig);

/// 10*log10(eta). Throws std::domain_error for eta <= 0.
double srcm_db(double eta);

/// Raw cubic metric of one signal in dB: 10*log10( mean|v|^6 / (mean|v|^2)^3 ).
/// Scale invariant; throws std::domain_error for an all-zero signal.
double rcm_db(const TimeSignal& sig);

/// Cubic metric from a raw cubic metric: (rcm - rcm_ref)/k_slp + k_bw, all dB.
double cm_db(double rcm_db_value, const CmParams& p);

/// Accumulates second and sixth sample moments across many signals so the raw
/// cubic metric of their concatenation can be computed without keeping samples.
class PooledMoments {
public:
    static PooledMoments from_sums(double sum_pow2, double sum_pow6, std::uint64_t sample_count);

    void add(const TimeSignal& sig);
    void add_means(double mean_pow2, double mean_pow6, std::uint64_t sample_count);

    double mean_pow2() const;
    double mean_pow6() const;
    std::uint64_t sample_count() const { return count_; }
    double rcm_db() const; // of the pooled concatenation

    double sum_pow2() const { return sum_pow2_; }
    double sum_pow6() const { return sum_pow6_; }

private:
    double sum_pow2_ = 0.0;
    double sum_pow6_ = 0.0;
    std::uint64_t count_ = 0;
};

} // namespace cmr

#endif
