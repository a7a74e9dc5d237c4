#ifndef CMREDUCE_DETAIL_TONES_HPP
#define CMREDUCE_DETAIL_TONES_HPP

#include <complex>
#include <numbers>
#include <vector>

namespace cmr::detail {

/// Roots-of-unity table: W[m] = e^{j*2*pi*m/total}, m = 0 .. total-1.
/// Subcarrier k's tone at sample n is W[(k*n) mod total].
inline std::vector<std::complex<double>> unit_tone_table(std::size_t total) {
    std::vector<std::complex<double>> w(total);
    const double step = 2.0 * std::numbers::pi / static_cast<double>(total);
    for (std::size_t m = 0; m < total; ++m) {
        w[m] = std::polar(1.0, step * static_cast<double>(m));
    }
    return w;
}

/// Fills out[n] = symbol * W[(stride*n) mod total] without integer division.
inline void fill_tone(std::vector<std::complex<double>>& out,
                      const std::vector<std::complex<double>>& w,
                      std::complex<double> symbol, std::size_t stride) {
    const std::size_t total = w.size();
    std::size_t idx = 0;
    for (std::size_t n = 0; n < total; ++n) {
        out[n] = symbol * w[idx];
        idx += stride;
        if (idx >= total) idx -= total;
    }
}

} // namespace cmr::detail

#endif
