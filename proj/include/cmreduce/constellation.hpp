#ifndef CMREDUCE_CONSTELLATION_HPP
#define CMREDUCE_CONSTELLATION_HPP

#include <complex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cmr {

using cxd = std::complex<double>;

enum class Scheme { Qpsk, Qam16, Qam64 };

/// Parses lowercase scheme ids "qpsk", "qam16", "qam64". Throws config_error otherwise.
Scheme parse_scheme(std::string_view id);
std::string to_string(Scheme scheme);

/// Square Gray-mapped constellation on the unnormalized integer lattice.
/// points[i] is the symbol for the bit pattern with binary value i (MSB first;
/// the high half of the bits selects the real level, the low half the imaginary level).
struct Constellation {
    std::vector<cxd> points;
    int bits_per_symbol = 0;
    double sigma_b_sq = 0.0; // mean |point|^2
};

/// One point of each {y, -y} pair of the parent, in parent order.
/// Selection rule: keep y if Re(y) > 0, or Re(y) == 0 and Im(y) > 0.
struct HalfConstellation {
    Constellation parent;
    std::vector<cxd> points;

    int bits_per_symbol() const { return parent.bits_per_symbol - 1; }
};

Constellation build_constellation(Scheme scheme);
HalfConstellation half_constellation(const Constellation& c);

/// Maps a bit sequence (MSB first) to the point whose index is the binary value
/// of the bits. The bit count must equal log2 of the point-set size.
cxd map_bits(std::span<const int> bits, const Constellation& c);
cxd map_bits(std::span<const int> bits, const HalfConstellation& hc);

/// Inverse of map_bits; the symbol must be an exact member of the point set.
std::vector<int> demap_symbol(cxd symbol, const Constellation& c);
std::vector<int> demap_symbol(cxd symbol, const HalfConstellation& hc);

/// Fraction of data rate sacrificed when n_s of n symbols reserve their sign bit:
/// (n_s/n) / log2(m_size).
double rate_loss(std::size_t n_s, std::size_t n, std::size_t m_size);

} // namespace cmr

#endif
