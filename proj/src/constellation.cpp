#include "cmreduce/constellation.hpp"
#include "cmreduce/errors.hpp"

#include <bit>
#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace cmr {

namespace {

int gray_decode(unsigned g) {
    unsigned b = 0;
    for (; g != 0; g >>= 1) {
        b ^= g;
    }
    return static_cast<int>(b);
}

// Level index 0..k-1 -> lattice amplitude -(k-1), ..., -1, +1, ..., +(k-1).
double level_amplitude(int level, int k) {
    return static_cast<double>(2 * level - (k - 1));
}

double mean_energy(const std::vector<cxd>& points) {
    double acc = 0.0;
    for (const auto& p : points) {
        acc += std::norm(p);
    }
    return acc / static_cast<double>(points.size());
}

cxd map_bits_impl(std::span<const int> bits, const std::vector<cxd>& points, int expected_bits) {
    if (static_cast<int>(bits.size()) != expected_bits) {
        throw std::invalid_argument("map_bits: expected " + std::to_string(expected_bits) +
                                    " bits, got " + std::to_string(bits.size()));
    }
    std::size_t index = 0;
    for (int b : bits) {
        if (b != 0 && b != 1) {
            throw std::invalid_argument("map_bits: bits must be 0 or 1");
        }
        index = (index << 1) | static_cast<unsigned>(b);
    }
    return points[index];
}

std::vector<int> demap_impl(cxd symbol, const std::vector<cxd>& points, int bits) {
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (points[i] == symbol) {
            std::vector<int> out(static_cast<std::size_t>(bits));
            for (int b = 0; b < bits; ++b) {
                out[static_cast<std::size_t>(b)] = static_cast<int>((i >> (bits - 1 - b)) & 1u);
            }
            return out;
        }
    }
    throw std::invalid_argument("demap_symbol: symbol is not a constellation point");
}

} // namespace

Scheme parse_scheme(std::string_view id) {
    if (id == "qpsk") return Scheme::Qpsk;
    if (id == "qam16") return Scheme::Qam16;
    if (id == "qam64") return Scheme::Qam64;
    throw config_error("unsupported modulation scheme '" + std::string(id) +
                       "' (expected qpsk, qam16 or qam64)");
}

std::string to_string(Scheme scheme) {
    switch (scheme) {
        case Scheme::Qpsk: return "qpsk";
        case Scheme::Qam16: return "qam16";
        case Scheme::Qam64: return "qam64";
    }
    throw config_error("invalid scheme enum value");
}

Constellation build_constellation(Scheme scheme) {
    int bits_per_axis = 0;
    switch (scheme) {
        case Scheme::Qpsk: bits_per_axis = 1; break;
        case Scheme::Qam16: bits_per_axis = 2; break;
        case Scheme::Qam64: bits_per_axis = 3; break;
    }
    const int k = 1 << bits_per_axis; // levels per axis

    Constellation c;
    c.bits_per_symbol = 2 * bits_per_axis;
    c.points.resize(std::size_t{1} << c.bits_per_symbol);
    for (std::size_t i = 0; i < c.points.size(); ++i) {
        const unsigned re_bits = static_cast<unsigned>(i) >> bits_per_axis;
        const unsigned im_bits = static_cast<unsigned>(i) & static_cast<unsigned>(k - 1);
        c.points[i] = cxd(level_amplitude(gray_decode(re_bits), k),
                          level_amplitude(gray_decode(im_bits), k));
    }
    c.sigma_b_sq = mean_energy(c.points);
    return c;
}

HalfConstellation half_constellation(const Constellation& c) {
    HalfConstellation hc;
    hc.parent = c;
    hc.points.reserve(c.points.size() / 2);
    for (const auto& p : c.points) {
        if (p.real() > 0.0 || (p.real() == 0.0 && p.imag() > 0.0)) {
            hc.points.push_back(p);
        }
    }
    return hc;
}

cxd map_bits(std::span<const int> bits, const Constellation& c) {
    return map_bits_impl(bits, c.points, c.bits_per_symbol);
}

cxd map_bits(std::span<const int> bits, const HalfConstellation& hc) {
    return map_bits_impl(bits, hc.points, hc.bits_per_symbol());
}

std::vector<int> demap_symbol(cxd symbol, const Constellation& c) {
    return demap_impl(symbol, c.points, c.bits_per_symbol);
}

std::vector<int> demap_symbol(cxd symbol, const HalfConstellation& hc) {
    return demap_impl(symbol, hc.points, hc.bits_per_symbol());
}

double rate_loss(std::size_t n_s, std::size_t n, std::size_t m_size) {
    if (n == 0) {
        throw std::invalid_argument("rate_loss: n must be positive");
    }
    if (n_s > n) {
        throw std::invalid_argument("rate_loss: n_s must not exceed n");
    }
    if (m_size < 4 || !std::has_single_bit(m_size)) {
        throw std::invalid_argument("rate_loss: constellation size must be a power of two >= 4");
    }
    const double bits = std::log2(static_cast<double>(m_size));
    return (static_cast<double>(n_s) / static_cast<double>(n)) / bits;
}

} // namespace cmr
