#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace oupinball {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
struct Philox4x32 {
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter block(Counter c, Key k) {
        constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
        constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = std::uint64_t(M0) * c[0];
            const std::uint64_t p1 = std::uint64_t(M1) * c[2];
            c = {std::uint32_t(p1 >> 32) ^ c[1] ^ k[0], std::uint32_t(p1),
                 std::uint32_t(p0 >> 32) ^ c[3] ^ k[1], std::uint32_t(p0)};
            k[0] += W0;
            k[1] += W1;
        }
        return c;
    }
};

/// Draw stream for one (seed, path, step). Lane = block + 64 * attempt; lane 63 is
/// reserved for auxiliary uniforms, so a retry never reuses a block.
class StepStream {
public:
    static constexpr std::uint32_t aux_lane = 63;

    StepStream(std::uint64_t seed, std::uint64_t path, std::uint64_t step)
        : key_{std::uint32_t(seed), std::uint32_t(seed >> 32)},
          ctr_{std::uint32_t(step), std::uint32_t(step >> 32), std::uint32_t(path),
               std::uint32_t((path >> 32) & 0xFFFFu)} {}

    /// Two uniforms in (0, 1) with 53 random bits each.
    std::array<double, 2> uniforms(std::uint32_t lane) const {
        Philox4x32::Counter c = ctr_;
        c[3] |= lane << 16;
        const auto r = Philox4x32::block(c, key_);
        return {to_unit(r[0], r[1]), to_unit(r[2], r[3])};
    }

    /// n standard normals via Box-Muller, two per lane.
    void normals(double* out, int n, std::uint32_t attempt) const {
        for (int i = 0; i < n; i += 2) {
            const auto u = uniforms(std::uint32_t(i / 2) + 64u * attempt);
            const double rad = std::sqrt(-2.0 * std::log(u[0]));
            const double ang = 2.0 * std::numbers::pi * u[1];
            out[i] = rad * std::cos(ang);
            if (i + 1 < n) out[i + 1] = rad * std::sin(ang);
        }
    }

    double aux_uniform() const { return uniforms(aux_lane)[0]; }

private:
    static double to_unit(std::uint32_t hi, std::uint32_t lo) {
        const std::uint64_t bits = (std::uint64_t(hi) << 21) | (lo >> 11);
        return (double(bits) + 0.5) * 0x1p-53;
    }

    Philox4x32::Key key_;
    Philox4x32::Counter ctr_;
};

}  // namespace oupinball
