#include "vcrg/common.hpp"

#include <algorithm>
#include <cmath>

#include <zlib.h>

namespace vcrg {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed) : eng_(seed), seed_(seed) {}

std::uint64_t Rng::next() { return eng_(); }

double Rng::unit() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

double Rng::unit_pos() {
    return 1.0 - unit();
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u = unit_pos();
    double v = unit();
    double r = std::sqrt(-2.0 * std::log(u));
    double theta = 2.0 * 3.14159265358979323846 * v;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) throw ValidationError("Rng::below: n must be positive");
    if ((n & (n - 1)) == 0) return next() & (n - 1);
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = next();
    } while (x >= limit);
    return x % n;
}

std::uint64_t Rng::fork(std::uint64_t stream) const {
    return splitmix64(seed_ ^ splitmix64(stream + 0x51ed2701a9e5c33bULL));
}

std::uint32_t crc32_of(const void* data, std::size_t len, std::uint32_t seed) {
    const Bytef* p = static_cast<const Bytef*>(data);
    uLong c = seed;
    while (len > 0) {
        uInt chunk = static_cast<uInt>(std::min<std::size_t>(len, 1u << 30));
        c = crc32(c, p, chunk);
        p += chunk;
        len -= chunk;
    }
    return static_cast<std::uint32_t>(c);
}

}  // namespace vcrg
