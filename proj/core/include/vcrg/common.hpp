#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vcrg {

using NodeId = std::uint32_t;

/// Thrown for invalid inputs (bad files, bad configs, contract violations at
/// the API boundary). The CLI maps this to exit code 1; every other exception
/// maps to exit code 2.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Dense row-major matrix. The only container the numeric kernels use.
template <typename T>
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<T> v;

    Mat() = default;
    Mat(std::size_t r, std::size_t c, T init = T(0)) : rows(r), cols(c), v(r * c, init) {}

    T& operator()(std::size_t i, std::size_t j) { return v[i * cols + j]; }
    const T& operator()(std::size_t i, std::size_t j) const { return v[i * cols + j]; }

    T* row(std::size_t i) { return v.data() + i * cols; }
    const T* row(std::size_t i) const { return v.data() + i * cols; }

    std::span<T> row_span(std::size_t i) { return {row(i), cols}; }
    std::span<const T> row_span(std::size_t i) const { return {row(i), cols}; }

    void fill(T x) { v.assign(v.size(), x); }
    std::size_t size() const { return v.size(); }
    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
};

using MatD = Mat<double>;
using MatF = Mat<float>;

std::uint64_t splitmix64(std::uint64_t x);

/// Deterministic random source. The engine (mt19937_64) is fully specified by
/// the standard; the derived draws below are hand-rolled because the
/// std::<distribution> adaptors are implementation-defined and would break
/// cross-platform reproducibility.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next();
    /// Uniform in [0, 1) with 53 random bits.
    double unit();
    /// Uniform in (0, 1], safe as a log() argument.
    double unit_pos();
    /// Standard normal via Box-Muller; the spare is cached.
    double normal();
    /// Unbiased uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

    template <typename T>
    void shuffle(std::vector<T>& xs) {
        for (std::size_t i = xs.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(xs[i - 1], xs[j]);
        }
    }

    /// Derive an independent stream seed, e.g. one per worker or per block.
    std::uint64_t fork(std::uint64_t stream) const;

private:
    std::mt19937_64 eng_;
    std::uint64_t seed_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

std::uint32_t crc32_of(const void* data, std::size_t len, std::uint32_t seed = 0);

}  // namespace vcrg
