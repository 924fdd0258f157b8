#pragma once

// Little-endian buffer primitives shared by the binary file writers. Not part
// of the installed API.

#include <cstdint>
#include <cstring>
#include <string>

#include "vcrg/common.hpp"

namespace vcrg::binio {

inline void put_u32(std::string& b, std::uint32_t v) {
    char raw[4];
    for (int i = 0; i < 4; ++i) raw[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    b.append(raw, 4);
}

inline void put_u64(std::string& b, std::uint64_t v) {
    char raw[8];
    for (int i = 0; i < 8; ++i) raw[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    b.append(raw, 8);
}

inline void put_f32(std::string& b, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(b, bits);
}

inline void put_f64(std::string& b, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(b, bits);
}

class Reader {
public:
    Reader(const std::string& buf, std::string what) : buf_(buf), what_(std::move(what)) {}

    std::size_t offset() const { return off_; }
    std::size_t remaining() const { return buf_.size() - off_; }

    const char* bytes(std::size_t n) {
        need(n);
        const char* p = buf_.data() + off_;
        off_ += n;
        return p;
    }

    std::uint32_t u32() {
        const unsigned char* p = reinterpret_cast<const unsigned char*>(bytes(4));
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
        return v;
    }

    std::uint64_t u64() {
        const unsigned char* p = reinterpret_cast<const unsigned char*>(bytes(8));
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
        return v;
    }

    float f32() {
        std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }

    double f64() {
        std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }

private:
    void need(std::size_t n) {
        if (off_ + n > buf_.size())
            throw ValidationError(what_ + ": truncated file (needed " + std::to_string(n) +
                                  " bytes at offset " + std::to_string(off_) + ")");
    }

    const std::string& buf_;
    std::string what_;
    std::size_t off_ = 0;
};

}  // namespace vcrg::binio
