#pragma once

#include <array>
#include <cstring>
#include <fstream>

#include "glyph/core/common.hpp"

namespace glyph {

// ---- SHA-256 (for parameter hashes and run manifests) ----
class Sha256 {
  public:
    Sha256() { reset(); }

    void reset() {
        h_ = {0x6a09e667u, 0xbb67ae85u, 0x3c6ef372u, 0xa54ff53au,
              0x510e527fu, 0x9b05688cu, 0x1f83d9abu, 0x5be0cd19u};
        buf_len_ = 0;
        total_ = 0;
    }

    void update(const void* data, size_t len) {
        const u8* p = static_cast<const u8*>(data);
        total_ += len;
        while (len > 0) {
            size_t take = std::min(len, size_t(64) - buf_len_);
            std::memcpy(buf_.data() + buf_len_, p, take);
            buf_len_ += take;
            p += take;
            len -= take;
            if (buf_len_ == 64) {
                compress(buf_.data());
                buf_len_ = 0;
            }
        }
    }

    std::array<u8, 32> finish() {
        u64 bits = total_ * 8;
        u8 pad = 0x80;
        update(&pad, 1);
        u8 zero = 0;
        while (buf_len_ != 56) update(&zero, 1);
        for (int i = 7; i >= 0; --i) {
            u8 b = static_cast<u8>(bits >> (8 * i));
            update(&b, 1);
        }
        std::array<u8, 32> out{};
        for (int i = 0; i < 8; ++i) {
            out[4 * i] = static_cast<u8>(h_[i] >> 24);
            out[4 * i + 1] = static_cast<u8>(h_[i] >> 16);
            out[4 * i + 2] = static_cast<u8>(h_[i] >> 8);
            out[4 * i + 3] = static_cast<u8>(h_[i]);
        }
        return out;
    }

    static std::array<u8, 32> digest(const void* data, size_t len) {
        Sha256 s;
        s.update(data, len);
        return s.finish();
    }

  private:
    static u32 rotr(u32 x, int n) { return (x >> n) | (x << (32 - n)); }

    void compress(const u8* p) {
        static constexpr u32 K[64] = {
            0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1, 0x923f82a4, 0xab1c5ed5,
            0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe, 0x9bdc06a7, 0xc19bf174,
            0xe49b69c1, 0xefbe4786, 0x0fc19dc6, 0x240ca1cc, 0x2de92c6f, 0x4a7484aa, 0x5cb0a9dc, 0x76f988da,
            0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7, 0xc6e00bf3, 0xd5a79147, 0x06ca6351, 0x14292967,
            0x27b70a85, 0x2e1b2138, 0x4d2c6dfc, 0x53380d13, 0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85,
            0xa2bfe8a1, 0xa81a664b, 0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070,
            0x19a4c116, 0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a, 0x5b9cca4f, 0x682e6ff3,
            0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208, 0x90befffa, 0xa4506ceb, 0xbef9a3f7, 0xc67178f2};
        u32 w[64];
        for (int i = 0; i < 16; ++i)
            w[i] = (u32(p[4 * i]) << 24) | (u32(p[4 * i + 1]) << 16) | (u32(p[4 * i + 2]) << 8) | u32(p[4 * i + 3]);
        for (int i = 16; i < 64; ++i) {
            u32 s0 = rotr(w[i - 15], 7) ^ rotr(w[i - 15], 18) ^ (w[i - 15] >> 3);
            u32 s1 = rotr(w[i - 2], 17) ^ rotr(w[i - 2], 19) ^ (w[i - 2] >> 10);
            w[i] = w[i - 16] + s0 + w[i - 7] + s1;
        }
        u32 a = h_[0], b = h_[1], c = h_[2], d = h_[3], e = h_[4], f = h_[5], g = h_[6], h = h_[7];
        for (int i = 0; i < 64; ++i) {
            u32 S1 = rotr(e, 6) ^ rotr(e, 11) ^ rotr(e, 25);
            u32 ch = (e & f) ^ (~e & g);
            u32 t1 = h + S1 + ch + K[i] + w[i];
            u32 S0 = rotr(a, 2) ^ rotr(a, 13) ^ rotr(a, 22);
            u32 maj = (a & b) ^ (a & c) ^ (b & c);
            u32 t2 = S0 + maj;
            h = g; g = f; f = e; e = d + t1;
            d = c; c = b; b = a; a = t1 + t2;
        }
        h_[0] += a; h_[1] += b; h_[2] += c; h_[3] += d;
        h_[4] += e; h_[5] += f; h_[6] += g; h_[7] += h;
    }

    std::array<u32, 8> h_{};
    std::array<u8, 64> buf_{};
    size_t buf_len_ = 0;
    u64 total_ = 0;
};

inline std::string hex_string(const std::array<u8, 32>& d) {
    static const char* hexc = "0123456789abcdef";
    std::string s;
    s.reserve(64);
    for (u8 b : d) {
        s.push_back(hexc[b >> 4]);
        s.push_back(hexc[b & 0xF]);
    }
    return s;
}

// ---- byte stream helpers ----
class ByteWriter {
  public:
    void u8v(u8 v) { buf_.push_back(v); }
    void u16v(u16 v) { for (int i = 0; i < 2; ++i) buf_.push_back(static_cast<u8>(v >> (8 * i))); }
    void u32v(u32 v) { for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<u8>(v >> (8 * i))); }
    void u64v(u64 v) { for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<u8>(v >> (8 * i))); }
    void bytes(const void* p, size_t n) {
        const u8* b = static_cast<const u8*>(p);
        buf_.insert(buf_.end(), b, b + n);
    }
    void u64s(const std::vector<u64>& v) {
        u64v(v.size());
        for (u64 x : v) u64v(x);
    }
    const std::vector<u8>& data() const { return buf_; }

  private:
    std::vector<u8> buf_;
};

class ByteReader {
  public:
    explicit ByteReader(const std::vector<u8>& b) : buf_(b) {}

    u8 u8v() { need(1); return buf_[pos_++]; }
    u16 u16v() {
        need(2);
        u16 v = 0;
        for (int i = 0; i < 2; ++i) v |= static_cast<u16>(buf_[pos_++]) << (8 * i);
        return v;
    }
    u32 u32v() {
        need(4);
        u32 v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<u32>(buf_[pos_++]) << (8 * i);
        return v;
    }
    u64 u64v() {
        need(8);
        u64 v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<u64>(buf_[pos_++]) << (8 * i);
        return v;
    }
    std::vector<u64> u64s() {
        u64 n = u64v();
        if (n > (buf_.size() - pos_) / 8) throw DataError("truncated u64 vector");
        std::vector<u64> v(n);
        for (auto& x : v) x = u64v();
        return v;
    }
    void bytes(void* p, size_t n) {
        need(n);
        std::memcpy(p, buf_.data() + pos_, n);
        pos_ += n;
    }
    bool done() const { return pos_ == buf_.size(); }
    size_t pos() const { return pos_; }

  private:
    void need(size_t n) const {
        if (pos_ + n > buf_.size())
            throw DataError("serialized data truncated at byte offset " + std::to_string(pos_) +
                            " (need " + std::to_string(n) + " more)");
    }
    const std::vector<u8>& buf_;
    size_t pos_ = 0;
};

// Versioned container: magic "GLY1", scheme tag, params hash, payload.
enum class SchemeTag : u8 {
    kBgv = 0x01,
    kTlwe = 0x02,
    kTrlwe = 0x03,
    kTrgsw = 0x04,
    kKeyMaterial = 0x05,
    kModel = 0x06,
};

inline void write_container_header(ByteWriter& w, SchemeTag tag, const std::array<u8, 32>& params_hash) {
    w.bytes("GLY1", 4);
    w.u8v(static_cast<u8>(tag));
    w.bytes(params_hash.data(), 32);
}

inline SchemeTag read_container_header(ByteReader& r, std::array<u8, 32>& params_hash) {
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, "GLY1", 4) != 0) throw DataError("bad container magic (expected GLY1)");
    SchemeTag tag = static_cast<SchemeTag>(r.u8v());
    r.bytes(params_hash.data(), 32);
    return tag;
}

inline void write_file(const std::string& path, const std::vector<u8>& data) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open for write: " + path);
    f.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
}

inline std::vector<u8> read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw DataError("cannot open for read: " + path);
    std::streamsize size = f.tellg();
    f.seekg(0);
    std::vector<u8> data(static_cast<size_t>(size));
    f.read(reinterpret_cast<char*>(data.data()), size);
    return data;
}

}  // namespace glyph
