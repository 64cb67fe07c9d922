#pragma once

// Versioned binary container for named tensors, optimizer state and the run
// config text. Layout (native little-endian):
//
//   magic "CSNKCKPT" | u32 version | u8 scalar width | u32 tensor count
//   per tensor: u16 name length | name | u8 rank | i32 extents... | raw data
//   u8 has_optimizer
//     [u64 step_count | f64 lr,beta1,beta2,eps | u32 param count
//      per param: u16 name length | name | u64 numel | m data | v data]
//   u32 config text length | config text
//
// Loading is all-or-nothing: a truncated or mismatched file throws before any
// state is handed to the caller.

#include <cstdio>
#include <cstring>
#include <fstream>

#include "csnake/adam.hpp"
#include "csnake/tensor.hpp"

namespace csnake {

template <class T>
struct Checkpoint {
    struct Entry {
        std::string name;
        Shape shape;
        std::vector<T> data;
    };
    struct MomentEntry {
        std::string name;
        std::vector<T> m, v;
    };

    std::vector<Entry> tensors;
    bool has_optimizer = false;
    std::uint64_t step_count = 0;
    double lr = 0, beta1 = 0, beta2 = 0, eps = 0;
    std::vector<MomentEntry> moments;
    std::string config_text;

    static constexpr char kMagic[9] = "CSNKCKPT";
    static constexpr std::uint32_t kVersion = 1;

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);

    const Entry* find(const std::string& name) const {
        for (const auto& e : tensors)
            if (e.name == name) return &e;
        return nullptr;
    }
};

namespace detail {

inline void write_bytes(std::ofstream& os, const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}
inline void read_bytes(std::ifstream& is, void* p, std::size_t n, const char* what) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n)
        throw IoError(std::string("checkpoint: truncated file while reading ") + what);
}
template <class V>
void write_pod(std::ofstream& os, V v) {
    write_bytes(os, &v, sizeof v);
}
template <class V>
V read_pod(std::ifstream& is, const char* what) {
    V v;
    read_bytes(is, &v, sizeof v, what);
    return v;
}
inline void write_name(std::ofstream& os, const std::string& s) {
    if (s.size() > 0xffff) throw ContractViolation("checkpoint: name too long");
    write_pod<std::uint16_t>(os, static_cast<std::uint16_t>(s.size()));
    write_bytes(os, s.data(), s.size());
}
inline std::string read_name(std::ifstream& is) {
    auto n = read_pod<std::uint16_t>(is, "name length");
    std::string s(n, '\0');
    read_bytes(is, s.data(), n, "name");
    return s;
}

}  // namespace detail

template <class T>
void Checkpoint<T>::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("checkpoint: cannot open '" + path + "' for writing");
    detail::write_bytes(os, kMagic, 8);
    detail::write_pod<std::uint32_t>(os, kVersion);
    detail::write_pod<std::uint8_t>(os, static_cast<std::uint8_t>(sizeof(T)));
    detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& e : tensors) {
        detail::write_name(os, e.name);
        detail::write_pod<std::uint8_t>(os, static_cast<std::uint8_t>(e.shape.size()));
        for (int d : e.shape) detail::write_pod<std::int32_t>(os, d);
        detail::write_bytes(os, e.data.data(), e.data.size() * sizeof(T));
    }
    detail::write_pod<std::uint8_t>(os, has_optimizer ? 1 : 0);
    if (has_optimizer) {
        detail::write_pod<std::uint64_t>(os, step_count);
        detail::write_pod<double>(os, lr);
        detail::write_pod<double>(os, beta1);
        detail::write_pod<double>(os, beta2);
        detail::write_pod<double>(os, eps);
        detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(moments.size()));
        for (const auto& me : moments) {
            detail::write_name(os, me.name);
            detail::write_pod<std::uint64_t>(os, me.m.size());
            detail::write_bytes(os, me.m.data(), me.m.size() * sizeof(T));
            detail::write_bytes(os, me.v.data(), me.v.size() * sizeof(T));
        }
    }
    detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(config_text.size()));
    detail::write_bytes(os, config_text.data(), config_text.size());
    os.flush();
    if (!os) throw IoError("checkpoint: write failed for '" + path + "'");
}

template <class T>
Checkpoint<T> Checkpoint<T>::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("checkpoint: cannot open '" + path + "'");
    char magic[8];
    detail::read_bytes(is, magic, 8, "magic");
    if (std::memcmp(magic, kMagic, 8) != 0) throw IoError("checkpoint: bad magic in '" + path + "'");
    auto version = detail::read_pod<std::uint32_t>(is, "version");
    if (version != kVersion)
        throw IoError("checkpoint: unsupported version " + std::to_string(version) + " (expected " +
                      std::to_string(kVersion) + ")");
    auto width = detail::read_pod<std::uint8_t>(is, "scalar width");
    if (width != sizeof(T))
        throw IoError("checkpoint: scalar width " + std::to_string(width) + " does not match build width " +
                      std::to_string(sizeof(T)));
    Checkpoint ck;
    auto count = detail::read_pod<std::uint32_t>(is, "tensor count");
    ck.tensors.resize(count);
    for (auto& e : ck.tensors) {
        e.name = detail::read_name(is);
        auto rank = detail::read_pod<std::uint8_t>(is, "rank");
        e.shape.resize(rank);
        for (auto& d : e.shape) d = detail::read_pod<std::int32_t>(is, "extent");
        e.data.resize(shape_numel(e.shape));
        detail::read_bytes(is, e.data.data(), e.data.size() * sizeof(T), e.name.c_str());
    }
    ck.has_optimizer = detail::read_pod<std::uint8_t>(is, "optimizer flag") != 0;
    if (ck.has_optimizer) {
        ck.step_count = detail::read_pod<std::uint64_t>(is, "step count");
        ck.lr = detail::read_pod<double>(is, "lr");
        ck.beta1 = detail::read_pod<double>(is, "beta1");
        ck.beta2 = detail::read_pod<double>(is, "beta2");
        ck.eps = detail::read_pod<double>(is, "eps");
        auto pc = detail::read_pod<std::uint32_t>(is, "optimizer param count");
        ck.moments.resize(pc);
        for (auto& me : ck.moments) {
            me.name = detail::read_name(is);
            auto n = detail::read_pod<std::uint64_t>(is, "moment length");
            me.m.resize(n);
            me.v.resize(n);
            detail::read_bytes(is, me.m.data(), n * sizeof(T), "first moment");
            detail::read_bytes(is, me.v.data(), n * sizeof(T), "second moment");
        }
    }
    auto clen = detail::read_pod<std::uint32_t>(is, "config length");
    ck.config_text.resize(clen);
    detail::read_bytes(is, ck.config_text.data(), clen, "config text");
    return ck;
}

}  // namespace csnake
