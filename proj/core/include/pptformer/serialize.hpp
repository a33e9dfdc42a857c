#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <type_traits>
#include <vector>

#include "pptformer/errors.hpp"
#include "pptformer/tensor.hpp"

namespace ppt::io {

// Little-endian byte stream helpers shared by every on-disk container. All
// fixed-width values are written verbatim; readers throw ParseError with the
// byte offset of the first missing/invalid field.

template <typename T>
void put(std::vector<uint8_t>& out, const T& v) {
    static_assert(std::is_trivially_copyable_v<T>);
    const uint8_t* p = reinterpret_cast<const uint8_t*>(&v);
    out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T take(const std::vector<uint8_t>& in, size_t& off, const char* what) {
    static_assert(std::is_trivially_copyable_v<T>);
    if (off + sizeof(T) > in.size())
        throw ParseError(std::string("truncated stream: ") + what, off);
    T v;
    std::memcpy(&v, in.data() + off, sizeof(T));
    off += sizeof(T);
    return v;
}

inline void put_string(std::vector<uint8_t>& out, const std::string& s) {
    put(out, (uint32_t)s.size());
    out.insert(out.end(), s.begin(), s.end());
}

inline std::string take_string(const std::vector<uint8_t>& in, size_t& off, const char* what) {
    uint32_t n = take<uint32_t>(in, off, what);
    if (off + n > in.size()) throw ParseError(std::string("truncated string: ") + what, off);
    std::string s((const char*)in.data() + off, n);
    off += n;
    return s;
}

inline void put_tensor(std::vector<uint8_t>& out, const Tensor& t) {
    put(out, (uint32_t)t.rank());
    for (int d : t.shape()) put(out, (uint32_t)d);
    for (long long i = 0; i < t.size(); ++i) put(out, t[i]);
}

inline Tensor take_tensor(const std::vector<uint8_t>& in, size_t& off, const char* what) {
    uint32_t rank = take<uint32_t>(in, off, what);
    if (rank < 1 || rank > 8)
        throw ParseError(std::string("implausible tensor rank: ") + what, off);
    std::vector<int> shape(rank);
    for (uint32_t i = 0; i < rank; ++i) {
        shape[i] = (int)take<uint32_t>(in, off, what);
        if (shape[i] <= 0) throw ParseError(std::string("bad tensor extent: ") + what, off);
    }
    long long n = Tensor::count(shape);
    std::vector<double> data((size_t)n);
    for (long long i = 0; i < n; ++i) data[i] = take<double>(in, off, what);
    return Tensor::from_data(std::move(shape), std::move(data));
}

// Whole-file helpers; DataError on I/O failure.
std::vector<uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<uint8_t>& bytes);

}  // namespace ppt::io
