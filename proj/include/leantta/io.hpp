#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "leantta/error.hpp"

// Little-endian binary container primitives shared by the model and dataset
// file formats. The reader tracks its byte offset so parse errors can point
// at the failing position.
namespace leantta::io {

class Writer {
public:
    explicit Writer(const std::string& path) : path_(path), out_(path, std::ios::binary) {
        if (!out_) throw_io("cannot open for writing: " + path);
    }

    void bytes(const void* p, std::size_t n) {
        out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
        if (!out_) throw_io("write failed: " + path_);
    }
    void u8(std::uint8_t v) { bytes(&v, 1); }
    void u32(std::uint32_t v) { bytes(&v, 4); }
    void u64(std::uint64_t v) { bytes(&v, 8); }
    void i32(std::int32_t v) { bytes(&v, 4); }
    void i64(std::int64_t v) { bytes(&v, 8); }
    void f32(float v) { bytes(&v, 4); }
    void f64(double v) { bytes(&v, 8); }

    void str(const std::string& s) {
        u64(s.size());
        bytes(s.data(), s.size());
    }
    void f32_array(const std::vector<float>& v) {
        u64(v.size());
        bytes(v.data(), v.size() * sizeof(float));
    }
    void u16_array(const std::vector<std::uint16_t>& v) {
        u64(v.size());
        bytes(v.data(), v.size() * sizeof(std::uint16_t));
    }
    void i8_array(const std::vector<std::int8_t>& v) {
        u64(v.size());
        bytes(v.data(), v.size() * sizeof(std::int8_t));
    }
    void u8_array(const std::vector<std::uint8_t>& v) {
        u64(v.size());
        bytes(v.data(), v.size() * sizeof(std::uint8_t));
    }
    void i32_array(const std::vector<std::int32_t>& v) {
        u64(v.size());
        bytes(v.data(), v.size() * sizeof(std::int32_t));
    }
    void i64_array(const std::vector<std::int64_t>& v) {
        u64(v.size());
        bytes(v.data(), v.size() * sizeof(std::int64_t));
    }

    void close() {
        out_.close();
        if (!out_) throw_io("close failed: " + path_);
    }

private:
    std::string path_;
    std::ofstream out_;
};

class Reader {
public:
    explicit Reader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw_io("cannot open for reading: " + path);
    }

    void bytes(void* p, std::size_t n) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) {
            throw_parse("unexpected end of file at byte offset " + std::to_string(offset_) +
                        " in " + path_);
        }
        offset_ += n;
    }
    std::uint8_t u8() { std::uint8_t v; bytes(&v, 1); return v; }
    std::uint32_t u32() { std::uint32_t v; bytes(&v, 4); return v; }
    std::uint64_t u64() { std::uint64_t v; bytes(&v, 8); return v; }
    std::int32_t i32() { std::int32_t v; bytes(&v, 4); return v; }
    std::int64_t i64() { std::int64_t v; bytes(&v, 8); return v; }
    float f32() { float v; bytes(&v, 4); return v; }
    double f64() { double v; bytes(&v, 8); return v; }

    std::string str() {
        const std::uint64_t n = checked_count(u64());
        std::string s(n, '\0');
        bytes(s.data(), n);
        return s;
    }
    std::vector<float> f32_array() {
        const std::uint64_t n = checked_count(u64());
        std::vector<float> v(n);
        bytes(v.data(), n * sizeof(float));
        return v;
    }
    std::vector<std::uint16_t> u16_array() {
        const std::uint64_t n = checked_count(u64());
        std::vector<std::uint16_t> v(n);
        bytes(v.data(), n * sizeof(std::uint16_t));
        return v;
    }
    std::vector<std::int8_t> i8_array() {
        const std::uint64_t n = checked_count(u64());
        std::vector<std::int8_t> v(n);
        bytes(v.data(), n * sizeof(std::int8_t));
        return v;
    }
    std::vector<std::uint8_t> u8_array() {
        const std::uint64_t n = checked_count(u64());
        std::vector<std::uint8_t> v(n);
        bytes(v.data(), n * sizeof(std::uint8_t));
        return v;
    }
    std::vector<std::int32_t> i32_array() {
        const std::uint64_t n = checked_count(u64());
        std::vector<std::int32_t> v(n);
        bytes(v.data(), n * sizeof(std::int32_t));
        return v;
    }
    std::vector<std::int64_t> i64_array() {
        const std::uint64_t n = checked_count(u64());
        std::vector<std::int64_t> v(n);
        bytes(v.data(), n * sizeof(std::int64_t));
        return v;
    }

    std::uint64_t offset() const { return offset_; }
    const std::string& path() const { return path_; }

    void expect_magic(const char (&magic)[5]) {
        char buf[4];
        bytes(buf, 4);
        if (std::memcmp(buf, magic, 4) != 0) {
            throw_parse(std::string("bad magic, expected \"") + magic + "\" in " + path_);
        }
    }

private:
    std::uint64_t checked_count(std::uint64_t n) {
        // Basic sanity bound so a corrupt length does not trigger a huge allocation.
        if (n > (1ULL << 32)) {
            throw_parse("implausible element count " + std::to_string(n) + " at byte offset " +
                        std::to_string(offset_ - 8) + " in " + path_);
        }
        return n;
    }

    std::string path_;
    std::ifstream in_;
    std::uint64_t offset_ = 0;
};

}  // namespace leantta::io
