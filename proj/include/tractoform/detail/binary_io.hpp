#pragma once

// Little-endian primitives shared by the TF* file formats.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <string_view>

#include "tractoform/error.hpp"

namespace tractoform::detail {

static_assert(std::endian::native == std::endian::little,
              "TF* readers/writers assume a little-endian host");

class BinaryWriter {
public:
    explicit BinaryWriter(const std::string& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
        if (!out_) throw Error("cannot open '" + path + "' for writing");
    }

    void magic(std::string_view m) { out_.write(m.data(), static_cast<std::streamsize>(m.size())); }

    template <typename T>
    void put(T value) {
        out_.write(reinterpret_cast<const char*>(&value), sizeof(T));
    }

    /// Fixed-width ASCII field, space padded.
    void name(std::string_view s, std::size_t width = 16) {
        if (s.size() > width) throw InvalidArgument("name '" + std::string(s) + "' exceeds " + std::to_string(width) + " bytes");
        std::string field(width, ' ');
        std::memcpy(field.data(), s.data(), s.size());
        out_.write(field.data(), static_cast<std::streamsize>(width));
    }

    void close() {
        out_.close();
        if (!out_) throw Error("write failed for '" + path_ + "'");
    }

private:
    std::string path_;
    std::ofstream out_;
};

class BinaryReader {
public:
    BinaryReader(const std::string& path, std::string_view kind) : path_(path), kind_(kind), in_(path, std::ios::binary) {
        if (!in_) throw FormatError("cannot open " + kind_ + " file '" + path + "'");
    }

    void expect_magic(std::string_view m) {
        std::string got(m.size(), '\0');
        in_.read(got.data(), static_cast<std::streamsize>(m.size()));
        if (!in_ || got != m) fail("bad magic (expected '" + std::string(m) + "')");
    }

    void expect_version(std::uint32_t supported) {
        const auto v = get<std::uint32_t>();
        if (v != supported) fail("unsupported version " + std::to_string(v));
    }

    template <typename T>
    T get() {
        T value{};
        in_.read(reinterpret_cast<char*>(&value), sizeof(T));
        if (!in_) fail("truncated file");
        return value;
    }

    std::string name(std::size_t width = 16) {
        std::string field(width, '\0');
        in_.read(field.data(), static_cast<std::streamsize>(width));
        if (!in_) fail("truncated file");
        const auto end = field.find_last_not_of(std::string_view(" \0", 2));
        return end == std::string::npos ? std::string{} : field.substr(0, end + 1);
    }

    /// Errors out if bytes remain after the last field.
    void expect_end() {
        if (in_.peek() != std::char_traits<char>::eof()) fail("trailing bytes after payload");
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw FormatError(kind_ + " file '" + path_ + "': " + what);
    }

private:
    std::string path_;
    std::string kind_;
    std::ifstream in_;
};

}  // namespace tractoform::detail
