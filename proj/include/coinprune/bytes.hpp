#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace coinprune {

using Bytes = std::vector<std::uint8_t>;
using ByteSpan = std::span<const std::uint8_t>;

/// Raised when a byte stream cannot be decoded. `offset` is the position of
/// the first byte that could not be consumed.
class DecodeError : public std::runtime_error {
public:
    DecodeError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " at byte offset " + std::to_string(offset)), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Little-endian fixed-width writer.
class ByteWriter {
public:
    ByteWriter() = default;
    explicit ByteWriter(std::size_t reserve) { buf_.reserve(reserve); }

    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u32(std::uint32_t v) { put_le(v, 4); }
    void u64(std::uint64_t v) { put_le(v, 8); }
    void u128(unsigned __int128 v)
    {
        put_le(static_cast<std::uint64_t>(v), 8);
        put_le(static_cast<std::uint64_t>(v >> 64), 8);
    }
    void raw(ByteSpan data) { buf_.insert(buf_.end(), data.begin(), data.end()); }

    /// Length-prefixed (4-byte LE) blob.
    void blob(ByteSpan data)
    {
        u32(static_cast<std::uint32_t>(data.size()));
        raw(data);
    }

    std::size_t size() const noexcept { return buf_.size(); }
    const Bytes& view() const noexcept { return buf_; }
    Bytes take() { return std::move(buf_); }

private:
    void put_le(std::uint64_t v, int width)
    {
        for (int i = 0; i < width; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }

    Bytes buf_;
};

class ByteReader {
public:
    explicit ByteReader(ByteSpan data, std::size_t base_offset = 0) : data_(data), base_(base_offset) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(get_le(1)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(get_le(4)); }
    std::uint64_t u64() { return get_le(8); }
    unsigned __int128 u128()
    {
        unsigned __int128 lo = get_le(8);
        unsigned __int128 hi = get_le(8);
        return lo | (hi << 64);
    }

    ByteSpan raw(std::size_t n)
    {
        need(n);
        auto out = data_.subspan(pos_, n);
        pos_ += n;
        return out;
    }

    ByteSpan blob()
    {
        const auto n = u32();
        return raw(n);
    }

    bool empty() const noexcept { return pos_ == data_.size(); }
    std::size_t remaining() const noexcept { return data_.size() - pos_; }
    /// Absolute position, including the base offset given at construction.
    std::size_t offset() const noexcept { return base_ + pos_; }

    void expect_end(const char* what) const
    {
        if (!empty()) throw DecodeError(std::string("trailing bytes after ") + what, offset());
    }

private:
    void need(std::size_t n) const
    {
        if (data_.size() - pos_ < n) throw DecodeError("truncated input", offset());
    }

    std::uint64_t get_le(int width)
    {
        need(static_cast<std::size_t>(width));
        std::uint64_t v = 0;
        for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
        pos_ += static_cast<std::size_t>(width);
        return v;
    }

    ByteSpan data_;
    std::size_t pos_ = 0;
    std::size_t base_ = 0;
};

inline Bytes to_bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }

std::string to_hex(ByteSpan data);
/// Throws std::invalid_argument on odd length or non-hex characters.
Bytes from_hex(std::string_view hex);

} // namespace coinprune
