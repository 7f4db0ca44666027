// Copyright Contributors to the rsetl Project
// SPDX-License-Identifier: Apache-2.0
//
// Little-endian serialization helpers shared by the file format and the
// mini-batch wire encoding.
//
#pragma once

#include "rsetl/error.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

namespace rsetl {

using Bytes = std::vector<std::uint8_t>;

namespace detail {

template <typename T>
T byteswap_if_big(T v) noexcept {
    if constexpr (std::endian::native == std::endian::big) {
        using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                     std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                        std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>>;
        U u;
        std::memcpy(&u, &v, sizeof u);
        U r = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) {
            r = static_cast<U>((r << 8) | ((u >> (8 * i)) & 0xFF));
        }
        std::memcpy(&v, &r, sizeof r);
    }
    return v;
}

} // namespace detail

class ByteWriter {
public:
    explicit ByteWriter(Bytes& out) : out_(out) {}

    template <typename T>
        requires std::is_arithmetic_v<T>
    void put(T v) {
        v = detail::byteswap_if_big(v);
        const auto pos = out_.size();
        out_.resize(pos + sizeof(T));
        std::memcpy(out_.data() + pos, &v, sizeof(T));
    }

    template <typename T>
        requires std::is_arithmetic_v<T>
    void put_array(std::span<const T> values) {
        if constexpr (std::endian::native == std::endian::little) {
            const auto pos = out_.size();
            out_.resize(pos + values.size_bytes());
            if (!values.empty()) std::memcpy(out_.data() + pos, values.data(), values.size_bytes());
        } else {
            for (auto v : values) put(v);
        }
    }

    void put_raw(std::span<const std::uint8_t> raw) { out_.insert(out_.end(), raw.begin(), raw.end()); }

    std::size_t size() const noexcept { return out_.size(); }

private:
    Bytes& out_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> in, std::string what = "payload")
        : in_(in), what_(std::move(what)) {}

    template <typename T>
        requires std::is_arithmetic_v<T>
    T get() {
        require(sizeof(T));
        T v;
        std::memcpy(&v, in_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return detail::byteswap_if_big(v);
    }

    template <typename T>
        requires std::is_arithmetic_v<T>
    void get_array(std::span<T> out) {
        require(out.size_bytes());
        if constexpr (std::endian::native == std::endian::little) {
            if (!out.empty()) std::memcpy(out.data(), in_.data() + pos_, out.size_bytes());
            pos_ += out.size_bytes();
        } else {
            for (auto& v : out) v = get<T>();
        }
    }

    std::size_t remaining() const noexcept { return in_.size() - pos_; }
    std::size_t position() const noexcept { return pos_; }

    void expect_end() const {
        if (pos_ != in_.size()) {
            throw FormatError(what_ + ": " + std::to_string(in_.size() - pos_) + " trailing bytes");
        }
    }

private:
    void require(std::size_t n) const {
        if (in_.size() - pos_ < n) {
            throw FormatError(what_ + ": truncated (need " + std::to_string(n) + " bytes, have " +
                              std::to_string(in_.size() - pos_) + ")");
        }
    }

    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
    std::string what_;
};

} // namespace rsetl
