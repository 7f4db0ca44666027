// Copyright Contributors to the rsetl Project
// SPDX-License-Identifier: Apache-2.0
//
// PSF1: a self-describing columnar partition file.
//
//   offset 0        "PSF1"
//   4 ..            column chunks, contiguous, in feature-id order
//   footer          one 30-byte entry per column:
//                     u32 feature_id, u8 kind (0 dense, 1 sparse),
//                     u8 encoding (0 plain, 1 dictionary),
//                     u64 offset, u64 length, u64 row_count
//                   u32 footer byte length (entries only)
//                   "PSF1"
//
// All integers little-endian; dense values are IEEE-754 binary32.
//
// Chunk payloads:
//   dense  plain       f32[rows]
//   dense  dictionary  u32 dict_count, u8 index_width (1|2|4),
//                      f32[dict_count], index[rows]
//   sparse plain       u64 offsets[rows+1], u64 values[nnz]
//   sparse dictionary  u64 offsets[rows+1], u32 dict_count, u8 index_width,
//                      u64[dict_count], index[nnz]
//
// Feature ids are 0..F-1 with every dense id below every sparse id.
//
#pragma once

#include "rsetl/bytes.hpp"
#include "rsetl/columns.hpp"
#include "rsetl/datagen.hpp"
#include "rsetl/error.hpp"
#include "rsetl/schema.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

namespace rsetl {

inline constexpr std::array<std::uint8_t, 4> kPsfMagic{'P', 'S', 'F', '1'};
inline constexpr std::size_t kFooterEntryBytes = 30;
inline constexpr std::size_t kTrailerBytes = 8;
/// Auto encoding never builds dictionaries larger than this.
inline constexpr std::size_t kMaxAutoDictionary = 65536;

enum class ColumnKind : std::uint8_t { kDense = 0, kSparse = 1 };
enum class Encoding : std::uint8_t { kPlain = 0, kDictionary = 1 };
enum class EncodingPolicy { kAuto, kPlain, kDictionary };

struct ColumnChunk {
    ColumnKind kind = ColumnKind::kDense;
    Encoding encoding = Encoding::kPlain;
    std::uint64_t row_count = 0;
    Bytes payload;
};

using DecodedColumn = std::variant<DenseColumn, SparseColumn>;

namespace detail {

inline std::uint8_t index_width_for(std::size_t dict_count) {
    if (dict_count <= 0x100) return 1;
    if (dict_count <= 0x10000) return 2;
    return 4;
}

// Dictionary in first-occurrence order plus per-element indices. Returns
// false when the cardinality exceeds `cap`.
template <typename Key, typename T>
bool build_dictionary(std::span<const T> values, std::size_t cap, std::vector<T>& dict,
                      std::vector<std::uint32_t>& indices) {
    std::unordered_map<Key, std::uint32_t> lookup;
    indices.resize(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto key = std::bit_cast<Key>(values[i]);
        auto [it, inserted] = lookup.try_emplace(key, static_cast<std::uint32_t>(dict.size()));
        if (inserted) {
            if (dict.size() >= cap) return false;
            dict.push_back(values[i]);
        }
        indices[i] = it->second;
    }
    return true;
}

inline void put_indices(ByteWriter& w, std::span<const std::uint32_t> indices, std::uint8_t width) {
    for (auto ix : indices) {
        switch (width) {
        case 1: w.put(static_cast<std::uint8_t>(ix)); break;
        case 2: w.put(static_cast<std::uint16_t>(ix)); break;
        default: w.put(ix); break;
        }
    }
}

template <typename T>
void encode_values(ByteWriter& w, std::span<const T> values, Encoding enc,
                   const std::vector<T>& dict, const std::vector<std::uint32_t>& indices) {
    if (enc == Encoding::kPlain) {
        w.put_array(values);
        return;
    }
    const auto width = index_width_for(dict.size());
    w.put(static_cast<std::uint32_t>(dict.size()));
    w.put(width);
    w.put_array(std::span<const T>(dict));
    put_indices(w, indices, width);
}

template <typename T>
void decode_values(ByteReader& r, Encoding enc, std::span<T> out) {
    if (enc == Encoding::kPlain) {
        r.get_array(out);
        return;
    }
    if (enc != Encoding::kDictionary) throw FormatError("unknown encoding tag");
    const auto dict_count = r.get<std::uint32_t>();
    const auto width = r.get<std::uint8_t>();
    if (width != 1 && width != 2 && width != 4) {
        throw FormatError("invalid dictionary index width " + std::to_string(width));
    }
    if (r.remaining() < static_cast<std::uint64_t>(dict_count) * sizeof(T)) {
        throw FormatError("dictionary: truncated dictionary block");
    }
    std::vector<T> dict(dict_count);
    r.get_array(std::span<T>(dict));
    for (auto& v : out) {
        std::uint32_t ix = 0;
        switch (width) {
        case 1: ix = r.get<std::uint8_t>(); break;
        case 2: ix = r.get<std::uint16_t>(); break;
        default: ix = r.get<std::uint32_t>(); break;
        }
        if (ix >= dict_count) {
            throw FormatError("dictionary index " + std::to_string(ix) + " out of range (" +
                              std::to_string(dict_count) + " entries)");
        }
        v = dict[ix];
    }
}

template <typename Key, typename T>
Encoding choose_encoding(std::span<const T> values, EncodingPolicy policy, std::vector<T>& dict,
                         std::vector<std::uint32_t>& indices) {
    if (policy == EncodingPolicy::kPlain) return Encoding::kPlain;
    if (policy == EncodingPolicy::kDictionary) {
        build_dictionary<Key>(values, SIZE_MAX, dict, indices);
        return Encoding::kDictionary;
    }
    if (values.empty() || !build_dictionary<Key>(values, kMaxAutoDictionary, dict, indices)) {
        dict.clear();
        return Encoding::kPlain;
    }
    const auto dict_bytes = 5 + dict.size() * sizeof(T) + values.size() * index_width_for(dict.size());
    if (dict_bytes < values.size() * sizeof(T)) return Encoding::kDictionary;
    dict.clear();
    return Encoding::kPlain;
}

} // namespace detail

inline ColumnChunk encode_dense(const DenseColumn& col, EncodingPolicy policy = EncodingPolicy::kAuto) {
    ColumnChunk chunk{ColumnKind::kDense, Encoding::kPlain, col.rows(), {}};
    std::vector<float> dict;
    std::vector<std::uint32_t> indices;
    const std::span<const float> values(col.values);
    chunk.encoding = detail::choose_encoding<std::uint32_t>(values, policy, dict, indices);
    ByteWriter w(chunk.payload);
    detail::encode_values(w, values, chunk.encoding, dict, indices);
    return chunk;
}

inline ColumnChunk encode_sparse(const SparseColumn& col, EncodingPolicy policy = EncodingPolicy::kAuto) {
    if (auto why = jagged_violation(col); !why.empty()) throw InvalidArgument("sparse column: " + why);
    ColumnChunk chunk{ColumnKind::kSparse, Encoding::kPlain, col.rows(), {}};
    std::vector<std::uint64_t> dict;
    std::vector<std::uint32_t> indices;
    const std::span<const std::uint64_t> values(col.values);
    chunk.encoding = detail::choose_encoding<std::uint64_t>(values, policy, dict, indices);
    ByteWriter w(chunk.payload);
    w.put_array(std::span<const std::uint64_t>(col.offsets));
    detail::encode_values(w, values, chunk.encoding, dict, indices);
    return chunk;
}

inline DecodedColumn decode_chunk(ColumnKind kind, Encoding encoding, std::uint64_t row_count,
                                  std::span<const std::uint8_t> payload) {
    if (encoding != Encoding::kPlain && encoding != Encoding::kDictionary) {
        throw FormatError("unknown encoding tag " + std::to_string(static_cast<int>(encoding)));
    }
    ByteReader r(payload, "column chunk");
    // Every logical value costs at least one payload byte.
    if (row_count > payload.size()) throw FormatError("chunk row count exceeds payload size");
    if (kind == ColumnKind::kDense) {
        if (encoding == Encoding::kPlain && payload.size() != row_count * sizeof(float)) {
            throw FormatError("dense chunk: payload size " + std::to_string(payload.size()) +
                              " != rows * 4");
        }
        DenseColumn col;
        col.values.resize(row_count);
        detail::decode_values(r, encoding, std::span<float>(col.values));
        r.expect_end();
        return col;
    }
    if (kind != ColumnKind::kSparse) {
        throw FormatError("unknown column kind " + std::to_string(static_cast<int>(kind)));
    }
    if (payload.size() / sizeof(std::uint64_t) < row_count + 1) {
        throw FormatError("sparse chunk: truncated offsets block");
    }
    SparseColumn col;
    col.offsets.resize(row_count + 1);
    r.get_array(std::span<std::uint64_t>(col.offsets));
    if (col.offsets.front() != 0 || !std::is_sorted(col.offsets.begin(), col.offsets.end())) {
        throw FormatError("sparse chunk: offsets not monotone from zero");
    }
    const auto nnz = col.offsets.back();
    if (encoding == Encoding::kPlain && r.remaining() != nnz * sizeof(std::uint64_t)) {
        throw FormatError("sparse chunk: values block size mismatch");
    }
    if (nnz > r.remaining()) throw FormatError("sparse chunk: truncated values block");
    col.values.resize(nnz);
    detail::decode_values(r, encoding, std::span<std::uint64_t>(col.values));
    r.expect_end();
    return col;
}

inline DecodedColumn decode_chunk(const ColumnChunk& chunk) {
    return decode_chunk(chunk.kind, chunk.encoding, chunk.row_count, chunk.payload);
}

struct FooterEntry {
    std::uint32_t feature_id = 0;
    ColumnKind kind = ColumnKind::kDense;
    Encoding encoding = Encoding::kPlain;
    std::uint64_t offset = 0;
    std::uint64_t length = 0;
    std::uint64_t row_count = 0;
};

/// Serialises one partition (all dense then all sparse columns) as PSF1.
inline Bytes write_partition(const RawTable& rows, const FeatureSchema& schema,
                             EncodingPolicy policy = EncodingPolicy::kAuto) {
    if (rows.dense.size() != schema.num_dense || rows.sparse.size() != schema.num_sparse) {
        throw InvalidArgument("partition rows do not match schema column counts");
    }
    Bytes out;
    ByteWriter w(out);
    w.put_raw(kPsfMagic);
    std::vector<FooterEntry> footer;
    footer.reserve(schema.num_columns());

    auto append = [&](const ColumnChunk& chunk) {
        if (chunk.row_count != rows.num_rows) {
            throw InvalidArgument("column row count differs from partition row count");
        }
        footer.push_back({static_cast<std::uint32_t>(footer.size()), chunk.kind, chunk.encoding,
                          w.size(), chunk.payload.size(), chunk.row_count});
        w.put_raw(chunk.payload);
    };
    for (const auto& col : rows.dense) append(encode_dense(col, policy));
    for (const auto& col : rows.sparse) append(encode_sparse(col, policy));

    const auto footer_start = w.size();
    for (const auto& e : footer) {
        w.put(e.feature_id);
        w.put(static_cast<std::uint8_t>(e.kind));
        w.put(static_cast<std::uint8_t>(e.encoding));
        w.put(e.offset);
        w.put(e.length);
        w.put(e.row_count);
    }
    w.put(static_cast<std::uint32_t>(w.size() - footer_start));
    w.put_raw(kPsfMagic);
    return out;
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed for '" + path.string() + "'");
}

inline Bytes read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw IoError("cannot open '" + path.string() + "' for reading");
    const auto size = static_cast<std::size_t>(f.tellg());
    Bytes out(size);
    f.seekg(0);
    f.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(size));
    if (!f) throw IoError("read failed for '" + path.string() + "'");
    return out;
}

/// Random-access byte source backing a reader.
class ByteSource {
public:
    virtual ~ByteSource() = default;
    virtual std::uint64_t size() const = 0;
    virtual void read(std::uint64_t offset, std::span<std::uint8_t> out) = 0;
    virtual std::string describe() const = 0;
};

class MemorySource final : public ByteSource {
public:
    explicit MemorySource(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint64_t size() const override { return bytes_.size(); }
    void read(std::uint64_t offset, std::span<std::uint8_t> out) override {
        if (offset > bytes_.size() || out.size() > bytes_.size() - offset) {
            throw FormatError("read past end of buffer");
        }
        std::copy_n(bytes_.begin() + static_cast<std::ptrdiff_t>(offset), out.size(), out.begin());
    }
    std::string describe() const override { return "<memory>"; }

private:
    std::span<const std::uint8_t> bytes_;
};

class FileSource final : public ByteSource {
public:
    explicit FileSource(std::filesystem::path path) : path_(std::move(path)), in_(path_, std::ios::binary) {
        if (!in_) throw IoError("cannot open '" + path_.string() + "'");
        in_.seekg(0, std::ios::end);
        size_ = static_cast<std::uint64_t>(in_.tellg());
    }

    std::uint64_t size() const override { return size_; }
    void read(std::uint64_t offset, std::span<std::uint8_t> out) override {
        if (offset > size_ || out.size() > size_ - offset) {
            throw FormatError("read past end of '" + path_.string() + "'");
        }
        in_.seekg(static_cast<std::streamoff>(offset));
        in_.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(out.size()));
        if (!in_) throw IoError("read failed for '" + path_.string() + "'");
    }
    std::string describe() const override { return path_.string(); }

private:
    std::filesystem::path path_;
    std::ifstream in_;
    std::uint64_t size_ = 0;
};

struct IoStats {
    std::uint64_t bytes_read = 0;
    std::uint64_t read_calls = 0;
};

struct RawChunk {
    FooterEntry entry;
    Bytes payload;
};

/// Footer-driven reader. Only the trailer, footer and requested chunk
/// ranges are ever fetched from the source.
class PartitionReader {
public:
    explicit PartitionReader(std::unique_ptr<ByteSource> source) : source_(std::move(source)) {
        parse_footer();
    }

    static PartitionReader open(const std::filesystem::path& path) {
        return PartitionReader(std::make_unique<FileSource>(path));
    }
    static PartitionReader from_memory(std::span<const std::uint8_t> bytes) {
        return PartitionReader(std::make_unique<MemorySource>(bytes));
    }

    const std::vector<FooterEntry>& entries() const noexcept { return entries_; }
    std::uint64_t row_count() const noexcept { return entries_.empty() ? 0 : entries_.front().row_count; }
    std::uint64_t file_size() const { return source_->size(); }
    /// Footer entries + length word + trailing magic.
    std::uint64_t footer_bytes() const noexcept { return footer_bytes_; }
    const IoStats& io() const noexcept { return io_; }

    const FooterEntry& entry(std::uint32_t feature_id) const {
        if (feature_id >= entries_.size()) {
            throw InvalidArgument("unknown feature id " + std::to_string(feature_id) + " in '" +
                                  source_->describe() + "' (" + std::to_string(entries_.size()) +
                                  " columns)");
        }
        return entries_[feature_id];
    }

    std::vector<RawChunk> read_chunks(std::span<const std::uint32_t> feature_ids) {
        for (auto id : feature_ids) (void)entry(id);
        std::vector<RawChunk> out;
        out.reserve(feature_ids.size());
        for (auto id : feature_ids) {
            const auto& e = entries_[id];
            RawChunk chunk{e, Bytes(e.length)};
            fetch(e.offset, chunk.payload);
            out.push_back(std::move(chunk));
        }
        return out;
    }

    std::vector<RawChunk> read_all_chunks() {
        std::vector<std::uint32_t> ids(entries_.size());
        for (std::uint32_t i = 0; i < ids.size(); ++i) ids[i] = i;
        return read_chunks(ids);
    }

private:
    void fetch(std::uint64_t offset, std::span<std::uint8_t> out) {
        source_->read(offset, out);
        io_.bytes_read += out.size();
        ++io_.read_calls;
    }

    [[noreturn]] void corrupt(const std::string& why) const {
        throw FormatError("corrupt PSF1 footer in '" + source_->describe() + "': " + why);
    }

    void parse_footer() {
        const auto size = source_->size();
        if (size < kPsfMagic.size() + kTrailerBytes) corrupt("file too small");
        std::array<std::uint8_t, kTrailerBytes> trailer{};
        fetch(size - kTrailerBytes, trailer);
        if (!std::equal(kPsfMagic.begin(), kPsfMagic.end(), trailer.begin() + 4)) corrupt("bad trailing magic");
        ByteReader tr(std::span<const std::uint8_t>(trailer).first(4), "trailer");
        const auto footer_len = tr.get<std::uint32_t>();
        if (footer_len % kFooterEntryBytes != 0) corrupt("footer length not a multiple of entry size");
        if (footer_len > size - kPsfMagic.size() - kTrailerBytes) corrupt("footer length exceeds file");
        const auto footer_start = size - kTrailerBytes - footer_len;
        footer_bytes_ = footer_len + kTrailerBytes;

        Bytes footer(footer_len);
        fetch(footer_start, footer);
        ByteReader r(footer, "footer");
        const auto n = footer_len / kFooterEntryBytes;
        entries_.assign(n, {});
        std::vector<bool> seen(n, false);
        for (std::size_t i = 0; i < n; ++i) {
            FooterEntry e;
            e.feature_id = r.get<std::uint32_t>();
            const auto kind = r.get<std::uint8_t>();
            const auto enc = r.get<std::uint8_t>();
            e.offset = r.get<std::uint64_t>();
            e.length = r.get<std::uint64_t>();
            e.row_count = r.get<std::uint64_t>();
            if (kind > 1) corrupt("invalid column kind");
            if (enc > 1) corrupt("invalid encoding tag");
            e.kind = static_cast<ColumnKind>(kind);
            e.encoding = static_cast<Encoding>(enc);
            if (e.feature_id >= n || seen[e.feature_id]) corrupt("feature ids are not a permutation of 0..F-1");
            seen[e.feature_id] = true;
            entries_[e.feature_id] = e;
        }

        // Chunks must tile [4, footer_start) exactly, in feature-id order,
        // dense before sparse, all with the same row count.
        std::uint64_t cursor = kPsfMagic.size();
        bool in_sparse = false;
        for (const auto& e : entries_) {
            if (e.offset != cursor) corrupt("chunks are not contiguous");
            if (e.length > footer_start - e.offset) corrupt("chunk extends into footer");
            cursor = e.offset + e.length;
            if (e.row_count != entries_.front().row_count) corrupt("row counts differ across chunks");
            if (e.kind == ColumnKind::kSparse) in_sparse = true;
            else if (in_sparse) corrupt("dense column after sparse column");
        }
        if (cursor != footer_start) corrupt("chunks do not cover the data region");
    }

    std::unique_ptr<ByteSource> source_;
    std::vector<FooterEntry> entries_;
    std::uint64_t footer_bytes_ = 0;
    IoStats io_;
};

struct ColumnSet {
    std::vector<std::uint32_t> feature_ids;
    std::vector<DecodedColumn> columns;
    IoStats io;
};

inline std::vector<DecodedColumn> decode_chunks(const std::vector<RawChunk>& chunks) {
    std::vector<DecodedColumn> out;
    out.reserve(chunks.size());
    for (const auto& c : chunks) {
        out.push_back(decode_chunk(c.entry.kind, c.entry.encoding, c.entry.row_count, c.payload));
    }
    return out;
}

/// Selective extraction: reads the footer plus the requested chunks only.
inline ColumnSet read_columns(PartitionReader& reader, std::span<const std::uint32_t> feature_ids) {
    auto chunks = reader.read_chunks(feature_ids);
    ColumnSet out;
    out.feature_ids.assign(feature_ids.begin(), feature_ids.end());
    out.columns = decode_chunks(chunks);
    out.io = reader.io();
    return out;
}

inline ColumnSet read_columns(const std::filesystem::path& path, std::span<const std::uint32_t> feature_ids) {
    auto reader = PartitionReader::open(path);
    return read_columns(reader, feature_ids);
}

/// Rebuilds a RawTable from decoded columns in file order.
inline RawTable assemble_table(std::vector<DecodedColumn> columns, std::uint64_t rows) {
    RawTable t;
    t.num_rows = rows;
    for (auto& c : columns) {
        if (auto* d = std::get_if<DenseColumn>(&c)) t.dense.push_back(std::move(*d));
        else t.sparse.push_back(std::move(std::get<SparseColumn>(c)));
    }
    return t;
}

inline RawTable read_table(PartitionReader& reader) {
    return assemble_table(decode_chunks(reader.read_all_chunks()), reader.row_count());
}

struct PartitionInfo {
    std::uint64_t id = 0;
    std::filesystem::path path;
    std::uint64_t first_row = 0;
    std::uint64_t rows = 0;
    std::uint64_t bytes = 0;
};

struct PartitionSet {
    std::uint64_t rows_per_partition = 0;
    std::vector<PartitionInfo> partitions;

    std::uint64_t total_bytes() const noexcept {
        std::uint64_t n = 0;
        for (const auto& p : partitions) n += p.bytes;
        return n;
    }
};

struct RowRange {
    std::uint64_t begin = 0;
    std::uint64_t end = 0;
};

/// ceil(num_rows / rows_per_partition) disjoint ranges in row order.
inline std::vector<RowRange> shard_ranges(std::uint64_t num_rows, std::uint64_t rows_per_partition) {
    if (rows_per_partition < 1) throw InvalidArgument("rows_per_partition must be >= 1");
    std::vector<RowRange> out;
    for (std::uint64_t b = 0; b < num_rows; b += rows_per_partition) {
        out.push_back({b, std::min(num_rows, b + rows_per_partition)});
    }
    return out;
}

inline std::string partition_file_name(std::uint64_t id) {
    std::string digits = std::to_string(id);
    if (digits.size() < 5) digits.insert(0, 5 - digits.size(), '0');
    return "part-" + digits + ".psf";
}

/// Splits `table` into partitions and persists each as a PSF1 file in `dir`.
inline PartitionSet shard(const RawTable& table, std::uint64_t rows_per_partition,
                          const FeatureSchema& schema, const std::filesystem::path& dir,
                          EncodingPolicy policy = EncodingPolicy::kAuto) {
    PartitionSet set;
    set.rows_per_partition = rows_per_partition;
    std::uint64_t id = 0;
    for (const auto& range : shard_ranges(table.num_rows, rows_per_partition)) {
        const auto bytes = write_partition(table.slice(range.begin, range.end), schema, policy);
        PartitionInfo info{id, dir / partition_file_name(id), range.begin, range.end - range.begin, bytes.size()};
        write_file(info.path, bytes);
        set.partitions.push_back(std::move(info));
        ++id;
    }
    return set;
}

} // namespace rsetl
