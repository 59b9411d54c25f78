#pragma once

// Paired (building, point cloud) records stored in append-only shard files.
//
// Shard layout, little-endian:
//   header  "PIVSHRD1" u32 version u32 shard_index u64 first_record u64 base_seed
//           u64 config_hash u64 vocabulary_hash
//   record  u32 length, payload[length], u32 crc32(payload)
//           payload = blob(building) blob(tokens) blob(ply) blob(metadata json)
//   footer  (u64 record_id, u64 offset) x count, u32 count, u64 index_offset, "PIVINDX1"

#include "procinv/codec.hpp"
#include "procinv/config.hpp"
#include "procinv/prior.hpp"
#include "procinv/render.hpp"

#include <zlib.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <thread>

namespace procinv {

namespace fs = std::filesystem;

class CorruptRecordError : public Error {
public:
    CorruptRecordError(std::uint64_t id, const std::string &message)
        : Error("corrupt_record", "record " + std::to_string(id) + ": " + message), m_id(id) {}

    std::uint64_t id() const noexcept { return m_id; }

private:
    std::uint64_t m_id;
};

inline constexpr std::string_view kShardMagic = "PIVSHRD1";
inline constexpr std::string_view kFooterMagic = "PIVINDX1";
inline constexpr std::uint32_t kShardVersion = 1;
inline constexpr std::size_t kShardHeaderSize = 8 + 4 + 4 + 8 + 8 + 8 + 8;
inline constexpr std::size_t kFooterTailSize = 4 + 8 + 8; // count, index offset, magic

inline std::uint32_t crc32_of(std::span<const std::uint8_t> data) {
    return static_cast<std::uint32_t>(::crc32(0L, data.data(), static_cast<uInt>(data.size())));
}

// ---------------------------------------------------------------------------
// Building binary form (exact doubles)

inline void write_building(ByteWriter &w, const BuildingAbstraction &b) {
    w.f64(b.height);
    w.f64(b.noise_level);
    w.u32(static_cast<std::uint32_t>(b.footprints.size()));
    for (const Footprint &f : b.footprints) {
        w.u32(static_cast<std::uint32_t>(f.vertices.size()));
        for (const Vec2 &v : f.vertices) {
            w.f64(v.x);
            w.f64(v.y);
        }
    }
    w.u32(static_cast<std::uint32_t>(b.facades.size()));
    for (const Facade &f : b.facades) {
        w.u32(f.footprint_index);
        w.u32(static_cast<std::uint32_t>(f.cells_patterns.size()));
        for (const CellsPattern &p : f.cells_patterns) {
            w.u32(p.segment_range.first_segment);
            w.u32(p.segment_range.last_segment);
            w.u32(static_cast<std::uint32_t>(p.cells.size()));
            for (const Cell &c : p.cells) {
                w.u32(c.cell_type);
                w.f64(c.offset);
                w.u8(c.modifier ? 1 : 0);
                if (c.modifier) {
                    w.f64(c.modifier->scale_x);
                    w.f64(c.modifier->scale_y);
                    w.f64(c.modifier->quaternion_3);
                    w.f64(c.modifier->quaternion_4);
                }
            }
        }
    }
    w.u32(static_cast<std::uint32_t>(b.storeys.size()));
    for (const Storey &s : b.storeys) {
        w.f64(s.elevation);
        w.u32(s.facade_index);
    }
    w.u32(static_cast<std::uint32_t>(b.material_variations.size()));
    for (const MaterialVariation &m : b.material_variations) {
        w.u32(m.cell_type);
        w.u32(m.material_slot);
        w.f64(m.color.h);
        w.f64(m.color.s);
        w.f64(m.color.v);
    }
}

inline std::vector<std::uint8_t> building_bytes(const BuildingAbstraction &b) {
    ByteWriter w;
    write_building(w, b);
    return w.take();
}

namespace detail {

// Rejects counts that cannot fit in the remaining bytes before allocating.
inline std::uint32_t count(ByteReader &r, std::size_t min_item_size) {
    const std::uint32_t n = r.u32();
    if (n > r.remaining() / min_item_size) {
        throw IoError("list length " + std::to_string(n) + " exceeds the available data");
    }
    return n;
}

} // namespace detail

inline BuildingAbstraction read_building(ByteReader &r) {
    BuildingAbstraction b;
    b.height = r.f64();
    b.noise_level = r.f64();
    b.footprints.resize(detail::count(r, 4));
    for (Footprint &f : b.footprints) {
        f.vertices.resize(detail::count(r, 16));
        for (Vec2 &v : f.vertices) {
            v.x = r.f64();
            v.y = r.f64();
        }
    }
    b.facades.resize(detail::count(r, 8));
    for (Facade &f : b.facades) {
        f.footprint_index = r.u32();
        f.cells_patterns.resize(detail::count(r, 12));
        for (CellsPattern &p : f.cells_patterns) {
            p.segment_range.first_segment = r.u32();
            p.segment_range.last_segment = r.u32();
            p.cells.resize(detail::count(r, 13));
            for (Cell &c : p.cells) {
                c.cell_type = r.u32();
                c.offset = r.f64();
                const std::uint8_t has = r.u8();
                if (has > 1) {
                    throw IoError("bad modifier flag");
                }
                if (has) {
                    CellModifier m;
                    m.scale_x = r.f64();
                    m.scale_y = r.f64();
                    m.quaternion_3 = r.f64();
                    m.quaternion_4 = r.f64();
                    c.modifier = m;
                }
            }
        }
    }
    b.storeys.resize(detail::count(r, 12));
    for (Storey &s : b.storeys) {
        s.elevation = r.f64();
        s.facade_index = r.u32();
    }
    b.material_variations.resize(detail::count(r, 32));
    for (MaterialVariation &m : b.material_variations) {
        m.cell_type = r.u32();
        m.material_slot = r.u32();
        m.color.h = r.f64();
        m.color.s = r.f64();
        m.color.v = r.f64();
    }
    return b;
}

// ---------------------------------------------------------------------------
// Configuration

struct DatasetConfig {
    PriorConfig prior;
    std::uint64_t catalog_seed = 0;
    std::uint32_t catalog_size = 64;
    double density = kDefaultDensity;
    std::uint32_t records_per_building = 1;
    std::uint32_t records_per_shard = 1000;
    double holdout_fraction = 0.05;

    friend bool operator==(const DatasetConfig &, const DatasetConfig &) = default;
};

inline void to_json(nlohmann::json &j, const DatasetConfig &c) {
    j = nlohmann::json{{"prior", c.prior},
                       {"catalog_seed", c.catalog_seed},
                       {"catalog_size", c.catalog_size},
                       {"density", c.density},
                       {"records_per_building", c.records_per_building},
                       {"records_per_shard", c.records_per_shard},
                       {"holdout_fraction", c.holdout_fraction}};
}

inline void from_json(const nlohmann::json &j, DatasetConfig &c) {
    auto take = [&](const char *key, auto &field) {
        if (j.contains(key)) {
            j.at(key).get_to(field);
        }
    };
    take("prior", c.prior);
    take("catalog_seed", c.catalog_seed);
    take("catalog_size", c.catalog_size);
    take("density", c.density);
    take("records_per_building", c.records_per_building);
    take("records_per_shard", c.records_per_shard);
    take("holdout_fraction", c.holdout_fraction);
}

inline void check(const DatasetConfig &c) {
    check(c.prior);
    if (c.catalog_size < kAssetKindCount || c.catalog_size > kDefaultPointerCardinality) {
        throw ConfigError("catalog_size must lie in [6, 64]");
    }
    if (!(c.density > 0.0)) {
        throw ConfigError("density must be positive");
    }
    if (c.records_per_building < 1 || c.records_per_shard < 1) {
        throw ConfigError("records_per_building and records_per_shard must be at least 1");
    }
    if (!(c.holdout_fraction > 0.0 && c.holdout_fraction < 1.0)) {
        throw ConfigError("holdout_fraction must lie in (0, 1)");
    }
}

inline std::uint64_t dataset_config_hash(const DatasetConfig &c) { return fnv1a64(nlohmann::json(c).dump()); }

// ---------------------------------------------------------------------------
// Records

struct DatasetRecord {
    std::uint64_t id = 0;
    BuildingAbstraction building;
    TokenSequence tokens;
    PointCloud cloud;
    nlohmann::json metadata;
};

inline bool is_augmented(std::uint64_t id) { return id % 2 == 1; }

/// The building of record `id`, without rendering.
inline BuildingAbstraction record_building(std::uint64_t id, std::uint64_t base_seed, const DatasetConfig &cfg,
                                           const AssetCatalog &catalog, const BuildingCodec &codec,
                                           SampleReport *report = nullptr) {
    BuildingAbstraction b = sample(base_seed + id / cfg.records_per_building, cfg.prior, catalog, codec, report);
    if (is_augmented(id)) {
        const BuildingAbstraction jittered = augment_colors(b, mix_seed(base_seed + id, 0x415547ULL), cfg.prior.hsv_sigma);
        b = canonicalize(codec.quantize(jittered));
    }
    return b;
}

/// Builds record `id` from scratch; the result depends only on the arguments.
inline DatasetRecord make_record(std::uint64_t id, std::uint64_t base_seed, const DatasetConfig &cfg,
                                 const AssetCatalog &catalog, const BuildingCodec &codec) {
    const std::uint64_t building_seed = base_seed + id / cfg.records_per_building;
    const std::uint64_t record_seed = base_seed + id;
    SampleReport report;
    BuildingAbstraction b = record_building(id, base_seed, cfg, catalog, codec, &report);
    const bool augmented = is_augmented(id);
    const std::uint64_t render_seed = mix_seed(record_seed, 0x52454e44ULL);
    DatasetRecord r;
    r.id = id;
    r.tokens = codec.encode(b);
    r.cloud = render(b, catalog, cfg.density, render_seed);
    r.building = std::move(b);
    r.metadata = {{"id", id},
                  {"base_seed", base_seed},
                  {"building_seed", building_seed},
                  {"record_seed", record_seed},
                  {"render_seed", render_seed},
                  {"augmented", augmented},
                  {"config_hash", hex64(dataset_config_hash(cfg))},
                  {"sample_attempts", report.attempts},
                  {"fallback", report.fallback},
                  {"token_count", r.tokens.size()},
                  {"point_count", r.cloud.size()}};
    return r;
}

inline std::vector<std::uint8_t> record_payload(const DatasetRecord &r) {
    ByteWriter w;
    w.blob(building_bytes(r.building));
    w.blob(token_sequence_bytes(r.tokens));
    w.blob(ply_bytes(r.cloud));
    const std::string meta = r.metadata.dump();
    w.blob({reinterpret_cast<const std::uint8_t *>(meta.data()), meta.size()});
    return w.take();
}

inline DatasetRecord parse_record_payload(std::uint64_t id, std::span<const std::uint8_t> payload) {
    try {
        ByteReader r(payload);
        DatasetRecord rec;
        rec.id = id;
        {
            ByteReader b(r.blob());
            rec.building = read_building(b);
        }
        {
            ByteReader t(r.blob());
            rec.tokens = read_token_sequence(t);
        }
        rec.cloud = parse_ply(r.blob());
        const auto meta = r.blob();
        rec.metadata = nlohmann::json::parse(meta.begin(), meta.end());
        if (!r.done()) {
            throw IoError("trailing bytes after metadata");
        }
        return rec;
    } catch (const CorruptRecordError &) {
        throw;
    } catch (const std::exception &e) {
        throw CorruptRecordError(id, e.what());
    }
}

// ---------------------------------------------------------------------------
// Shards

struct ShardHeader {
    std::uint32_t version = kShardVersion;
    std::uint32_t shard_index = 0;
    std::uint64_t first_record = 0;
    std::uint64_t base_seed = 0;
    std::uint64_t config_hash = 0;
    std::uint64_t vocabulary_hash = 0;

    friend bool operator==(const ShardHeader &, const ShardHeader &) = default;
};

inline std::vector<std::uint8_t> shard_header_bytes(const ShardHeader &h) {
    ByteWriter w;
    w.bytes({reinterpret_cast<const std::uint8_t *>(kShardMagic.data()), kShardMagic.size()});
    w.u32(h.version);
    w.u32(h.shard_index);
    w.u64(h.first_record);
    w.u64(h.base_seed);
    w.u64(h.config_hash);
    w.u64(h.vocabulary_hash);
    return w.take();
}

struct IndexEntry {
    std::uint64_t id = 0;
    std::uint64_t offset = 0; // of the u32 length prefix

    friend bool operator==(const IndexEntry &, const IndexEntry &) = default;
};

/// What a byte-level walk over a shard file found.
struct ShardScan {
    ShardHeader header;
    std::vector<IndexEntry> records; // intact records, in file order
    std::uint64_t valid_end = 0;     // end of the last intact record
    bool complete = false;           // a consistent footer follows the records
};

namespace detail {

inline std::vector<std::uint8_t> read_file(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline ShardHeader parse_header(std::span<const std::uint8_t> bytes, const fs::path &path) {
    if (bytes.size() < kShardHeaderSize ||
        std::string_view(reinterpret_cast<const char *>(bytes.data()), kShardMagic.size()) != kShardMagic) {
        throw IoError(path.string() + " is not a shard file");
    }
    ByteReader r(bytes.subspan(kShardMagic.size(), kShardHeaderSize - kShardMagic.size()));
    ShardHeader h;
    h.version = r.u32();
    h.shard_index = r.u32();
    h.first_record = r.u64();
    h.base_seed = r.u64();
    h.config_hash = r.u64();
    h.vocabulary_hash = r.u64();
    if (h.version != kShardVersion) {
        throw IoError(path.string() + ": unsupported shard version " + std::to_string(h.version));
    }
    return h;
}

inline bool footer_at(std::span<const std::uint8_t> bytes, std::uint64_t at, const std::vector<IndexEntry> &records) {
    const std::uint64_t expected = at + records.size() * 16 + kFooterTailSize;
    if (bytes.size() != expected) {
        return false;
    }
    ByteReader r(bytes.subspan(at));
    for (const IndexEntry &e : records) {
        if (r.u64() != e.id || r.u64() != e.offset) {
            return false;
        }
    }
    if (r.u32() != records.size() || r.u64() != at) {
        return false;
    }
    const auto magic = r.bytes(kFooterMagic.size());
    return std::string_view(reinterpret_cast<const char *>(magic.data()), magic.size()) == kFooterMagic;
}

} // namespace detail

/// Walks a shard record by record, stopping at the first damaged or partial
/// record. Record ids are implied by position (first_record + k).
inline ShardScan scan_shard(const fs::path &path) {
    const std::vector<std::uint8_t> bytes = detail::read_file(path);
    ShardScan s;
    s.header = detail::parse_header(bytes, path);
    std::uint64_t at = kShardHeaderSize;
    s.valid_end = at;
    const std::span<const std::uint8_t> all(bytes);
    while (true) {
        if (detail::footer_at(all, at, s.records)) {
            s.complete = true;
            break;
        }
        if (bytes.size() - at < 4) {
            break;
        }
        std::uint32_t length = 0;
        std::memcpy(&length, bytes.data() + at, 4);
        if (bytes.size() - at - 4 < static_cast<std::uint64_t>(length) + 4) {
            break;
        }
        const auto payload = all.subspan(at + 4, length);
        std::uint32_t crc = 0;
        std::memcpy(&crc, bytes.data() + at + 4 + length, 4);
        if (crc != crc32_of(payload)) {
            break;
        }
        s.records.push_back({s.header.first_record + s.records.size(), at});
        at += 4 + static_cast<std::uint64_t>(length) + 4;
        s.valid_end = at;
    }
    return s;
}

/// Read access to a finished shard through its footer index.
class ShardReader {
public:
    explicit ShardReader(fs::path path) : m_path(std::move(path)), m_in(m_path, std::ios::binary) {
        if (!m_in) {
            throw IoError("cannot open " + m_path.string());
        }
        std::vector<std::uint8_t> head(kShardHeaderSize);
        if (!m_in.read(reinterpret_cast<char *>(head.data()), static_cast<std::streamsize>(head.size()))) {
            throw IoError(m_path.string() + " is not a shard file");
        }
        m_header = detail::parse_header(head, m_path);
        m_in.seekg(0, std::ios::end);
        const auto size = static_cast<std::uint64_t>(m_in.tellg());
        const std::size_t tail = kFooterTailSize;
        if (size < kShardHeaderSize + tail) {
            throw IoError(m_path.string() + ": missing footer (unfinished shard)");
        }
        std::vector<std::uint8_t> t(tail);
        m_in.seekg(static_cast<std::streamoff>(size - tail));
        m_in.read(reinterpret_cast<char *>(t.data()), static_cast<std::streamsize>(tail));
        ByteReader r(t);
        const std::uint32_t count = r.u32();
        const std::uint64_t index_at = r.u64();
        const auto magic = r.bytes(kFooterMagic.size());
        if (std::string_view(reinterpret_cast<const char *>(magic.data()), magic.size()) != kFooterMagic ||
            index_at + static_cast<std::uint64_t>(count) * 16 + tail != size) {
            throw IoError(m_path.string() + ": missing footer (unfinished shard)");
        }
        std::vector<std::uint8_t> index(static_cast<std::size_t>(count) * 16);
        m_in.seekg(static_cast<std::streamoff>(index_at));
        m_in.read(reinterpret_cast<char *>(index.data()), static_cast<std::streamsize>(index.size()));
        ByteReader ir(index);
        m_index.resize(count);
        for (IndexEntry &e : m_index) {
            e.id = ir.u64();
            e.offset = ir.u64();
        }
        m_index_at = index_at;
    }

    const ShardHeader &header() const { return m_header; }
    const std::vector<IndexEntry> &index() const { return m_index; }
    std::size_t size() const { return m_index.size(); }

    /// Raw payload of entry k after the CRC check.
    std::vector<std::uint8_t> payload(std::size_t k) {
        const IndexEntry &e = m_index.at(k);
        const std::uint64_t limit = k + 1 < m_index.size() ? m_index[k + 1].offset : m_index_at;
        m_in.clear();
        m_in.seekg(static_cast<std::streamoff>(e.offset));
        std::uint32_t length = 0;
        if (!m_in.read(reinterpret_cast<char *>(&length), 4) || e.offset + 8 + length != limit) {
            throw CorruptRecordError(e.id, "bad length prefix in " + m_path.filename().string());
        }
        std::vector<std::uint8_t> data(length);
        std::uint32_t crc = 0;
        m_in.read(reinterpret_cast<char *>(data.data()), length);
        m_in.read(reinterpret_cast<char *>(&crc), 4);
        if (!m_in || crc != crc32_of(data)) {
            throw CorruptRecordError(e.id, "checksum mismatch in " + m_path.filename().string());
        }
        return data;
    }

    DatasetRecord read(std::size_t k) { return parse_record_payload(m_index.at(k).id, payload(k)); }

private:
    fs::path m_path;
    std::ifstream m_in;
    ShardHeader m_header;
    std::vector<IndexEntry> m_index;
    std::uint64_t m_index_at = 0;
};

/// Appends framed records to a shard file and writes the footer on finish().
class ShardWriter {
public:
    /// Starts a new file, or continues `resume` (an intact prefix already on disk).
    ShardWriter(fs::path path, const ShardHeader &header, const ShardScan *resume = nullptr)
        : m_path(std::move(path)) {
        if (resume) {
            fs::resize_file(m_path, resume->valid_end);
            m_index = resume->records;
            m_offset = resume->valid_end;
            m_out.open(m_path, std::ios::binary | std::ios::in | std::ios::out);
            m_out.seekp(static_cast<std::streamoff>(m_offset));
        } else {
            m_out.open(m_path, std::ios::binary | std::ios::trunc | std::ios::out);
            const auto h = shard_header_bytes(header);
            write(h);
            m_offset = h.size();
        }
        if (!m_out) {
            throw IoError("cannot write " + m_path.string());
        }
        m_next_id = header.first_record + m_index.size();
    }

    std::size_t size() const { return m_index.size(); }

    void append(const DatasetRecord &r) {
        if (r.id != m_next_id) {
            throw IoError("shard " + m_path.filename().string() + " expects record " + std::to_string(m_next_id) +
                          ", got " + std::to_string(r.id));
        }
        const auto payload = record_payload(r);
        ByteWriter w;
        w.blob(payload);
        w.u32(crc32_of(payload));
        write(w.data());
        m_out.flush();
        if (!m_out) {
            throw IoError("writing record " + std::to_string(r.id) + " to " + m_path.string() + " failed");
        }
        m_index.push_back({r.id, m_offset});
        m_offset += w.data().size();
        ++m_next_id;
    }

    void finish() {
        ByteWriter w;
        for (const IndexEntry &e : m_index) {
            w.u64(e.id);
            w.u64(e.offset);
        }
        w.u32(static_cast<std::uint32_t>(m_index.size()));
        w.u64(m_offset);
        w.bytes({reinterpret_cast<const std::uint8_t *>(kFooterMagic.data()), kFooterMagic.size()});
        write(w.data());
        m_out.close();
        if (!m_out) {
            throw IoError("writing the footer of " + m_path.string() + " failed");
        }
    }

private:
    void write(std::span<const std::uint8_t> bytes) {
        m_out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    }

    fs::path m_path;
    std::fstream m_out;
    std::vector<IndexEntry> m_index;
    std::uint64_t m_offset = 0;
    std::uint64_t m_next_id = 0;
};

// ---------------------------------------------------------------------------
// Manifest

struct ShardInfo {
    std::string file;
    std::uint64_t first_record = 0;
    std::uint64_t record_count = 0;
    std::uint64_t bytes = 0;

    friend bool operator==(const ShardInfo &, const ShardInfo &) = default;
};

struct DatasetManifest {
    std::uint64_t record_count = 0;
    std::uint64_t base_seed = 0;
    std::string config_hash;
    std::string vocabulary_hash;
    std::uint64_t catalog_seed = 0;
    std::uint32_t catalog_size = 0;
    std::uint64_t augmented_count = 0;
    DatasetConfig config;
    std::vector<ShardInfo> shards;
    double holdout_fraction = 0.0;
    std::uint64_t split_seed = 0;
    std::vector<std::uint64_t> train;
    std::vector<std::uint64_t> holdout;

    friend bool operator==(const DatasetManifest &, const DatasetManifest &) = default;
};

inline void to_json(nlohmann::json &j, const ShardInfo &s) {
    j = nlohmann::json{
        {"file", s.file}, {"first_record", s.first_record}, {"record_count", s.record_count}, {"bytes", s.bytes}};
}

inline void from_json(const nlohmann::json &j, ShardInfo &s) {
    j.at("file").get_to(s.file);
    j.at("first_record").get_to(s.first_record);
    j.at("record_count").get_to(s.record_count);
    j.at("bytes").get_to(s.bytes);
}

inline void to_json(nlohmann::json &j, const DatasetManifest &m) {
    j = nlohmann::json{{"format", "procinv-dataset"},
                       {"format_version", kShardVersion},
                       {"record_count", m.record_count},
                       {"base_seed", m.base_seed},
                       {"config_hash", m.config_hash},
                       {"vocabulary_hash", m.vocabulary_hash},
                       {"catalog_seed", m.catalog_seed},
                       {"catalog_size", m.catalog_size},
                       {"augmented_count", m.augmented_count},
                       {"config", m.config},
                       {"shards", m.shards},
                       {"splits",
                        {{"holdout_fraction", m.holdout_fraction},
                         {"seed", m.split_seed},
                         {"train", m.train},
                         {"holdout", m.holdout}}}};
}

inline void from_json(const nlohmann::json &j, DatasetManifest &m) {
    if (j.value("format", "") != "procinv-dataset") {
        throw IoError("not a dataset manifest");
    }
    j.at("record_count").get_to(m.record_count);
    j.at("base_seed").get_to(m.base_seed);
    j.at("config_hash").get_to(m.config_hash);
    j.at("vocabulary_hash").get_to(m.vocabulary_hash);
    j.at("catalog_seed").get_to(m.catalog_seed);
    j.at("catalog_size").get_to(m.catalog_size);
    j.at("augmented_count").get_to(m.augmented_count);
    j.at("config").get_to(m.config);
    j.at("shards").get_to(m.shards);
    const auto &s = j.at("splits");
    s.at("holdout_fraction").get_to(m.holdout_fraction);
    s.at("seed").get_to(m.split_seed);
    s.at("train").get_to(m.train);
    s.at("holdout").get_to(m.holdout);
}

inline constexpr const char *kManifestFile = "manifest.json";
inline constexpr const char *kVocabularyFile = "vocabulary.json";

inline fs::path shard_path(const fs::path &dir, std::size_t index) {
    char name[32];
    std::snprintf(name, sizeof name, "shard-%05zu.bin", index);
    return dir / name;
}

inline DatasetManifest load_manifest(const fs::path &dir) {
    try {
        return load_json_file((dir / kManifestFile).string()).get<DatasetManifest>();
    } catch (const nlohmann::json::exception &e) {
        throw IoError((dir / kManifestFile).string() + ": " + e.what());
    }
}

inline void save_manifest(const fs::path &dir, const DatasetManifest &m) {
    const fs::path tmp = dir / (std::string(kManifestFile) + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << nlohmann::json(m).dump(2) << "\n";
        if (!out) {
            throw IoError("cannot write " + tmp.string());
        }
    }
    fs::rename(tmp, dir / kManifestFile);
}

/// Seeded assignment of round(fraction * n) records to the holdout split.
inline DatasetManifest split(DatasetManifest m, double holdout_fraction, std::uint64_t seed) {
    if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) {
        throw ConfigError("holdout fraction must lie in (0, 1)");
    }
    std::vector<std::uint64_t> ids(m.record_count);
    std::iota(ids.begin(), ids.end(), std::uint64_t{0});
    std::mt19937_64 rng(mix_seed(seed, 0x53504c4954ULL));
    std::shuffle(ids.begin(), ids.end(), rng);
    const auto k = static_cast<std::size_t>(std::llround(holdout_fraction * static_cast<double>(m.record_count)));
    m.holdout.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k));
    m.train.assign(ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end());
    std::sort(m.holdout.begin(), m.holdout.end());
    std::sort(m.train.begin(), m.train.end());
    m.holdout_fraction = holdout_fraction;
    m.split_seed = seed;
    return m;
}

// ---------------------------------------------------------------------------
// Generation

struct GenerateOptions {
    std::optional<std::uint64_t> stop_after; // new records to write before returning early
    bool overwrite = false;                  // discard a different dataset already in the directory
    unsigned threads = 1;
    std::function<void(std::uint64_t)> on_record; // called after each record is written
};

struct GenerateReport {
    std::uint64_t generated = 0;
    std::uint64_t reused = 0;
    bool complete = false;
    DatasetManifest manifest; // valid when complete
};

namespace detail {

inline void remove_dataset_files(const fs::path &dir) {
    for (const auto &entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name == kManifestFile || name == kVocabularyFile ||
            (name.rfind("shard-", 0) == 0 && entry.path().extension() == ".bin")) {
            fs::remove(entry.path());
        }
    }
}

} // namespace detail

/// Writes records [0, n) to `dir`. Finished shards and intact record prefixes
/// already on disk are kept, so an interrupted run resumes where it stopped and
/// the final bytes equal those of an uninterrupted run.
inline GenerateReport generate(const fs::path &dir, std::uint64_t n, std::uint64_t base_seed,
                               const DatasetConfig &cfg, const GenerateOptions &opt = {}) {
    if (n < 1) {
        throw ConfigError("dataset needs at least one record");
    }
    check(cfg);
    const AssetCatalog catalog = build_catalog(cfg.catalog_seed, cfg.catalog_size);
    const BuildingCodec codec(catalog.material_counts());
    const std::uint64_t cfg_hash = dataset_config_hash(cfg);
    fs::create_directories(dir);

    if (fs::exists(dir / kManifestFile)) {
        const DatasetManifest old = load_manifest(dir);
        const bool same = old.config_hash == hex64(cfg_hash) && old.base_seed == base_seed && old.record_count == n;
        if (!same && !opt.overwrite) {
            throw ConfigError(dir.string() + " already holds a different dataset (use overwrite)");
        }
        if (!same) {
            detail::remove_dataset_files(dir);
        } else {
            fs::remove(dir / kManifestFile); // rewritten once every shard checks out
        }
    }

    DatasetManifest m;
    m.record_count = n;
    m.base_seed = base_seed;
    m.config_hash = hex64(cfg_hash);
    m.vocabulary_hash = hex64(codec.vocabulary_hash());
    m.catalog_seed = cfg.catalog_seed;
    m.catalog_size = cfg.catalog_size;
    m.augmented_count = n / 2;
    m.config = cfg;

    GenerateReport report;
    const std::uint64_t per_shard = cfg.records_per_shard;
    const std::uint64_t shard_count = (n + per_shard - 1) / per_shard;
    const unsigned threads = std::max(1U, opt.threads);
    for (std::uint64_t s = 0; s < shard_count; ++s) {
        const std::uint64_t first = s * per_shard;
        const std::uint64_t count = std::min(per_shard, n - first);
        const fs::path path = shard_path(dir, s);
        const ShardHeader header{kShardVersion, static_cast<std::uint32_t>(s), first, base_seed, cfg_hash,
                                 codec.vocabulary_hash()};
        std::optional<ShardScan> existing;
        if (fs::exists(path)) {
            existing = scan_shard(path);
            if (!(existing->header == header)) {
                if (!opt.overwrite) {
                    throw ConfigError(path.string() + " belongs to a different dataset (use overwrite)");
                }
                existing.reset();
            }
        }
        if (existing && existing->complete && existing->records.size() == count) {
            report.reused += count;
            m.shards.push_back({path.filename().string(), first, count, fs::file_size(path)});
            continue;
        }
        if (existing && existing->records.size() > count) {
            existing->valid_end = existing->records[count].offset;
            existing->records.resize(count);
        }
        ShardWriter writer(path, header, existing ? &*existing : nullptr);
        report.reused += writer.size();
        std::uint64_t id = first + writer.size();
        while (id < first + count) {
            if (opt.stop_after && report.generated >= *opt.stop_after) {
                return report;
            }
            std::uint64_t batch = std::min<std::uint64_t>(threads, first + count - id);
            if (opt.stop_after) {
                batch = std::min(batch, *opt.stop_after - report.generated);
            }
            std::vector<DatasetRecord> records(batch);
            if (batch == 1) {
                records[0] = make_record(id, base_seed, cfg, catalog, codec);
            } else {
                std::vector<std::thread> pool;
                std::vector<std::exception_ptr> errors(batch);
                for (std::uint64_t k = 0; k < batch; ++k) {
                    pool.emplace_back([&, k] {
                        try {
                            records[k] = make_record(id + k, base_seed, cfg, catalog, codec);
                        } catch (...) {
                            errors[k] = std::current_exception();
                        }
                    });
                }
                for (std::thread &t : pool) {
                    t.join();
                }
                for (const auto &e : errors) {
                    if (e) {
                        std::rethrow_exception(e);
                    }
                }
            }
            for (const DatasetRecord &r : records) {
                writer.append(r);
                ++report.generated;
                if (opt.on_record) {
                    opt.on_record(r.id);
                }
            }
            id += batch;
        }
        writer.finish();
        m.shards.push_back({path.filename().string(), first, count, fs::file_size(path)});
    }
    for (std::uint64_t s = shard_count; fs::exists(shard_path(dir, s)); ++s) {
        fs::remove(shard_path(dir, s));
    }
    m = split(std::move(m), cfg.holdout_fraction, base_seed);
    {
        std::ofstream vocab(dir / kVocabularyFile, std::ios::binary | std::ios::trunc);
        vocab << codec.manifest().dump(2) << "\n";
        if (!vocab) {
            throw IoError("cannot write " + (dir / kVocabularyFile).string());
        }
    }
    save_manifest(dir, m);
    report.complete = true;
    report.manifest = m;
    return report;
}

// ---------------------------------------------------------------------------
// Reading

/// Random access to records of a finished dataset by id.
class Dataset {
public:
    explicit Dataset(fs::path dir) : m_dir(std::move(dir)), m_manifest(load_manifest(m_dir)) {}
    Dataset(fs::path dir, DatasetManifest manifest) : m_dir(std::move(dir)), m_manifest(std::move(manifest)) {}

    const DatasetManifest &manifest() const { return m_manifest; }
    const fs::path &directory() const { return m_dir; }

    DatasetRecord read(std::uint64_t id) {
        if (id >= m_manifest.record_count) {
            throw ConfigError("record " + std::to_string(id) + " is out of range");
        }
        const auto it = std::upper_bound(m_manifest.shards.begin(), m_manifest.shards.end(), id,
                                         [](std::uint64_t v, const ShardInfo &s) { return v < s.first_record; });
        const std::size_t s = static_cast<std::size_t>(it - m_manifest.shards.begin()) - 1;
        const ShardInfo &info = m_manifest.shards.at(s);
        auto reader = m_readers.find(s);
        if (reader == m_readers.end()) {
            try {
                reader = m_readers.emplace(s, std::make_unique<ShardReader>(m_dir / info.file)).first;
            } catch (const IoError &e) {
                throw CorruptRecordError(id, e.what());
            }
        }
        const std::uint64_t k = id - info.first_record;
        if (k >= reader->second->size() || reader->second->index()[k].id != id) {
            throw CorruptRecordError(id, "missing from the index of " + info.file);
        }
        return reader->second->read(k);
    }

    const std::vector<std::uint64_t> &split_ids(const std::string &name) const {
        if (name == "train") {
            return m_manifest.train;
        }
        if (name == "holdout") {
            return m_manifest.holdout;
        }
        if (name == "all") {
            if (m_all.size() != m_manifest.record_count) {
                m_all.resize(m_manifest.record_count);
                std::iota(m_all.begin(), m_all.end(), std::uint64_t{0});
            }
            return m_all;
        }
        throw ConfigError("unknown split '" + name + "' (train, holdout or all)");
    }

private:
    fs::path m_dir;
    DatasetManifest m_manifest;
    std::map<std::size_t, std::unique_ptr<ShardReader>> m_readers;
    mutable std::vector<std::uint64_t> m_all;
};

/// Batches of one split in ascending id order. A damaged record raises
/// CorruptRecordError; calling next_batch() again continues after it.
class RecordStream {
public:
    RecordStream(Dataset &dataset, const std::string &split, std::size_t batch, bool skip_corrupt = false)
        : m_dataset(dataset), m_ids(dataset.split_ids(split)), m_batch(batch), m_skip(skip_corrupt) {
        if (batch < 1) {
            throw ConfigError("batch size must be at least 1");
        }
    }

    std::optional<std::vector<DatasetRecord>> next_batch() {
        while (m_pending.size() < m_batch && m_cursor < m_ids.size()) {
            const std::uint64_t id = m_ids[m_cursor++];
            try {
                m_pending.push_back(m_dataset.read(id));
            } catch (const CorruptRecordError &) {
                m_skipped.push_back(id);
                if (!m_skip) {
                    throw;
                }
            }
        }
        if (m_pending.empty()) {
            return std::nullopt;
        }
        std::vector<DatasetRecord> out;
        out.swap(m_pending);
        return out;
    }

    void reset() {
        m_cursor = 0;
        m_pending.clear();
        m_skipped.clear();
    }

    const std::vector<std::uint64_t> &skipped() const { return m_skipped; }

private:
    Dataset &m_dataset;
    const std::vector<std::uint64_t> &m_ids;
    std::size_t m_batch;
    bool m_skip;
    std::size_t m_cursor = 0;
    std::vector<DatasetRecord> m_pending;
    std::vector<std::uint64_t> m_skipped;
};

struct ConsistencyReport {
    std::uint64_t records = 0;
    std::vector<std::uint64_t> token_mismatches;
    std::vector<std::uint64_t> corrupt;
    std::uint64_t augmented = 0;
};

/// Full scan: every record's tokens must equal the encoding of its building.
inline ConsistencyReport check_dataset(Dataset &dataset) {
    const DatasetManifest &m = dataset.manifest();
    const AssetCatalog catalog = build_catalog(m.catalog_seed, m.catalog_size);
    const BuildingCodec codec(catalog.material_counts());
    ConsistencyReport r;
    for (std::uint64_t id = 0; id < m.record_count; ++id) {
        try {
            const DatasetRecord rec = dataset.read(id);
            ++r.records;
            if (codec.encode(canonicalize(rec.building)) != rec.tokens) {
                r.token_mismatches.push_back(id);
            }
            r.augmented += rec.metadata.value("augmented", false) ? 1 : 0;
        } catch (const CorruptRecordError &) {
            r.corrupt.push_back(id);
        }
    }
    return r;
}

} // namespace procinv
