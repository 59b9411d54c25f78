#include "fixtures.hpp"

#include "procinv/dataset.hpp"

#include <gtest/gtest.h>

#include <set>

#include <unistd.h>

using namespace procinv;

namespace {

DatasetConfig small_config() {
    DatasetConfig c;
    c.prior.storey_count = {1, 3};
    c.prior.footprint_radius = {4.0, 8.0};
    c.prior.material_variation_probability = 0.8;
    c.density = 4.0;
    c.records_per_shard = 4;
    return c;
}

class TempDir {
public:
    explicit TempDir(const std::string &name)
        : m_path(fs::temp_directory_path() / ("procinv_" + name + "_" + std::to_string(::getpid()))) {
        fs::remove_all(m_path);
        fs::create_directories(m_path);
    }
    ~TempDir() { fs::remove_all(m_path); }
    const fs::path &path() const { return m_path; }
    fs::path operator/(const std::string &s) const { return m_path / s; }

private:
    fs::path m_path;
};

std::vector<std::uint8_t> bytes_of(const fs::path &p) { return detail::read_file(p); }

// Every file of a dataset directory, by name.
std::map<std::string, std::vector<std::uint8_t>> snapshot(const fs::path &dir) {
    std::map<std::string, std::vector<std::uint8_t>> out;
    for (const auto &e : fs::directory_iterator(dir)) {
        out[e.path().filename().string()] = bytes_of(e.path());
    }
    return out;
}

} // namespace

TEST(BuildingBytes, RoundTripIsExact) {
    const AssetCatalog catalog = build_catalog(0, 64);
    const BuildingCodec codec(catalog.material_counts());
    PriorConfig cfg;
    cfg.modifier_probability = 0.3;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const BuildingAbstraction b = augment_colors(sample(seed, cfg, catalog, codec), seed, 0.1);
        const auto bytes = building_bytes(b);
        ByteReader r(bytes);
        EXPECT_EQ(read_building(r), b);
        EXPECT_TRUE(r.done());
    }
}

TEST(BuildingBytes, TruncatedInputIsAnIoError) {
    const auto bytes = building_bytes(fixtures::box_building(5, 5, 2));
    for (std::size_t cut : {std::size_t{0}, std::size_t{9}, bytes.size() / 2, bytes.size() - 1}) {
        ByteReader r(std::span<const std::uint8_t>(bytes).first(cut));
        EXPECT_THROW(read_building(r), IoError) << cut;
    }
}

TEST(DatasetConfigJson, RoundTripAndValidation) {
    const DatasetConfig c = small_config();
    EXPECT_EQ(nlohmann::json(c).get<DatasetConfig>(), c);
    DatasetConfig bad = c;
    bad.catalog_size = 65;
    EXPECT_THROW(check(bad), ConfigError);
    bad = c;
    bad.holdout_fraction = 1.0;
    EXPECT_THROW(check(bad), ConfigError);
}

TEST(Generate, ByteIdenticalAcrossRuns) {
    TempDir a("gen_a"), b("gen_b");
    const auto ra = generate(a.path(), 10, 7, small_config());
    const auto rb = generate(b.path(), 10, 7, small_config(), {.threads = 3});
    EXPECT_TRUE(ra.complete && rb.complete);
    EXPECT_EQ(ra.generated, 10U);
    const auto sa = snapshot(a.path());
    EXPECT_EQ(sa.size(), 5U); // 3 shards, manifest, vocabulary
    const BuildingCodec codec(build_catalog(0, small_config().catalog_size).material_counts());
    const std::string vocab(sa.at(kVocabularyFile).begin(), sa.at(kVocabularyFile).end());
    EXPECT_EQ(nlohmann::json::parse(vocab), nlohmann::json::parse(codec.manifest().dump()));
    EXPECT_EQ(sa, snapshot(b.path()));
    TempDir c("gen_c");
    generate(c.path(), 10, 8, small_config());
    EXPECT_NE(snapshot(c.path()).at("shard-00000.bin"), sa.at("shard-00000.bin"));
}

TEST(Generate, ManifestDescribesTheDataset) {
    TempDir d("manifest");
    const DatasetManifest m = generate(d.path(), 11, 3, small_config()).manifest;
    EXPECT_EQ(load_manifest(d.path()), m);
    EXPECT_EQ(m.record_count, 11U);
    EXPECT_EQ(m.augmented_count, 5U);
    EXPECT_EQ(m.config_hash, hex64(dataset_config_hash(small_config())));
    ASSERT_EQ(m.shards.size(), 3U);
    EXPECT_EQ(m.shards[2].first_record, 8U);
    EXPECT_EQ(m.shards[2].record_count, 3U);
    EXPECT_EQ(m.holdout.size(), 1U); // round(0.05 * 11)
    EXPECT_EQ(m.train.size() + m.holdout.size(), 11U);
    const AssetCatalog catalog = build_catalog(0, 64);
    EXPECT_EQ(m.vocabulary_hash, hex64(BuildingCodec(catalog.material_counts()).vocabulary_hash()));
}

TEST(Generate, RecordsAreConsistentAndRegenerable) {
    TempDir d("consistent");
    const DatasetConfig cfg = small_config();
    generate(d.path(), 9, 5, cfg);
    Dataset ds(d.path());
    const ConsistencyReport r = check_dataset(ds);
    EXPECT_EQ(r.records, 9U);
    EXPECT_TRUE(r.token_mismatches.empty());
    EXPECT_TRUE(r.corrupt.empty());
    EXPECT_EQ(r.augmented, 4U);

    const AssetCatalog catalog = build_catalog(cfg.catalog_seed, cfg.catalog_size);
    const BuildingCodec codec(catalog.material_counts());
    for (std::uint64_t id = 0; id < 9; ++id) {
        const DatasetRecord rec = ds.read(id);
        EXPECT_EQ(rec.id, id);
        EXPECT_EQ(rec.metadata.at("augmented").get<bool>(), id % 2 == 1);
        EXPECT_EQ(rec.metadata.at("record_seed").get<std::uint64_t>(), 5 + id);
        EXPECT_EQ(codec.decode(rec.tokens), rec.building);
        EXPECT_TRUE(validate(rec.building, catalog.material_counts()).empty());
        const DatasetRecord again = make_record(id, rec.metadata.at("base_seed"), cfg, catalog, codec);
        EXPECT_EQ(record_payload(again), record_payload(rec));
    }
}

TEST(Generate, AugmentationChangesOnlyColours) {
    DatasetConfig cfg = small_config();
    cfg.records_per_building = 2; // records 2k and 2k+1 share a building
    const AssetCatalog catalog = build_catalog(0, 64);
    const BuildingCodec codec(catalog.material_counts());
    bool any_colour_change = false;
    for (std::uint64_t k = 0; k < 6; ++k) {
        const DatasetRecord plain = make_record(2 * k, 1, cfg, catalog, codec);
        const DatasetRecord aug = make_record(2 * k + 1, 1, cfg, catalog, codec);
        EXPECT_EQ(plain.building.footprints, aug.building.footprints);
        EXPECT_EQ(plain.building.facades, aug.building.facades);
        EXPECT_EQ(plain.building.storeys, aug.building.storeys);
        any_colour_change = any_colour_change || plain.building.material_variations != aug.building.material_variations;
    }
    EXPECT_TRUE(any_colour_change);
}

TEST(Generate, InterruptedRunResumesToTheSameBytes) {
    TempDir ref("resume_ref"), d("resume");
    generate(ref.path(), 10, 7, small_config());
    const auto expected = snapshot(ref.path());

    const GenerateReport first = generate(d.path(), 10, 7, small_config(), {.stop_after = 6});
    EXPECT_FALSE(first.complete);
    EXPECT_EQ(first.generated, 6U);
    EXPECT_FALSE(fs::exists(d / "manifest.json"));
    const ShardScan partial = scan_shard(d / "shard-00001.bin");
    EXPECT_FALSE(partial.complete);
    EXPECT_EQ(partial.records.size(), 2U);
    EXPECT_THROW(ShardReader(d / "shard-00001.bin"), IoError);

    const GenerateReport second = generate(d.path(), 10, 7, small_config());
    EXPECT_TRUE(second.complete);
    EXPECT_EQ(second.reused, 6U);
    EXPECT_EQ(second.generated, 4U);
    EXPECT_EQ(snapshot(d.path()), expected);

    const GenerateReport third = generate(d.path(), 10, 7, small_config());
    EXPECT_EQ(third.generated, 0U);
    EXPECT_EQ(third.reused, 10U);
    EXPECT_EQ(snapshot(d.path()), expected);
}

TEST(Generate, TornWriteIsDiscardedOnResume) {
    TempDir ref("torn_ref"), d("torn");
    generate(ref.path(), 6, 2, small_config());
    const auto expected = snapshot(ref.path());
    generate(d.path(), 6, 2, small_config(), {.stop_after = 3});
    const fs::path shard = d / "shard-00000.bin";
    const ShardScan before = scan_shard(shard);
    ASSERT_EQ(before.records.size(), 3U);
    // Keep half of the third record, as if the process died mid-write.
    const std::uint64_t third = before.records[2].offset;
    fs::resize_file(shard, third + (before.valid_end - third) / 2);
    EXPECT_EQ(scan_shard(shard).records.size(), 2U);
    const GenerateReport r = generate(d.path(), 6, 2, small_config());
    EXPECT_EQ(r.reused, 2U);
    EXPECT_EQ(r.generated, 4U);
    EXPECT_EQ(snapshot(d.path()), expected);
}

TEST(Generate, DifferentDatasetNeedsOverwrite) {
    TempDir d("grow"), ref("grow_ref");
    generate(d.path(), 5, 1, small_config());
    EXPECT_THROW(generate(d.path(), 7, 1, small_config()), ConfigError);
    const GenerateReport grown = generate(d.path(), 7, 1, small_config(), {.overwrite = true});
    EXPECT_EQ(grown.generated, 7U); // a different dataset: rebuilt
    generate(ref.path(), 7, 1, small_config());
    EXPECT_EQ(snapshot(d.path()), snapshot(ref.path()));
}

TEST(Generate, RejectsBadInput) {
    TempDir d("bad");
    EXPECT_THROW(generate(d.path(), 0, 1, small_config()), ConfigError);
    DatasetConfig cfg = small_config();
    cfg.density = 0;
    EXPECT_THROW(generate(d.path(), 3, 1, cfg), ConfigError);
}

TEST(Split, CountsFollowRounding) {
    DatasetManifest m;
    m.record_count = 341721;
    EXPECT_EQ(split(m, 0.05, 1).holdout.size(), 17086U);
    m.record_count = 1000;
    const DatasetManifest a = split(m, 0.05, 9);
    EXPECT_EQ(a.holdout.size(), 50U);
    EXPECT_EQ(a.train.size(), 950U);
    EXPECT_EQ(split(m, 0.05, 9), a);
    EXPECT_NE(split(m, 0.05, 10).holdout, a.holdout);
    std::set<std::uint64_t> all(a.train.begin(), a.train.end());
    for (std::uint64_t id : a.holdout) {
        EXPECT_TRUE(all.insert(id).second);
    }
    EXPECT_EQ(all.size(), 1000U);
    EXPECT_EQ(*all.rbegin(), 999U);
    EXPECT_THROW(split(m, 0.0, 1), ConfigError);
    EXPECT_THROW(split(m, 1.0, 1), ConfigError);
}

TEST(Stream, BatchesCoverTheSplitOnceInStableOrder) {
    TempDir d("stream");
    DatasetConfig cfg = small_config();
    cfg.prior.storey_count = {1, 1};
    cfg.density = 0.5;
    cfg.records_per_shard = 32;
    generate(d.path(), 100, 4, cfg);
    Dataset ds(d.path());
    RecordStream stream(ds, "all", 16);
    std::vector<std::size_t> sizes;
    std::vector<std::uint64_t> ids;
    while (auto batch = stream.next_batch()) {
        sizes.push_back(batch->size());
        for (const auto &r : *batch) {
            ids.push_back(r.id);
        }
    }
    EXPECT_EQ(sizes, (std::vector<std::size_t>{16, 16, 16, 16, 16, 16, 4}));
    std::vector<std::uint64_t> expected(100);
    std::iota(expected.begin(), expected.end(), std::uint64_t{0});
    EXPECT_EQ(ids, expected);

    stream.reset();
    std::vector<std::uint64_t> again;
    while (auto batch = stream.next_batch()) {
        for (const auto &r : *batch) {
            again.push_back(r.id);
        }
    }
    EXPECT_EQ(again, ids);

    RecordStream holdout(ds, "holdout", 100);
    const auto batch = holdout.next_batch();
    ASSERT_TRUE(batch.has_value());
    EXPECT_EQ(batch->size(), 5U);
    EXPECT_FALSE(holdout.next_batch().has_value());
    EXPECT_THROW(RecordStream(ds, "validation", 4), ConfigError);
}

TEST(Stream, CorruptRecordIsReportedAndIterationContinues) {
    TempDir d("corrupt");
    generate(d.path(), 8, 6, small_config());
    const fs::path shard = d / "shard-00001.bin";
    const ShardScan scan = scan_shard(shard);
    {
        // Flip one payload byte of record 5.
        std::fstream f(shard, std::ios::binary | std::ios::in | std::ios::out);
        const auto at = static_cast<std::streamoff>(scan.records[1].offset + 20);
        f.seekg(at);
        char c = 0;
        f.read(&c, 1);
        c = static_cast<char>(c ^ 0x5a);
        f.seekp(at);
        f.write(&c, 1);
    }
    Dataset ds(d.path());
    RecordStream stream(ds, "all", 3);
    std::vector<std::uint64_t> seen;
    std::vector<std::uint64_t> errors;
    while (true) {
        try {
            auto batch = stream.next_batch();
            if (!batch) {
                break;
            }
            for (const auto &r : *batch) {
                seen.push_back(r.id);
            }
        } catch (const CorruptRecordError &e) {
            errors.push_back(e.id());
        }
    }
    EXPECT_EQ(errors, (std::vector<std::uint64_t>{5}));
    EXPECT_EQ(seen, (std::vector<std::uint64_t>{0, 1, 2, 3, 4, 6, 7}));
    EXPECT_EQ(stream.skipped(), (std::vector<std::uint64_t>{5}));

    RecordStream skipping(ds, "all", 100, true);
    EXPECT_EQ(skipping.next_batch()->size(), 7U);
    EXPECT_EQ(check_dataset(ds).corrupt, (std::vector<std::uint64_t>{5}));
    // A scan stops at the damaged record.
    EXPECT_EQ(scan_shard(shard).records.size(), 1U);
}

TEST(Shard, FooterIndexMatchesScan) {
    TempDir d("footer");
    generate(d.path(), 4, 1, small_config());
    const fs::path shard = d / "shard-00000.bin";
    const ShardScan scan = scan_shard(shard);
    EXPECT_TRUE(scan.complete);
    ShardReader reader(shard);
    EXPECT_EQ(reader.index(), scan.records);
    EXPECT_EQ(reader.header().first_record, 0U);
    EXPECT_EQ(reader.header().base_seed, 1U);
    const auto bytes = bytes_of(shard);
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 8), "PIVSHRD1");
    EXPECT_EQ(std::string(bytes.end() - 8, bytes.end()), "PIVINDX1");
}
