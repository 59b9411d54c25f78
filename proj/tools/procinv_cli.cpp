// procinv: generate datasets, encode/decode buildings, render and perturb
// point clouds, run constrained rollouts and evaluate.
//
// Every subcommand resolves defaults < --config file < flags into one JSON
// document, prints it with its hash, and reads all settings from it.

#include "procinv/config.hpp"
#include "procinv/dataset.hpp"
#include "procinv/decode.hpp"
#include "procinv/metrics.hpp"
#include "procinv/prior.hpp"
#include "procinv/render.hpp"
#include "procinv/schema_json.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace procinv;

namespace {

json default_config() {
    return json{{"seed", 0},
                {"threads", 1},
                {"prior", PriorConfig{}},
                {"catalog", {{"seed", 0}, {"size", 64}}},
                {"render", {{"density", kDefaultDensity}}},
                {"dataset",
                 {{"n", 100}, {"records_per_building", 1}, {"records_per_shard", 1000}, {"holdout_fraction", 0.05},
                  {"overwrite", false}}},
                {"perturb",
                 {{"kind", "drop-center"}, {"block_edge", 5.0}, {"blocks", 4}, {"gap", 4.0}, {"axis", 0},
                  {"rate", 0.5}, {"voxel_edge", 7.0}}},
                {"decode", {{"mode", "sample"}, {"temperature", 1.0}, {"max_length", kMaxSequenceLength}}},
                {"rollout", {{"policy", "uniform"}, {"count", 1}, {"conditioning", ""}, {"oracle_tokens", ""}}},
                {"bridge", {{"command", ""}}},
                {"eval", {{"pairs", "self"}, {"n", 10}, {"geometric", false}}}};
}

// A flag bound to a JSON pointer in the resolved config; applied only when given.
class Flags {
public:
    template <class T>
    CLI::Option *add(CLI::App *app, const std::string &name, const std::string &pointer, const std::string &help) {
        auto value = std::make_shared<T>();
        CLI::Option *opt = app->add_option(name, *value, help);
        m_bound.push_back({opt, json::json_pointer(pointer), [value] { return json(*value); }});
        return opt;
    }

    CLI::Option *toggle(CLI::App *app, const std::string &name, const std::string &pointer, const std::string &help) {
        CLI::Option *opt = app->add_flag(name, help);
        m_bound.push_back({opt, json::json_pointer(pointer), [] { return json(true); }});
        return opt;
    }

    void apply(json &cfg) const {
        for (const Bound &b : m_bound) {
            if (b.option->count() > 0) {
                cfg[b.pointer] = b.value();
            }
        }
    }

private:
    struct Bound {
        CLI::Option *option;
        json::json_pointer pointer;
        std::function<json()> value;
    };
    std::vector<Bound> m_bound;
};

std::string require_path(const json &cfg, const std::string &key) {
    if (!cfg.contains(key) || !cfg.at(key).is_string() || cfg.at(key).get<std::string>().empty()) {
        throw ConfigError("missing required setting '" + key + "'");
    }
    return cfg.at(key).get<std::string>();
}

PriorConfig prior_of(const json &cfg) {
    PriorConfig p = cfg.at("prior").get<PriorConfig>();
    check(p);
    return p;
}

AssetCatalog catalog_of(const json &cfg) {
    const auto size = cfg.at("/catalog/size"_json_pointer).get<std::size_t>();
    if (size < kAssetKindCount || size > kDefaultPointerCardinality) {
        throw ConfigError("catalog size must lie in [6, 64]");
    }
    return build_catalog(cfg.at("/catalog/seed"_json_pointer).get<std::uint64_t>(), size);
}

DecodeConfig decode_of(const json &cfg) {
    DecodeConfig d;
    d.mode = parse_decode_mode(cfg.at("/decode/mode"_json_pointer).get<std::string>());
    d.temperature = cfg.at("/decode/temperature"_json_pointer).get<double>();
    d.max_length = cfg.at("/decode/max_length"_json_pointer).get<std::size_t>();
    d.seed = cfg.at("seed").get<std::uint64_t>();
    check(d);
    return d;
}

std::ofstream open_output(const std::string &path) {
    if (const fs::path parent = fs::path(path).parent_path(); !parent.empty()) {
        fs::create_directories(parent);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + path);
    }
    return out;
}

std::ifstream open_input(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path);
    }
    return in;
}

bool is_json_path(const std::string &path) { return fs::path(path).extension() == ".json"; }

void save_tokens(const std::string &path, const TokenSequence &tokens) {
    std::ofstream out = open_output(path);
    if (is_json_path(path)) {
        out << json(tokens).dump() << "\n";
    } else {
        write_token_sequence(out, tokens);
    }
    if (!out) {
        throw IoError("cannot write " + path);
    }
}

TokenSequence load_tokens(const std::string &path) {
    if (is_json_path(path)) {
        return load_json_file(path).get<TokenSequence>();
    }
    std::ifstream in = open_input(path);
    return read_token_sequence(in);
}

PointCloud load_cloud(const std::string &path) {
    std::ifstream in = open_input(path);
    return read_ply(in);
}

void save_cloud(const std::string &path, const PointCloud &pc) {
    std::ofstream out = open_output(path);
    write_ply(out, pc);
    if (!out) {
        throw IoError("cannot write " + path);
    }
}

void save_text(const std::string &path, const std::string &text) {
    std::ofstream out = open_output(path);
    out << text;
    if (!out) {
        throw IoError("cannot write " + path);
    }
}

// ---------------------------------------------------------------------------
// Subcommands

int gen_dataset(const json &cfg) {
    const std::string dir = require_path(cfg, "output");
    DatasetConfig dc;
    dc.prior = prior_of(cfg);
    dc.catalog_seed = cfg.at("/catalog/seed"_json_pointer).get<std::uint64_t>();
    dc.catalog_size = cfg.at("/catalog/size"_json_pointer).get<std::uint32_t>();
    dc.density = cfg.at("/render/density"_json_pointer).get<double>();
    const json &d = cfg.at("dataset");
    dc.records_per_building = d.at("records_per_building").get<std::uint32_t>();
    dc.records_per_shard = d.at("records_per_shard").get<std::uint32_t>();
    dc.holdout_fraction = d.at("holdout_fraction").get<double>();
    GenerateOptions opt;
    opt.overwrite = d.at("overwrite").get<bool>();
    opt.threads = cfg.at("threads").get<unsigned>();
    const auto n = d.at("n").get<std::uint64_t>();
    const GenerateReport r = generate(dir, n, cfg.at("seed").get<std::uint64_t>(), dc, opt);
    std::cout << "records " << r.manifest.record_count << " (generated " << r.generated << ", reused " << r.reused
              << ")\n"
              << "shards " << r.manifest.shards.size() << "\n"
              << "augmented " << r.manifest.augmented_count << "\n"
              << "train " << r.manifest.train.size() << " holdout " << r.manifest.holdout.size() << "\n"
              << "manifest " << (fs::path(dir) / kManifestFile).string() << "\n";
    return 0;
}

int sample_building(const json &cfg) {
    const std::string out = require_path(cfg, "output");
    const AssetCatalog catalog = catalog_of(cfg);
    const BuildingCodec codec(catalog.material_counts());
    SampleReport report;
    const BuildingAbstraction b = sample(cfg.at("seed").get<std::uint64_t>(), prior_of(cfg), catalog, codec, &report);
    save_building_json(b, out);
    if (cfg.contains("tokens_output")) {
        save_tokens(cfg.at("tokens_output").get<std::string>(), codec.encode(b));
    }
    std::cout << "footprints " << b.footprints.size() << " facades " << b.facades.size() << " storeys "
              << b.storeys.size() << " variations " << b.material_variations.size() << "\n"
              << "tokens " << report.token_count << " attempts " << report.attempts
              << (report.fallback ? " fallback" : "") << "\n";
    return 0;
}

int render_cmd(const json &cfg) {
    BuildingAbstraction b = load_building_json(require_path(cfg, "input"));
    if (cfg.contains("/render/noise"_json_pointer)) {
        b.noise_level = cfg.at("/render/noise"_json_pointer).get<double>();
        if (!(b.noise_level >= 0.0)) {
            throw ConfigError("noise must be non-negative");
        }
    }
    const AssetCatalog catalog = catalog_of(cfg);
    const RenderResult r =
        render_detailed(b, catalog, cfg.at("/render/density"_json_pointer).get<double>(), cfg.at("seed").get<std::uint64_t>());
    save_cloud(require_path(cfg, "output"), r.noisy);
    std::cout << "sampled " << r.sampled << " kept " << r.noisy.size() << " noise " << b.noise_level << "\n";
    return 0;
}

int perturb_cmd(const json &cfg) {
    const PointCloud in = load_cloud(require_path(cfg, "input"));
    const json &p = cfg.at("perturb");
    const std::string kind = p.at("kind").get<std::string>();
    const auto seed = cfg.at("seed").get<std::uint64_t>();
    PointCloud out;
    if (kind == "drop-random") {
        out = perturb_drop_random(in, p.at("block_edge").get<double>(), p.at("blocks").get<std::uint32_t>(), seed);
    } else if (kind == "drop-center") {
        out = perturb_drop_center(in, p.at("block_edge").get<double>());
    } else if (kind == "split") {
        out = perturb_split(in, p.at("gap").get<double>(), p.at("axis").get<int>());
    } else if (kind == "dropout") {
        const VoxelGrid g = voxelize(in, p.at("voxel_edge").get<double>(), std::numeric_limits<std::uint32_t>::max());
        const VoxelGrid kept = dropout_voxels(g, p.at("rate").get<double>(), seed);
        out = gather(in, kept);
        std::cout << "voxels " << g.size() << " kept " << kept.size() << "\n";
    } else {
        throw ConfigError("unknown perturbation '" + kind + "' (drop-random, drop-center, split, dropout)");
    }
    save_cloud(require_path(cfg, "output"), out);
    std::cout << "points " << in.size() << " -> " << out.size() << "\n";
    return 0;
}

int encode_cmd(const json &cfg) {
    const AssetCatalog catalog = catalog_of(cfg);
    const BuildingCodec codec(catalog.material_counts());
    std::vector<std::string> warnings;
    const TokenSequence tokens = codec.encode(load_building_json(require_path(cfg, "input")), &warnings);
    save_tokens(require_path(cfg, "output"), tokens);
    for (const std::string &w : warnings) {
        std::cout << "warning " << w << "\n";
    }
    std::cout << "tokens " << tokens.size() << "\n";
    return 0;
}

int decode_cmd(const json &cfg) {
    const AssetCatalog catalog = catalog_of(cfg);
    const BuildingCodec codec(catalog.material_counts());
    const BuildingAbstraction b = codec.decode(load_tokens(require_path(cfg, "input")));
    save_building_json(b, require_path(cfg, "output"));
    std::cout << "footprints " << b.footprints.size() << " facades " << b.facades.size() << " storeys "
              << b.storeys.size() << "\n";
    return 0;
}

int rollout_cmd(const json &cfg) {
    const AssetCatalog catalog = catalog_of(cfg);
    const BuildingCodec codec(catalog.material_counts());
    const DecodeConfig dc = decode_of(cfg);
    const json &r = cfg.at("rollout");
    const std::string kind = r.at("policy").get<std::string>();
    std::unique_ptr<Policy> policy;
    unsigned threads = cfg.at("threads").get<unsigned>();
    if (kind == "uniform") {
        policy = std::make_unique<UniformPolicy>();
    } else if (kind == "oracle") {
        const std::string path = r.at("oracle_tokens").get<std::string>();
        if (path.empty()) {
            throw ConfigError("--policy oracle needs --oracle-tokens");
        }
        policy = std::make_unique<OraclePolicy>(load_tokens(path));
    } else if (kind == "bridge") {
        const std::string command = cfg.at("/bridge/command"_json_pointer).get<std::string>();
        if (command.empty()) {
            throw ConfigError("--policy bridge needs --bridge-cmd");
        }
        policy = std::make_unique<BridgePolicy>(command, codec.vocabulary().size());
        threads = 1;
    } else {
        throw ConfigError("unknown policy '" + kind + "' (uniform, oracle, bridge)");
    }
    const auto count = r.at("count").get<std::size_t>();
    const std::string out_dir = require_path(cfg, "output");
    fs::create_directories(out_dir);
    const auto outcomes =
        rollout_many(*policy, r.at("conditioning").get<std::string>(), dc, codec, count, std::max(1U, threads));

    json summary = json::array();
    std::size_t complete = 0, incomplete = 0, failed = 0;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        char stem[32];
        std::snprintf(stem, sizeof stem, "rollout-%05zu", i);
        const fs::path base = fs::path(out_dir) / stem;
        json entry{{"index", i}, {"seed", dc.seed + i}};
        if (outcomes[i].result) {
            ++complete;
            save_building_json(outcomes[i].result->building, base.string() + ".json");
            save_tokens(base.string() + ".tokens.bin", outcomes[i].result->tokens);
            entry["status"] = "complete";
            entry["token_count"] = outcomes[i].result->tokens.size();
        } else if (outcomes[i].incomplete) {
            ++incomplete;
            save_tokens(base.string() + ".partial.bin", *outcomes[i].incomplete);
            entry["status"] = "incomplete";
            entry["token_count"] = outcomes[i].incomplete->size();
        } else {
            ++failed;
            entry["status"] = "error";
            entry["error"] = outcomes[i].error;
        }
        summary.push_back(entry);
    }
    save_text((fs::path(out_dir) / "rollouts.json").string(), summary.dump(2) + "\n");
    std::cout << "rollouts " << count << " complete " << complete << " incomplete " << incomplete << " errors "
              << failed << "\n";
    if (failed > 0) {
        for (const auto &o : outcomes) {
            if (!o.error.empty()) {
                throw PolicyError(o.error);
            }
        }
    }
    return 0;
}

fs::path relative_to(const fs::path &base, const std::string &p) {
    const fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

std::vector<EvaluationPair> load_pairs(const json &cfg, const AssetCatalog &catalog, const BuildingCodec &codec) {
    const json &e = cfg.at("eval");
    const std::string source = e.at("pairs").get<std::string>();
    const bool geometric = e.at("geometric").get<bool>();
    std::vector<EvaluationPair> pairs;
    if (source == "self") {
        const auto n = e.at("n").get<std::size_t>();
        const auto seed = cfg.at("seed").get<std::uint64_t>();
        const PriorConfig prior = prior_of(cfg);
        const double density = cfg.at("/render/density"_json_pointer).get<double>();
        for (std::size_t i = 0; i < n; ++i) {
            EvaluationPair p;
            p.truth = sample(seed + i, prior, catalog, codec);
            p.inferred = p.truth;
            p.sigma = p.truth.noise_level;
            if (geometric) {
                p.cloud = render(p.truth, catalog, density, mix_seed(seed + i, 0x52454e44));
            }
            pairs.push_back(std::move(p));
        }
        return pairs;
    }
    const fs::path base = fs::path(source).parent_path();
    for (const json &item : load_json_file(source)) {
        EvaluationPair p;
        p.inferred = load_building_json(relative_to(base, item.at("inferred").get<std::string>()).string());
        p.truth = load_building_json(relative_to(base, item.at("truth").get<std::string>()).string());
        p.sigma = item.value("sigma", p.truth.noise_level);
        if (geometric && item.contains("cloud")) {
            p.cloud = load_cloud(relative_to(base, item.at("cloud").get<std::string>()).string());
        }
        pairs.push_back(std::move(p));
    }
    return pairs;
}

int eval_cmd(const json &cfg) {
    const AssetCatalog catalog = catalog_of(cfg);
    const BuildingCodec codec(catalog.material_counts());
    const std::vector<EvaluationPair> pairs = load_pairs(cfg, catalog, codec);
    const CorpusEvaluation ev = evaluate_corpus(pairs, catalog);
    std::cout << "pairs " << ev.table.pairs << "\n" << format_table(ev.table);
    if (cfg.contains("output")) {
        const fs::path dir = cfg.at("output").get<std::string>();
        fs::create_directories(dir);
        save_text((dir / "table.csv").string(), table_csv(ev.table));
        if (!ev.curve.empty()) {
            save_text((dir / "curve.csv").string(), curve_csv(ev.curve));
        }
    }
    return 0;
}

int export_obj(const json &cfg) {
    const BuildingAbstraction b = load_building_json(require_path(cfg, "input"));
    const AssetCatalog catalog = catalog_of(cfg);
    std::ofstream out = open_output(require_path(cfg, "output"));
    write_building_obj(out, b, catalog);
    if (!out) {
        throw IoError("cannot write " + cfg.at("output").get<std::string>());
    }
    return 0;
}

int vocab_cmd(const json &cfg) {
    const AssetCatalog catalog = catalog_of(cfg);
    const BuildingCodec codec(catalog.material_counts());
    save_text(require_path(cfg, "output"), codec.manifest().dump(2) + "\n");
    std::cout << "vocab_size " << codec.vocabulary().size() << " vocabulary_hash " << hex64(codec.vocabulary_hash())
              << "\n";
    return 0;
}

void report_error(const std::string &kind, const std::string &message) {
    std::cerr << json{{"error", kind}, {"message", message}}.dump() << std::endl;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"procinv: procedural building inversion toolkit"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");
    std::string config_path;
    Flags flags;

    struct Command {
        CLI::App *app;
        std::function<int(const json &)> run;
    };
    std::vector<Command> commands;
    auto command = [&](const std::string &name, const std::string &help, std::function<int(const json &)> run) {
        CLI::App *sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "JSON config file; flags override it");
        flags.add<std::uint64_t>(sub, "--seed", "/seed", "random seed");
        flags.add<std::uint64_t>(sub, "--catalog-seed", "/catalog/seed", "asset catalog seed");
        flags.add<std::size_t>(sub, "--catalog-size", "/catalog/size", "asset catalog size (6..64)");
        flags.add<unsigned>(sub, "--threads", "/threads", "worker threads");
        commands.push_back({sub, std::move(run)});
        return sub;
    };

    CLI::App *gen = command("gen-dataset", "generate a sharded training dataset", gen_dataset);
    flags.add<std::string>(gen, "--out", "/output", "dataset directory");
    flags.add<std::uint64_t>(gen, "--n", "/dataset/n", "number of records");
    flags.add<double>(gen, "--density", "/render/density", "surface samples per square metre");
    flags.add<std::uint32_t>(gen, "--records-per-shard", "/dataset/records_per_shard", "records per shard file");
    flags.add<std::uint32_t>(gen, "--records-per-building", "/dataset/records_per_building",
                             "consecutive records sharing a building");
    flags.add<double>(gen, "--holdout", "/dataset/holdout_fraction", "holdout fraction");
    flags.toggle(gen, "--overwrite", "/dataset/overwrite", "replace a different dataset in the directory");

    CLI::App *sb = command("sample-building", "sample a building from the prior", sample_building);
    flags.add<std::string>(sb, "--out", "/output", "building JSON");
    flags.add<std::string>(sb, "--tokens-out", "/tokens_output", "also write its token sequence");

    CLI::App *rd = command("render", "render a building to a PLY point cloud", render_cmd);
    flags.add<std::string>(rd, "--building", "/input", "building JSON");
    flags.add<std::string>(rd, "--out", "/output", "PLY output");
    flags.add<double>(rd, "--density", "/render/density", "surface samples per square metre");
    flags.add<double>(rd, "--noise", "/render/noise", "override the building's noise level");

    CLI::App *pt = command("perturb", "perturb a PLY point cloud", perturb_cmd);
    flags.add<std::string>(pt, "--in", "/input", "PLY input");
    flags.add<std::string>(pt, "--out", "/output", "PLY output");
    flags.add<std::string>(pt, "--kind", "/perturb/kind", "drop-random, drop-center, split or dropout");
    flags.add<double>(pt, "--block-edge", "/perturb/block_edge", "dropped cube edge");
    flags.add<std::uint32_t>(pt, "--blocks", "/perturb/blocks", "number of random cubes");
    flags.add<double>(pt, "--gap", "/perturb/gap", "split gap");
    flags.add<int>(pt, "--axis", "/perturb/axis", "split axis (0, 1, 2)");
    flags.add<double>(pt, "--rate", "/perturb/rate", "voxel dropout rate");
    flags.add<double>(pt, "--voxel-edge", "/perturb/voxel_edge", "voxel edge for dropout");

    CLI::App *en = command("encode", "encode a building JSON to tokens (.json array or binary)", encode_cmd);
    flags.add<std::string>(en, "--building", "/input", "building JSON");
    flags.add<std::string>(en, "--out", "/output", "token output");

    CLI::App *de = command("decode", "decode tokens to a building JSON", decode_cmd);
    flags.add<std::string>(de, "--tokens", "/input", "token input (.json array or binary)");
    flags.add<std::string>(de, "--out", "/output", "building JSON");

    CLI::App *ro = command("rollout", "grammar-constrained rollouts against a policy", rollout_cmd);
    flags.add<std::string>(ro, "--policy", "/rollout/policy", "uniform, oracle or bridge");
    flags.add<std::string>(ro, "--bridge-cmd", "/bridge/command", "external policy command line");
    flags.add<std::string>(ro, "--oracle-tokens", "/rollout/oracle_tokens", "target tokens for --policy oracle");
    flags.add<std::string>(ro, "--conditioning", "/rollout/conditioning", "conditioning passed to the policy");
    flags.add<std::size_t>(ro, "--count", "/rollout/count", "number of rollouts (seeds seed..seed+count-1)");
    flags.add<std::string>(ro, "--mode", "/decode/mode", "greedy or sample");
    flags.add<double>(ro, "--temperature", "/decode/temperature", "sampling temperature");
    flags.add<std::size_t>(ro, "--max-length", "/decode/max_length", "token budget");
    flags.add<std::string>(ro, "--out", "/output", "output directory");

    CLI::App *ev = command("eval", "structural and geometric metrics over building pairs", eval_cmd);
    flags.add<std::string>(ev, "--pairs", "/eval/pairs", "'self' or a JSON list of {inferred, truth, cloud, sigma}");
    flags.add<std::size_t>(ev, "--n", "/eval/n", "buildings for --pairs self");
    flags.add<double>(ev, "--density", "/render/density", "surface samples per square metre");
    flags.toggle(ev, "--geometric", "/eval/geometric", "also compute point-to-mesh error");
    flags.add<std::string>(ev, "--out", "/output", "directory for table.csv and curve.csv");

    CLI::App *ob = command("export-obj", "export placed building geometry as OBJ", export_obj);
    flags.add<std::string>(ob, "--building", "/input", "building JSON");
    flags.add<std::string>(ob, "--out", "/output", "OBJ output");

    CLI::App *vo = command("vocab", "write the vocabulary manifest", vocab_cmd);
    flags.add<std::string>(vo, "--out", "/output", "manifest JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        report_error("usage", e.what());
        return 2;
    }

    try {
        json cfg = default_config();
        if (!config_path.empty()) {
            cfg = merge_config(cfg, load_json_file(config_path));
        }
        flags.apply(cfg);
        for (const Command &c : commands) {
            if (c.app->parsed()) {
                cfg["command"] = c.app->get_name();
                std::cout << "config " << cfg.dump() << "\n" << "config_hash " << config_hash(cfg) << "\n";
                return c.run(cfg);
            }
        }
        return 0;
    } catch (const Error &e) {
        report_error(e.kind(), e.what());
    } catch (const json::exception &e) {
        report_error("config", e.what());
    } catch (const fs::filesystem_error &e) {
        report_error("io", e.what());
    } catch (const std::exception &e) {
        report_error("internal", e.what());
    }
    return 1;
}
