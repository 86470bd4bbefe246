#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "moce/accountability.hpp"
#include "moce/cli.hpp"
#include "moce/errors.hpp"

#ifndef MOCE_VERSION
#define MOCE_VERSION "unknown"
#endif

namespace moce::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kManifestVersion = 1;
constexpr double kInfluenceTolerance = 1e-9;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + path.string());
    out << content;
    if (!out) throw InputError("write failed: " + path.string());
}

std::string fixed(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10f", v);
    return buf;
}

/// Exclusive claim on an output directory for the lifetime of a command.
class OutDirLock {
public:
    explicit OutDirLock(const fs::path& dir) : path_(dir / ".lock") {
        fs::create_directories(dir);
        const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd < 0) {
            throw UsageError("output directory " + dir.string() + " is in use by another run (" + path_.string() +
                             " exists)");
        }
        const std::string pid = std::to_string(::getpid()) + "\n";
        [[maybe_unused]] const auto written = ::write(fd, pid.data(), pid.size());
        ::close(fd);
    }
    ~OutDirLock() {
        std::error_code ec;
        fs::remove(path_, ec);
    }
    OutDirLock(const OutDirLock&) = delete;
    OutDirLock& operator=(const OutDirLock&) = delete;

private:
    fs::path path_;
};

struct Manifest {
    std::string command;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> config;
    std::vector<std::pair<std::string, std::string>> inputs;  // path, checksum
    std::vector<std::string> outputs;
    json extra = json::object();

    void input(const fs::path& p) { inputs.emplace_back(p.string(), model::file_checksum(p.string())); }

    void write(const fs::path& dir) const {
        json j;
        j["manifest_version"] = kManifestVersion;
        j["command"] = command;
        j["code_version"] = MOCE_VERSION;
        j["seed"] = seed;
        j["config"] = config;
        json in = json::array();
        for (const auto& [path, sum] : inputs) in.push_back({{"path", path}, {"fnv1a64", sum}});
        j["inputs"] = in;
        j["outputs"] = outputs;
        if (!extra.empty()) j["details"] = extra;
        write_file(dir / "manifest.json", j.dump(2) + "\n");
    }
};

/// Options shared by every subcommand: the config file, `--set` overrides and
/// one flag per config key.
struct ConfigOptions {
    std::string config_path;
    std::vector<std::string> sets;
    std::map<std::string, std::string> flag_values;
    std::vector<std::pair<std::string, CLI::Option*>> flags;

    void attach(CLI::App* app) {
        app->add_option("--config", config_path, "Flat key = value config file");
        app->add_option("--set", sets, "Config override key=value (repeatable)");
        for (const auto& key : config_keys()) {
            std::string flag = key.name;
            std::replace(flag.begin(), flag.end(), '_', '-');
            auto* opt = app->add_option("--" + flag, flag_values[key.name], key.description)->group("Config keys");
            flags.emplace_back(key.name, opt);
        }
    }

    /// File values, then --set, then dedicated flags; later sources win.
    RunConfig resolve(Manifest& manifest) const {
        std::map<std::string, std::string> values;
        if (!config_path.empty()) {
            values = parse_config_text(read_file(config_path), config_path);
            manifest.input(config_path);
        }
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + s + "'");
            const auto parsed = parse_config_text(s, "--set");
            for (const auto& [k, v] : parsed) values[k] = v;
        }
        for (const auto& [name, opt] : flags) {
            if (opt->count() > 0) values[name] = flag_values.at(name);
        }
        RunConfig config = resolve_config(values);
        manifest.config = snapshot(config);
        return config;
    }
};

// ---------------------------------------------------------------------------
// Checkpoint metadata
// ---------------------------------------------------------------------------

struct RunState {
    model::MoceModel model;
    data::ConceptSchema schema;
    data::Vocabulary vocab;
    metacog::Thresholds thresholds;
};

std::string make_metadata(const data::ConceptSchema& schema, const data::Vocabulary& vocab,
                          const metacog::Thresholds& thresholds, const std::map<std::string, std::string>& config) {
    json j;
    j["schema"] = json::parse(schema.to_json());
    j["vocabulary"] = vocab.words();
    j["thresholds"] = json::parse(thresholds.to_json());
    j["config"] = config;
    return j.dump();
}

RunState load_run(const std::string& checkpoint) {
    auto loaded = model::load_checkpoint(checkpoint);
    json meta;
    try {
        meta = json::parse(loaded.metadata);
        return RunState{std::move(loaded.model), data::ConceptSchema::from_json(meta.at("schema").dump()),
                        data::Vocabulary::from_words(meta.at("vocabulary").get<std::vector<std::string>>()),
                        metacog::Thresholds::from_json(meta.at("thresholds").dump())};
    } catch (const json::exception& e) {
        throw SchemaError(checkpoint + ": checkpoint metadata is incomplete: " + e.what());
    }
}

data::ConceptSchema dataset_schema(const fs::path& data_dir, const RunConfig& config) {
    const fs::path sidecar = data_dir / "schema.json";
    if (fs::exists(sidecar)) return data::ConceptSchema::load(sidecar.string());
    return config.schema();
}

data::DatasetSplit load_data(const fs::path& data_dir, const data::ConceptSchema& schema, Manifest& manifest) {
    if (!fs::is_directory(data_dir)) throw InputError("data directory not found: " + data_dir.string());
    auto split = data::load_dataset(data_dir.string(), schema);
    for (const char* name : {"train.csv", "dev.csv", "test.csv"}) manifest.input(data_dir / name);
    return split;
}

const std::vector<data::Example>& pick_split(const data::DatasetSplit& split, const std::string& name) {
    if (name == "train") return split.train;
    if (name == "dev") return split.dev;
    return split.test;
}

model::ModelConfig model_config(const RunConfig& config, const data::ConceptSchema& schema, std::size_t vocab_size) {
    model::ModelConfig mc = config.model;
    mc.vocab_size = vocab_size;
    mc.concept_arities = schema.arities();
    mc.task_kind = schema.task.kind;
    if (schema.task.kind == model::TaskKind::Classification) mc.num_classes = schema.num_classes();
    mc.validate();
    return mc;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

int cmd_gen_data(const ConfigOptions& options, const std::string& out) {
    Manifest manifest;
    manifest.command = "gen-data";
    const RunConfig config = options.resolve(manifest);
    if (!config.schema_file.empty()) manifest.input(config.schema_file);
    manifest.seed = config.synthetic.seed;
    const auto schema = config.schema();
    const auto dataset = data::generate_synthetic(schema, config.synthetic);

    OutDirLock lock(out);
    data::save_dataset(out, dataset.split);
    write_file(fs::path(out) / "generator.json", dataset.manifest);
    manifest.outputs = {"train.csv", "dev.csv", "test.csv", "schema.json", "generator.json"};
    manifest.write(out);
    std::cout << "wrote " << dataset.split.train.size() << "/" << dataset.split.dev.size() << "/"
              << dataset.split.test.size() << " examples to " << out << "\n";
    return 0;
}

int cmd_train(const ConfigOptions& options, const std::string& data_dir, const std::string& out) {
    Manifest manifest;
    manifest.command = "train";
    const RunConfig config = options.resolve(manifest);
    manifest.seed = config.train.seed;
    const auto schema = dataset_schema(data_dir, config);
    auto split = load_data(data_dir, schema, manifest);
    const auto vocab = data::Vocabulary::build(split.train);
    data::assign_tokens(split, vocab, config.model.max_seq_len);

    OutDirLock lock(out);
    auto model = model::MoceModel::create(model_config(config, schema, vocab.size()), config.train.seed);
    const auto report = training::train(model, split, config.train);
    const auto thresholds = metacog::fit_on_split(model, split.dev, config.statistic);

    const fs::path dir(out);
    model::save_checkpoint((dir / "model.ckpt").string(), model,
                           make_metadata(schema, vocab, thresholds, manifest.config));
    write_file(dir / "train_report.csv", report.to_csv());
    write_file(dir / "train_summary.json", report.summary_json());
    write_file(dir / "thresholds.json", thresholds.to_json());
    manifest.outputs = {"model.ckpt", "train_report.csv", "train_summary.json", "thresholds.json"};
    manifest.extra["checkpoint_fnv1a64"] = model::file_checksum((dir / "model.ckpt").string());
    manifest.extra["vocabulary_size"] = vocab.size();
    manifest.write(dir);

    const auto& best = report.epochs.at(report.selected_epoch - 1);
    std::cout << "trained " << report.epochs.size() << " epochs; selected epoch " << report.selected_epoch << " ("
              << report.selection_metric << " " << fixed(best.dev_task_metric) << ", dev concept F1 "
              << fixed(best.dev_concept_f1) << ")\n";
    return 0;
}

std::string metrics_csv(const training::Metrics& pre, const training::Metrics& post,
                        const data::ConceptSchema& schema) {
    std::string out = "metric,pre,post,improvement\n";
    auto row = [&](const std::string& name, double a, double b, bool higher_is_better) {
        out += name + "," + fixed(a) + "," + fixed(b) + "," + fixed(higher_is_better ? b - a : a - b) + "\n";
    };
    if (!pre.concept_f1.empty()) {
        row("concept_f1_mean", pre.concept_f1_mean, post.concept_f1_mean, true);
        for (std::size_t k = 0; k < pre.concept_f1.size(); ++k) {
            row("concept_f1:" + schema.concepts[k].name, pre.concept_f1[k], post.concept_f1[k], true);
        }
    }
    if (pre.task_f1) row("task_f1", *pre.task_f1, *post.task_f1, true);
    if (pre.task_rmse) row("task_rmse", *pre.task_rmse, *post.task_rmse, false);
    return out;
}

int cmd_eval(const ConfigOptions& options, const std::string& checkpoint, const std::string& data_dir,
             const std::string& mode_name, const std::string& out) {
    Manifest manifest;
    manifest.command = "eval";
    const RunConfig config = options.resolve(manifest);
    const auto mode = metacog::mode_from_string(mode_name);
    const std::string hash_before = model::file_checksum(checkpoint);
    manifest.inputs.emplace_back(checkpoint, hash_before);
    const RunState run = load_run(checkpoint);
    manifest.seed = config.train.seed;

    auto split = load_data(data_dir, run.schema, manifest);
    data::assign_tokens(split, run.vocab, run.model.config().max_seq_len);
    const auto& examples = pick_split(split, config.split);
    if (examples.empty()) throw InputError("split '" + config.split + "' of " + data_dir + " is empty");

    OutDirLock lock(out);
    const auto params_before = training::snapshot(run.model);
    const auto& mc = run.model.config();
    const metacog::InterventionPolicy policy{mode, mc.experts_active, mc.experts_intervention, config.scope};
    const auto ev = metacog::evaluate_mode(run.model, examples, run.thresholds, policy);
    if (training::snapshot(run.model) != params_before) {
        throw ContractError("evaluation modified model parameters");
    }
    const std::string hash_after = model::file_checksum(checkpoint);
    if (hash_after != hash_before) throw ChecksumError("checkpoint changed during evaluation: " + checkpoint);

    const fs::path dir(out);
    const std::string metrics = metrics_csv(ev.pre, ev.post, run.schema);
    write_file(dir / "metrics.csv", metrics);
    write_file(dir / "scrutiny.csv", ev.scrutiny.to_csv(run.schema));
    write_file(dir / "entropy_values.csv", metacog::entropy_values_csv(ev.scrutiny.records, run.schema));
    std::size_t reallocated = 0;
    for (const auto& row : ev.intervention.reallocated) reallocated += std::count(row.begin(), row.end(), true);
    json summary;
    summary["mode"] = metacog::to_string(mode);
    summary["split"] = config.split;
    summary["examples"] = examples.size();
    summary["flagged_concepts"] = ev.scrutiny.flagged;
    summary["reallocated_concepts"] = reallocated;
    summary["rerun_examples"] = ev.intervention.rerun_examples;
    summary["experts_active"] = mc.experts_active;
    summary["experts_intervention"] = mode == metacog::InterventionMode::Max ? mc.num_experts : mc.experts_intervention;
    write_file(dir / "summary.json", summary.dump(2) + "\n");
    manifest.outputs = {"metrics.csv", "scrutiny.csv", "entropy_values.csv", "summary.json"};
    manifest.extra["checkpoint_fnv1a64_before"] = hash_before;
    manifest.extra["checkpoint_fnv1a64_after"] = hash_after;
    manifest.write(dir);
    std::cout << metrics;
    return 0;
}

void check_influence(const account::PathwayTrace& p) {
    double sum = p.head_bias;
    for (const auto& c : p.concepts) sum += c.influence;
    const double logit = p.task_logits.at(p.influence_class);
    if (!(std::abs(sum - logit) <= kInfluenceTolerance)) {
        throw ContractError("influence decomposition of example " + std::to_string(p.example_id) + " is off by " +
                            std::to_string(sum - logit));
    }
}

const data::Example& find_example(const data::DatasetSplit& split, std::size_t id) {
    for (const auto* part : {&split.train, &split.dev, &split.test}) {
        for (const auto& ex : *part) {
            if (ex.id == id) return ex;
        }
    }
    const std::size_t total = split.train.size() + split.dev.size() + split.test.size();
    throw InputError("example id " + std::to_string(id) + " not found; valid ids are 0.." +
                     std::to_string(total == 0 ? 0 : total - 1));
}

int cmd_explain(const ConfigOptions& options, const std::string& checkpoint, const std::string& data_dir,
                std::size_t example_id, const std::string& mode_name, const std::string& format,
                const std::string& out) {
    if (format != "json" && format != "text") throw UsageError("unknown format '" + format + "'");
    Manifest manifest;
    manifest.command = "explain";
    const RunConfig config = options.resolve(manifest);
    const auto mode = metacog::mode_from_string(mode_name);
    manifest.input(checkpoint);
    const RunState run = load_run(checkpoint);
    auto split = load_data(data_dir, run.schema, manifest);
    data::assign_tokens(split, run.vocab, run.model.config().max_seq_len);
    const data::Example& example = find_example(split, example_id);

    const auto& mc = run.model.config();
    const std::vector<data::Example> one{example};
    const auto pre = training::predict(run.model, one, run.model.uniform_budgets(mc.experts_active));
    const auto head = account::LinearHead::from_model(run.model);
    const auto bank = data::PhraseBank::for_schema(run.schema);
    const auto pre_path = account::backtrack(example, pre.examples[0], head, run.schema, "pre", &bank);
    check_influence(pre_path);

    std::vector<std::pair<std::string, std::string>> documents;  // file stem, content
    documents.emplace_back("pathway_pre", account::emit_report(pre_path, format));
    if (mode != metacog::InterventionMode::Null) {
        const metacog::InterventionPolicy policy{mode, mc.experts_active, mc.experts_intervention, config.scope};
        std::vector<std::vector<bool>> flags;
        if (mode == metacog::InterventionMode::Metacognitive) {
            flags = metacog::flag(metacog::entropy_records(one, pre, mc, run.thresholds.statistic), run.thresholds)
                        .flags;
        }
        const auto result = metacog::intervene(run.model, one, pre.examples, flags, policy);
        const auto post_path = account::backtrack(example, result.post[0], head, run.schema, "post", &bank);
        check_influence(post_path);
        documents.emplace_back("pathway_post", account::emit_report(post_path, format));
        documents.emplace_back("diff", account::emit_report(account::diff_interventions(pre_path, post_path), format));
    }
    if (config.influence_from_logits) {
        const auto report = account::concept_influence(pre.examples[0].concept_logits, head, mc.concept_arities,
                                                       pre_path.influence_class, true);
        json j{{"kind", "influence"},           {"source", "logits"},
               {"task_class", report.task_class}, {"influence", report.influence},
               {"bias", report.bias},             {"per_class", report.per_class}};
        documents.emplace_back("influence_logits", j.dump(2) + "\n");
    }

    if (!out.empty()) {
        OutDirLock lock(out);
        const std::string ext = format == "json" ? ".json" : ".txt";
        for (const auto& [stem, content] : documents) {
            write_file(fs::path(out) / (stem + ext), content);
            manifest.outputs.push_back(stem + ext);
        }
        manifest.write(out);
    }
    for (const auto& [stem, content] : documents) {
        if (format == "text") std::cout << "== " << stem << "\n";
        std::cout << content;
    }
    return 0;
}

std::vector<std::size_t> parse_budgets(const std::string& text, std::size_t max_budget) {
    std::vector<std::size_t> out;
    if (text.empty()) {
        for (std::size_t b = 1; b <= max_budget; ++b) out.push_back(b);
        return out;
    }
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t pos = 0;
        unsigned long v = 0;
        try {
            v = std::stoul(item, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos == 0 || pos != item.size()) throw UsageError("--budgets: not an integer: '" + item + "'");
        if (v < 1 || v > max_budget) {
            throw UsageError("--budgets: budget " + item + " outside [1, " + std::to_string(max_budget) + "]");
        }
        out.push_back(v);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

int cmd_flops(const ConfigOptions& options, const std::string& budgets_text, const std::string& out) {
    Manifest manifest;
    manifest.command = "flops";
    const RunConfig config = options.resolve(manifest);
    const auto schema = config.schema();
    const auto mc = model_config(config, schema, std::max<std::size_t>(config.model.vocab_size, 2));
    const auto budgets = parse_budgets(budgets_text, mc.num_experts);

    std::string csv = "budget,attention,routers,experts,projector,head,total\n";
    for (std::size_t b : budgets) {
        const auto f = model::count_flops(mc, std::vector<std::size_t>(mc.num_concepts(), b));
        char buf[256];
        std::snprintf(buf, sizeof buf, "%zu,%.1f,%.1f,%.1f,%.1f,%.1f,%.1f\n", b, f.attention, f.routers, f.experts,
                      f.projector, f.head, f.total());
        csv += buf;
    }
    if (!out.empty()) {
        OutDirLock lock(out);
        write_file(fs::path(out) / "flops.csv", csv);
        manifest.outputs = {"flops.csv"};
        manifest.write(out);
    }
    std::cout << csv;
    return 0;
}

}  // namespace

std::string config_reference() {
    std::string out = "# moce command reference\n\n";
    out += "Generated by `moce config-reference`. Every command accepts `--config FILE` (flat `key = value` lines, "
           "`#` comments), `--set key=value` and one `--key-name` flag per config key. Flags win over `--set`, "
           "which wins over the file.\n\n";
    out += "Exit codes: 0 success, 1 usage or config error, 2 runtime or numeric error.\n\n";
    out += "## Commands\n\n";
    out += "| command | arguments | outputs |\n|---|---|---|\n";
    out += "| `gen-data` | `--out DIR` | train/dev/test.csv, schema.json, generator.json, manifest.json |\n";
    out += "| `train` | `--data DIR --out DIR` | model.ckpt, train_report.csv, train_summary.json, thresholds.json, "
           "manifest.json |\n";
    out += "| `eval` | `--checkpoint FILE --data DIR --mode null\\|metacog\\|oracle\\|max --out DIR` | metrics.csv, "
           "scrutiny.csv, entropy_values.csv, summary.json, manifest.json |\n";
    out += "| `explain` | `--checkpoint FILE --data DIR --example-id N [--mode M] [--format json\\|text] [--out DIR]` "
           "| pathway_pre, pathway_post, diff (mode other than null) |\n";
    out += "| `flops` | `[--budgets 1,2,...] [--out DIR]` | flops.csv (budget, per-part counts, total) |\n";
    out += "| `config-reference` | `[--out FILE]` | this page |\n\n";
    out += "`eval` and `explain` take T, T', the vocabulary, the schema and the scrutiny thresholds from the "
           "checkpoint; thresholds are fitted on the dev split at training time.\n\n";
    out += "## Config keys\n";
    std::string section;
    for (const auto& key : config_keys()) {
        if (key.section != section) {
            section = key.section;
            out += "\n### " + section + "\n\n| key | default | description |\n|---|---|---|\n";
        }
        out += "| `" + key.name + "` | `" + (key.default_value.empty() ? "\"\"" : key.default_value) + "` | " +
               key.description + " |\n";
    }
    out += "\n## Manifest\n\n`manifest.json` (manifest_version " + std::to_string(kManifestVersion) +
           ") is written next to the outputs of every command that has an output directory: command, code_version, "
           "seed, the full resolved config, inputs with FNV-1a 64 checksums, output file names and command details.\n";
    return out;
}

int run(int argc, char** argv) {
    CLI::App app{"Concept-expert transformer with metacognitive intervention"};
    app.require_subcommand(1);

    ConfigOptions gen_opts, train_opts, eval_opts, explain_opts, flops_opts, ref_opts;
    std::string out, data_dir, checkpoint, mode = "null", format = "text", budgets;
    std::size_t example_id = 0;

    auto* gen = app.add_subcommand("gen-data", "Generate a planted-concept dataset");
    gen_opts.attach(gen);
    gen->add_option("--out", out, "Output directory")->required();

    auto* train = app.add_subcommand("train", "Train a model and fit scrutiny thresholds on dev");
    train_opts.attach(train);
    train->add_option("--data", data_dir, "Dataset directory")->required();
    train->add_option("--out", out, "Output directory")->required();

    auto* eval = app.add_subcommand("eval", "Evaluate with an intervention mode");
    eval_opts.attach(eval);
    eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    eval->add_option("--data", data_dir, "Dataset directory")->required();
    eval->add_option("--mode", mode, "null, metacog, oracle or max")->required();
    eval->add_option("--out", out, "Output directory")->required();

    auto* explain = app.add_subcommand("explain", "Backtrack one prediction");
    explain_opts.attach(explain);
    explain->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    explain->add_option("--data", data_dir, "Dataset directory")->required();
    explain->add_option("--example-id", example_id, "Example id")->required();
    explain->add_option("--mode", mode, "null, metacog, oracle or max");
    explain->add_option("--format", format, "json or text");
    explain->add_option("--out", out, "Output directory");

    auto* flops = app.add_subcommand("flops", "FLOPs per token against the expert budget");
    flops_opts.attach(flops);
    flops->add_option("--budgets", budgets, "Comma-separated budgets (default 1..M)");
    flops->add_option("--out", out, "Output directory");

    auto* ref = app.add_subcommand("config-reference", "Print the flag and config reference");
    ref_opts.attach(ref);
    ref->add_option("--out", out, "Write to this file instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(gen_opts, out);
        if (train->parsed()) return cmd_train(train_opts, data_dir, out);
        if (eval->parsed()) return cmd_eval(eval_opts, checkpoint, data_dir, mode, out);
        if (explain->parsed()) return cmd_explain(explain_opts, checkpoint, data_dir, example_id, mode, format, out);
        if (flops->parsed()) return cmd_flops(flops_opts, budgets, out);
        if (ref->parsed()) {
            if (out.empty()) {
                std::cout << config_reference();
            } else {
                write_file(out, config_reference());
            }
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "moce: error: " << e.what() << "\n";
        return e.is_usage_error() ? 1 : 2;
    } catch (const std::exception& e) {
        std::cerr << "moce: error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}

}  // namespace moce::cli
