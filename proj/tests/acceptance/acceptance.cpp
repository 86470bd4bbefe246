// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <unistd.h>

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "../common/small_run.hpp"
#include "moce/accountability.hpp"
#include "moce/cli.hpp"
#include "moce/gradcheck.hpp"
#include "moce/metacognition.hpp"
#include "moce/ops.hpp"

namespace fs = std::filesystem;
using namespace moce;
using model::Budgets;
using num::Tensor;

namespace {

// Tolerances and limits.
constexpr double kGradTolerance = 1e-4;
constexpr double kGradStep = 1e-5;
constexpr double kKeyBiasAnalytic = 1e-12;
constexpr double kKeyBiasNumeric = 1e-8;
constexpr double kGradSeconds = 30.0;
constexpr std::size_t kRouterStates = 1000;
constexpr double kRouterTolerance = 1e-12;
constexpr double kUniformEntropyTolerance = 1e-9;
constexpr double kPermutationTolerance = 1e-12;
constexpr std::size_t kShuffles = 100;
constexpr std::size_t kClusterInstances = 200;
constexpr std::size_t kClusterMaxSize = 12;
constexpr double kInertiaTolerance = 1e-12;
constexpr double kMetacogMargin = 0.005;  // 0.5 macro-F1 points
constexpr double kSuiteSeconds = 1800.0;
constexpr double kFlopsR2 = 0.999;
constexpr double kInfluenceTolerance = 1e-9;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<double> vals(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

model::ModelConfig small_config(std::size_t vocab, std::size_t concepts, std::size_t experts) {
    model::ModelConfig c;
    c.vocab_size = vocab;
    c.max_seq_len = 12;
    c.embed_dim = 8;
    c.num_heads = 2;
    c.num_experts = experts;
    c.experts_active = 1;
    c.experts_intervention = experts;
    c.concept_arities.assign(concepts, 3);
    c.num_classes = 3;
    c.router_hidden_dim = 6;
    c.expert_hidden_dim = 8;
    return c;
}

model::TokenSeq random_tokens(std::mt19937_64& rng, std::size_t vocab, std::size_t max_len) {
    std::uniform_int_distribution<std::size_t> len(1, max_len), tok(0, vocab - 1);
    model::TokenSeq seq(len(rng));
    for (auto& t : seq) t = tok(rng);
    return seq;
}

// ---------------------------------------------------------------------------
// CLI plumbing
// ---------------------------------------------------------------------------

struct Invocation {
    int code = 0;
    std::string out;
};

Invocation moce_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "moce");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    std::ostringstream captured;
    auto* old = std::cout.rdbuf(captured.rdbuf());
    Invocation r;
    r.code = cli::run(static_cast<int>(argv.size()), argv.data());
    std::cout.rdbuf(old);
    r.out = captured.str();
    return r;
}

struct SmallRun {
    fs::path data, run, checkpoint;
    bool ok = false;
};

SmallRun small_run(const fs::path& root) {
    SmallRun s{root / "data", root / "run", root / "run" / "model.ckpt", false};
    fs::remove_all(root);
    fs::create_directories(root);
    s.ok = moce_cli(test::with({"gen-data", "--out", s.data.string()}, test::kSmallData)).code == 0 &&
           moce_cli(test::with({"train", "--data", s.data.string(), "--out", s.run.string()}, test::kSmallModel))
                   .code == 0;
    return s;
}

// ---------------------------------------------------------------------------
// 1. Gradients
// ---------------------------------------------------------------------------

Outcome gradients() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0, key_analytic = 0.0, key_numeric = 0.0;
    std::string where;
    for (bool pathways : {true, false}) {
        auto c = small_config(20, 2, 4);
        c.experts_active = 2;
        c.concept_pathways = pathways;
        const auto m = model::MoceModel::create(c, 21);
        std::mt19937_64 rng(22);
        std::vector<model::TokenSeq> batch;
        for (int i = 0; i < 4; ++i) batch.push_back(random_tokens(rng, c.vocab_size, c.max_seq_len));
        const std::vector<std::vector<std::size_t>> concepts{{0, 1}, {2, 2}, {1, 0}, {0, 2}};
        const std::vector<double> labels{0, 2, 1, 1};
        std::vector<Tensor> params, key_biases;
        std::vector<std::string> names;
        for (const auto& p : m.parameters()) {
            if (p.name.ends_with(".key.bias")) {
                key_biases.push_back(p.tensor);
            } else {
                params.push_back(p.tensor);
                names.push_back(p.name);
            }
        }
        const auto objective = [&](num::Tape* tape) {
            const auto out = m.forward(batch, m.uniform_budgets(2), tape, {false});
            const auto terms = training::joint_loss(out, c, concepts, labels, 5.0, tape);
            return num::add(terms.total, num::scale(training::balance_loss(out.router_probs, tape), 0.01, tape),
                            tape);
        };
        const auto r = num::finite_diff_check(objective, params, kGradStep);
        if (r.max_relative_error >= worst) {
            worst = r.max_relative_error;
            where = names[r.worst_param];
        }
        const auto z = num::finite_diff_check(objective, key_biases, kGradStep);
        key_analytic = std::max(key_analytic, std::abs(z.worst_analytic));
        key_numeric = std::max(key_numeric, std::abs(z.worst_numeric));
    }
    const double secs = seconds_since(t0);
    return {worst <= kGradTolerance && key_analytic <= kKeyBiasAnalytic && key_numeric <= kKeyBiasNumeric &&
                secs < kGradSeconds,
            fmt("max rel err %.2e (tol %.0e, at %s); key-bias grad %.1e/%.1e; %.1f s (limit %.0f s)", worst,
                kGradTolerance, where.c_str(), key_analytic, key_numeric, secs, kGradSeconds)};
}

// ---------------------------------------------------------------------------
// 2. Routing
// ---------------------------------------------------------------------------

Outcome routing() {
    std::mt19937_64 rng(2);
    std::vector<model::MoceModel> models;
    for (std::size_t i = 0; i < 20; ++i) {
        models.push_back(model::MoceModel::create(small_config(20, 1 + i % 4, 2 + i % 7), 100 + i));
    }
    std::size_t violations = 0;
    double dense_err = 0.0;
    std::uniform_real_distribution<double> unif(-4.0, 4.0);
    for (std::size_t s = 0; s < kRouterStates; ++s) {
        const auto& m = models[s % models.size()];
        const auto& c = m.config();
        const std::size_t M = c.num_experts;
        const auto tokens = random_tokens(rng, c.vocab_size, c.max_seq_len);
        std::vector<std::size_t> pos(tokens.size());
        std::iota(pos.begin(), pos.end(), std::size_t{0});
        const Tensor x = num::add(num::gather_rows(m.token_embedding, tokens), num::gather_rows(m.position_embedding, pos));
        const auto& layer = m.moce_layers[0];
        const Tensor attended = layer.attention.forward(x, nullptr);
        const Tensor normed = layer.expert_norm.forward(attended, nullptr);
        const Tensor pooled = num::mean_rows(normed);

        // Router logits of the model plus a tie-heavy synthetic row.
        std::vector<Tensor> rows;
        for (const auto& r : layer.routers) rows.push_back(r.logits(pooled, nullptr));
        std::vector<double> tied(M);
        for (auto& v : tied) v = std::round(unif(rng));
        rows.push_back(Tensor::matrix(1, M, tied));
        for (const auto& logits : rows) {
            std::vector<std::size_t> previous;
            for (std::size_t t = 1; t <= M; ++t) {
                const auto r = model::route(logits, t, false, nullptr);
                const auto g = vals(r.gates);
                const auto nz = std::count_if(g.begin(), g.end(), [](double v) { return v != 0.0; });
                const double total = std::accumulate(g.begin(), g.end(), 0.0);
                if (static_cast<std::size_t>(nz) != t || r.selected.size() != t || total > 1.0 + kRouterTolerance) {
                    ++violations;
                }
                const std::set<std::size_t> now(r.selected.begin(), r.selected.end());
                for (std::size_t p : previous) violations += now.count(p) == 0;
                previous = r.selected;
                if (t == M) {
                    const auto p = vals(r.probs);
                    for (std::size_t i = 0; i < M; ++i) dense_err = std::max(dense_err, std::abs(g[i] - p[i]));
                }
            }
        }

        // Whole layer at T = M against the dense mixture.
        const auto out = model::moce_layer_forward(layer, x, Budgets(c.num_concepts(), M), false, nullptr);
        std::vector<double> expect = vals(attended);
        for (std::size_t e = 0; e < M; ++e) {
            const auto y = vals(layer.experts[e].forward(normed, nullptr));
            double w = 0.0;
            for (const auto& r : layer.routers) w += vals(num::softmax(r.logits(pooled, nullptr)))[e];
            for (std::size_t i = 0; i < y.size(); ++i) expect[i] += w * y[i];
        }
        const auto got = vals(out.output);
        for (std::size_t i = 0; i < got.size(); ++i) dense_err = std::max(dense_err, std::abs(got[i] - expect[i]));
    }
    return {violations == 0 && dense_err <= kRouterTolerance,
            fmt("%zu states, %zu violations of |S|=T / sum<=1 / monotone sets; T=M dense error %.1e (tol %.0e)",
                kRouterStates, violations, dense_err, kRouterTolerance)};
}

// ---------------------------------------------------------------------------
// 3. Entropy
// ---------------------------------------------------------------------------

Outcome entropy() {
    std::mt19937_64 rng(3);
    std::size_t bound_violations = 0;
    for (std::size_t i = 0; i < 1000; ++i) {
        const std::size_t n = 2 + i % 9;
        const double spread = std::pow(10.0, static_cast<double>(i % 5) - 2.0);
        std::normal_distribution<double> g(0.0, spread);
        std::vector<double> logits(n);
        for (auto& v : logits) v = g(rng);
        const double h = metacog::shannon_entropy(logits);
        if (!(h >= 0.0 && h <= std::log(static_cast<double>(n)) + 1e-12)) ++bound_violations;
    }
    double uniform_err = 0.0;
    for (double level : {0.0, -3.5, 7.25}) {
        const std::vector<double> u(4, level);
        uniform_err = std::max(uniform_err, std::abs(metacog::shannon_entropy(u) - std::log(4.0)));
    }
    std::normal_distribution<double> g(0.0, 2.0);
    std::vector<double> logits(7);
    for (auto& v : logits) v = g(rng);
    const double ref = metacog::shannon_entropy(logits);
    double perm_err = 0.0;
    for (std::size_t i = 0; i < kShuffles; ++i) {
        std::shuffle(logits.begin(), logits.end(), rng);
        perm_err = std::max(perm_err, std::abs(metacog::shannon_entropy(logits) - ref));
    }
    return {bound_violations == 0 && uniform_err <= kUniformEntropyTolerance && perm_err <= kPermutationTolerance,
            fmt("bounds violated %zu/1000; uniform-4 |H-ln4| %.1e (tol %.0e); %zu shuffles max diff %.1e (tol %.0e)",
                bound_violations, uniform_err, kUniformEntropyTolerance, kShuffles, perm_err, kPermutationTolerance)};
}

// ---------------------------------------------------------------------------
// 4. Two-means thresholds
// ---------------------------------------------------------------------------

double best_partition_sse(const std::vector<double>& v) {
    const std::size_t n = v.size();
    double best = std::numeric_limits<double>::infinity();
    for (std::uint32_t mask = 1; mask + 1 < (1u << n); ++mask) {
        double s[2] = {0, 0}, c[2] = {0, 0};
        for (std::size_t i = 0; i < n; ++i) {
            const int side = (mask >> i) & 1u;
            s[side] += v[i];
            c[side] += 1;
        }
        double sse = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const int side = (mask >> i) & 1u;
            const double d = v[i] - s[side] / c[side];
            sse += d * d;
        }
        best = std::min(best, sse);
    }
    return best;
}

Outcome clustering() {
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<std::size_t> size(2, kClusterMaxSize);
    std::uniform_real_distribution<double> unif(0.0, 1.5);
    std::size_t bad_inertia = 0, bad_threshold = 0, done = 0;
    double worst = 0.0;
    while (done < kClusterInstances) {
        std::vector<double> v(size(rng));
        const bool quantised = done % 4 == 0;
        for (auto& x : v) x = quantised ? std::round(unif(rng) * 4.0) / 4.0 : unif(rng);
        if (std::all_of(v.begin(), v.end(), [&](double x) { return x == v[0]; })) continue;
        std::vector<metacog::EntropyRecord> records;
        for (std::size_t i = 0; i < v.size(); ++i) records.push_back({i, {v[i]}, {v[i]}});
        const auto th = metacog::fit_thresholds(records, 1, metacog::Statistic::Entropy);
        const auto& fit = *th.concepts[0].routing;
        const double oracle = best_partition_sse(v);
        const double err = std::abs(fit.inertia - oracle) / std::max(1.0, oracle);
        worst = std::max(worst, err);
        bad_inertia += err > kInertiaTolerance;
        bad_threshold += !(fit.low_centroid < fit.threshold && fit.threshold < fit.high_centroid);
        ++done;
    }
    return {bad_inertia == 0 && bad_threshold == 0,
            fmt("%zu instances of size 2..%zu vs exhaustive split: %zu inertia mismatches (worst %.1e, tol %.0e), "
                "%zu thresholds outside the centroids",
                kClusterInstances, kClusterMaxSize, bad_inertia, worst, kInertiaTolerance, bad_threshold)};
}

// ---------------------------------------------------------------------------
// 5-7. Intervention suite
// ---------------------------------------------------------------------------

struct SeedResult {
    double null_c = 0, metacog_c = 0, oracle_c = 0, max_c = 0;
    double task_metacog_pseudo = 0, task_metacog_plain = 0;
    double flag_precision = 0, base_error = 0;
    std::size_t flagged = 0;
};

double mean(const std::vector<SeedResult>& rs, double SeedResult::*field) {
    double s = 0.0;
    for (const auto& r : rs) s += r.*field;
    return s / static_cast<double>(rs.size());
}

SeedResult run_seed(std::uint64_t seed) {
    SeedResult res;
    const auto schema = data::ConceptSchema::restaurant_reviews();
    for (bool pseudo : {true, false}) {
        auto split = data::generate_synthetic(schema, {1755, 1673, 1685, 0.0, seed}).split;
        const auto vocab = data::Vocabulary::build(split.train);
        model::ModelConfig mc;
        mc.vocab_size = vocab.size();
        mc.concept_arities = schema.arities();
        mc.num_classes = schema.num_classes();
        data::assign_tokens(split, vocab, mc.max_seq_len);
        auto m = model::MoceModel::create(mc, seed);
        training::TrainConfig tc;
        tc.seed = seed;
        tc.pseudo_intervention = pseudo;
        const auto report = training::train(m, split, tc);
        const auto th = metacog::fit_on_split(m, split.dev, metacog::Statistic::Entropy);
        const auto policy = [&](metacog::InterventionMode mode) {
            return metacog::InterventionPolicy{mode, mc.experts_active, mc.experts_intervention};
        };
        const auto meta = metacog::evaluate_mode(m, split.test, th, policy(metacog::InterventionMode::Metacognitive));
        std::fprintf(stderr, "  seed %llu pseudo %d: %zu epochs, selected %zu, %.0f s\n",
                     static_cast<unsigned long long>(seed), pseudo ? 1 : 0, report.epochs.size(),
                     report.selected_epoch, report.wall_clock_seconds);
        if (!pseudo) {
            res.task_metacog_plain = meta.post.task_metric();
            continue;
        }
        res.task_metacog_pseudo = meta.post.task_metric();
        res.null_c = meta.pre.concept_f1_mean;
        res.metacog_c = meta.post.concept_f1_mean;
        res.oracle_c =
            metacog::evaluate_mode(m, split.test, th, policy(metacog::InterventionMode::Oracle)).post.concept_f1_mean;
        res.max_c =
            metacog::evaluate_mode(m, split.test, th, policy(metacog::InterventionMode::Max)).post.concept_f1_mean;
        const auto wrong = metacog::oracle_flags(split.test, meta.intervention.pre, mc);
        std::size_t hits = 0, errors = 0, cells = 0;
        for (std::size_t i = 0; i < wrong.size(); ++i) {
            for (std::size_t k = 0; k < wrong[i].size(); ++k) {
                ++cells;
                errors += wrong[i][k];
                hits += wrong[i][k] && meta.scrutiny.flags[i][k];
            }
        }
        res.flagged = meta.scrutiny.flagged;
        res.flag_precision = res.flagged ? static_cast<double>(hits) / static_cast<double>(res.flagged) : 0.0;
        res.base_error = static_cast<double>(errors) / static_cast<double>(cells);
    }
    return res;
}

// ---------------------------------------------------------------------------
// 8. FLOPs
// ---------------------------------------------------------------------------

Outcome flops() {
    model::ModelConfig c;
    c.vocab_size = 500;
    c.concept_arities = {3, 3, 3, 3};
    std::vector<double> x, y, total;
    for (std::size_t b = 1; b <= c.num_experts; ++b) {
        const auto f = model::count_flops(c, Budgets(c.num_concepts(), b));
        x.push_back(static_cast<double>(b));
        y.push_back(f.experts);
        total.push_back(f.total());
    }
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    const double r2 = sxy * sxy / (sxx * syy);
    const bool increasing = std::adjacent_find(total.begin(), total.end(), std::greater_equal<>()) == total.end();
    return {r2 >= kFlopsR2 && increasing,
            fmt("expert FLOPs/token vs budget 1..%zu: R^2 %.6f (min %.3f); total %.0f -> %.0f", c.num_experts, r2,
                kFlopsR2, total.front(), total.back())};
}

// ---------------------------------------------------------------------------
// 9. No tuning at evaluation
// ---------------------------------------------------------------------------

Outcome no_tuning(const SmallRun& s, const fs::path& root) {
    if (!s.ok) return {false, "small run failed"};
    const std::string hash = model::file_checksum(s.checkpoint.string());
    const std::string bytes = slurp(s.checkpoint);
    std::size_t calls = 0, failures = 0;
    for (const char* mode : {"null", "metacog", "oracle", "max"}) {
        const auto out = root / ("eval_" + std::string(mode));
        failures += moce_cli({"eval", "--checkpoint", s.checkpoint.string(), "--data", s.data.string(), "--mode", mode,
                              "--out", out.string()})
                        .code != 0;
        failures += moce_cli({"explain", "--checkpoint", s.checkpoint.string(), "--data", s.data.string(),
                              "--example-id", "170", "--mode", mode})
                        .code != 0;
        calls += 2;
    }
    const bool same = model::file_checksum(s.checkpoint.string()) == hash && slurp(s.checkpoint) == bytes;
    return {same && failures == 0,
            fmt("checkpoint FNV-1a %s %s after %zu eval/explain calls (%zu failed)", hash.c_str(),
                same ? "unchanged" : "CHANGED", calls, failures)};
}

// ---------------------------------------------------------------------------
// 10. Accountability
// ---------------------------------------------------------------------------

Outcome accountability(const SmallRun& s, const fs::path& root) {
    if (!s.ok) return {false, "small run failed"};
    const auto split = data::load_dataset(s.data.string(), data::ConceptSchema::load((s.data / "schema.json").string()));
    std::size_t reports = 0, failures = 0;
    double worst = 0.0;
    for (const auto& ex : split.test) {
        const auto out = root / ("explain_" + std::to_string(ex.id));
        if (moce_cli({"explain", "--checkpoint", s.checkpoint.string(), "--data", s.data.string(), "--example-id",
                      std::to_string(ex.id), "--mode", "metacog", "--format", "json", "--out", out.string()})
                .code != 0) {
            ++failures;
            continue;
        }
        for (const char* stem : {"pathway_pre.json", "pathway_post.json"}) {
            if (!fs::exists(out / stem)) continue;
            const auto p = account::parse_pathway(slurp(out / stem));
            double sum = p.head_bias;
            for (const auto& c : p.concepts) sum += c.influence;
            worst = std::max(worst, std::abs(sum - p.task_logits.at(p.influence_class)));
            ++reports;
        }
    }
    // Golden reports of the small run.
    const fs::path golden(MOCE_GOLDEN_DIR);
    const std::vector<std::string> base{"explain", "--checkpoint", s.checkpoint.string(), "--data", s.data.string(),
                                        "--example-id", test::kGoldenExample, "--mode", test::kGoldenMode};
    const auto text = moce_cli(test::with(base, {"--format", "text"}));
    const auto json_dir = root / "golden_json";
    const auto json = moce_cli(test::with(base, {"--format", "json", "--out", json_dir.string()}));
    const bool golden_ok = text.code == 0 && json.code == 0 &&
                           text.out == slurp(golden / ("explain_" + test::kGoldenExample + "_max.txt")) &&
                           slurp(json_dir / "pathway_pre.json") ==
                               slurp(golden / ("pathway_pre_" + test::kGoldenExample + ".json")) &&
                           slurp(json_dir / "diff.json") == slurp(golden / ("diff_" + test::kGoldenExample + "_max.json"));
    return {failures == 0 && reports > 0 && worst <= kInfluenceTolerance && golden_ok,
            fmt("%zu pathway reports, max |sum influence + bias - logit| %.1e (tol %.0e), %zu failed; golden %s",
                reports, worst, kInfluenceTolerance, failures, golden_ok ? "identical" : "DIFFERS")};
}

// ---------------------------------------------------------------------------
// 11. Determinism
// ---------------------------------------------------------------------------

Outcome determinism(const fs::path& root) {
    std::vector<std::string> metrics, reports;
    for (const char* name : {"a", "b"}) {
        const auto s = small_run(root / name);
        if (!s.ok) return {false, "small run failed"};
        const auto out = root / name / "eval";
        if (moce_cli({"eval", "--checkpoint", s.checkpoint.string(), "--data", s.data.string(), "--mode", "metacog",
                      "--out", out.string()})
                .code != 0) {
            return {false, "eval failed"};
        }
        metrics.push_back(slurp(out / "metrics.csv"));
        reports.push_back(slurp(s.run / "train_report.csv"));
    }
    const bool same = !metrics[0].empty() && metrics[0] == metrics[1] && reports[0] == reports[1];
    return {same, fmt("two seeded gen-data/train/eval runs: metrics.csv %s (%zu bytes), train_report.csv %s",
                      metrics[0] == metrics[1] ? "identical" : "DIFFER", metrics[0].size(),
                      reports[0] == reports[1] ? "identical" : "DIFFER")};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MoCE acceptance checks"};
    std::vector<int> only;
    std::size_t seeds = 5;
    std::string work = (fs::temp_directory_path() / ("moce_acceptance_" + std::to_string(::getpid()))).string();
    app.add_option("--only", only, "Criteria to run (default all)")->delimiter(',');
    app.add_option("--seeds", seeds, "Seeds of the intervention suite")->check(CLI::Range(1, 20));
    app.add_option("--work-dir", work, "Scratch directory");
    CLI11_PARSE(app, argc, argv);
    const auto wanted = [&](int id) { return only.empty() || std::find(only.begin(), only.end(), id) != only.end(); };

    std::size_t failed = 0;
    const auto report = [&](int id, const std::string& name, const Outcome& o) {
        std::printf("%s %2d %-24s %s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str());
        std::fflush(stdout);
        failed += !o.pass;
    };
    const auto guarded = [&](int id, const std::string& name, const std::function<Outcome()>& f) {
        if (!wanted(id)) return;
        try {
            report(id, name, f());
        } catch (const std::exception& e) {
            report(id, name, {false, std::string("threw: ") + e.what()});
        }
    };

    const fs::path root(work);
    fs::create_directories(root);
    guarded(1, "gradients", gradients);
    guarded(2, "sparse-routing", routing);
    guarded(3, "entropy", entropy);
    guarded(4, "two-means", clustering);

    if (wanted(5) || wanted(6) || wanted(7)) {
        std::vector<SeedResult> rs;
        double secs = 0.0;
        std::string error;
        try {
            const auto t0 = std::chrono::steady_clock::now();
            for (std::size_t s = 0; s < seeds; ++s) rs.push_back(run_seed(s));
            secs = seconds_since(t0);
        } catch (const std::exception& e) {
            error = e.what();
        }
        if (!error.empty()) {
            for (int id : {5, 6, 7}) {
                if (wanted(id)) report(id, "intervention-suite", {false, "threw: " + error});
            }
        } else {
            std::printf("   seed  null_c   metacog_c oracle_c  max_c     task(pseudo) task(plain) flag_prec base_err\n");
            for (std::size_t s = 0; s < rs.size(); ++s) {
                const auto& r = rs[s];
                std::printf("   %-5zu %.4f    %.4f    %.4f    %.4f    %.4f       %.4f      %.3f     %.3f\n", s,
                            r.null_c, r.metacog_c, r.oracle_c, r.max_c, r.task_metacog_pseudo, r.task_metacog_plain,
                            r.flag_precision, r.base_error);
            }
            const double n = mean(rs, &SeedResult::null_c), mc = mean(rs, &SeedResult::metacog_c),
                         o = mean(rs, &SeedResult::oracle_c), mx = mean(rs, &SeedResult::max_c);
            const double tp = mean(rs, &SeedResult::task_metacog_pseudo), tn = mean(rs, &SeedResult::task_metacog_plain);
            std::printf("   info: mean flag precision %.3f vs base concept error rate %.3f\n",
                        mean(rs, &SeedResult::flag_precision), mean(rs, &SeedResult::base_error));
            if (wanted(5)) {
                report(5, "metacog-gain",
                       {o >= mc && mc >= n && mc - n >= kMetacogMargin && secs < kSuiteSeconds,
                        fmt("mean concept F1 over %zu seeds: oracle %.4f >= metacog %.4f >= null %.4f; "
                            "metacog-null %+.2f pts (min %.1f); %.0f s (limit %.0f s)",
                            rs.size(), o, mc, n, 100 * (mc - n), 100 * kMetacogMargin, secs, kSuiteSeconds)});
            }
            if (wanted(6)) {
                report(6, "max-not-better",
                       {mx <= mc, fmt("mean concept F1: max %.4f <= metacog %.4f (diff %+.2f pts)", mx, mc,
                                      100 * (mx - mc))});
            }
            if (wanted(7)) {
                report(7, "pseudo-intervention",
                       {tp >= tn, fmt("mean post-metacog task F1: with pseudo %.4f >= without %.4f (delta %+.2f pts)",
                                      tp, tn, 100 * (tp - tn))});
            }
        }
    }

    guarded(8, "flops-linear", flops);
    if (wanted(9) || wanted(10)) {
        const auto s = small_run(root / "small");
        guarded(9, "no-tuning", [&] { return no_tuning(s, root / "small"); });
        guarded(10, "accountability", [&] { return accountability(s, root / "small"); });
    }
    guarded(11, "determinism", [&] { return determinism(root / "determinism"); });

    fs::remove_all(root);
    std::printf("%zu criteria failed\n", failed);
    return failed == 0 ? 0 : 1;
}
