// biaskit command-line front end.

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "biaskit/workflow.hpp"

namespace wf = biaskit::workflow;
namespace fs = std::filesystem;

namespace {

struct Common {
    std::uint64_t seed = 0;
    std::string out = ".";
    bool strict = false;
    std::string timestamp = "crawl";
    std::string timestamp_fallback;
    std::uint32_t vtt = 4;
    std::string snapshot;
    std::vector<std::string> markets;
    int window = 12;
    unsigned threads = 1;
};

biaskit::TimestampPolicy policy_of(const Common& c) {
    biaskit::TimestampPolicy p;
    p.kind = biaskit::parse_timestamp_kind(c.timestamp);
    if (!c.timestamp_fallback.empty()) p.fallback = biaskit::parse_timestamp_kind(c.timestamp_fallback);
    return p;
}

std::optional<std::string> opt(const std::string& s) { return s.empty() ? std::nullopt : std::optional(s); }

// NAME=VALUE
std::pair<std::string, std::string> split_named(const std::string& s, const char* what) {
    auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw biaskit::UsageError(std::string(what) + " must look like NAME=VALUE: " + s);
    return {s.substr(0, eq), s.substr(eq + 1)};
}

std::vector<double> parse_doubles(const std::string& list) {
    std::vector<double> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        double v = 0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != item.size()) throw biaskit::UsageError("not a number: '" + item + "'");
        out.push_back(v);
    }
    return out;
}

void add_out(CLI::App* sub, Common& c) { sub->add_option("--out,-o", c.out, "Output directory")->capture_default_str(); }
void add_seed(CLI::App* sub, Common& c) { sub->add_option("--seed", c.seed, "Master seed")->capture_default_str(); }
void add_vtt(CLI::App* sub, Common& c) {
    sub->add_option("--vtt", c.vtt, "Detections needed to call a sample malware")->capture_default_str()->check(CLI::Range(1u, 1000u));
}
void add_timestamp(CLI::App* sub, Common& c) {
    sub->add_option("--timestamp", c.timestamp, "Timeline timestamp")
        ->capture_default_str()
        ->check(CLI::IsMember({"dex", "vt", "crawl"}));
    sub->add_option("--timestamp-fallback", c.timestamp_fallback, "Used when the primary timestamp is absent")
        ->check(CLI::IsMember({"dex", "vt", "crawl"}));
}
void add_threads(CLI::App* sub, Common& c) {
    sub->add_option("--threads", c.threads, "Worker threads")->capture_default_str()->check(CLI::Range(1u, 256u));
}
void add_window(CLI::App* sub, Common& c) {
    sub->add_option("--window", c.window, "Rolling window length in months")->capture_default_str()->check(CLI::PositiveNumber);
}

void print_verdicts(const std::vector<biaskit::Verdict>& vs) {
    for (const auto& v : vs) {
        std::printf("%-4s %s%s: %s\n", v.pass ? "ok" : "FAIL", v.check.c_str(), v.mandatory ? "" : " (advisory)",
                    v.evidence.c_str());
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bias-controlled malware dataset sampling and time-aware evaluation"};
    app.set_version_flag("--version", std::string(biaskit::kVersion));
    app.set_config("--config", "", "INI/TOML file; [subcommand] sections, flags take precedence");
    app.require_subcommand(1);
    Common c;

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Parse a metadata CSV (plain or gzip) into a population cache");
    wf::IngestArgs ia;
    std::string ia_input, ia_families;
    ingest->add_option("input", ia_input, "Metadata CSV")->required();
    ingest->add_option("--families", ia_families, "sha256,family CSV to join");
    ingest->add_flag("--strict", c.strict, "Fail on the first malformed row");
    ingest->add_option("--snapshot", c.snapshot, "Keep records crawled on or before DATE");
    ingest->add_option("--snapshot-piece", ia.snapshot_pieces, "FROM:TO@CUTOFF, repeatable");
    ingest->add_option("--utc-offset", ia.utc_offset_seconds, "Offset of input timestamps from UTC, in seconds");
    ingest->add_option("--vt-column", ia.vt_timestamp_column, "Column holding the VT timestamp")->capture_default_str();
    add_out(ingest, c);

    // stats
    auto* stats = app.add_subcommand("stats", "Population statistics tables");
    wf::StatsArgs sa;
    std::string sa_pop;
    stats->add_option("population", sa_pop, "Population CSV or cache")->required();
    stats->add_flag("--vtt-curve", sa.vtt_curve, "Malware coverage for vtt 1..vtt-max");
    stats->add_option("--vtt-max", sa.vtt_max)->capture_default_str();
    stats->add_flag("--markets", sa.markets, "Market composition and consistency");
    stats->add_flag("--timestamps", sa.timestamps, "dex to crawl lag distribution");
    stats->add_option("--overlap", sa.overlap_ref, "Family overlap against a reference period, e.g. 2014");
    stats->add_option("--heatmap", sa.heatmap_vtts, "Per-market share of samples at these vtt values")->delimiter(',');
    add_vtt(stats, c);
    add_timestamp(stats, c);
    add_out(stats, c);

    // sample-size
    auto* ssize = app.add_subcommand("sample-size", "Margin-of-error sample sizes");
    wf::SampleSizeArgs za;
    std::string za_pop;
    std::uint32_t za_m = 0;
    ssize->add_option("-N,--population-size", za.population_size, "Population size");
    ssize->add_option("--population", za_pop, "Population CSV; compares sizing plans");
    ssize->add_option("--confidence", za.params.confidence)->capture_default_str();
    ssize->add_option("--delta", za.params.delta, "Margin of error")->capture_default_str();
    ssize->add_option("--p", za.params.p, "Expected proportion")->capture_default_str();
    ssize->add_option("--bonferroni", za_m, "Number of simultaneous proportions");
    ssize->add_option("--plan", za.plans, "Plan names to compare");
    ssize->add_option("--ratio", za.ratio, "Malware ratio for spatial plans")->capture_default_str();
    add_vtt(ssize, c);
    add_timestamp(ssize, c);
    add_out(ssize, c);

    // sample
    auto* sample = app.add_subcommand("sample", "Draw a constraint-verified dataset manifest");
    wf::SampleArgs pa;
    std::string pa_pop, pa_plan = "MoE/Spatial/Month", pa_created, pa_scenario;
    std::uint32_t pa_m = 0;
    sample->add_option("population", pa_pop, "Population CSV or cache")->required();
    sample->add_option("--plan", pa_plan, "MoE, MoE/Spatial, MoE/Yearly, MoE/Spatial/Year, MoE/Monthly, MoE/Spatial/Month")
        ->capture_default_str();
    sample->add_option("--ratio", pa.plan.ratio_malware, "Malware ratio")->capture_default_str();
    sample->add_option("--confidence", pa.params.confidence)->capture_default_str();
    sample->add_option("--delta", pa.params.delta)->capture_default_str();
    sample->add_option("--p", pa.params.p)->capture_default_str();
    sample->add_option("--bonferroni", pa_m);
    sample->add_option("--markets", c.markets, "Keep records carrying any of these tags")->delimiter(',');
    sample->add_option("--snapshot", c.snapshot, "Keep records crawled on or before DATE");
    sample->add_option("--created", pa_created, "Timestamp recorded in the manifest");
    sample->add_option("--scenario", pa_scenario, "Market scenario: D_GP, D_3PM, D_EVEN, D_PROP, D_GP3PM, D_3PMGP");
    sample->add_option("--consistency-threshold", pa.consistency_threshold)->capture_default_str();
    sample->add_flag("--allow-violations", pa.allow_violations, "Write the manifest even if a mandatory check fails");
    add_seed(sample, c);
    add_vtt(sample, c);
    add_timestamp(sample, c);
    add_threads(sample, c);
    add_out(sample, c);

    // verify
    auto* verify = app.add_subcommand("verify", "Re-check a manifest's constraints");
    std::string va_manifest;
    verify->add_option("manifest", va_manifest, "manifest.json")->required();
    add_out(verify, c);

    // split
    auto* split = app.add_subcommand("split", "Rolling train/test windows");
    wf::SplitArgs ta;
    std::string ta_from, ta_to, ta_manifest;
    split->add_option("--from", ta_from, "First month, YYYY-MM or YYYY");
    split->add_option("--to", ta_to, "Last month, YYYY-MM or YYYY");
    split->add_option("--manifest", ta_manifest, "Take the range from a manifest");
    split->add_flag("--allow-partial", ta.allow_partial, "Keep a shorter final test window");
    add_window(split, c);
    add_out(split, c);

    // evaluate
    auto* eval = app.add_subcommand("evaluate", "AUT and A-AUT report for prediction sets");
    wf::EvaluateArgs ea;
    std::string ea_manifest, ea_metric = "f1";
    std::vector<std::string> ea_preds, ea_auts;
    eval->add_option("--manifest", ea_manifest, "Ground-truth manifest.json");
    eval->add_option("--predictions", ea_preds, "NAME=PATH, repeatable");
    eval->add_option("--aut", ea_auts, "NAME=a1,a2,... precomputed per-split AUTs, repeatable");
    eval->add_option("--split-labels", ea.split_labels, "Column labels for --aut values")->delimiter(',');
    eval->add_option("--metric", ea_metric)->capture_default_str()->check(CLI::IsMember({"f1", "fpr", "tpr", "precision", "recall"}));
    eval->add_option("--threshold", ea.threshold, "Score threshold when no label is given")->capture_default_str();
    eval->add_flag("--lenient", ea.lenient, "Skip truth samples without predictions");
    eval->add_flag("--allow-partial", ea.allow_partial, "Keep a shorter final test window");
    add_window(eval, c);
    add_out(eval, c);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic population");
    wf::SynthArgs ya;
    synth->add_option("--preset", ya.preset, "stable, churn, market-skew, late-backfill")->capture_default_str();
    synth->add_option("--months", ya.months);
    synth->add_option("--per-month", ya.per_month);
    synth->add_option("--malware-fraction", ya.malware_fraction);
    synth->add_option("--start", ya.start, "First month, YYYY-MM");
    c.seed = 1;
    add_seed(synth, c);
    add_threads(synth, c);
    add_out(synth, c);

    // fetch
    auto* fetch = app.add_subcommand("fetch", "Download a metadata file with resume and retries");
    wf::FetchArgs fa;
    std::string fa_dest;
    int fa_timeout = 60;
    fetch->add_option("url", fa.url)->required();
    fetch->add_option("--dest", fa_dest, "Destination file; defaults to the cache directory");
    fetch->add_option("--attempts", fa.options.attempts)->capture_default_str()->check(CLI::PositiveNumber);
    fetch->add_option("--timeout", fa_timeout, "Seconds per request")->capture_default_str();
    fetch->add_flag("!--no-resume", fa.options.resume, "Start over instead of resuming a partial download");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? wf::kExitOk : wf::kExitUsage;
    }

    try {
        const fs::path out = c.out;
        if (*ingest) {
            ia.input = ia_input;
            if (!ia_families.empty()) ia.families = ia_families;
            ia.out = out;
            ia.strict = c.strict;
            ia.snapshot = opt(c.snapshot);
            auto r = wf::cmd_ingest(ia);
            std::printf("%zu records (%zu rows, %zu malformed, %zu duplicates) -> %s\n", r.records, r.stats.rows,
                        r.stats.malformed, r.stats.duplicates, r.cache.string().c_str());
        } else if (*stats) {
            sa.population = sa_pop;
            sa.out = out;
            sa.vtt = c.vtt;
            sa.policy = policy_of(c);
            for (const auto& p : wf::cmd_stats(sa)) std::printf("%s\n", p.string().c_str());
        } else if (*ssize) {
            if (!za_pop.empty()) za.population = za_pop;
            if (!za.population_size && !za.population) throw biaskit::UsageError("sample-size needs -N or --population");
            if (za_m) za.params.bonferroni_m = za_m;
            za.params.validate();
            za.out = out;
            za.vtt = c.vtt;
            za.policy = policy_of(c);
            auto j = wf::cmd_sample_size(za);
            if (j.contains("n")) std::printf("n = %llu\n", static_cast<unsigned long long>(j["n"].get<std::uint64_t>()));
            if (j.contains("plans")) {
                for (const auto& r : j["plans"]) {
                    std::printf("%-20s %8llu\n", r["plan"].get<std::string>().c_str(),
                                static_cast<unsigned long long>(r["total"].get<std::uint64_t>()));
                }
            }
        } else if (*sample) {
            pa.population = pa_pop;
            pa.out = out;
            pa.rule = biaskit::LabelRule{c.vtt};
            pa.policy = policy_of(c);
            pa.plan = biaskit::parse_sizing_plan(pa_plan, pa.plan.ratio_malware);
            if (pa_m) pa.params.bonferroni_m = pa_m;
            pa.params.validate();
            pa.seed = c.seed;
            pa.threads = c.threads;
            pa.markets = {c.markets.begin(), c.markets.end()};
            pa.snapshot = opt(c.snapshot);
            pa.created = opt(pa_created);
            pa.scenario = opt(pa_scenario);
            auto r = wf::cmd_sample(pa);
            print_verdicts(r.verdicts);
            if (r.exit_code == wf::kExitConstraint) {
                std::fprintf(stderr, pa.allow_violations ? "constraint violations stamped into the manifest\n"
                                                         : "refused: manifest fails a mandatory check\n");
            }
            return r.exit_code;
        } else if (*verify) {
            auto r = wf::cmd_verify(va_manifest, out);
            print_verdicts(r.verdicts);
            return r.exit_code;
        } else if (*split) {
            ta.from = opt(ta_from);
            ta.to = opt(ta_to);
            if (!ta_manifest.empty()) ta.manifest = ta_manifest;
            ta.window = c.window;
            ta.out = out;
            for (const auto& s : wf::cmd_split(ta).splits) std::printf("%s\n", s.label().c_str());
        } else if (*eval) {
            if (!ea_manifest.empty()) ea.manifest = ea_manifest;
            for (const auto& p : ea_preds) {
                auto [n, v] = split_named(p, "--predictions");
                ea.predictions.emplace_back(n, v);
            }
            for (const auto& p : ea_auts) {
                auto [n, v] = split_named(p, "--aut");
                ea.auts.emplace_back(n, parse_doubles(v));
            }
            ea.metric = biaskit::parse_metric(ea_metric);
            ea.window = c.window;
            ea.out = out;
            std::fputs(biaskit::render_markdown(wf::cmd_evaluate(ea)).c_str(), stdout);
        } else if (*synth) {
            ya.seed = c.seed;
            ya.threads = c.threads;
            ya.out = out;
            auto r = wf::cmd_synth(ya);
            std::printf("%zu records -> %s\n", r.population.size(), (out / "population.csv").string().c_str());
        } else if (*fetch) {
            if (!fa_dest.empty()) fa.dest = fa_dest;
            fa.options.timeout = std::chrono::seconds(fa_timeout);
            auto r = wf::cmd_fetch(fa);
            std::printf("%s (%llu bytes this run, %d attempt(s)%s%s)\n", r.path.string().c_str(),
                        static_cast<unsigned long long>(r.bytes_downloaded), r.attempts_used,
                        r.resumed ? ", resumed" : "", r.decompressed ? ", inflated" : "");
        }
    } catch (const biaskit::UsageError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return wf::kExitUsage;
    } catch (const biaskit::ConstraintError& e) {
        std::fprintf(stderr, "constraint violation: %s\n", e.what());
        return wf::kExitConstraint;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return wf::kExitError;
    }
    return wf::kExitOk;
}
