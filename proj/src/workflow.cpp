#include "biaskit/workflow.hpp"

namespace biaskit::workflow {

IngestSummary cmd_ingest(const IngestArgs& a) {
    ParseOptions opts;
    opts.strict = a.strict;
    opts.utc_offset_seconds = a.utc_offset_seconds;
    opts.vt_timestamp_column = a.vt_timestamp_column;
    opts.provenance = a.input.filename().string();
    auto parsed = parse_metadata(io::read_file(a.input), opts);
    Population pop = std::move(parsed.population);

    json stats{{"rows", parsed.stats.rows},
               {"parsed", parsed.stats.parsed},
               {"malformed", parsed.stats.malformed},
               {"duplicates", parsed.stats.duplicates},
               {"messages", parsed.stats.messages}};
    if (a.families) {
        auto table = parse_families(io::read_file(*a.families));
        auto joined = join_families(pop, table);
        pop = std::move(joined.population);
        stats["families"] = {{"matched", joined.stats.matched},
                             {"cleared", joined.stats.cleared},
                             {"malformed", table.malformed},
                             {"missing_from_population", joined.stats.missing_from_population.size()}};
    }
    if (!a.snapshot_pieces.empty()) {
        std::vector<SnapshotPiece> pieces;
        for (const auto& p : a.snapshot_pieces) pieces.push_back(parse_snapshot_piece(p));
        auto snap = snapshot_filter_piecewise(pop, pieces);
        stats["snapshot"] = {{"dropped_late", snap.dropped_late},
                             {"dropped_missing_crawl", snap.dropped_missing_crawl},
                             {"dropped_out_of_range", snap.dropped_out_of_range}};
        pop = std::move(snap.population);
    } else if (a.snapshot) {
        auto snap = snapshot_filter(pop, end_of_day(parse_timestamp(*a.snapshot)));
        stats["snapshot"] = {{"dropped_late", snap.dropped_late}, {"dropped_missing_crawl", snap.dropped_missing_crawl}};
        pop = std::move(snap.population);
    }
    std::map<std::string, std::size_t> per_year;
    for (const auto& r : pop) ++per_year[period_of(r.dex_date, Granularity::Year).label()];
    stats["row_count"] = pop.size();
    stats["per_dex_year"] = per_year;

    const auto echo = run_echo("ingest", a.echo());
    const auto cache = a.out / "population.csv.gz";
    io::write_file(cache, serialize_metadata(pop));
    io::write_file(a.out / "ingest_stats.json", dump({{"run", echo}, {"stats", stats}}));
    write_echo(a.out, echo);
    return {parsed.stats, pop.size(), cache};
}

std::vector<fs::path> cmd_stats(const StatsArgs& a) {
    const auto pop = load_population(a.population);
    const auto echo = run_echo("stats", a.echo());
    const LabelRule rule{a.vtt};
    std::vector<fs::path> written;
    auto put = [&](const std::string& name, const std::string& body) {
        io::write_file(a.out / name, body);
        written.push_back(a.out / name);
    };

    if (a.vtt_curve) {
        std::string csv = "vtt,coverage\n";
        for (std::uint32_t v = 1; v <= a.vtt_max; ++v) csv += std::to_string(v) + "," + fixed(vtt_coverage(pop, v), 4) + "\n";
        put("vtt_coverage.csv", csv);
    }
    if (a.markets) {
        auto table = market_composition(pop, rule);
        std::string csv = "market,goodware_pct,malware_pct\n";
        for (const auto& [m, row] : table.rows) {
            csv += io::csv_escape(m) + "," + (row.goodware_pct ? fixed(*row.goodware_pct, 4) : "") + "," +
                   (row.malware_pct ? fixed(*row.malware_pct, 4) : "") + "\n";
        }
        put("market_composition.csv", csv);
        json cons;
        try {
            auto res = market_consistency(pop, rule);
            cons = {{"tv_distance", res.tv_distance}, {"threshold", res.threshold}, {"pass", res.pass},
                    {"goodware", res.goodware},       {"malware", res.malware}};
        } catch (const DomainError& e) {
            cons = {{"error", e.what()}};
        }
        put("market_consistency.json", dump({{"run", echo}, {"consistency", cons}}));
    }
    if (!a.heatmap_vtts.empty()) {
        auto rows = vtt_market_heatmap(pop, a.heatmap_vtts);
        std::set<std::string> markets;
        for (const auto& r : rows) {
            if (r.market_pct) {
                for (const auto& [m, _] : *r.market_pct) markets.insert(m);
            }
        }
        std::string csv = "vtt,samples";
        for (const auto& m : markets) csv += "," + io::csv_escape(m);
        csv += "\n";
        for (const auto& r : rows) {
            csv += std::to_string(r.vtt) + "," + std::to_string(r.samples);
            for (const auto& m : markets) {
                csv += ",";
                if (r.market_pct) csv += fixed(r.market_pct->count(m) ? r.market_pct->at(m) : 0.0, 4);
            }
            csv += "\n";
        }
        put("vtt_market_heatmap.csv", csv);
    }
    if (a.timestamps) {
        auto lag = timestamp_lag_stats(pop, TimestampKind::CreationDex, TimestampKind::PublicationCrawl);
        put("timestamp_lag.json", dump({{"run", echo},
                                        {"from", "dex"},
                                        {"to", "crawl"},
                                        {"count", lag.count},
                                        {"excluded", lag.excluded},
                                        {"median_days", lag.median},
                                        {"q1_days", lag.q1},
                                        {"q3_days", lag.q3}}));
        std::string csv = "lag_days,count\n";
        for (const auto& [d, c] : lag.histogram) csv += std::to_string(d) + "," + std::to_string(c) + "\n";
        put("timestamp_lag_histogram.csv", csv);
    }
    if (a.overlap_ref) {
        const auto ref = parse_period(*a.overlap_ref);
        auto obs = malware_observations(pop, rule, a.policy);
        if (obs.empty()) throw DomainError("no dated malware in population");
        auto last = ref;
        for (const auto& o : obs) last = std::max(last, period_of(o.date, ref.granularity));
        std::vector<Period> tests;
        for (auto p = ref.successor(); p <= last; p = p.successor()) tests.push_back(p);
        put("family_overlap.csv", render_series_csv(overlap_series(obs, ref, tests)));
    }
    write_echo(a.out, echo);
    return written;
}

json cmd_sample_size(const SampleSizeArgs& a) {
    const auto echo = run_echo("sample-size", a.echo());
    json result{{"run", echo}};
    if (a.population_size) {
        result["N"] = *a.population_size;
        result["n"] = required_sample_size(*a.population_size, a.params);
        result["z"] = z_critical(a.params.effective_confidence());
    }
    if (a.population) {
        const auto pop = load_population(*a.population);
        std::vector<SizingPlan> plans;
        if (a.plans.empty()) {
            for (auto n : {"MoE/Spatial", "MoE/Yearly", "MoE/Monthly", "MoE/Spatial/Year", "MoE/Spatial/Month"}) {
                plans.push_back(parse_sizing_plan(n, a.ratio));
            }
        } else {
            for (const auto& n : a.plans) plans.push_back(parse_sizing_plan(n, a.ratio));
        }
        auto rows = compare_plans(pop, LabelRule{a.vtt}, a.policy, plans, a.params);
        std::string csv = "plan,total,malware_total,malware_per_month_mean,malware_per_month_std\n";
        json jrows = json::array();
        for (const auto& r : rows) {
            csv += r.name + "," + std::to_string(r.total) + "," + fixed(r.malware_total, 4) + "," +
                   fixed(r.malware_per_month_mean, 4) + "," + fixed(r.malware_per_month_std, 4) + "\n";
            jrows.push_back({{"plan", r.name},
                             {"total", r.total},
                             {"malware_total", r.malware_total},
                             {"malware_per_month_mean", r.malware_per_month_mean},
                             {"malware_per_month_std", r.malware_per_month_std},
                             {"months", r.months}});
        }
        io::write_file(a.out / "plan_comparison.csv", csv);
        result["plans"] = jrows;
    }
    io::write_file(a.out / "sample_size.json", dump(result));
    write_echo(a.out, echo);
    return result;
}

SampleOutcome cmd_sample(const SampleArgs& a) {
    Population pop = load_population(a.population);
    if (a.snapshot) pop = snapshot_filter(pop, end_of_day(parse_timestamp(*a.snapshot))).population;
    const auto echo = run_echo("sample", a.echo());

    std::vector<std::pair<std::string, DatasetManifest>> manifests;
    std::optional<SizePlanResult> sized;
    if (a.scenario) {
        auto pair = market_scenario(a.markets.empty() ? pop : filter_markets(pop, a.markets), *a.scenario, a.rule,
                                    a.policy, a.seed);
        manifests.emplace_back("train_", std::move(pair.train));
        manifests.emplace_back("test_", std::move(pair.test));
    } else {
        const auto frame = filter_markets(pop, a.markets);
        sized = plan_sizes(frame, a.rule, a.policy, a.plan, a.params);
        SampleOptions so;
        so.seed = a.seed;
        so.threads = a.threads;
        so.market_filter = a.markets;
        so.consistency_threshold = a.consistency_threshold;
        if (a.created) so.created = parse_timestamp(*a.created);
        manifests.emplace_back("", stratified_sample(frame, a.rule, a.policy, *sized, so));
    }

    SampleOutcome outcome;
    bool refused = false;
    for (auto& [prefix, m] : manifests) {
        m.spec.consistency_threshold = a.consistency_threshold;
        auto verdicts = verify_constraints(m);
        if (!all_mandatory_pass(verdicts)) {
            for (const auto& v : verdicts) {
                if (!v.pass && v.mandatory) m.violations.push_back(v.check + ": " + v.evidence);
            }
            refused = true;
        }
        outcome.verdicts.insert(outcome.verdicts.end(), verdicts.begin(), verdicts.end());
    }
    const bool emit = !refused || a.allow_violations;
    auto put = [&](const std::string& name, const std::string& body) {
        io::write_file(a.out / name, body);
        outcome.written.push_back(a.out / name);
    };
    json verify_doc{{"run", echo}};
    for (const auto& [prefix, m] : manifests) {
        verify_doc[prefix.empty() ? "manifest" : prefix.substr(0, prefix.size() - 1)] = verdicts_json(verify_constraints(m));
        if (emit) {
            auto j = to_json(m);
            j["run"] = echo;
            put(prefix + "manifest.json", dump(j));
            put(prefix + "manifest.csv", manifest_csv(m));
        }
    }
    if (sized && emit) {
        std::string csv = "stratum,available_goodware,available_malware,n,malware_target,goodware_target,malware_shortfall,goodware_shortfall\n";
        for (const auto& s : sized->strata) {
            csv += (s.period ? s.period->label() : std::string("global")) + "," + std::to_string(s.goodware_available) +
                   "," + std::to_string(s.malware_available) + "," + std::to_string(s.n) + "," +
                   (s.malware_target ? std::to_string(*s.malware_target) : "") + "," +
                   (s.goodware_target ? std::to_string(*s.goodware_target) : "") + "," +
                   std::to_string(s.malware_shortfall) + "," + std::to_string(s.goodware_shortfall) + "\n";
        }
        put("plan.csv", csv);
    }
    put("verify.json", dump(verify_doc));
    write_echo(a.out, echo);
    outcome.exit_code = refused ? kExitConstraint : kExitOk;
    return outcome;
}

VerifyOutcome cmd_verify(const fs::path& manifest_path, const fs::path& out) {
    auto m = load_manifest(manifest_path);
    VerifyOutcome o;
    o.verdicts = verify_constraints(m);
    const auto echo = run_echo("verify", {{"manifest", manifest_path.string()}});
    io::write_file(out / "verify.json", dump({{"run", echo}, {"verdicts", verdicts_json(o.verdicts)}}));
    write_echo(out, echo);
    o.exit_code = all_mandatory_pass(o.verdicts) ? kExitOk : kExitConstraint;
    return o;
}

SplitPlan cmd_split(const SplitArgs& a) {
    Period lo, hi;
    if (a.from && a.to) {
        lo = parse_period(*a.from);
        hi = parse_period(*a.to);
        if (lo.granularity == Granularity::Year) lo = Period::month(lo.calendar_year(), 1);
        if (hi.granularity == Granularity::Year) hi = Period::month(hi.calendar_year(), 12);
    } else if (a.manifest) {
        std::tie(lo, hi) = manifest_month_range(load_manifest(*a.manifest));
    } else {
        throw UsageError("split needs --from/--to or --manifest");
    }
    auto plan = rolling_splits(lo, hi, a.window, a.allow_partial);
    const auto echo = run_echo("split", {{"from", lo.label()},
                                         {"to", hi.label()},
                                         {"window", a.window},
                                         {"allow_partial", a.allow_partial}});
    std::string csv = "split,label,train_from,train_to,test_from,test_to\n";
    for (std::size_t i = 0; i < plan.splits.size(); ++i) {
        const auto& s = plan.splits[i];
        csv += std::to_string(i) + "," + s.label() + "," + s.train.front().label() + "," + s.train.back().label() + "," +
               s.test.front().label() + "," + s.test.back().label() + "\n";
    }
    io::write_file(a.out / "splits.csv", csv);
    io::write_file(a.out / "splits.json", dump({{"run", echo}, {"splits", split_json(plan)}}));
    write_echo(a.out, echo);
    return plan;
}

EvaluationReport cmd_evaluate(const EvaluateArgs& a) {
    EvaluationReport report;
    report.metric = a.metric;
    report.window_months = a.window;
    if (!a.predictions.empty()) {
        if (!a.manifest) throw UsageError("prediction files need --manifest");
        const auto manifest = load_manifest(*a.manifest);
        const auto [lo, hi] = manifest_month_range(manifest);
        const auto plan = rolling_splits(lo, hi, a.window, a.allow_partial);
        for (const auto& s : plan.splits) report.split_labels.push_back(s.label());
        EvaluateOptions eo{a.metric, a.lenient};
        for (const auto& [name, path] : a.predictions) {
            auto parsed = parse_predictions(io::read_file(path), name, a.threshold, !a.lenient);
            report.rows.push_back(evaluate_predictions(manifest, plan, parsed.predictions, eo));
        }
    }
    for (const auto& [name, values] : a.auts) {
        if (!a.predictions.empty() && values.size() != report.split_labels.size()) {
            throw UsageError("AUT list for '" + name + "' does not match the number of splits");
        }
        report.rows.push_back(row_from_auts(name, values));
    }
    if (report.rows.empty()) throw UsageError("evaluate needs --predictions or --aut");
    if (report.split_labels.empty()) {
        const auto k = report.rows.front().splits.size();
        for (const auto& r : report.rows) {
            if (r.splits.size() != k) throw UsageError("AUT lists differ in length");
        }
        if (!a.split_labels.empty()) {
            if (a.split_labels.size() != k) throw UsageError("--split-labels count does not match AUT columns");
            report.split_labels = a.split_labels;
        } else {
            for (std::size_t i = 0; i < k; ++i) report.split_labels.push_back("split" + std::to_string(i + 1));
        }
    }
    rank_rows(report.rows);

    const auto echo = run_echo("evaluate", a.echo());
    io::write_file(a.out / "report.md", "<!-- " + echo.dump() + " -->\n" + render_markdown(report));
    io::write_file(a.out / "report.csv", render_csv(report));
    auto j = to_json(report);
    j["run"] = echo;
    io::write_file(a.out / "report.json", dump(j));
    write_echo(a.out, echo);
    return report;
}

SynthOutput cmd_synth(const SynthArgs& a) {
    const auto cfg = synth_config(a);
    auto out = generate(cfg, a.threads);
    const auto echo = run_echo("synth", {{"preset", a.preset}, {"config", to_json(cfg)}});
    io::write_file(a.out / "population.csv", serialize_metadata(out.population));
    auto truth = to_json(out.truth);
    truth["run"] = echo;
    io::write_file(a.out / "ground_truth.json", dump(truth));
    write_echo(a.out, echo);
    return out;
}

FetchResult cmd_fetch(const FetchArgs& a) {
    const auto dest = fetch_destination(a);
    if (dest.has_parent_path()) fs::create_directories(dest.parent_path());
    return fetch_metadata(a.url, dest, a.options);
}
}  // namespace biaskit::workflow
