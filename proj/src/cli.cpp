#include "threedw/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "threedw/errors.hpp"
#include "threedw/rng.hpp"
#include "threedw/routing.hpp"

namespace threedw::cli {

namespace fs = std::filesystem;

namespace {

struct Params {
    std::uint64_t seed = 0;
    std::size_t window_len = kDefaultWindowLen;
    std::size_t sweep_window_len = 1;
    std::size_t grid_levels = kDefaultGridLevels;
    std::size_t k1 = kDefaultK1;
    std::size_t segment_len = kDefaultSegmentLen;
    std::size_t trials = 1'000'000;
    std::size_t rounds = 200'000;
    std::size_t workers = 1;
    std::size_t budget = 0; // 0 = exhaustive
    std::vector<double> marginals;
    std::vector<double> rho_grid{0.0, 0.25, 0.5, 0.75, 1.0};
    double rho = 0.0;
    std::string burst = "none";
    std::string models = "all";
    std::string metric = "both";
    std::string mode;
    bool independent = false;
    std::string out, trace, dist, model, source, generated, scenario, synth_config;
};

const std::vector<std::string> kSubcommands{"analyze", "estimate", "oracle", "sweep", "fit",
                                            "gen",     "compare",  "route"};

std::string normalize_key(std::string key) {
    std::replace(key.begin(), key.end(), '-', '_');
    return key;
}

// Config-file values become defaults, so env vars and flags still win.
void apply_config(Params& p, const Json& obj, const std::string& sub) {
    for (const auto& [raw_key, v] : obj.items()) {
        const std::string key = normalize_key(raw_key);
        if (v.is_object()) continue; // per-subcommand sections handled by the caller
        if (key == "seed") p.seed = v.get<std::uint64_t>();
        else if (key == "window_len") (sub == "sweep" ? p.sweep_window_len : p.window_len) = v.get<std::size_t>();
        else if (key == "grid_levels") p.grid_levels = v.get<std::size_t>();
        else if (key == "k1") p.k1 = v.get<std::size_t>();
        else if (key == "segment_len") p.segment_len = v.get<std::size_t>();
        else if (key == "trials") p.trials = v.get<std::size_t>();
        else if (key == "rounds") p.rounds = v.get<std::size_t>();
        else if (key == "workers") p.workers = v.get<std::size_t>();
        else if (key == "budget") p.budget = v.get<std::size_t>();
        else if (key == "marginals") p.marginals = v.get<std::vector<double>>();
        else if (key == "rho_grid") p.rho_grid = v.get<std::vector<double>>();
        else if (key == "rho") p.rho = v.get<double>();
        else if (key == "burst") p.burst = v.get<std::string>();
        else if (key == "models") p.models = v.get<std::string>();
        else if (key == "metric") p.metric = v.get<std::string>();
        else if (key == "mode") p.mode = v.get<std::string>();
        else if (key == "out") p.out = v.get<std::string>();
        else throw CLI::ValidationError("config", "unknown config key '" + raw_key + "'");
    }
}

void load_config(Params& p, const std::vector<std::string>& args) {
    std::string path;
    std::string sub;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
        else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
        else if (sub.empty() && std::find(kSubcommands.begin(), kSubcommands.end(), args[i]) != kSubcommands.end())
            sub = args[i];
    }
    if (path.empty()) return;
    const Json doc = parse_json(read_file(path));
    if (!doc.is_object()) throw FormatError("config file must hold a JSON object");
    apply_config(p, doc, sub);
    if (!sub.empty() && doc.contains(sub)) apply_config(p, doc.at(sub), sub);
}

template <typename T>
CLI::Option* flag(CLI::App* app, const std::string& name, T& target, const std::string& help) {
    std::string env = name.substr(2);
    std::transform(env.begin(), env.end(), env.begin(), [](unsigned char c) { return c == '-' ? '_' : std::toupper(c); });
    return app->add_option(name, target, help)->envname(std::string(kEnvPrefix) + env)->capture_default_str();
}

std::optional<BurstModel> parse_burst(const std::string& text) {
    if (text.empty() || text == "none") return std::nullopt;
    std::vector<double> v;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) v.push_back(std::stod(part));
    if (v.size() != 4) throw std::invalid_argument("--burst expects none or p_stay_good,p_stay_bad,good_scale,bad_scale");
    return BurstModel{v[0], v[1], v[2], v[3]};
}

std::string burst_text(const std::optional<BurstModel>& b) {
    if (!b) return "none";
    return format_number(b->p_stay_good) + "," + format_number(b->p_stay_bad) + "," + format_number(b->good_scale) +
           "," + format_number(b->bad_scale);
}

std::string csv_manifest_line(const RunManifest& m) { return "# manifest: " + m.to_json().dump() + "\n"; }

std::string pretty(const Json& doc) { return doc.dump(2) + "\n"; }

void emit(const std::string& content, const std::string& path, std::ostream& out) {
    if (path.empty()) out << content;
    else write_file(path, content);
}

Json optional_json(const std::optional<double>& v, const char* missing = "unreachable") {
    if (v) return *v;
    return missing;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += (c == '"') ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
}

// --- subcommands ----------------------------------------------------------

int cmd_analyze(const Params& p, std::ostream& out) {
    const std::string content = read_file(p.trace);
    const auto ts = parse_trace_set(content);
    const auto td = extract_tuple_distribution(ts, p.window_len, p.grid_levels);

    RunManifest m;
    m.subcommand = "analyze";
    m.config = {{"window_len", p.window_len}, {"grid_levels", p.grid_levels}};
    m.input_digests["trace"] = sha256_hex(content);
    m.master_seed = p.seed;

    bool degenerate = false;
    Json links = Json::array();
    for (const auto& t : ts.traces()) {
        const auto measured = measure_uetx(t);
        const auto model = uetx(t.prr());
        degenerate = degenerate || !measured;
        links.push_back({{"receiver", t.receiver_id},
                         {"prr", t.prr()},
                         {"uetx", optional_json(model.value)},
                         {"uetx_measured", optional_json(measured ? std::optional(measured->value) : std::nullopt)}});
    }
    Json corr = Json::array();
    const auto& traces = ts.traces();
    for (std::size_t i = 0; i < traces.size(); ++i)
        for (std::size_t j = i + 1; j < traces.size(); ++j)
            corr.push_back({{"a", traces[i].receiver_id},
                            {"b", traces[j].receiver_id},
                            {"pearson", optional_json(link_correlation(traces[i], traces[j]), "undefined")}});
    const auto a = measure_aetx(ts);
    const auto b = measure_betx(ts);
    degenerate = degenerate || !a || !b;

    Json report;
    report["manifest"] = m.to_json();
    report["sender"] = ts.sender_id();
    report["rounds"] = ts.rounds();
    report["windows"] = ts.rounds() / p.window_len;
    report["links"] = links;
    report["correlations"] = corr;
    report["aetx_measured"] = optional_json(a ? std::optional(a->value) : std::nullopt);
    report["betx_measured"] = optional_json(b ? std::optional(b->value) : std::nullopt);
    report["aetx_3dw"] = optional_json(aetx_3dw(td).value);
    report["betx_3dw"] = optional_json(betx_3dw(td).value);

    Json dist = to_json(td);
    dist["manifest"] = m.to_json();
    if (p.out.empty()) {
        report["distribution"] = to_json(td);
        out << pretty(report);
    } else {
        write_file(fs::path(p.out) / "distribution.json", pretty(dist));
        write_file(fs::path(p.out) / "report.json", pretty(report));
    }
    return degenerate ? kDegenerate : kOk;
}

int cmd_estimate(const Params& p, std::ostream& out, std::ostream& err) {
    const std::string content = read_file(p.dist);
    const auto td = tuple_distribution_from_json(parse_json(content));

    std::set<std::string> wanted;
    std::stringstream ss(p.models);
    std::string name;
    while (std::getline(ss, name, ',')) {
        if (name == "all") {
            for (Model mdl : {Model::Unicast, Model::ThreeDW, Model::PrrOnlyA, Model::Twc14, Model::Tvt09, Model::CorLayer})
                wanted.insert(std::string(model_name(mdl)));
            continue;
        }
        try {
            wanted.insert(std::string(model_name(parse_model(name))));
        } catch (const std::invalid_argument& e) {
            err << "error: " << e.what() << "\n";
            return kUsage;
        }
    }

    RunManifest m;
    m.subcommand = "estimate";
    m.config = {{"models", p.models}, {"budget", p.budget}};
    m.input_digests["distribution"] = sha256_hex(content);
    m.master_seed = p.seed;

    auto rows = evaluate_all(td);
    if (wanted.count("APPROX_3DW")) {
        const std::size_t budget = p.budget == 0 ? std::numeric_limits<std::size_t>::max() : p.budget;
        rows.push_back(betx_approx(td, budget, p.seed));
    }
    const std::string label = fs::path(p.dist).stem().string();
    std::string csv = csv_manifest_line(m) + "distribution,model,metric,receiver,value,op_count,note\n";
    bool degenerate = false;
    for (const auto& e : rows) {
        if (!wanted.count(std::string(model_name(e.model)))) continue;
        degenerate = degenerate || !e.value;
        csv += csv_field(label) + ',' + std::string(model_name(e.model)) + ',' + std::string(metric_name(e.metric)) + ',' +
               csv_field(e.receiver) + ',' + (e.value ? format_number(*e.value) : "unreachable") + ',' +
               std::to_string(e.op_count) + ',' + csv_field(e.note) + '\n';
    }
    emit(csv, p.out, out);
    return degenerate ? kDegenerate : kOk;
}

SynthConfig synth_from_params(const Params& p, RunManifest& m) {
    SynthConfig cfg;
    if (!p.synth_config.empty()) {
        const std::string content = read_file(p.synth_config);
        cfg = synth_config_from_json(parse_json(content));
        m.input_digests["synth_config"] = sha256_hex(content);
    } else {
        if (p.marginals.empty()) throw std::invalid_argument("--marginals or --synth-config is required");
        cfg.marginals = p.marginals;
        cfg.rho = p.rho;
        cfg.burst = parse_burst(p.burst);
        cfg.rounds = p.rounds;
        cfg.seed = p.seed;
    }
    cfg.validate();
    return cfg;
}

int cmd_oracle(const Params& p, std::ostream& out) {
    RunManifest m;
    m.subcommand = "oracle";
    const auto cfg = synth_from_params(p, m);
    m.master_seed = p.seed;
    m.config = {{"synth", to_json(cfg)}, {"trials", p.trials}, {"metric", p.metric}};
    if (p.metric != "both" && p.metric != "aetx" && p.metric != "betx")
        throw std::invalid_argument("--metric must be aetx, betx or both");

    Json doc;
    doc["manifest"] = m.to_json();
    bool degenerate = false;
    Engine seeds = derive_stream(p.seed, std::string_view("oracle"));
    const std::uint64_t a_seed = seeds(), b_seed = seeds();
    if (p.metric != "betx") {
        const auto r = oracle_aetx(cfg, p.trials, a_seed, p.workers);
        degenerate = degenerate || !r.mean;
        doc["aetx"] = to_json(r);
    }
    if (p.metric != "aetx") {
        const auto r = oracle_betx(cfg, p.trials, b_seed, p.workers);
        degenerate = degenerate || !r.mean;
        doc["betx"] = to_json(r);
    }
    emit(pretty(doc), p.out, out);
    return degenerate ? kDegenerate : kOk;
}

int cmd_sweep(const Params& p, std::ostream& out) {
    if (p.marginals.empty()) throw std::invalid_argument("--marginals is required");
    SweepOptions opt;
    opt.marginals = p.marginals;
    opt.rho_grid = p.rho_grid;
    opt.burst = parse_burst(p.burst);
    opt.trials = p.trials;
    opt.rounds = p.rounds;
    opt.window_len = p.sweep_window_len;
    opt.grid_levels = p.grid_levels;
    opt.seed = p.seed;
    opt.workers = p.workers;

    RunManifest m;
    m.subcommand = "sweep";
    m.master_seed = p.seed;
    m.config = {{"marginals", opt.marginals}, {"rho_grid", opt.rho_grid}, {"burst", burst_text(opt.burst)},
                {"trials", opt.trials},       {"rounds", opt.rounds},     {"window_len", opt.window_len},
                {"grid_levels", opt.grid_levels}};
    emit(csv_manifest_line(m) + sweep_to_csv(sweep_correlation(opt)), p.out, out);
    return kOk;
}

int cmd_fit(const Params& p, std::ostream& out) {
    const std::string content = read_file(p.trace);
    const auto ts = parse_trace_set(content);
    FitOptions opt;
    opt.k1 = p.k1;
    opt.window_len = p.window_len;
    opt.segment_len = p.segment_len;
    opt.grid_levels = p.grid_levels;
    opt.seed = p.seed;
    const auto dm = fit_double_markov(ts, opt);

    RunManifest m;
    m.subcommand = "fit";
    m.master_seed = p.seed;
    m.config = {{"k1", p.k1}, {"window_len", p.window_len}, {"segment_len", p.segment_len}, {"grid_levels", p.grid_levels}};
    m.input_digests["trace"] = sha256_hex(content);

    Json doc;
    doc["format_version"] = kFormatVersion;
    doc["manifest"] = m.to_json();
    doc["footprint_bytes"] = model_memory_footprint(dm);
    doc["model"] = to_json(dm);
    emit(pretty(doc), p.out, out);
    return kOk;
}

int cmd_gen(const Params& p, std::ostream& out) {
    const std::string content = read_file(p.model);
    const Json doc = parse_json(content);
    const auto dm = double_markov_from_json(doc.contains("model") ? doc.at("model") : doc);

    RunManifest m;
    m.subcommand = "gen";
    m.master_seed = p.seed;
    m.config = {{"rounds", p.rounds}, {"independent", p.independent}};
    m.input_digests["model"] = sha256_hex(content);

    const auto ts = p.independent
                        ? generate_independent_links(dm.receiver_order, stationary_marginals(dm), p.rounds, p.seed, dm.sender_id)
                        : generate_traces(dm, p.rounds, p.seed);
    emit(csv_manifest_line(m) + format_trace_set(ts), p.out, out);
    return kOk;
}

struct CompareRow {
    std::string metric;
    std::string run;
    std::string receiver;
    std::optional<double> rel_error;
};

int cmd_compare(const Params& p, std::ostream& out) {
    const std::string src_content = read_file(p.source);
    const auto source = parse_trace_set(src_content);
    std::vector<fs::path> runs;
    if (fs::is_directory(p.generated)) {
        for (const auto& entry : fs::directory_iterator(p.generated))
            if (entry.is_regular_file()) runs.push_back(entry.path());
        std::sort(runs.begin(), runs.end());
    } else {
        runs.emplace_back(p.generated);
    }
    if (runs.empty()) throw FormatError("no generated traces found");

    RunManifest m;
    m.subcommand = "compare";
    m.master_seed = p.seed;
    m.input_digests["source"] = sha256_hex(src_content);

    const auto src_ids = source.receiver_ids();
    const auto rel = [](const std::optional<EmpiricalEtx>& gen, const std::optional<EmpiricalEtx>& src) -> std::optional<double> {
        if (!gen || !src) return std::nullopt;
        return relative_error(gen->value, src->value);
    };
    const auto src_a = measure_aetx(source);
    const auto src_b = measure_betx(source);

    std::vector<CompareRow> rows;
    for (const auto& path : runs) {
        const std::string content = read_file(path);
        const std::string run = path.filename().string();
        m.input_digests["generated/" + run] = sha256_hex(content);
        const auto gen = parse_trace_set(content);
        auto gen_ids = gen.receiver_ids();
        if (std::set(gen_ids.begin(), gen_ids.end()) != std::set(src_ids.begin(), src_ids.end()))
            throw FormatError("receiver set of '" + run + "' does not match the source");
        std::vector<std::size_t> perm;
        for (const auto& id : src_ids)
            perm.push_back(static_cast<std::size_t>(std::find(gen_ids.begin(), gen_ids.end(), id) - gen_ids.begin()));
        const auto aligned = gen.permuted(perm);
        for (std::size_t i = 0; i < src_ids.size(); ++i)
            rows.push_back({"uETX", run, src_ids[i], rel(measure_uetx(aligned.traces()[i]), measure_uetx(source.traces()[i]))});
        rows.push_back({"aETX", run, "", rel(measure_aetx(aligned), src_a)});
        rows.push_back({"bETX", run, "", rel(measure_betx(aligned), src_b)});
    }

    std::string csv = csv_manifest_line(m) + "metric,rank,rel_error,cdf,run,receiver\n";
    for (const std::string metric : {"uETX", "aETX", "bETX"}) {
        std::vector<CompareRow> sel;
        for (const auto& r : rows)
            if (r.metric == metric) sel.push_back(r);
        std::stable_sort(sel.begin(), sel.end(), [](const CompareRow& a, const CompareRow& b) {
            if (a.rel_error.has_value() != b.rel_error.has_value()) return a.rel_error.has_value();
            return a.rel_error && *a.rel_error < *b.rel_error;
        });
        for (std::size_t k = 0; k < sel.size(); ++k) {
            const auto& r = sel[k];
            csv += metric + ',' + std::to_string(k + 1) + ',' +
                   (r.rel_error ? format_number(*r.rel_error) : std::string("unreachable")) + ',' +
                   format_number(static_cast<double>(k + 1) / static_cast<double>(sel.size())) + ',' + csv_field(r.run) +
                   ',' + csv_field(r.receiver) + '\n';
        }
    }
    emit(csv, p.out, out);
    return kOk;
}

int cmd_route(const Params& p, std::ostream& out) {
    const std::string content = read_file(p.scenario);
    const Json sc = parse_json(content);
    const fs::path base = fs::path(p.scenario).parent_path();

    RunManifest m;
    m.subcommand = "route";
    m.master_seed = p.seed;
    m.input_digests["scenario"] = sha256_hex(content);

    std::vector<Candidate> candidates;
    std::vector<std::string> universe;
    std::string mode = p.mode;
    std::size_t budget = p.budget;
    try {
        if (mode.empty()) mode = sc.value("mode", std::string("forwarder"));
        if (budget == 0) budget = sc.value("budget", std::size_t{0});
        for (const auto& s : sc.at("senders")) {
            Candidate c;
            c.id = s.at("id").get<std::string>();
            if (s.contains("distribution_file")) {
                const std::string rel = s.at("distribution_file").get<std::string>();
                const std::string dcontent = read_file(base / rel);
                m.input_digests["distribution/" + rel] = sha256_hex(dcontent);
                c.distribution = tuple_distribution_from_json(parse_json(dcontent));
            } else {
                c.distribution = tuple_distribution_from_json(s.at("distribution"));
            }
            candidates.push_back(std::move(c));
        }
        if (sc.contains("universe")) universe = sc.at("universe").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("scenario: ") + e.what());
    }
    if (candidates.empty()) throw FormatError("scenario lists no senders");
    if (budget == 0) budget = std::numeric_limits<std::size_t>::max();
    m.config = {{"mode", mode}, {"budget", budget == std::numeric_limits<std::size_t>::max() ? Json("exhaustive") : Json(budget)}};

    Json doc;
    doc["manifest"] = m.to_json();
    doc["mode"] = mode;
    std::string csv = csv_manifest_line(m);
    bool degenerate = false;
    if (mode == "forwarder" || mode == "sender") {
        const auto res = mode == "forwarder" ? select_forwarder_set(candidates) : select_sender(candidates, budget, p.seed);
        degenerate = !res.chosen;
        doc["chosen"] = res.chosen ? Json(*res.chosen) : Json("unreachable");
        doc["score"] = to_json(res.score);
        Json ranking = Json::array();
        csv += "rank,id,model,metric,score,op_count\n";
        for (std::size_t i = 0; i < res.ranking.size(); ++i) {
            const auto& [id, est] = res.ranking[i];
            Json entry = to_json(est);
            entry["id"] = id;
            ranking.push_back(entry);
            csv += std::to_string(i + 1) + ',' + csv_field(id) + ',' + std::string(model_name(est.model)) + ',' +
                   std::string(metric_name(est.metric)) + ',' + (est.value ? format_number(*est.value) : "unreachable") +
                   ',' + std::to_string(est.op_count) + '\n';
        }
        doc["ranking"] = ranking;
    } else if (mode == "disseminate") {
        if (universe.empty()) {
            std::set<std::string> all;
            for (const auto& c : candidates)
                for (const auto& r : c.distribution.receiver_order()) all.insert(r);
            universe.assign(all.begin(), all.end());
        }
        const auto plan = greedy_dissemination(candidates, universe);
        degenerate = !plan.total_expected_tx;
        Json steps = Json::array();
        csv += "step,sender,betx,newly_covered\n";
        for (std::size_t i = 0; i < plan.steps.size(); ++i) {
            const auto& s = plan.steps[i];
            steps.push_back({{"sender", s.sender}, {"betx", s.betx}, {"newly_covered", s.newly_covered}});
            std::string covered;
            for (const auto& r : s.newly_covered) covered += (covered.empty() ? "" : ";") + r;
            csv += std::to_string(i + 1) + ',' + csv_field(s.sender) + ',' + format_number(s.betx) + ',' + csv_field(covered) + '\n';
        }
        doc["schedule"] = steps;
        doc["total_expected_tx"] = optional_json(plan.total_expected_tx);
        if (!plan.uncovered.empty()) doc["uncovered"] = plan.uncovered;
    } else {
        throw std::invalid_argument("--mode must be forwarder, sender or disseminate");
    }

    if (p.out.empty()) {
        out << pretty(doc);
    } else {
        write_file(fs::path(p.out) / "result.json", pretty(doc));
        write_file(fs::path(p.out) / "ranking.csv", csv);
    }
    return degenerate ? kDegenerate : kOk;
}

} // namespace

Json RunManifest::to_json() const {
    Json digests = Json::object();
    for (const auto& [k, v] : input_digests) digests[k] = v;
    return {{"subcommand", subcommand},
            {"config", config},
            {"input_digests", digests},
            {"master_seed", master_seed},
            {"tool_version", tool_version}};
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Params p;
    try {
        load_config(p, args);
    } catch (const FormatError& e) {
        err << "config error: " << e.what() << "\n";
        return kFormat;
    } catch (const std::exception& e) {
        err << "config error: " << e.what() << "\n";
        return kUsage;
    }

    CLI::App app{"Wireless reception statistics, ETX estimators and trace simulation", "threedw"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file (flags > THREEDW_* env > config)");

    auto* analyze = app.add_subcommand("analyze", "Extract the tuple table and link statistics from a trace");
    flag(analyze, "--trace", p.trace, "Trace file")->required();
    flag(analyze, "--window-len", p.window_len, "Rounds per window");
    flag(analyze, "--grid-levels", p.grid_levels, "PRR quantization levels");
    flag(analyze, "--seed", p.seed, "Master seed (recorded only)");
    flag(analyze, "--out", p.out, "Output directory (stdout if omitted)");

    auto* estimate = app.add_subcommand("estimate", "Evaluate ETX estimators on a tuple table");
    flag(estimate, "--dist", p.dist, "Tuple distribution document")->required();
    flag(estimate, "--models", p.models, "Comma list of models or 'all'");
    flag(estimate, "--budget", p.budget, "Subset budget for APPROX_3DW (0 = exhaustive)");
    flag(estimate, "--seed", p.seed, "Master seed");
    flag(estimate, "--out", p.out, "Output CSV (stdout if omitted)");

    auto* oracle = app.add_subcommand("oracle", "Monte Carlo ground truth for a synthetic process");
    flag(oracle, "--marginals", p.marginals, "Per-receiver PRRs")->delimiter(',');
    flag(oracle, "--rho", p.rho, "Shared-uniform coupling in [0,1]");
    flag(oracle, "--burst", p.burst, "none or p_stay_good,p_stay_bad,good_scale,bad_scale");
    flag(oracle, "--synth-config", p.synth_config, "Synthetic config JSON (overrides the flags above)");
    flag(oracle, "--metric", p.metric, "aetx, betx or both");
    flag(oracle, "--trials", p.trials, "Delivery epochs to simulate");
    flag(oracle, "--workers", p.workers, "Worker threads (result does not depend on it)");
    flag(oracle, "--seed", p.seed, "Master seed");
    flag(oracle, "--out", p.out, "Output JSON (stdout if omitted)");

    auto* sweep = app.add_subcommand("sweep", "Estimator accuracy across spatial coupling");
    flag(sweep, "--marginals", p.marginals, "Per-receiver PRRs")->delimiter(',');
    flag(sweep, "--rho-grid", p.rho_grid, "Coupling values")->delimiter(',');
    flag(sweep, "--burst", p.burst, "none or p_stay_good,p_stay_bad,good_scale,bad_scale");
    flag(sweep, "--trials", p.trials, "Oracle epochs per point");
    flag(sweep, "--rounds", p.rounds, "Trace rounds per point");
    flag(sweep, "--window-len", p.sweep_window_len, "Rounds per window for tuple extraction");
    flag(sweep, "--grid-levels", p.grid_levels, "PRR quantization levels");
    flag(sweep, "--workers", p.workers, "Worker threads (result does not depend on it)");
    flag(sweep, "--seed", p.seed, "Master seed");
    flag(sweep, "--out", p.out, "Output CSV (stdout if omitted)");

    auto* fit = app.add_subcommand("fit", "Fit the double-level Markov simulator to a trace");
    flag(fit, "--trace", p.trace, "Trace file")->required();
    flag(fit, "--k1", p.k1, "Level-1 clusters");
    flag(fit, "--window-len", p.window_len, "Rounds per window");
    flag(fit, "--segment-len", p.segment_len, "Windows per level-1 step");
    flag(fit, "--grid-levels", p.grid_levels, "PRR quantization levels");
    flag(fit, "--seed", p.seed, "k-means seed");
    flag(fit, "--out", p.out, "Output model JSON (stdout if omitted)");

    auto* gen = app.add_subcommand("gen", "Generate a trace from a fitted model");
    flag(gen, "--model", p.model, "Model JSON from 'fit'")->required();
    flag(gen, "--rounds", p.rounds, "Rounds to generate");
    gen->add_flag("--independent", p.independent, "Link-wise ablation at the model's stationary PRRs")
        ->envname(std::string(kEnvPrefix) + "INDEPENDENT");
    flag(gen, "--seed", p.seed, "Master seed");
    flag(gen, "--out", p.out, "Output trace (stdout if omitted)");

    auto* compare = app.add_subcommand("compare", "Relative-error CDF data of generated vs source traces");
    flag(compare, "--source", p.source, "Source trace")->required();
    flag(compare, "--generated", p.generated, "Generated trace or directory of traces")->required();
    flag(compare, "--seed", p.seed, "Master seed (recorded only)");
    flag(compare, "--out", p.out, "Output CSV (stdout if omitted)");

    auto* route = app.add_subcommand("route", "Forwarder/sender selection and greedy dissemination");
    flag(route, "--scenario", p.scenario, "Scenario JSON")->required();
    flag(route, "--mode", p.mode, "forwarder, sender or disseminate (default from scenario)");
    flag(route, "--budget", p.budget, "Subset budget for sender scoring (0 = scenario/exhaustive)");
    flag(route, "--seed", p.seed, "Master seed");
    flag(route, "--out", p.out, "Output directory (stdout if omitted)");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        return kUsage;
    }

    try {
        if (analyze->parsed()) return cmd_analyze(p, out);
        if (estimate->parsed()) return cmd_estimate(p, out, err);
        if (oracle->parsed()) return cmd_oracle(p, out);
        if (sweep->parsed()) return cmd_sweep(p, out);
        if (fit->parsed()) return cmd_fit(p, out);
        if (gen->parsed()) return cmd_gen(p, out);
        if (compare->parsed()) return cmd_compare(p, out);
        if (route->parsed()) return cmd_route(p, out);
    } catch (const FormatError& e) {
        err << "format error: " << e.what() << "\n";
        return kFormat;
    } catch (const DegenerateDataError& e) {
        err << "degenerate data: " << e.what() << "\n";
        return kDegenerate;
    } catch (const std::invalid_argument& e) {
        err << "invalid parameter: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kIo;
    }
    return kUsage;
}

} // namespace threedw::cli
