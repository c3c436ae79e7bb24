#include "trapscore/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "trapscore/causal.hpp"
#include "trapscore/csv.hpp"
#include "trapscore/error.hpp"
#include "trapscore/scoring.hpp"
#include "trapscore/svg.hpp"

namespace trapscore::pipeline {
namespace fs = std::filesystem;
namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::string normalize_key(std::string_view k) {
    std::string s = trim(k);
    while (!s.empty() && s.front() == '-') s.erase(s.begin());
    std::replace(s.begin(), s.end(), '_', '-');
    return s;
}

double to_double(std::string_view key, std::string_view v) {
    double out = 0.0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc{} || r.ptr != v.data() + v.size())
        throw ConfigError("--" + std::string(key) + ": expected a number, got '" + std::string(v) + "'");
    return out;
}

long long to_int(std::string_view key, std::string_view v) {
    long long out = 0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc{} || r.ptr != v.data() + v.size())
        throw ConfigError("--" + std::string(key) + ": expected an integer, got '" + std::string(v) + "'");
    return out;
}

bool to_bool(std::string_view key, std::string_view v) {
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw ConfigError("--" + std::string(key) + ": expected true or false, got '" + std::string(v) + "'");
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << text;
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

WarningSink sink_for(std::ostream& log) {
    return [&log](std::string_view msg) { log << "warning: " << msg << '\n'; };
}

std::string nu_text(const RunConfig& c) {
    return c.nu_mode == glmm::NuMode::grid ? "grid" : "fixed:" + csv::format_double(c.nu);
}

nlohmann::json config_json(const RunConfig& c) {
    return {{"m", c.m},
            {"seed", c.seed},
            {"nu", nu_text(c)},
            {"grouping", c.grouping == pooled::Grouping::trap_week ? "trap_week" : "trap_day"},
            {"threshold_split", c.threshold_split == eval::ThresholdSplit::test ? "test" : "train"},
            {"threshold_scope", c.threshold_scope == eval::ThresholdScope::per_fold ? "per_fold" : "global"},
            {"random_effect", c.random_effect},
            {"radius_km", c.radius_km},
            {"lead_weeks", c.lead_weeks}};
}

glmm::FitConfig fit_config(const RunConfig& c) {
    glmm::FitConfig f;
    f.random_effect = c.random_effect;
    f.nu_mode = c.nu_mode;
    f.nu = c.nu;
    return f;
}

std::string file_stem(const std::string& name) {
    std::string s;
    for (char ch : name) s += (std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_') ? ch : '_';
    return s;
}

void require_file(const fs::path& p, const std::string& hint) {
    if (!fs::exists(p)) throw InputError("missing input " + p.string() + "; " + hint);
}

}  // namespace

void RunConfig::validate() const {
    if (!(m > 0.0 && m <= 1.0)) throw ConfigError("--m must be in (0, 1] (got " + csv::format_double(m) + ")");
    if (!(nu > 0.0)) throw ConfigError("--nu: smoothness must be > 0");
    if (!(radius_km > 0.0)) throw ConfigError("--radius-km must be > 0");
    if (lead_weeks < 1) throw ConfigError("--lead-weeks must be >= 1");
    if (n_boot < 100) throw ConfigError("--n-boot must be >= 100 (got " + std::to_string(n_boot) + ")");
    if (grid_points < 2) throw ConfigError("--grid-points must be >= 2");
    if (threads < 1) throw ConfigError("--threads must be >= 1");
    if (outcome != "score" && outcome != "score_prime") throw ConfigError("--outcome must be score or score_prime");
    if (world != "fixture" && world != "quality" && world != "recovery")
        throw ConfigError("--world must be fixture, quality or recovery (got '" + world + "')");
    if (n_traps && *n_traps < 2) throw ConfigError("--n-traps must be >= 2 (got " + std::to_string(*n_traps) + ")");
}

const std::vector<std::string>& setting_names() {
    static const std::vector<std::string> names{
        "data", "pools", "sites", "cases", "dag", "out", "m", "seed", "nu", "grouping", "threshold-split",
        "threshold-scope", "skip-invalid", "random-effect", "radius-km", "lead-weeks", "n-boot", "grid-points",
        "exposures", "outcome", "threads", "world", "n-traps"};
    return names;
}

void apply_setting(RunConfig& c, std::string_view raw_key, std::string_view raw_value) {
    const std::string key = normalize_key(raw_key);
    const std::string v = trim(raw_value);
    if (key == "data") c.data = v;
    else if (key == "pools") c.pools = fs::path(v);
    else if (key == "sites") c.sites = fs::path(v);
    else if (key == "cases") c.cases = fs::path(v);
    else if (key == "dag") c.dag = fs::path(v);
    else if (key == "out") c.out = v;
    else if (key == "m") c.m = to_double(key, v);
    else if (key == "seed") {
        const auto s = to_int(key, v);
        if (s < 0) throw ConfigError("--seed must be >= 0");
        c.seed = static_cast<std::uint64_t>(s);
    } else if (key == "nu") {
        if (v == "grid") {
            c.nu_mode = glmm::NuMode::grid;
        } else if (v.rfind("fixed", 0) == 0) {
            c.nu_mode = glmm::NuMode::fixed;
            c.nu = v == "fixed" ? 0.5 : (v.size() > 6 && v[5] == ':' ? to_double(key, v.substr(6)) : to_double(key, "x"));
        } else {
            throw ConfigError("--nu must be fixed:<value> or grid (got '" + v + "')");
        }
    } else if (key == "grouping") {
        if (v == "trap_week") c.grouping = pooled::Grouping::trap_week;
        else if (v == "trap_day") c.grouping = pooled::Grouping::trap_day;
        else throw ConfigError("--grouping must be trap_week or trap_day (got '" + v + "')");
    } else if (key == "threshold-split") {
        if (v == "test") c.threshold_split = eval::ThresholdSplit::test;
        else if (v == "train") c.threshold_split = eval::ThresholdSplit::train;
        else throw ConfigError("--threshold-split must be test or train (got '" + v + "')");
    } else if (key == "threshold-scope") {
        if (v == "per_fold") c.threshold_scope = eval::ThresholdScope::per_fold;
        else if (v == "global") c.threshold_scope = eval::ThresholdScope::global;
        else throw ConfigError("--threshold-scope must be per_fold or global (got '" + v + "')");
    } else if (key == "skip-invalid") c.skip_invalid = to_bool(key, v);
    else if (key == "random-effect") c.random_effect = to_bool(key, v);
    else if (key == "radius-km") c.radius_km = to_double(key, v);
    else if (key == "lead-weeks") c.lead_weeks = static_cast<int>(to_int(key, v));
    else if (key == "n-boot") c.n_boot = static_cast<int>(to_int(key, v));
    else if (key == "grid-points") c.grid_points = static_cast<int>(to_int(key, v));
    else if (key == "exposures") {
        c.exposures.clear();
        std::stringstream ss(v);
        std::string item;
        while (std::getline(ss, item, ','))
            if (!trim(item).empty()) c.exposures.push_back(trim(item));
    } else if (key == "outcome") c.outcome = v;
    else if (key == "threads") c.threads = static_cast<int>(to_int(key, v));
    else if (key == "world") c.world = v;
    else if (key == "n-traps") c.n_traps = static_cast<int>(to_int(key, v));
    else throw ConfigError("unknown setting '" + std::string(raw_key) + "'");
}

void apply_config_file(RunConfig& c, const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config file not found: " + path.string());
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        ++n;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path.string() + " line " + std::to_string(n) + ": expected key = value");
        try {
            apply_setting(c, line.substr(0, eq), line.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError(path.string() + " line " + std::to_string(n) + ": " + e.what());
        }
    }
}

std::string synthetic_dag_text() {
    return "# causal structure of the synthetic quality worlds\n"
           "impervious -> population\n"
           "impervious -> score\n"
           "population -> score\n"
           "canopy -> score\n";
}

synth::WorldConfig world_config(const RunConfig& c) {
    synth::WorldConfig w;
    if (c.world == "recovery") {
        w = synth::recovery_world(c.seed);
    } else {
        w = synth::quality_world(c.seed);
        if (c.world == "fixture") {
            w.n_traps = 60;
            w.weeks_per_year = 5;
        }
    }
    if (c.n_traps) w.n_traps = *c.n_traps;
    return w;
}

void cmd_simulate(const RunConfig& c, std::ostream& log) {
    c.validate();
    const auto world = synth::generate_world(world_config(c));
    validate(world.dataset);
    synth::write_world(c.out, world);
    if (!world.dataset.covariate_names.empty()) write_text(c.out / "dag.txt", synthetic_dag_text());
    std::size_t positives = 0;
    for (const auto& p : world.dataset.pools) positives += p.response ? 1 : 0;
    log << "simulate: " << world.dataset.sites.size() << " traps, " << world.dataset.pools.size() << " pools ("
        << positives << " followed by a nearby case), " << world.dataset.cases.size() << " cases -> " << c.out.string()
        << '\n';
}

void cmd_phase1(const RunConfig& c, std::ostream& log) {
    c.validate();
    fs::create_directories(c.out);
    ParseOptions popt;
    popt.skip_invalid = c.skip_invalid;
    popt.warnings = sink_for(log);
    auto ds = parse_dataset({c.pools_path(), c.sites_path(), c.cases_path()}, popt);
    ds = label_responses(std::move(ds), c.radius_km, c.lead_weeks);
    ds = pooled::annotate_risk(std::move(ds), c.grouping, popt.warnings);

    const auto model = glmm::fit(ds, fit_config(c));
    log << "phase1: full fit " << model.diagnostics.iterations << " iterations, objective "
        << csv::format_double(model.diagnostics.objective) << ", sigma2 " << csv::format_double(model.matern.sigma2)
        << ", rho " << csv::format_double(model.matern.rho) << " km, nu " << csv::format_double(model.matern.nu) << '\n';
    for (const auto& note : model.diagnostics.notes) log << "phase1: " << note << '\n';
    auto mj = glmm::to_json(model);
    mj["fit_config"] = config_json(c);
    write_json(c.out / "model.json", mj);

    eval::CvConfig cv;
    cv.fit = fit_config(c);
    cv.m = c.m;
    cv.seed = c.seed;
    cv.split = c.threshold_split;
    cv.scope = c.threshold_scope;
    cv.threads = c.threads;
    cv.warnings = popt.warnings;
    const auto res = eval::cross_validate(ds, cv);

    nlohmann::json folds = nlohmann::json::array();
    svg::LinePlot roc{"ROC by fold", "false positive rate", "true positive rate", {}, {}, true};
    static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd"};
    for (const auto& r : res.reports) {
        log << "phase1: fold " << r.fold << " train " << r.n_train << " test " << r.n_test << ", "
            << r.diagnostics.iterations << " iterations, objective " << csv::format_double(r.diagnostics.objective)
            << ", threshold " << csv::format_double(r.threshold) << (r.threshold_from_train ? " (train ROC)" : "")
            << '\n';
        folds.push_back({{"fold", r.fold},
                         {"n_train", r.n_train},
                         {"n_test", r.n_test},
                         {"threshold", r.threshold},
                         {"threshold_from_train", r.threshold_from_train},
                         {"iterations", r.diagnostics.iterations},
                         {"evaluations", r.diagnostics.evaluations},
                         {"objective", r.diagnostics.objective},
                         {"gradient_norm", r.diagnostics.gradient_norm},
                         {"sigma2", r.sigma2},
                         {"rho_km", r.rho},
                         {"nu", r.nu}});
        roc.series.push_back({r.roc.fpr, r.roc.tpr, colors[r.fold % 5], "fold " + std::to_string(r.fold)});
    }
    eval::write_confusion_csv(c.out / "confusion.csv", res.traps);
    eval::write_roc_csv(c.out / "roc.csv", res.reports);
    write_text(c.out / "roc.svg", svg::render(roc));
    write_json(c.out / "phase1.json", {{"format", "trapscore.phase1"},
                                       {"version", 1},
                                       {"config", config_json(c)},
                                       {"n_pools", ds.pools.size()},
                                       {"n_traps", ds.sites.size()},
                                       {"folds", folds}});
    log << "phase1: wrote model.json, confusion.csv, roc.csv, roc.svg, phase1.json\n";
}

void cmd_phase2(const RunConfig& c, std::ostream& log) {
    c.validate();
    const auto confusion_path = c.out / "confusion.csv";
    require_file(confusion_path, "run `trapscore phase1` with the same --out first");
    const auto sites = read_sites(c.sites_path()).sites;
    const auto confusions = eval::read_confusion_csv(confusion_path);
    const auto report = scoring::score_report(confusions, c.m);
    scoring::write_scores_csv(c.out / "scores.csv", report, sites);

    auto summary = [](const std::optional<scoring::Summary>& s) -> nlohmann::json {
        if (!s) return nullptr;
        return {{"count", s->count}, {"mean", s->mean}, {"min", s->min}, {"max", s->max}, {"histogram", s->histogram}};
    };
    write_json(c.out / "phase2.json", {{"format", "trapscore.phase2"},
                                       {"version", 1},
                                       {"m", c.m},
                                       {"n_traps", report.cards.size()},
                                       {"score", summary(report.score_summary)},
                                       {"score_prime", summary(report.score_prime_summary)}});

    if (report.score_summary) {
        write_text(c.out / "score_hist.svg",
                   svg::histogram(report.score_summary->histogram, 0.0, 1.0,
                                  "Trap scores (m = " + csv::format_double(c.m) + ")", "score"));
        log << "phase2: " << report.score_summary->count << " traps scored, mean score "
            << csv::format_double(report.score_summary->mean) << '\n';
    } else {
        std::error_code ec;
        fs::remove(c.out / "score_hist.svg", ec);
        log << "warning: no trap has a defined sensitivity; score histogram omitted\n";
    }

    // Map colored by score quintile (score' when no trap has a score).
    const bool use_prime = !report.score_summary;
    std::vector<std::pair<double, const scoring::TrapScorecard*>> ranked;
    for (const auto& card : report.cards) {
        const auto& v = use_prime ? card.score_prime : card.score;
        if (v) ranked.emplace_back(*v, &card);
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::unordered_map<std::string, const TrapSite*> where;
    for (const auto& s : sites) where[s.trap_id] = &s;
    std::vector<svg::ScatterPoint> pts;
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        const auto* s = where.at(ranked[i].second->trap_id);
        pts.push_back({s->longitude, s->latitude, static_cast<int>(5 * i / ranked.size())});
    }
    write_text(c.out / "score_map.svg",
               svg::scatter(pts, {"Q1 (lowest)", "Q2", "Q3", "Q4", "Q5 (highest)"},
                            use_prime ? "Traps by score' quintile" : "Traps by score quintile", "longitude", "latitude"));
    if (report.score_prime_summary)
        log << "phase2: " << report.score_prime_summary->count << " traps with score', mean "
            << csv::format_double(report.score_prime_summary->mean) << '\n';
    log << "phase2: wrote scores.csv, phase2.json, score_map.svg" << (report.score_summary ? ", score_hist.svg" : "")
        << '\n';
}

void cmd_phase3(const RunConfig& c, std::ostream& log) {
    c.validate();
    const auto scores_path = c.out / "scores.csv";
    require_file(scores_path, "run `trapscore phase2` with the same --out first");
    require_file(c.dag_path(), "pass --dag with the causal graph");
    const auto dag = causal::Dag::load(c.dag_path());
    const auto sites = read_sites(c.sites_path());
    const auto cards = scoring::read_scores_csv(scores_path);

    causal::Phase3Config pc;
    pc.outcome = c.outcome == "score" ? causal::Outcome::score : causal::Outcome::score_prime;
    pc.outcome_node = "score";
    pc.grid_points = c.grid_points;
    pc.bootstrap.n_boot = c.n_boot;
    pc.bootstrap.seed = c.seed;
    pc.bootstrap.threads = c.threads;
    pc.warnings = sink_for(log);
    pc.exposures = c.exposures;
    if (pc.exposures.empty()) {
        const std::set<std::string> cols(sites.covariate_names.begin(), sites.covariate_names.end());
        for (const auto& n : dag.nodes())
            if (n != pc.outcome_node && !dag.is_hidden(n) && cols.count(n)) pc.exposures.push_back(n);
        std::sort(pc.exposures.begin(), pc.exposures.end());
    }
    const auto results = causal::run_phase3(cards, sites.sites, dag, pc);
    for (const auto& r : results) {
        const auto stem = "adrf_" + file_stem(r.exposure);
        causal::write_adrf_csv(c.out / (stem + ".csv"), r);
        if (!r.adrf) {
            log << "phase3: " << r.exposure << ": not identifiable\n";
            continue;
        }
        const auto& a = *r.adrf;
        std::vector<double> lo, hi;
        for (std::size_t i = 0; i < a.grid.size(); ++i) {
            lo.push_back(a.mu[i] - 1.96 * a.se[i]);
            hi.push_back(a.mu[i] + 1.96 * a.se[i]);
        }
        std::string adj;
        for (const auto& v : r.adjustment_set) adj += (adj.empty() ? "" : ", ") + v;
        svg::LinePlot plot{"ADRF of " + c.outcome + " on " + r.exposure + " (adjusted for {" + adj + "})",
                           r.exposure, "mean " + c.outcome, {{a.grid, a.mu, "#1f77b4", "estimate"}},
                           {{a.grid, lo, hi, "#1f77b4"}}, false};
        write_text(c.out / (stem + ".svg"), svg::render(plot));
        log << "phase3: " << r.exposure << ": adjustment set {" << adj << "}, mu(" << csv::format_double(a.grid.front())
            << ") = " << csv::format_double(a.mu.front()) << ", mu(" << csv::format_double(a.grid.back())
            << ") = " << csv::format_double(a.mu.back()) << '\n';
    }
    write_json(c.out / "phase3_summary.json", causal::summary_json(results, pc));
    log << "phase3: wrote phase3_summary.json and " << results.size() << " ADRF file set(s)\n";
}

void cmd_all(const RunConfig& c, std::ostream& log) {
    c.validate();
    cmd_phase1(c, log);
    cmd_phase2(c, log);
    if (!fs::exists(c.dag_path())) {
        log << "warning: no DAG at " << c.dag_path().string() << "; phase3 skipped\n";
        return;
    }
    cmd_phase3(c, log);
}

}  // namespace trapscore::pipeline
