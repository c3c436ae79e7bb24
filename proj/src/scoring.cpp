#include "trapscore/scoring.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_map>

#include "trapscore/csv.hpp"
#include "trapscore/error.hpp"

namespace trapscore::scoring {
namespace {

void check_unit(double v, const char* what) {
    if (!(v >= 0.0 && v <= 1.0))
        throw DomainError(std::string(what) + " must be in [0, 1] (got " + csv::format_double(v) + ")");
}

std::string opt(const std::optional<double>& v) { return v ? csv::format_double(*v) : ""; }

}  // namespace

std::set<std::string> select_tstar(const std::map<std::string, eval::TrapConfusion>& confusions) {
    std::set<std::string> out;
    for (const auto& [id, c] : confusions)
        if (c.avg_sens) out.insert(id);
    return out;
}

double score(std::optional<double> avg_sens, double avg_spec, double m) {
    if (!avg_sens) throw DomainError("score: sensitivity undefined (trap has no positive test pools)");
    if (!(m > 0.0 && m <= 1.0)) throw ConfigError("m must be in (0, 1] (got " + csv::format_double(m) + ")");
    check_unit(*avg_sens, "sensitivity");
    check_unit(avg_spec, "specificity");
    return (m * avg_spec + *avg_sens) / (m + 1.0);
}

double specificity_score(std::optional<double> avg_spec) {
    if (!avg_spec) throw DomainError("score': specificity undefined (trap has no negative test pools)");
    check_unit(*avg_spec, "specificity");
    return *avg_spec;
}

Summary summarize(const std::vector<double>& values) {
    Summary s;
    s.histogram.assign(kHistogramBins, 0);
    s.count = values.size();
    if (values.empty()) return s;
    s.min = *std::min_element(values.begin(), values.end());
    s.max = *std::max_element(values.begin(), values.end());
    double sum = 0.0;
    for (double v : values) {
        sum += v;
        const int bin = std::min(kHistogramBins - 1, static_cast<int>(v * kHistogramBins));
        ++s.histogram[static_cast<std::size_t>(std::max(bin, 0))];
    }
    s.mean = sum / static_cast<double>(values.size());
    return s;
}

ScoreReport score_report(const std::map<std::string, eval::TrapConfusion>& confusions, double m) {
    if (!(m > 0.0 && m <= 1.0)) throw ConfigError("m must be in (0, 1] (got " + csv::format_double(m) + ")");
    ScoreReport r;
    r.m = m;
    std::vector<double> scores, primes;
    for (const auto& [id, c] : confusions) {
        TrapScorecard card;
        card.trap_id = id;
        card.avg_sens = c.avg_sens;
        card.avg_spec = c.avg_spec;
        card.m = m;
        card.in_tstar = c.avg_sens.has_value();
        // A T* trap with no negative pools has no specificity to weigh.
        if (card.in_tstar && c.avg_spec) {
            card.score = score(c.avg_sens, *c.avg_spec, m);
            scores.push_back(*card.score);
        }
        if (c.avg_spec) {
            card.score_prime = specificity_score(c.avg_spec);
            primes.push_back(*card.score_prime);
        }
        r.cards.push_back(card);
    }
    if (!scores.empty()) r.score_summary = summarize(scores);
    if (!primes.empty()) r.score_prime_summary = summarize(primes);
    return r;
}

void write_scores_csv(const std::filesystem::path& path, const ScoreReport& report,
                      const std::vector<TrapSite>& sites) {
    std::unordered_map<std::string, const TrapSite*> where;
    for (const auto& s : sites) where[s.trap_id] = &s;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << "trap_id,latitude,longitude,avg_sens,avg_spec,score,score_prime,in_tstar\n";
    for (const auto& c : report.cards) {
        const auto it = where.find(c.trap_id);
        if (it == where.end()) throw ReferentialError("scores: trap_id absent from sites: " + c.trap_id);
        out << csv::escape(c.trap_id) << ',' << csv::format_double(it->second->latitude) << ','
            << csv::format_double(it->second->longitude) << ',' << opt(c.avg_sens) << ',' << opt(c.avg_spec) << ','
            << opt(c.score) << ',' << opt(c.score_prime) << ',' << (c.in_tstar ? 1 : 0) << '\n';
    }
}

std::vector<TrapScorecard> read_scores_csv(const std::filesystem::path& path) {
    const auto t = csv::Table::read(path);
    const auto c_id = t.column("trap_id"), c_sens = t.column("avg_sens"), c_spec = t.column("avg_spec"),
               c_score = t.column("score"), c_prime = t.column("score_prime"), c_in = t.column("in_tstar");
    auto get = [&](const csv::Row& row, std::size_t col) -> std::optional<double> {
        if (t.at(row, col).empty()) return std::nullopt;
        return t.as_double(row, col);
    };
    std::vector<TrapScorecard> cards;
    for (const auto& row : t.rows()) {
        TrapScorecard c;
        c.trap_id = t.at(row, c_id);
        c.avg_sens = get(row, c_sens);
        c.avg_spec = get(row, c_spec);
        c.score = get(row, c_score);
        c.score_prime = get(row, c_prime);
        c.in_tstar = t.as_bool01(row, c_in);
        cards.push_back(c);
    }
    return cards;
}

}  // namespace trapscore::scoring
