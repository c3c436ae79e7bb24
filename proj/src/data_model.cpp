#include "trapscore/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "trapscore/csv.hpp"
#include "trapscore/error.hpp"

namespace trapscore {
namespace {

std::string where(const csv::Table& t, const csv::Row& row) {
    return t.name() + " line " + std::to_string(row.line);
}

// Runs `parse_row`; on ValidationError/ParseError either rethrows or, with
// skip_invalid, reports a warning and returns false.
template <typename F>
bool guarded(const ParseOptions& opt, F&& parse_row) {
    try {
        parse_row();
        return true;
    } catch (const ValidationError& e) {
        if (!opt.skip_invalid) throw;
        warn(opt.warnings, std::string("skipping invalid row: ") + e.what());
    } catch (const ParseError& e) {
        if (!opt.skip_invalid) throw;
        warn(opt.warnings, std::string("skipping unparseable row: ") + e.what());
    }
    return false;
}

void require(bool ok, const std::string& where, const std::string& invariant,
             const std::string& got) {
    if (!ok) throw ValidationError(where + ": invariant violated: " + invariant + " (got " + got + ")");
}

void check_lat_lon(double lat, double lon, const std::string& w) {
    require(lat >= -90.0 && lat <= 90.0, w, "latitude in [-90, 90]", csv::format_double(lat));
    require(lon >= -180.0 && lon <= 180.0, w, "longitude in [-180, 180]", csv::format_double(lon));
}

void check_pool(const PoolObservation& p, const std::string& w) {
    require(p.week >= 1 && p.week <= 53, w, "week in [1, 53]", std::to_string(p.week));
    require(p.day_of_week >= 0 && p.day_of_week <= 6, w, "day_of_week in [0, 6]",
            std::to_string(p.day_of_week));
    require(p.pool_size >= 1, w, "pool_size >= 1", std::to_string(p.pool_size));
    require(p.pool_size <= 50, w, "pool_size <= 50", std::to_string(p.pool_size));
    require(p.pools_on_day >= 1, w, "pools_on_day >= 1", std::to_string(p.pools_on_day));
    require(p.pools_in_week >= p.pools_on_day, w, "pools_in_week >= pools_on_day",
            std::to_string(p.pools_in_week));
    require(p.mosquito_count_week >= p.pool_size, w, "mosquito_count_week >= pool_size",
            std::to_string(p.mosquito_count_week));
}

std::vector<TrapSite> parse_sites(const csv::Table& t, const ParseOptions& opt,
                                  std::vector<std::string>& covariate_names) {
    const auto c_id = t.column("trap_id");
    const auto c_lat = t.column("latitude");
    const auto c_lon = t.column("longitude");
    std::vector<std::size_t> cov_cols;
    covariate_names.clear();
    for (std::size_t c = 0; c < t.header().size(); ++c) {
        if (c == c_id || c == c_lat || c == c_lon) continue;
        cov_cols.push_back(c);
        covariate_names.push_back(t.header()[c]);
    }
    std::vector<TrapSite> sites;
    std::set<std::string> seen;
    for (const auto& row : t.rows()) {
        guarded(opt, [&] {
            TrapSite s;
            s.trap_id = t.at(row, c_id);
            const auto w = where(t, row);
            if (s.trap_id.empty()) throw ValidationError(w + ": empty trap_id");
            s.latitude = t.as_double(row, c_lat);
            s.longitude = t.as_double(row, c_lon);
            check_lat_lon(s.latitude, s.longitude, w);
            for (std::size_t k = 0; k < cov_cols.size(); ++k)
                s.covariates[covariate_names[k]] = t.as_double(row, cov_cols[k]);
            if (!seen.insert(s.trap_id).second)
                throw ValidationError(w + ": invariant violated: trap_id unique (duplicate '" +
                                      s.trap_id + "')");
            sites.push_back(std::move(s));
        });
    }
    return sites;
}

std::vector<PoolObservation> parse_pools(const csv::Table& t, const ParseOptions& opt) {
    const auto c_id = t.column("trap_id");
    const auto c_year = t.column("year");
    const auto c_week = t.column("week");
    const auto c_dow = t.column("day_of_week");
    const auto c_size = t.column("pool_size");
    const auto c_pos = t.column("test_positive");
    const auto c_count = t.column("mosquito_count_week");
    const auto c_piw = t.column("pools_in_week");
    const auto c_pod = t.column("pools_on_day");
    std::vector<PoolObservation> pools;
    pools.reserve(t.rows().size());
    for (const auto& row : t.rows()) {
        guarded(opt, [&] {
            PoolObservation p;
            p.trap_id = t.at(row, c_id);
            p.year = static_cast<int>(t.as_int(row, c_year));
            p.week = static_cast<int>(t.as_int(row, c_week));
            p.day_of_week = static_cast<int>(t.as_int(row, c_dow));
            p.pool_size = static_cast<int>(t.as_int(row, c_size));
            p.test_positive = t.as_bool01(row, c_pos);
            p.mosquito_count_week = static_cast<int>(t.as_int(row, c_count));
            p.pools_in_week = static_cast<int>(t.as_int(row, c_piw));
            p.pools_on_day = static_cast<int>(t.as_int(row, c_pod));
            check_pool(p, where(t, row));
            pools.push_back(std::move(p));
        });
    }
    return pools;
}

std::vector<HumanCase> parse_cases(const csv::Table& t, const ParseOptions& opt) {
    const auto c_lat = t.column("latitude");
    const auto c_lon = t.column("longitude");
    const auto c_year = t.column("year");
    const auto c_week = t.column("week");
    std::vector<HumanCase> cases;
    for (const auto& row : t.rows()) {
        guarded(opt, [&] {
            HumanCase h;
            h.latitude = t.as_double(row, c_lat);
            h.longitude = t.as_double(row, c_lon);
            h.year = static_cast<int>(t.as_int(row, c_year));
            h.week = static_cast<int>(t.as_int(row, c_week));
            const auto w = where(t, row);
            check_lat_lon(h.latitude, h.longitude, w);
            require(h.week >= 1 && h.week <= 53, w, "week in [1, 53]", std::to_string(h.week));
            cases.push_back(h);
        });
    }
    return cases;
}

Dataset assemble(const csv::Table& pools, const csv::Table& sites, const csv::Table& cases,
                 const ParseOptions& opt) {
    Dataset d;
    d.sites = parse_sites(sites, opt, d.covariate_names);
    d.pools = parse_pools(pools, opt);
    d.cases = parse_cases(cases, opt);

    const auto lookup = d.site_lookup();
    std::set<std::string> missing;
    for (const auto& p : d.pools)
        if (!lookup.contains(p.trap_id)) missing.insert(p.trap_id);
    if (!missing.empty()) {
        std::string list;
        for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
        if (!opt.skip_invalid)
            throw ReferentialError("pools reference trap_id(s) absent from sites: " + list);
        warn(opt.warnings, "dropping pools with unknown trap_id(s): " + list);
        std::erase_if(d.pools, [&](const PoolObservation& p) { return missing.contains(p.trap_id); });
    }
    return d;
}

}  // namespace

std::unordered_map<std::string, std::size_t> Dataset::site_lookup() const {
    std::unordered_map<std::string, std::size_t> m;
    m.reserve(sites.size());
    for (std::size_t i = 0; i < sites.size(); ++i) m.emplace(sites[i].trap_id, i);
    return m;
}

const TrapSite& Dataset::site(std::string_view trap_id) const {
    for (const auto& s : sites)
        if (s.trap_id == trap_id) return s;
    throw ReferentialError("unknown trap_id: " + std::string(trap_id));
}

Dataset parse_dataset(const DatasetPaths& paths, const ParseOptions& options) {
    for (const auto* p : {&paths.pools, &paths.sites, &paths.cases})
        if (!std::filesystem::exists(*p)) throw InputError("input file not found: " + p->string());
    return assemble(csv::Table::read(paths.pools), csv::Table::read(paths.sites),
                    csv::Table::read(paths.cases), options);
}

Dataset read_sites(const std::filesystem::path& path, const ParseOptions& options) {
    if (!std::filesystem::exists(path)) throw InputError("input file not found: " + path.string());
    Dataset d;
    d.sites = parse_sites(csv::Table::read(path), options, d.covariate_names);
    return d;
}

Dataset parse_dataset_text(std::string_view pools_csv, std::string_view sites_csv,
                           std::string_view cases_csv, const ParseOptions& options) {
    return assemble(csv::Table::parse("pools.csv", pools_csv), csv::Table::parse("sites.csv", sites_csv),
                    csv::Table::parse("cases.csv", cases_csv), options);
}

void validate(const Dataset& dataset) {
    std::set<std::string> ids;
    for (const auto& s : dataset.sites) {
        check_lat_lon(s.latitude, s.longitude, "site '" + s.trap_id + "'");
        if (!ids.insert(s.trap_id).second)
            throw ValidationError("invariant violated: trap_id unique (duplicate '" + s.trap_id + "')");
    }
    for (std::size_t i = 0; i < dataset.pools.size(); ++i) {
        const auto& p = dataset.pools[i];
        check_pool(p, "pool " + std::to_string(i));
        if (!ids.contains(p.trap_id))
            throw ReferentialError("pool " + std::to_string(i) + " references unknown trap_id " + p.trap_id);
    }
    for (std::size_t i = 0; i < dataset.cases.size(); ++i) {
        const auto& h = dataset.cases[i];
        const auto w = "case " + std::to_string(i);
        check_lat_lon(h.latitude, h.longitude, w);
        require(h.week >= 1 && h.week <= 53, w, "week in [1, 53]", std::to_string(h.week));
    }
}

std::vector<std::pair<int, int>> response_window(int year, int week, int lead_weeks) {
    std::vector<std::pair<int, int>> out;
    for (int k = 1; k <= lead_weeks; ++k) {
        const int w = week + k;
        if (week == 53) {
            out.emplace_back(year + 1, w - 53);
            continue;
        }
        if (w <= 53) out.emplace_back(year, w);
        if (w > 52) out.emplace_back(year + 1, w - 52);
    }
    return out;
}

Dataset label_responses(Dataset dataset, double radius_km, int lead_weeks) {
    if (!(radius_km > 0.0)) throw DomainError("radius_km must be > 0");
    if (lead_weeks < 1) throw DomainError("lead_weeks must be >= 1");

    std::map<std::pair<int, int>, std::vector<std::size_t>> by_week;
    for (std::size_t c = 0; c < dataset.cases.size(); ++c)
        by_week[{dataset.cases[c].year, dataset.cases[c].week}].push_back(c);

    const auto lookup = dataset.site_lookup();
    for (auto& pool : dataset.pools) {
        const auto it = lookup.find(pool.trap_id);
        if (it == lookup.end()) throw ReferentialError("unknown trap_id: " + pool.trap_id);
        const auto trap = dataset.sites[it->second].location();
        bool hit = false;
        for (const auto& key : response_window(pool.year, pool.week, lead_weeks)) {
            const auto found = by_week.find(key);
            if (found == by_week.end()) continue;
            for (const auto c : found->second) {
                if (geo::haversine_km(trap, dataset.cases[c].location()) <= radius_km) {
                    hit = true;
                    break;
                }
            }
            if (hit) break;
        }
        pool.response = hit;
    }
    return dataset;
}

void write_sites_csv(const std::filesystem::path& path, const Dataset& dataset) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << "trap_id,latitude,longitude";
    for (const auto& c : dataset.covariate_names) out << ',' << csv::escape(c);
    out << '\n';
    for (const auto& s : dataset.sites) {
        out << csv::escape(s.trap_id) << ',' << csv::format_double(s.latitude) << ','
            << csv::format_double(s.longitude);
        for (const auto& c : dataset.covariate_names) out << ',' << csv::format_double(s.covariates.at(c));
        out << '\n';
    }
}

void write_pools_csv(const std::filesystem::path& path, const Dataset& dataset) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << "trap_id,year,week,day_of_week,pool_size,test_positive,mosquito_count_week,pools_in_week,"
           "pools_on_day\n";
    for (const auto& p : dataset.pools) {
        out << csv::escape(p.trap_id) << ',' << p.year << ',' << p.week << ',' << p.day_of_week << ','
            << p.pool_size << ',' << (p.test_positive ? 1 : 0) << ',' << p.mosquito_count_week << ','
            << p.pools_in_week << ',' << p.pools_on_day << '\n';
    }
}

void write_cases_csv(const std::filesystem::path& path, const Dataset& dataset) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << "latitude,longitude,year,week\n";
    for (const auto& h : dataset.cases) {
        out << csv::format_double(h.latitude) << ',' << csv::format_double(h.longitude) << ','
            << h.year << ',' << h.week << '\n';
    }
}

}  // namespace trapscore
