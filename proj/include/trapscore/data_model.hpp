#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "trapscore/diagnostics.hpp"
#include "trapscore/geo.hpp"

namespace trapscore {

// Surveillance site. Covariates are pre-aggregated per trap (e.g. over a
// 1500 m buffer) and keyed by the sites.csv column name.
struct TrapSite {
    std::string trap_id;
    double latitude = 0.0;
    double longitude = 0.0;
    std::map<std::string, double> covariates;

    geo::LatLon location() const { return {latitude, longitude}; }
};

// One tested mosquito pool. `risk` is filled by annotate_risk and `response`
// by label_responses.
struct PoolObservation {
    std::string trap_id;
    int year = 0;
    int week = 1;
    int day_of_week = 0;
    int pool_size = 1;
    bool test_positive = false;
    int mosquito_count_week = 1;
    int pools_in_week = 1;
    int pools_on_day = 1;
    double risk = 0.0;
    bool response = false;
};

struct HumanCase {
    double latitude = 0.0;
    double longitude = 0.0;
    int year = 0;
    int week = 1;

    geo::LatLon location() const { return {latitude, longitude}; }
};

struct Dataset {
    std::vector<TrapSite> sites;
    std::vector<PoolObservation> pools;
    std::vector<HumanCase> cases;
    // sites.csv covariate columns in header order
    std::vector<std::string> covariate_names;

    // trap_id -> index into sites
    std::unordered_map<std::string, std::size_t> site_lookup() const;
    const TrapSite& site(std::string_view trap_id) const;
};

struct ParseOptions {
    // Downgrade row-level validation failures to warnings and drop the row.
    bool skip_invalid = false;
    WarningSink warnings;
};

struct DatasetPaths {
    std::filesystem::path pools;
    std::filesystem::path sites;
    std::filesystem::path cases;
};

Dataset parse_dataset(const DatasetPaths& paths, const ParseOptions& options = {});

// Sites only (pools and cases left empty).
Dataset read_sites(const std::filesystem::path& path, const ParseOptions& options = {});

// In-memory variant used by tests and the simulator round trip.
Dataset parse_dataset_text(std::string_view pools_csv, std::string_view sites_csv,
                           std::string_view cases_csv, const ParseOptions& options = {});

// Checks every type invariant and referential integrity; throws on the first violation.
void validate(const Dataset& dataset);

// Marks each pool positive iff a human case lies within radius_km of its trap
// during the lead_weeks weeks strictly after the pool's week.
Dataset label_responses(Dataset dataset, double radius_km = 1.5, int lead_weeks = 2);

// The (year, week) pairs a case may fall in to count for a pool collected in
// (year, week). Weeks past 52 are also mapped into the following year, since
// a 53rd week exists only in some years; a pool in week 53 rolls over
// to week 1.
std::vector<std::pair<int, int>> response_window(int year, int week, int lead_weeks);

void write_sites_csv(const std::filesystem::path& path, const Dataset& dataset);
void write_pools_csv(const std::filesystem::path& path, const Dataset& dataset);
void write_cases_csv(const std::filesystem::path& path, const Dataset& dataset);

}  // namespace trapscore
