#include "trapscore/causal.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <fstream>
#include <numbers>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "trapscore/csv.hpp"
#include "trapscore/error.hpp"
#include "trapscore/kernels.hpp"
#include "trapscore/random.hpp"

namespace trapscore::causal {
namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

constexpr std::string_view kHidden = "hidden:";

bool starts_with_hidden(const std::string& s) { return s.rfind(kHidden, 0) == 0; }

using Adjacency = std::vector<std::vector<int>>;

bool dsep_impl(const Adjacency& parents, const std::set<int>& xs, const std::set<int>& ys,
               const std::set<int>& zs) {
    for (int x : xs)
        if (ys.count(x)) return false;
    const auto n = parents.size();
    // Ancestral closure of xs, ys and zs.
    std::vector<char> in(n, 0);
    std::deque<int> q;
    for (const auto* s : {&xs, &ys, &zs})
        for (int v : *s)
            if (!in[static_cast<std::size_t>(v)]) {
                in[static_cast<std::size_t>(v)] = 1;
                q.push_back(v);
            }
    while (!q.empty()) {
        const int v = q.front();
        q.pop_front();
        for (int p : parents[static_cast<std::size_t>(v)])
            if (!in[static_cast<std::size_t>(p)]) {
                in[static_cast<std::size_t>(p)] = 1;
                q.push_back(p);
            }
    }
    // Moral graph of the ancestral set.
    std::vector<std::set<int>> adj(n);
    for (std::size_t v = 0; v < n; ++v) {
        if (!in[v]) continue;
        const auto& ps = parents[v];
        for (std::size_t i = 0; i < ps.size(); ++i) {
            adj[v].insert(ps[i]);
            adj[static_cast<std::size_t>(ps[i])].insert(static_cast<int>(v));
            for (std::size_t j = i + 1; j < ps.size(); ++j) {
                adj[static_cast<std::size_t>(ps[i])].insert(ps[j]);
                adj[static_cast<std::size_t>(ps[j])].insert(ps[i]);
            }
        }
    }
    std::vector<char> seen(n, 0);
    for (int z : zs) seen[static_cast<std::size_t>(z)] = 1;
    for (int x : xs)
        if (!seen[static_cast<std::size_t>(x)]) {
            seen[static_cast<std::size_t>(x)] = 1;
            q.push_back(x);
        }
    while (!q.empty()) {
        const int v = q.front();
        q.pop_front();
        if (ys.count(v)) return false;
        for (int w : adj[static_cast<std::size_t>(v)])
            if (!seen[static_cast<std::size_t>(w)]) {
                seen[static_cast<std::size_t>(w)] = 1;
                q.push_back(w);
            }
    }
    return true;
}

double normal_density(double t, double mean, double sigma2) {
    const double z = t - mean;
    return std::exp(-0.5 * z * z / sigma2) / std::sqrt(2.0 * std::numbers::pi * sigma2);
}

}  // namespace

// ---------------------------------------------------------------- DAG

Dag Dag::parse(std::string_view text, const std::string& source) {
    Dag dag;
    std::size_t line_no = 0;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = source + " line " + std::to_string(line_no);
        auto node_token = [&](std::string tok) {
            tok = trim(tok);
            bool hidden = false;
            if (starts_with_hidden(tok)) {
                hidden = true;
                tok = trim(std::string_view(tok).substr(kHidden.size()));
            }
            if (tok.empty()) throw ParseError(where + ": empty node name");
            if (tok.find_first_of(" \t,") != std::string::npos)
                throw ParseError(where + ": invalid node name '" + tok + "'");
            dag.add_node(tok, hidden);
            return tok;
        };
        if (line.find("->") == std::string::npos) {
            if (starts_with_hidden(line) && line.find(',') != std::string::npos) {
                std::stringstream names(line.substr(kHidden.size()));
                std::string tok;
                while (std::getline(names, tok, ',')) node_token(std::string(kHidden) + trim(tok));
            } else {
                node_token(line);
            }
            continue;
        }
        std::vector<std::string> chain;
        std::size_t pos = 0;
        while (true) {
            const auto arrow = line.find("->", pos);
            chain.push_back(node_token(line.substr(pos, arrow == std::string::npos ? std::string::npos : arrow - pos)));
            if (arrow == std::string::npos) break;
            pos = arrow + 2;
        }
        for (std::size_t i = 0; i + 1 < chain.size(); ++i) dag.add_edge(chain[i], chain[i + 1]);
    }
    dag.check_acyclic();
    return dag;
}

Dag Dag::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("DAG file not found: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

void Dag::add_node(const std::string& name, bool hidden) {
    const auto it = index_.find(name);
    if (it != index_.end()) {
        if (hidden) hidden_[static_cast<std::size_t>(it->second)] = true;
        return;
    }
    index_.emplace(name, static_cast<int>(names_.size()));
    names_.push_back(name);
    hidden_.push_back(hidden);
    children_.emplace_back();
    parents_.emplace_back();
}

void Dag::add_edge(const std::string& from, const std::string& to) {
    add_node(from);
    add_node(to);
    const int a = index_.at(from), b = index_.at(to);
    auto& ch = children_[static_cast<std::size_t>(a)];
    if (std::find(ch.begin(), ch.end(), b) != ch.end()) return;
    ch.push_back(b);
    parents_[static_cast<std::size_t>(b)].push_back(a);
}

void Dag::check_acyclic() const {
    const auto n = names_.size();
    std::vector<int> color(n, 0), stack;
    std::function<void(int)> visit = [&](int v) {
        color[static_cast<std::size_t>(v)] = 1;
        stack.push_back(v);
        for (int w : children_[static_cast<std::size_t>(v)]) {
            if (color[static_cast<std::size_t>(w)] == 1) {
                std::string cycle;
                const auto start = std::find(stack.begin(), stack.end(), w);
                for (auto it = start; it != stack.end(); ++it) cycle += names_[static_cast<std::size_t>(*it)] + " -> ";
                throw ValidationError("DAG contains a cycle: " + cycle + names_[static_cast<std::size_t>(w)]);
            }
            if (color[static_cast<std::size_t>(w)] == 0) visit(w);
        }
        stack.pop_back();
        color[static_cast<std::size_t>(v)] = 2;
    };
    for (std::size_t v = 0; v < n; ++v)
        if (color[v] == 0) visit(static_cast<int>(v));
}

bool Dag::has_node(std::string_view name) const { return index_.find(name) != index_.end(); }

bool Dag::is_hidden(std::string_view name) const { return hidden_[static_cast<std::size_t>(index(name))]; }

int Dag::index(std::string_view name) const {
    const auto it = index_.find(name);
    if (it == index_.end()) throw DomainError("unknown DAG node '" + std::string(name) + "'");
    return it->second;
}

std::set<int> Dag::ancestors(const std::set<int>& of) const {
    std::set<int> out(of);
    std::deque<int> q(of.begin(), of.end());
    while (!q.empty()) {
        const int v = q.front();
        q.pop_front();
        for (int p : parents(v))
            if (out.insert(p).second) q.push_back(p);
    }
    return out;
}

std::set<int> Dag::descendants(const std::set<int>& of) const {
    std::set<int> out(of);
    std::deque<int> q(of.begin(), of.end());
    while (!q.empty()) {
        const int v = q.front();
        q.pop_front();
        for (int c : children(v))
            if (out.insert(c).second) q.push_back(c);
    }
    return out;
}

bool d_separated(const Dag& dag, const std::set<int>& xs, const std::set<int>& ys, const std::set<int>& zs) {
    Adjacency parents(dag.size());
    for (std::size_t v = 0; v < dag.size(); ++v) parents[v] = dag.parents(static_cast<int>(v));
    return dsep_impl(parents, xs, ys, zs);
}

bool satisfies_backdoor(const Dag& dag, int x, int y, const std::set<int>& z) {
    if (z.count(x) || z.count(y)) return false;
    const auto de = dag.descendants({x});
    for (int v : z)
        if (de.count(v)) return false;
    // Drop the edges out of x; what remains between x and y are backdoor paths.
    Adjacency parents(dag.size());
    for (std::size_t v = 0; v < dag.size(); ++v)
        for (int p : dag.parents(static_cast<int>(v)))
            if (p != x) parents[v].push_back(p);
    return dsep_impl(parents, {x}, {y}, z);
}

AdjustmentSets backdoor_adjustment_sets(const Dag& dag, std::string_view exposure, std::string_view outcome) {
    const int x = dag.index(exposure), y = dag.index(outcome);
    if (x == y) throw DomainError("exposure and outcome are the same node '" + std::string(exposure) + "'");
    const auto an = dag.ancestors({x, y});
    const auto de = dag.descendants({x});
    std::vector<int> cand;
    for (int v : an)
        if (v != x && v != y && !de.count(v) && !dag.is_hidden(dag.name(v))) cand.push_back(v);
    std::sort(cand.begin(), cand.end(), [&](int a, int b) { return dag.name(a) < dag.name(b); });
    if (cand.size() > 24)
        throw DomainError("too many candidate adjustment nodes (" + std::to_string(cand.size()) + ")");

    AdjustmentSets out;
    std::vector<std::vector<int>> found;
    const auto c = cand.size();
    for (std::size_t k = 0; k <= c; ++k) {
        // Index combinations in lexicographic order.
        std::vector<std::size_t> idx(k);
        for (std::size_t i = 0; i < k; ++i) idx[i] = i;
        while (true) {
            std::vector<int> s;
            for (auto i : idx) s.push_back(cand[i]);
            const bool superset = std::any_of(found.begin(), found.end(), [&](const std::vector<int>& f) {
                return std::all_of(f.begin(), f.end(), [&](int v) { return std::find(s.begin(), s.end(), v) != s.end(); });
            });
            if (!superset && satisfies_backdoor(dag, x, y, std::set<int>(s.begin(), s.end()))) {
                found.push_back(s);
                std::vector<std::string> names;
                for (int v : s) names.push_back(dag.name(v));
                out.sets.push_back(names);
            }
            // next combination
            std::size_t i = k;
            while (i > 0 && idx[i - 1] == c - k + i - 1) --i;
            if (i == 0) break;
            ++idx[i - 1];
            for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
        }
    }
    out.identifiable = !out.sets.empty();
    return out;
}

// ---------------------------------------------------------------- estimation

double quantile(std::vector<double> v, double q) {
    if (v.empty()) throw DomainError("quantile of an empty sample");
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= v.size()) return v.back();
    return v[lo] + (h - static_cast<double>(lo)) * (v[lo + 1] - v[lo]);
}

double GpsModel::density(double t, double m) const { return normal_density(t, m, sigma2); }

GpsModel fit_gps(const Eigen::VectorXd& t, const Eigen::MatrixXd& design, const std::vector<std::string>& names) {
    const auto n = design.rows(), p = design.cols();
    if (t.size() != n) throw DomainError("fit_gps: treatment and design differ in length");
    if (n < p + 2)
        throw DomainError("fit_gps: need at least " + std::to_string(p + 2) + " units for " + std::to_string(p) +
                          " columns (got " + std::to_string(n) + ")");
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) {
        std::vector<Eigen::Index> dropped;
        for (Eigen::Index i = qr.rank(); i < p; ++i) dropped.push_back(qr.colsPermutation().indices()(i));
        std::sort(dropped.begin(), dropped.end());
        std::string list;
        for (auto j : dropped) {
            if (!list.empty()) list += ", ";
            list += static_cast<std::size_t>(j) < names.size() ? names[static_cast<std::size_t>(j)]
                                                               : "column " + std::to_string(j);
        }
        throw RankError("treatment model design is rank deficient; collinear column(s): " + list);
    }
    GpsModel m;
    m.beta = qr.solve(t);
    const double rss = (t - design * m.beta).squaredNorm();
    m.sigma2 = rss / static_cast<double>(n - p);
    if (!(m.sigma2 >= 1e-12))
        throw DomainError("fit_gps: residual treatment variance " + csv::format_double(m.sigma2) +
                          " is degenerate (treatment is a deterministic function of the covariates)");
    return m;
}

BSplineBasis::BSplineBasis(double lo, double hi, std::vector<double> interior) {
    if (!(lo < hi)) throw DomainError("B-spline basis needs lo < hi");
    std::sort(interior.begin(), interior.end());
    interior.erase(std::unique(interior.begin(), interior.end()), interior.end());
    knots_.assign(4, lo);
    for (double k : interior)
        if (k > lo && k < hi) knots_.push_back(k);
    knots_.insert(knots_.end(), 4, hi);
}

BSplineBasis BSplineBasis::at_quantiles(const Eigen::VectorXd& x, int interior_knots) {
    std::vector<double> v(x.data(), x.data() + x.size());
    std::vector<double> interior;
    for (int j = 1; j <= interior_knots; ++j) interior.push_back(quantile(v, static_cast<double>(j) / (interior_knots + 1)));
    return {x.minCoeff(), x.maxCoeff(), interior};
}

void BSplineBasis::evaluate(double x, double* out) const {
    constexpr int p = 3;
    const std::size_t nb = size();
    std::fill(out, out + nb, 0.0);
    x = std::clamp(x, knots_.front(), knots_.back());
    std::size_t s = p;
    if (x >= knots_[nb]) {
        s = nb - 1;
    } else {
        while (s + 1 < nb && knots_[s + 1] <= x) ++s;
    }
    double n[p + 1], left[p + 1], right[p + 1];
    n[0] = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[j] = x - knots_[s + 1 - static_cast<std::size_t>(j)];
        right[j] = knots_[s + static_cast<std::size_t>(j)] - x;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            const double tmp = n[r] / (right[r + 1] + left[j - r]);
            n[r] = saved + right[r + 1] * tmp;
            saved = left[j - r] * tmp;
        }
        n[j] = saved;
    }
    for (int r = 0; r <= p; ++r) out[s - p + static_cast<std::size_t>(r)] = n[r];
}

Eigen::MatrixXd BSplineBasis::matrix(const Eigen::VectorXd& x) const {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> m(x.size(), static_cast<Eigen::Index>(size()));
    for (Eigen::Index i = 0; i < x.size(); ++i) evaluate(x(i), m.row(i).data());
    return m;
}

AdrfEstimate estimate_adrf(const Eigen::VectorXd& y, const Eigen::VectorXd& t, const Eigen::MatrixXd& x,
                           const std::vector<double>& grid, const AdrfOptions& opt) {
    const auto n = t.size();
    if (y.size() != n || x.rows() != n) throw DomainError("estimate_adrf: outcome, treatment and covariates differ in length");
    const double t_min = t.minCoeff(), t_max = t.maxCoeff();
    for (double g : grid)
        if (!(g >= t_min && g <= t_max))
            throw DomainError("extrapolation: grid point " + csv::format_double(g) + " outside observed treatment range [" +
                              csv::format_double(t_min) + ", " + csv::format_double(t_max) + "]");
    const auto q = x.cols();

    Eigen::MatrixXd d(n, q + 1);
    d.col(0).setOnes();
    d.rightCols(q) = x;
    std::vector<std::string> names{"intercept"};
    for (Eigen::Index j = 0; j < q; ++j) names.push_back("covariate " + std::to_string(j + 1));
    const auto gps = fit_gps(t, d, names);
    const Eigen::VectorXd means = gps.mean(d);
    Eigen::VectorXd r(n);
    for (Eigen::Index i = 0; i < n; ++i) r(i) = gps.density(t(i), means(i));

    const auto basis = BSplineBasis::at_quantiles(t, opt.interior_knots);
    const auto k = static_cast<Eigen::Index>(basis.size());
    Eigen::MatrixXd o(n, k + q + 2);
    o.leftCols(k) = basis.matrix(t);
    o.middleCols(k, q) = x;
    o.col(k + q) = r;
    o.col(k + q + 1) = r.cwiseProduct(t);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(o);
    qr.setThreshold(1e-10);
    if (qr.rank() < o.cols())
        throw RankError("outcome model design is rank deficient (rank " + std::to_string(qr.rank()) + " of " +
                        std::to_string(o.cols()) + ")");
    const Eigen::VectorXd theta = qr.solve(y);
    const double x_part = q > 0 ? (x.colwise().mean() * theta.segment(k, q))(0) : 0.0;
    const double a = theta(k + q), c = theta(k + q + 1);
    const double sigma = std::sqrt(gps.sigma2);

    AdrfEstimate est;
    est.grid = grid;
    std::vector<double> bx(static_cast<std::size_t>(k));
    for (double g : grid) {
        basis.evaluate(g, bx.data());
        double mu = x_part;
        for (Eigen::Index j = 0; j < k; ++j) mu += bx[static_cast<std::size_t>(j)] * theta(j);
        const double mean_r = kernels::normal_pdf_sum(g, {means.data(), static_cast<std::size_t>(n)}, sigma) /
                              static_cast<double>(n);
        mu += (a + c * g) * mean_r;
        est.mu.push_back(mu);
    }
    return est;
}

AdrfEstimate bootstrap_adrf(const Eigen::VectorXd& y, const Eigen::VectorXd& t, const Eigen::MatrixXd& x,
                            const std::vector<double>& grid, const BootstrapOptions& opt) {
    if (opt.n_boot < 100) throw DomainError("bootstrap needs n_boot >= 100 (got " + std::to_string(opt.n_boot) + ")");
    auto est = estimate_adrf(y, t, x, grid, opt.adrf);
    const auto n = t.size();
    const auto nb = static_cast<std::size_t>(opt.n_boot);
    const long max_attempts = 10L * opt.n_boot;
    std::vector<std::vector<double>> reps(nb);
    std::vector<long> attempts(nb, 0);

    auto replicate = [&](std::size_t r) {
        auto g = rng::stream(opt.seed, r);
        Eigen::VectorXd yb(n), tb(n);
        Eigen::MatrixXd xb(n, x.cols());
        while (true) {
            if (++attempts[r] > max_attempts) return;
            for (Eigen::Index i = 0; i < n; ++i) {
                const auto j = static_cast<Eigen::Index>(rng::uniform_index(g, static_cast<std::uint64_t>(n)));
                yb(i) = y(j);
                tb(i) = t(j);
                xb.row(i) = x.row(j);
            }
            try {
                reps[r] = estimate_adrf(yb, tb, xb, grid, opt.adrf).mu;
                return;
            } catch (const Error&) {
            }
        }
    };
    const int threads = std::clamp(opt.threads, 1, 64);
    if (threads == 1) {
        for (std::size_t r = 0; r < nb; ++r) replicate(r);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < threads; ++w)
            pool.emplace_back([&, w] {
                for (std::size_t r = static_cast<std::size_t>(w); r < nb; r += static_cast<std::size_t>(threads)) replicate(r);
            });
        for (auto& th : pool) th.join();
    }
    long total = 0;
    for (std::size_t r = 0; r < nb; ++r) {
        total += attempts[r];
        if (reps[r].empty() || total > max_attempts)
            throw Error("bootstrap: more than " + std::to_string(max_attempts) +
                        " attempts needed for " + std::to_string(opt.n_boot) + " successful replicates");
    }
    est.se.assign(grid.size(), 0.0);
    for (std::size_t j = 0; j < grid.size(); ++j) {
        double mean = 0.0;
        for (const auto& rep : reps) mean += rep[j];
        mean /= static_cast<double>(nb);
        double ss = 0.0;
        for (const auto& rep : reps) ss += (rep[j] - mean) * (rep[j] - mean);
        est.se[j] = std::sqrt(ss / static_cast<double>(nb - 1));
    }
    est.n_boot = opt.n_boot;
    return est;
}

std::vector<double> percentile_grid(const Eigen::VectorXd& t, int points, double lower_q, double upper_q) {
    if (points < 2) throw ConfigError("grid needs at least 2 points");
    if (!(0.0 <= lower_q && lower_q < upper_q && upper_q <= 1.0)) throw ConfigError("grid quantiles must satisfy 0 <= lower < upper <= 1");
    const std::vector<double> v(t.data(), t.data() + t.size());
    const double lo = quantile(v, lower_q), hi = quantile(v, upper_q);
    if (!(lo < hi)) throw DomainError("treatment has no spread between its grid quantiles");
    std::vector<double> g(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) g[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (points - 1);
    g.back() = hi;
    return g;
}

std::vector<ExposureResult> run_phase3(const std::vector<scoring::TrapScorecard>& cards,
                                       const std::vector<TrapSite>& sites, const Dag& dag, const Phase3Config& cfg) {
    if (!dag.has_node(cfg.outcome_node))
        throw ConfigError("outcome node '" + cfg.outcome_node + "' is not in the DAG");
    std::unordered_map<std::string, const TrapSite*> where;
    for (const auto& s : sites) where[s.trap_id] = &s;
    std::set<std::string> columns;
    for (const auto& s : sites)
        for (const auto& [k, v] : s.covariates) columns.insert(k);

    std::vector<const TrapSite*> units;
    std::vector<double> outcome;
    for (const auto& c : cards) {
        const auto& v = cfg.outcome == Outcome::score ? c.score : c.score_prime;
        if (!v) continue;
        const auto it = where.find(c.trap_id);
        if (it == where.end()) throw ReferentialError("scores reference trap_id absent from sites: " + c.trap_id);
        units.push_back(it->second);
        outcome.push_back(*v);
    }
    for (const auto& e : cfg.exposures) {
        if (!dag.has_node(e)) throw ConfigError("exposure '" + e + "' is not a node of the DAG");
        if (!columns.count(e)) throw ConfigError("exposure '" + e + "' is not a column of sites.csv");
    }

    std::vector<ExposureResult> results;
    for (std::size_t k = 0; k < cfg.exposures.size(); ++k) {
        const auto& e = cfg.exposures[k];
        ExposureResult res;
        res.exposure = e;
        const auto sets = backdoor_adjustment_sets(dag, e, cfg.outcome_node);
        res.minimal_sets = sets.sets;
        res.identifiable = sets.identifiable;
        if (!sets.identifiable) {
            warn(cfg.warnings, "exposure '" + e + "': effect on " + cfg.outcome_node + " is not identifiable");
            results.push_back(res);
            continue;
        }
        const auto usable = std::find_if(sets.sets.begin(), sets.sets.end(), [&](const auto& s) {
            return std::all_of(s.begin(), s.end(), [&](const std::string& v) { return columns.count(v) > 0; });
        });
        if (usable == sets.sets.end()) {
            std::string missing;
            for (const auto& v : sets.sets.front())
                if (!columns.count(v)) missing += (missing.empty() ? "" : ", ") + v;
            throw ConfigError("exposure '" + e + "': adjustment covariate(s) " + missing + " missing from sites.csv columns");
        }
        res.adjustment_set = *usable;
        const auto n = static_cast<Eigen::Index>(units.size());
        res.n_units = units.size();
        Eigen::VectorXd y(n), t(n);
        Eigen::MatrixXd x(n, static_cast<Eigen::Index>(res.adjustment_set.size()));
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& s = *units[static_cast<std::size_t>(i)];
            y(i) = outcome[static_cast<std::size_t>(i)];
            t(i) = s.covariates.at(e);
            for (std::size_t j = 0; j < res.adjustment_set.size(); ++j)
                x(i, static_cast<Eigen::Index>(j)) = s.covariates.at(res.adjustment_set[j]);
        }
        if (n < 2) throw DomainError("exposure '" + e + "': fewer than 2 scored traps");
        const auto grid = percentile_grid(t, cfg.grid_points, cfg.lower_q, cfg.upper_q);
        auto boot = cfg.bootstrap;
        boot.seed = rng::splitmix64(cfg.bootstrap.seed + k);
        try {
            res.adrf = bootstrap_adrf(y, t, x, grid, boot);
        } catch (const Error& err) {
            throw Error("exposure '" + e + "': " + err.what());
        }
        results.push_back(res);
    }
    return results;
}

void write_adrf_csv(const std::filesystem::path& path, const ExposureResult& r) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << "exposure,x,mu,se\n";
    if (!r.adrf) return;
    for (std::size_t i = 0; i < r.adrf->grid.size(); ++i)
        out << csv::escape(r.exposure) << ',' << csv::format_double(r.adrf->grid[i]) << ','
            << csv::format_double(r.adrf->mu[i]) << ','
            << (i < r.adrf->se.size() ? csv::format_double(r.adrf->se[i]) : "") << '\n';
}

nlohmann::json summary_json(const std::vector<ExposureResult>& results, const Phase3Config& cfg) {
    using nlohmann::json;
    json ex = json::array();
    for (const auto& r : results) {
        json j = {{"exposure", r.exposure},
                  {"status", r.identifiable ? "ok" : "not identifiable"},
                  {"minimal_adjustment_sets", r.minimal_sets},
                  {"adjustment_set", r.adjustment_set},
                  {"n_units", r.n_units}};
        if (r.adrf && !r.adrf->mu.empty()) {
            const auto& a = *r.adrf;
            const double diff = a.mu.back() - a.mu.front();
            const double pooled = a.se.empty() ? 0.0 : std::sqrt(a.se.front() * a.se.front() + a.se.back() * a.se.back());
            j["grid_low"] = a.grid.front();
            j["grid_high"] = a.grid.back();
            j["mu_low"] = a.mu.front();
            j["mu_high"] = a.mu.back();
            j["difference"] = diff;
            j["pooled_se"] = pooled;
        }
        ex.push_back(j);
    }
    return {{"format", "trapscore.phase3"},
            {"version", 1},
            {"outcome", cfg.outcome == Outcome::score ? "score" : "score_prime"},
            {"outcome_node", cfg.outcome_node},
            {"n_boot", cfg.bootstrap.n_boot},
            {"grid_points", cfg.grid_points},
            {"grid_quantiles", {cfg.lower_q, cfg.upper_q}},
            {"exposures", ex}};
}

}  // namespace trapscore::causal
