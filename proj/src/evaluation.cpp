#include "trapscore/evaluation.hpp"

#include <algorithm>
#include <fstream>
#include <thread>

#include "trapscore/csv.hpp"
#include "trapscore/error.hpp"
#include "trapscore/random.hpp"

namespace trapscore::eval {
namespace {

[[noreturn]] void rethrow_for_fold(int fold) {
    const std::string ctx = "cross-validation fold " + std::to_string(fold) + ": ";
    try {
        throw;
    } catch (const SeparationError& e) {
        throw SeparationError(ctx + e.what());
    } catch (const ConvergenceError& e) {
        throw ConvergenceError(ctx + e.what(), e.objective(), e.gradient_norm());
    } catch (const ConditioningError& e) {
        throw ConditioningError(ctx + e.what(), e.min_eigenvalue());
    } catch (const DomainError& e) {
        throw DomainError(ctx + e.what());
    } catch (const ConfigError& e) {
        throw ConfigError(ctx + e.what());
    } catch (const std::exception& e) {
        throw Error(ctx + e.what());
    }
}

struct FoldOutput {
    FoldReport report;
    std::vector<std::size_t> test_rows;
    std::vector<double> test_prob;
    std::vector<bool> test_labels;
    std::vector<double> train_prob;
    std::vector<bool> train_labels;
};

bool both_classes(const std::vector<bool>& y) {
    return std::find(y.begin(), y.end(), true) != y.end() && std::find(y.begin(), y.end(), false) != y.end();
}

FoldOutput run_fold(const Dataset& ds, const FoldAssignment& folds, int f, const CvConfig& cfg) {
    FoldOutput out;
    std::vector<std::size_t> train;
    for (std::size_t i = 0; i < ds.pools.size(); ++i) (folds.fold[i] == f ? out.test_rows : train).push_back(i);
    out.report.fold = f;
    out.report.n_train = train.size();
    out.report.n_test = out.test_rows.size();
    try {
        const auto model = glmm::fit(ds, train, cfg.fit);
        std::vector<PoolObservation> test_pools;
        for (auto r : out.test_rows) {
            test_pools.push_back(ds.pools[r]);
            out.test_labels.push_back(ds.pools[r].response);
        }
        out.test_prob = glmm::predict_prob(model, test_pools, ds.sites);
        out.train_prob = model.training_fitted;
        for (auto r : train) out.train_labels.push_back(ds.pools[r].response);
        out.report.diagnostics = model.diagnostics;
        out.report.sigma2 = model.matern.sigma2;
        out.report.rho = model.matern.rho;
        out.report.nu = model.matern.nu;
    } catch (...) {
        rethrow_for_fold(f);
    }
    return out;
}

}  // namespace

FoldAssignment make_folds(const Dataset& dataset, std::uint64_t seed, const WarningSink& warnings) {
    FoldAssignment fa;
    fa.seed = seed;
    fa.fold.assign(dataset.pools.size(), 0);
    std::map<int, std::vector<std::size_t>> by_year;
    for (std::size_t i = 0; i < dataset.pools.size(); ++i) by_year[dataset.pools[i].year].push_back(i);
    for (auto& [year, rows] : by_year) {
        if (rows.size() < kNumFolds)
            warn(warnings, "year " + std::to_string(year) + " has only " + std::to_string(rows.size()) +
                               " pools; some folds get none of them");
        auto g = rng::stream(seed, static_cast<std::uint64_t>(year));
        for (std::size_t i = rows.size(); i > 1; --i) std::swap(rows[i - 1], rows[rng::uniform_index(g, i)]);
        for (std::size_t pos = 0; pos < rows.size(); ++pos) fa.fold[rows[pos]] = static_cast<int>(pos % kNumFolds);
    }
    return fa;
}

RocCurve roc_curve(const std::vector<bool>& labels, const std::vector<double>& probs) {
    if (labels.size() != probs.size()) throw DomainError("roc_curve: labels and probabilities differ in length");
    if (!both_classes(labels)) throw DomainError("roc_curve: labels contain a single class");
    std::vector<std::size_t> order(probs.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (!(probs[i] >= 0.0 && probs[i] <= 1.0)) throw DomainError("roc_curve: probability outside [0, 1]");
        order[i] = i;
    }
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return probs[a] < probs[b]; });
    const double p_total = static_cast<double>(std::count(labels.begin(), labels.end(), true));
    const double n_total = static_cast<double>(labels.size()) - p_total;

    RocCurve roc;
    // Sweep thresholds upward; everything at or below the threshold is predicted negative.
    double pos_at_or_below = 0.0, neg_at_or_below = 0.0;
    auto push = [&](double k) {
        roc.thresholds.push_back(k);
        roc.tpr.push_back((p_total - pos_at_or_below) / p_total);
        roc.fpr.push_back((n_total - neg_at_or_below) / n_total);
    };
    std::size_t i = 0;
    auto absorb = [&](double k) {
        while (i < order.size() && probs[order[i]] <= k) {
            (labels[order[i]] ? pos_at_or_below : neg_at_or_below) += 1.0;
            ++i;
        }
    };
    absorb(0.0);
    push(0.0);
    while (i < order.size()) {
        const double k = probs[order[i]];
        absorb(k);
        if (k < 1.0) push(k);
    }
    absorb(1.0);
    push(1.0);
    return roc;
}

std::size_t optimal_index(const RocCurve& roc, double m) {
    if (!(m > 0.0 && m <= 1.0)) throw ConfigError("m must be in (0, 1] (got " + csv::format_double(m) + ")");
    if (roc.thresholds.empty()) throw DomainError("optimal_threshold: empty ROC curve");
    std::size_t best = 0;
    double best_j = roc.tpr[0] - m * roc.fpr[0];
    for (std::size_t i = 1; i < roc.thresholds.size(); ++i) {
        const double j = roc.tpr[i] - m * roc.fpr[i];
        if (j > best_j) {
            best_j = j;
            best = i;
        }
    }
    return best;
}

double optimal_threshold(const RocCurve& roc, double m) { return roc.thresholds[optimal_index(roc, m)]; }

std::map<std::string, TrapConfusion> trap_confusions(const Dataset& dataset, const FoldAssignment& folds,
                                                     const std::vector<double>& test_prob,
                                                     const std::array<double, kNumFolds>& thresholds) {
    std::map<std::string, TrapConfusion> traps;
    for (const auto& s : dataset.sites) traps[s.trap_id].trap_id = s.trap_id;
    for (std::size_t i = 0; i < dataset.pools.size(); ++i) {
        const auto& p = dataset.pools[i];
        const auto f = static_cast<std::size_t>(folds.fold[i]);
        auto& c = traps[p.trap_id];
        c.trap_id = p.trap_id;
        const bool predicted = test_prob[i] > thresholds[f];
        if (p.response) {
            ++(predicted ? c.tp : c.fn)[f];
            ++c.n_pos;
        } else {
            ++(predicted ? c.fp : c.tn)[f];
            ++c.n_neg;
        }
    }
    for (auto& [id, c] : traps) {
        double sens = 0.0, spec = 0.0;
        int n_sens = 0, n_spec = 0;
        for (std::size_t f = 0; f < kNumFolds; ++f) {
            if (c.tp[f] + c.fn[f] > 0) {
                sens += static_cast<double>(c.tp[f]) / (c.tp[f] + c.fn[f]);
                ++n_sens;
            }
            if (c.tn[f] + c.fp[f] > 0) {
                spec += static_cast<double>(c.tn[f]) / (c.tn[f] + c.fp[f]);
                ++n_spec;
            }
        }
        if (n_sens) c.avg_sens = sens / n_sens;
        if (n_spec) c.avg_spec = spec / n_spec;
    }
    return traps;
}

CvResult cross_validate(const Dataset& dataset, const CvConfig& cfg) {
    if (!(cfg.m > 0.0 && cfg.m <= 1.0)) throw ConfigError("m must be in (0, 1] (got " + csv::format_double(cfg.m) + ")");
    CvResult res;
    res.folds = make_folds(dataset, cfg.seed, cfg.warnings);

    std::vector<FoldOutput> outs(kNumFolds);
    std::vector<std::exception_ptr> errors(kNumFolds);
    const int threads = std::clamp(cfg.threads, 1, kNumFolds);
    auto worker = [&](int t) {
        for (int f = t; f < kNumFolds; f += threads) try {
                outs[static_cast<std::size_t>(f)] = run_fold(dataset, res.folds, f, cfg);
            } catch (...) {
                errors[static_cast<std::size_t>(f)] = std::current_exception();
            }
    };
    if (threads == 1) {
        worker(0);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker, t);
        for (auto& th : pool) th.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    res.test_prob.assign(dataset.pools.size(), 0.0);
    for (const auto& o : outs)
        for (std::size_t i = 0; i < o.test_rows.size(); ++i) res.test_prob[o.test_rows[i]] = o.test_prob[i];

    std::array<double, kNumFolds> thresholds{};
    if (cfg.scope == ThresholdScope::global) {
        std::vector<bool> labels;
        std::vector<double> probs;
        if (cfg.split == ThresholdSplit::test) {
            for (std::size_t i = 0; i < dataset.pools.size(); ++i) labels.push_back(dataset.pools[i].response);
            probs = res.test_prob;
        } else {
            for (const auto& o : outs) {
                labels.insert(labels.end(), o.train_labels.begin(), o.train_labels.end());
                probs.insert(probs.end(), o.train_prob.begin(), o.train_prob.end());
            }
        }
        const auto roc = roc_curve(labels, probs);
        const double k = optimal_threshold(roc, cfg.m);
        for (auto& o : outs) {
            o.report.threshold = k;
            o.report.threshold_from_train = cfg.split == ThresholdSplit::train;
            o.report.roc = roc;
        }
    } else {
        for (auto& o : outs) {
            const bool use_train = cfg.split == ThresholdSplit::train || !both_classes(o.test_labels);
            if (use_train && cfg.split == ThresholdSplit::test)
                warn(cfg.warnings, "fold " + std::to_string(o.report.fold) +
                                       ": test split has a single class; threshold taken from the training ROC");
            o.report.roc = use_train ? roc_curve(o.train_labels, o.train_prob) : roc_curve(o.test_labels, o.test_prob);
            o.report.threshold = optimal_threshold(o.report.roc, cfg.m);
            o.report.threshold_from_train = use_train;
        }
    }
    for (std::size_t f = 0; f < kNumFolds; ++f) {
        thresholds[f] = outs[f].report.threshold;
        res.reports.push_back(outs[f].report);
    }
    res.traps = trap_confusions(dataset, res.folds, res.test_prob, thresholds);
    return res;
}

void write_confusion_csv(const std::filesystem::path& path, const std::map<std::string, TrapConfusion>& traps) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << "trap_id,avg_sens,avg_spec,n_pos,n_neg\n";
    for (const auto& [id, c] : traps)
        out << csv::escape(id) << ',' << (c.avg_sens ? csv::format_double(*c.avg_sens) : "") << ','
            << (c.avg_spec ? csv::format_double(*c.avg_spec) : "") << ',' << c.n_pos << ',' << c.n_neg << '\n';
}

void write_roc_csv(const std::filesystem::path& path, const std::vector<FoldReport>& reports) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << "fold,threshold,fpr,tpr\n";
    for (const auto& r : reports)
        for (std::size_t i = 0; i < r.roc.thresholds.size(); ++i)
            out << r.fold << ',' << csv::format_double(r.roc.thresholds[i]) << ','
                << csv::format_double(r.roc.fpr[i]) << ',' << csv::format_double(r.roc.tpr[i]) << '\n';
}

std::map<std::string, TrapConfusion> read_confusion_csv(const std::filesystem::path& path) {
    const auto t = csv::Table::read(path);
    const auto c_id = t.column("trap_id"), c_sens = t.column("avg_sens"), c_spec = t.column("avg_spec"),
               c_pos = t.column("n_pos"), c_neg = t.column("n_neg");
    std::map<std::string, TrapConfusion> traps;
    for (const auto& row : t.rows()) {
        TrapConfusion c;
        c.trap_id = t.at(row, c_id);
        if (!t.at(row, c_sens).empty()) c.avg_sens = t.as_double(row, c_sens);
        if (!t.at(row, c_spec).empty()) c.avg_spec = t.as_double(row, c_spec);
        c.n_pos = static_cast<int>(t.as_int(row, c_pos));
        c.n_neg = static_cast<int>(t.as_int(row, c_neg));
        traps[c.trap_id] = c;
    }
    return traps;
}

}  // namespace trapscore::eval
