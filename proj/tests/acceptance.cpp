// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "cpce/experiment.hpp"
#include "cpce/metrics.hpp"
#include "cpce/testing/validation.hpp"

namespace {

using namespace cpce;

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::map<std::string, Verdict> verdicts;

void verdict(const char* id, bool pass, const std::string& detail) { verdicts[id] = {pass, detail}; }

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::size_t threads() { return std::max(1u, std::thread::hardware_concurrency()); }

EngineConfig engine(EngineKind kind, std::size_t b = 100) {
    EngineConfig e;
    e.kind = kind;
    e.b = b;
    return e;
}

ExperimentConfig setting(const std::string& id) {
    auto c = canned_config(id);
    c.threads = threads();
    return c;
}

double eps_median(const ExperimentReport& r) {
    std::vector<double> eps;
    for (const auto& rep : r.replications) {
        if (!rep.error) eps.push_back(rep.eps_val);
    }
    return median(eps);
}

// AC1: split conformal coverage over replications follows the Beta law.
void ac1() {
    auto c = setting("ishigami-full");
    EngineConfig split = engine(EngineKind::Split);
    split.symmetry = Symmetry::Symmetric;
    split.n_cal = 2000;
    c.engines = {split};
    c.levels = {0.9};
    c.n_val = 10000;
    c.n_replications = 100;
    const auto report = run_experiment(c);
    const auto cov = report.coverages(0, 0);
    const auto law = beta_coverage_law(2000, Level(0.1));
    const auto ks = ks_test(cov, [&](double x) { return law.cdf(x); });
    char buf[200];
    std::snprintf(buf, sizeof buf, "split coverage vs Beta(%.0f,%.0f) over %zu replications: D=%.4f p=%.4f (need p>=0.01)",
                  law.a, law.b, cov.size(), ks.statistic, ks.p_value);
    verdict("AC1", cov.size() == 100 && ks.p_value >= 0.01, buf);
}

// AC2-AC5 (Ishigami full part) share one run of the full-PCE setting.
void full_pce(double& eps_ishigami_full) {
    auto c = setting("ishigami-full");
    c.engines = {engine(EngineKind::FullConformal), engine(EngineKind::JackknifePlus), engine(EngineKind::Bootstrap)};
    const auto report = run_experiment(c);
    const std::size_t l90 = report.level_index(0.9);

    const double fc = report.mean_coverage(0, l90);
    bool every_level = true;
    std::string worst;
    for (std::size_t l = 0; l < c.levels.size(); ++l) {
        const double m = report.mean_coverage(0, l);
        if (!(m >= c.levels[l] - 0.03)) {
            every_level = false;
            worst += fmt(" %.2f:", c.levels[l]) + fmt("%.3f", m);
        }
    }
    verdict("AC2", fc >= 0.87 && fc <= 0.93 && every_level && report.errored_replications() == 0,
            fmt("full conformal mean coverage at 0.9 = %.4f (need [0.87,0.93]); all levels >= target-0.03", fc) +
                (every_level ? ": yes" : ": no," + worst));

    const auto jk_cov = report.coverages(1, l90);
    const double jk_min = jk_cov.empty() ? std::nan("") : *std::min_element(jk_cov.begin(), jk_cov.end());
    const double jk = report.mean_coverage(1, l90);
    verdict("AC3", jk_cov.size() == 20 && jk_min >= 0.8 && jk >= 0.87,
            fmt("Jackknife+ min replication coverage = %.4f (need >= 0.8)", jk_min) +
                fmt(", mean = %.4f (need >= 0.87)", jk));

    const double bs = report.mean_coverage(2, l90);
    verdict("AC4", bs < 0.9 && bs < jk,
            fmt("bootstrap mean coverage at 0.9 = %.4f (need < 0.9 and < Jackknife+ ", bs) + fmt("%.4f)", jk));

    eps_ishigami_full = eps_median(report);
}

// Ishigami sparse: AC6 (with the naive run) and AC8 share one run.
void sparse_pce(double& eps_ishigami_sparse) {
    auto c = setting("ishigami-sparse");
    c.engines = {engine(EngineKind::FullConformal), engine(EngineKind::JackknifePlus), engine(EngineKind::Bootstrap)};
    const auto report = run_experiment(c);
    auto naive_cfg = c;
    naive_cfg.engines = {engine(EngineKind::FullConformal)};
    const auto naive = naive_sparse_mode(naive_cfg);
    const std::size_t l90 = report.level_index(0.9);
    const double fc = report.mean_coverage(0, l90);
    const double nv = naive.mean_coverage(0, l90);
    verdict("AC6", nv < 0.87 && fc >= 0.88 && report.errored_replications() == 0,
            fmt("naive frozen-basis full conformal = %.4f (need < 0.87)", nv) +
                fmt(", homotopy full conformal = %.4f (need >= 0.88)", fc) +
                fmt(", errored replications %.0f", static_cast<double>(report.errored_replications())));

    const auto rho_fc = report.spearman(0), rho_jk = report.spearman(1), rho_bs = report.spearman(2);
    std::vector<double> abs_jk;
    bool pos = false, neg = false;
    for (double r : rho_jk) {
        abs_jk.push_back(std::abs(r));
        pos = pos || r > 0.0;
        neg = neg || r < 0.0;
    }
    const double m_fc = median(rho_fc), m_bs = median(rho_bs), m_jk = median(abs_jk);
    verdict("AC8", m_fc > 0.0 && m_bs > 0.0 && m_jk < 0.15 && pos && neg,
            fmt("median Spearman: full conformal %.3f (need > 0)", m_fc) + fmt(", bootstrap %.3f (need > 0)", m_bs) +
                fmt(", Jackknife+ median |rho| %.3f (need < 0.15)", m_jk) +
                ", Jackknife+ signs " + (pos ? "+" : "") + (neg ? "-" : "") + " (need both)");
    eps_ishigami_sparse = eps_median(report);
}

double eps_only(const std::string& id) {
    auto c = setting(id);
    EngineConfig split = engine(EngineKind::Split);
    split.n_cal = 10;
    c.engines = {split};
    c.levels = {0.9};
    return eps_median(run_experiment(c));
}

void ac5(double ishigami_full, double ishigami_sparse) {
    const double borehole_full = eps_only("borehole-full");
    const double borehole_sparse = eps_only("borehole-sparse");
    const bool pass = ishigami_full >= 5e-2 && ishigami_full <= 6e-1 && borehole_full >= 2e-4 &&
                      borehole_full <= 5e-3 && ishigami_sparse >= 2e-2 && ishigami_sparse <= 5e-1 &&
                      borehole_sparse >= 2e-4 && borehole_sparse <= 1e-2;
    char buf[300];
    std::snprintf(buf, sizeof buf,
                  "median eps_val over 20 seeds: ishigami-full %.3g [5e-2,6e-1], borehole-full %.3g [2e-4,5e-3], "
                  "ishigami-sparse %.3g [2e-2,5e-1], borehole-sparse %.3g [2e-4,1e-2]",
                  ishigami_full, borehole_full, ishigami_sparse, borehole_sparse);
    verdict("AC5", pass, buf);
}

void ac7() {
    const auto checks = testing::run_oracle_suite(2024);
    bool all = true;
    std::string detail;
    for (const auto& c : checks) {
        all = all && c.passed;
        detail += (detail.empty() ? "" : "; ") + c.name + fmt(" %.3g", c.discrepancy) + fmt("/%.3g", c.tolerance);
    }
    verdict("AC7", all, detail);
}

// Wall time of setup plus 1000 query points, one replication, one thread.
double engine_seconds(const std::string& id, EngineKind kind) {
    auto c = canned_config(id);
    c.engines = {engine(kind)};
    c.levels = {0.9};
    c.n_val = 1000;
    c.n_replications = 1;
    c.threads = 1;
    const auto report = run_experiment(c);
    const auto& e = report.replications.at(0).engines.at(0);
    return e.setup_seconds + e.interval_seconds;
}

void ac9() {
    const double sparse_fc = engine_seconds("ishigami-sparse", EngineKind::FullConformal);
    const double sparse_jk = engine_seconds("ishigami-sparse", EngineKind::JackknifePlus);
    const double full_fc = engine_seconds("ishigami-full", EngineKind::FullConformal);
    const double full_jk = engine_seconds("ishigami-full", EngineKind::JackknifePlus);
    const double sparse_ratio = sparse_fc / sparse_jk;
    const double full_ratio = std::max(full_fc, full_jk) / std::min(full_fc, full_jk);
    char buf[300];
    std::snprintf(buf, sizeof buf,
                  "1000 points: sparse full conformal %.3fs vs Jackknife+ %.3fs, ratio %.2f (need >= 3); "
                  "full PCE %.4fs vs %.4fs, ratio %.2f (need <= 3)",
                  sparse_fc, sparse_jk, sparse_ratio, full_fc, full_jk, full_ratio);
    verdict("AC9", sparse_ratio >= 3.0 && full_ratio <= 3.0, buf);
}

}  // namespace

int main() {
    try {
        ac1();
        double eps_if = 0.0, eps_is = 0.0;
        full_pce(eps_if);
        sparse_pce(eps_is);
        ac5(eps_if, eps_is);
        ac7();
        ac9();
    } catch (const std::exception& e) {
        std::printf("ERROR acceptance run aborted: %s\n", e.what());
        return 2;
    }
    int failures = 0;
    for (const auto& [id, v] : verdicts) {
        std::printf("%s %s %s\n", id.c_str(), v.pass ? "PASS" : "FAIL", v.detail.c_str());
        failures += v.pass ? 0 : 1;
    }
    std::printf("%zu criteria, %d failed\n", verdicts.size(), failures);
    return failures == 0 ? 0 : 1;
}
