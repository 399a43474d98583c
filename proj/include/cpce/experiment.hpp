#pragma once

// Replicated coverage experiments: configuration, runner and report files.
//
// Replication r draws everything from derive_seed(seed, r), so it can be rerun
// in isolation and the thread count never changes a result.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "cpce/basis.hpp"
#include "cpce/benchmarks.hpp"
#include "cpce/conformal.hpp"
#include "cpce/errors.hpp"
#include "cpce/input_model.hpp"
#include "cpce/lars.hpp"
#include "cpce/metrics.hpp"
#include "cpce/ols.hpp"
#include "cpce/quantile.hpp"
#include "cpce/rng.hpp"
#include "cpce/serialization.hpp"

namespace cpce {

inline constexpr int kSchemaVersion = 1;

enum class PceMode { Full, Sparse };
enum class EngineKind { Split, FullConformal, FullConformalReference, JackknifePlus, Bootstrap };

inline std::string to_string(PceMode m) { return m == PceMode::Full ? "full" : "sparse"; }

inline std::string to_string(EngineKind k) {
    switch (k) {
        case EngineKind::Split: return "split";
        case EngineKind::FullConformal: return "full_conformal";
        case EngineKind::FullConformalReference: return "full_conformal_reference";
        case EngineKind::JackknifePlus: return "jackknife_plus";
        case EngineKind::Bootstrap: return "bootstrap";
    }
    return "?";
}

struct EngineConfig {
    EngineKind kind = EngineKind::FullConformal;
    Symmetry symmetry = Symmetry::Asymmetric;
    std::size_t n_cal = 1000;        // split only
    std::size_t b = 100;             // bootstrap only
    double bracket_mult = 20.0;      // sparse full conformal only
    double tolerance = 1e-6;         // sparse full conformal only
    std::string label;               // column value in the report; defaults from kind and symmetry

    std::string name() const {
        if (!label.empty()) return label;
        std::string s = to_string(kind);
        if (symmetry == Symmetry::Symmetric && kind != EngineKind::Bootstrap) s += "_sym";
        return s;
    }
};

struct ExperimentConfig {
    int schema_version = kSchemaVersion;
    std::string model = "ishigami";
    GaussianParam gaussian_param = GaussianParam::Std;
    PceMode mode = PceMode::Full;
    int degree = 3;
    LooCriterion loo = LooCriterion::Corrected;  // sparse basis selection
    std::size_t n_ed = 60;
    std::size_t n_val = 500;
    std::size_t n_replications = 20;
    std::vector<double> levels{0.5, 0.6, 0.7, 0.8, 0.85, 0.9, 0.95};  // confidence 1 - alpha
    std::vector<EngineConfig> engines;
    bool naive_sparse = false;
    std::uint64_t seed = 1;
    std::string output_dir = "cpce_out";
    std::size_t threads = 1;

    std::string pce_label() const {
        if (mode == PceMode::Full) return "full";
        return naive_sparse ? "sparse_naive" : "sparse";
    }
};

/// Throws ConfigError on the first violated constraint.
inline void validate(const ExperimentConfig& cfg) {
    if (cfg.schema_version != kSchemaVersion) {
        throw ConfigError("unsupported schema_version " + std::to_string(cfg.schema_version));
    }
    const auto bm = benchmark_registry(cfg.model, cfg.gaussian_param);
    if (cfg.degree < 0) throw ConfigError("pce.degree must be >= 0");
    const auto p = total_degree_count(bm.input.dimension(), static_cast<std::size_t>(cfg.degree));
    if (cfg.mode == PceMode::Full && cfg.n_ed < p + 1) {
        throw ConfigError("full PCE needs n_ed >= P + 1 = " + std::to_string(p + 1));
    }
    if (cfg.n_ed < 3) throw ConfigError("n_ed must be >= 3");
    if (cfg.n_val < 3) throw ConfigError("n_val must be >= 3");
    if (cfg.n_replications < 1) throw ConfigError("n_replications must be >= 1");
    if (cfg.threads < 1) throw ConfigError("threads must be >= 1");
    if (cfg.levels.empty()) throw ConfigError("at least one level is required");
    for (double l : cfg.levels) {
        if (!(l > 0.0 && l < 1.0)) throw ConfigError("levels must lie in (0, 1)");
    }
    if (cfg.engines.empty()) throw ConfigError("at least one engine is required");
    if (cfg.naive_sparse && cfg.mode != PceMode::Sparse) {
        throw ConfigError("naive_sparse is only defined for sparse PCE");
    }
    std::vector<std::string> names;
    for (const auto& e : cfg.engines) {
        if (e.kind == EngineKind::Bootstrap && e.b < 2) throw ConfigError("bootstrap needs B >= 2");
        if (e.kind == EngineKind::Split && e.n_cal < 1) throw ConfigError("split needs n_cal >= 1");
        if (!(e.bracket_mult > 1.0)) throw ConfigError("bracket_mult must be > 1");
        if (!(e.tolerance > 0.0)) throw ConfigError("tolerance must be > 0");
        if (e.kind == EngineKind::FullConformalReference && (cfg.mode != PceMode::Sparse || cfg.naive_sparse)) {
            throw ConfigError("full_conformal_reference needs sparse, non-naive PCE");
        }
        if (std::find(names.begin(), names.end(), e.name()) != names.end()) {
            throw ConfigError("duplicate engine label '" + e.name() + "'");
        }
        names.push_back(e.name());
    }
}

// ---------------------------------------------------------------- config text format

namespace detail {

inline void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [key, _] : j.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
            throw ConfigError("unknown key '" + key + "' in " + where);
        }
    }
}

inline Symmetry symmetry_from(const std::string& s) {
    if (s == "asymmetric") return Symmetry::Asymmetric;
    if (s == "symmetric") return Symmetry::Symmetric;
    throw ConfigError("symmetry must be 'symmetric' or 'asymmetric'");
}

inline EngineKind engine_kind_from(const std::string& s) {
    for (auto k : {EngineKind::Split, EngineKind::FullConformal, EngineKind::FullConformalReference,
                   EngineKind::JackknifePlus, EngineKind::Bootstrap}) {
        if (s == to_string(k)) return k;
    }
    throw ConfigError("unknown engine type '" + s + "'");
}

}  // namespace detail

inline json to_json(const EngineConfig& e) {
    json j{{"type", to_string(e.kind)}, {"symmetry", to_string(e.symmetry)}};
    if (e.kind == EngineKind::Split) j["n_cal"] = e.n_cal;
    if (e.kind == EngineKind::Bootstrap) j["B"] = e.b;
    if (e.kind == EngineKind::FullConformal || e.kind == EngineKind::FullConformalReference) {
        j["bracket_mult"] = e.bracket_mult;
        j["tolerance"] = e.tolerance;
    }
    if (!e.label.empty()) j["label"] = e.label;
    return j;
}

inline json to_json(const ExperimentConfig& c) {
    json engines = json::array();
    for (const auto& e : c.engines) engines.push_back(to_json(e));
    return {{"schema_version", c.schema_version},
            {"model", c.model},
            {"gaussian_param", c.gaussian_param == GaussianParam::Std ? "std" : "var"},
            {"pce",
             {{"mode", to_string(c.mode)},
              {"degree", c.degree},
              {"loo", c.loo == LooCriterion::Corrected ? "corrected" : "plain"}}},
            {"n_ed", c.n_ed},
            {"n_val", c.n_val},
            {"n_replications", c.n_replications},
            {"levels", c.levels},
            {"engines", engines},
            {"naive_sparse", c.naive_sparse},
            {"seed", c.seed},
            {"output_dir", c.output_dir},
            {"threads", c.threads}};
}

/// Parses and validates a configuration object.
inline ExperimentConfig config_from_json(const json& j) {
    try {
        detail::check_keys(j,
                           {"schema_version", "model", "gaussian_param", "pce", "n_ed", "n_val", "n_replications",
                            "levels", "engines", "naive_sparse", "seed", "output_dir", "threads"},
                           "config");
        ExperimentConfig c;
        c.schema_version = j.at("schema_version").get<int>();
        c.model = j.at("model").get<std::string>();
        if (j.contains("gaussian_param")) {
            const auto g = j["gaussian_param"].get<std::string>();
            if (g != "std" && g != "var") throw ConfigError("gaussian_param must be 'std' or 'var'");
            c.gaussian_param = g == "std" ? GaussianParam::Std : GaussianParam::Var;
        }
        const auto& pce = j.at("pce");
        detail::check_keys(pce, {"mode", "degree", "loo"}, "pce");
        const auto mode = pce.at("mode").get<std::string>();
        if (mode != "full" && mode != "sparse") throw ConfigError("pce.mode must be 'full' or 'sparse'");
        c.mode = mode == "full" ? PceMode::Full : PceMode::Sparse;
        c.degree = pce.at("degree").get<int>();
        if (pce.contains("loo")) {
            const auto loo = pce["loo"].get<std::string>();
            if (loo != "corrected" && loo != "plain") throw ConfigError("pce.loo must be 'corrected' or 'plain'");
            c.loo = loo == "plain" ? LooCriterion::Plain : LooCriterion::Corrected;
        }
        c.n_ed = j.at("n_ed").get<std::size_t>();
        c.n_val = j.at("n_val").get<std::size_t>();
        c.n_replications = j.at("n_replications").get<std::size_t>();
        if (j.contains("levels")) c.levels = j["levels"].get<std::vector<double>>();
        c.engines.clear();
        for (const auto& e : j.at("engines")) {
            detail::check_keys(e, {"type", "symmetry", "n_cal", "B", "bracket_mult", "tolerance", "label"}, "engine");
            EngineConfig ec;
            ec.kind = detail::engine_kind_from(e.at("type").get<std::string>());
            if (e.contains("symmetry")) ec.symmetry = detail::symmetry_from(e["symmetry"].get<std::string>());
            if (e.contains("n_cal")) ec.n_cal = e["n_cal"].get<std::size_t>();
            if (e.contains("B")) ec.b = e["B"].get<std::size_t>();
            if (e.contains("bracket_mult")) ec.bracket_mult = e["bracket_mult"].get<double>();
            if (e.contains("tolerance")) ec.tolerance = e["tolerance"].get<double>();
            if (e.contains("label")) ec.label = e["label"].get<std::string>();
            c.engines.push_back(ec);
        }
        if (j.contains("naive_sparse")) c.naive_sparse = j["naive_sparse"].get<bool>();
        if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
        if (j.contains("threads")) c.threads = j["threads"].get<std::size_t>();
        validate(c);
        return c;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

// ---------------------------------------------------------------- results

struct EngineResult {
    std::string engine;
    std::optional<std::string> error;  // the whole engine failed for this replication
    std::vector<double> coverage;      // per configured level; NaN when `error`
    std::size_t failed_points = 0;     // excluded from the coverage denominators
    std::vector<double> widths;        // per validation point at 1 - alpha = 0.9; NaN when failed
    std::optional<double> spearman;    // widths vs |y - yhat|
    double setup_seconds = 0.0;        // not serialized into summary.json
    double interval_seconds = 0.0;
};

struct ReplicationResult {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    std::optional<std::string> error;
    double eps_val = std::numeric_limits<double>::quiet_NaN();
    double var_val = std::numeric_limits<double>::quiet_NaN();
    std::size_t n_active = 0;
    double lambda_hat = std::numeric_limits<double>::quiet_NaN();
    std::vector<EngineResult> engines;

    bool errored() const {
        return error.has_value() ||
               std::any_of(engines.begin(), engines.end(), [](const EngineResult& e) { return e.error.has_value(); });
    }
};

struct ExperimentReport {
    ExperimentConfig config;
    std::vector<ReplicationResult> replications;

    std::size_t errored_replications() const {
        return static_cast<std::size_t>(std::count_if(replications.begin(), replications.end(),
                                                      [](const ReplicationResult& r) { return r.errored(); }));
    }
    /// More than 20% of replications hit an error.
    bool failed() const { return 5 * errored_replications() > replications.size(); }

    /// Coverage values of one engine at one level over replications without errors.
    std::vector<double> coverages(std::size_t engine, std::size_t level) const {
        std::vector<double> out;
        for (const auto& r : replications) {
            if (r.error || engine >= r.engines.size() || r.engines[engine].error) continue;
            const double c = r.engines[engine].coverage.at(level);
            if (std::isfinite(c)) out.push_back(c);
        }
        return out;
    }

    double mean_coverage(std::size_t engine, std::size_t level) const {
        const auto c = coverages(engine, level);
        if (c.empty()) return std::numeric_limits<double>::quiet_NaN();
        double s = 0.0;
        for (double v : c) s += v;
        return s / static_cast<double>(c.size());
    }

    std::vector<double> spearman(std::size_t engine) const {
        std::vector<double> out;
        for (const auto& r : replications) {
            if (r.error || engine >= r.engines.size()) continue;
            if (r.engines[engine].spearman) out.push_back(*r.engines[engine].spearman);
        }
        return out;
    }

    std::size_t engine_index(const std::string& name) const {
        for (std::size_t e = 0; e < config.engines.size(); ++e) {
            if (config.engines[e].name() == name) return e;
        }
        throw ConfigError("no engine named '" + name + "' in the report");
    }

    std::size_t level_index(double confidence) const {
        for (std::size_t l = 0; l < config.levels.size(); ++l) {
            if (std::abs(config.levels[l] - confidence) < 1e-12) return l;
        }
        throw ConfigError("level " + format_double(confidence) + " not in the report");
    }
};

// ---------------------------------------------------------------- runner

namespace detail {

using IntervalFn = std::function<std::vector<PredictionInterval>(Eigen::Index)>;

inline std::optional<std::size_t> width_level(const std::vector<double>& levels) {
    for (std::size_t l = 0; l < levels.size(); ++l) {
        if (std::abs(levels[l] - 0.9) < 1e-12) return l;
    }
    return std::nullopt;
}

struct ReplicationData {
    Eigen::MatrixXd psi;       // training regression matrix (frozen columns in naive mode)
    Eigen::VectorXd y;
    Eigen::MatrixXd psi_val;   // matching columns at the validation points
    Eigen::VectorXd y_val;
    Eigen::VectorXd coeffs;    // surrogate over the columns of psi
    OlsFit ols;                // full mode and naive mode
    SparseFit sparse;          // sparse mode
};

inline IntervalFn build_engine(const EngineConfig& e, const ExperimentConfig& cfg, const BenchmarkModel& bm,
                               const PceBasis& basis, const ReplicationData& d, std::uint64_t rep_seed,
                               const std::vector<Level>& levels) {
    const bool sparse = cfg.mode == PceMode::Sparse && !cfg.naive_sparse;
    const bool ols_like = !sparse;
    auto lv = std::make_shared<std::vector<Level>>(levels);
    switch (e.kind) {
        case EngineKind::Split: {
            const Eigen::MatrixXd xc = sample_mc(bm.input, e.n_cal, derive_seed(rep_seed, 2));
            const Eigen::VectorXd yc = bm.evaluate_rows(xc);
            Eigen::MatrixXd pc = basis.matrix(xc);
            if (cfg.naive_sparse) pc = columns(pc, d.sparse.active);
            const Eigen::VectorXd r = yc - pc * d.coeffs;
            auto sc = std::make_shared<SplitConformal>(std::vector<double>(r.data(), r.data() + r.size()), e.symmetry);
            auto pred = std::make_shared<Eigen::VectorXd>(d.psi_val * d.coeffs);
            return [sc, pred, lv](Eigen::Index i) { return sc->intervals((*pred)[i], *lv); };
        }
        case EngineKind::FullConformal: {
            if (ols_like) {
                auto fc = std::make_shared<FullConformalOls>(d.psi, d.y, d.ols, e.symmetry);
                return [fc, lv, &d](Eigen::Index i) { return fc->intervals(d.psi_val.row(i), *lv); };
            }
            SparseConformalOptions opts;
            opts.bracket_multiplier = e.bracket_mult;
            opts.tolerance = e.tolerance;
            opts.symmetry = e.symmetry;
            auto fc = std::make_shared<FullConformalSparse>(d.psi, d.y, d.sparse, opts);
            return [fc, lv, &d](Eigen::Index i) { return fc->intervals(d.psi_val.row(i), *lv); };
        }
        case EngineKind::FullConformalReference: {
            SparseConformalOptions opts;
            opts.bracket_multiplier = e.bracket_mult;
            opts.tolerance = e.tolerance;
            opts.symmetry = e.symmetry;
            auto fc = std::make_shared<FullConformalSparseReference>(d.psi, d.y, d.sparse, opts);
            return [fc, lv, &d](Eigen::Index i) { return fc->intervals(d.psi_val.row(i), *lv); };
        }
        case EngineKind::JackknifePlus: {
            auto jk = std::make_shared<JackknifePlus>(ols_like ? jackknife_plus_ols(d.psi, d.y, e.symmetry)
                                                               : jackknife_plus_sparse(d.psi, d.y, e.symmetry, cfg.loo));
            return [jk, lv, &d](Eigen::Index i) { return jk->intervals(d.psi_val.row(i), *lv); };
        }
        case EngineKind::Bootstrap: {
            auto bs = std::make_shared<Bootstrap>(bootstrap(d.psi, d.y, e.b,
                                                            ols_like ? BootstrapFit::Ols : BootstrapFit::HybridLars,
                                                            derive_seed(rep_seed, 3), cfg.loo));
            return [bs, lv, &d](Eigen::Index i) { return bs->intervals(d.psi_val.row(i), *lv); };
        }
    }
    throw ConfigError("unknown engine");
}

inline EngineResult run_engine(const EngineConfig& e, const ExperimentConfig& cfg, const BenchmarkModel& bm,
                               const PceBasis& basis, const ReplicationData& d, std::uint64_t rep_seed,
                               const std::vector<Level>& levels, double var_val) {
    using clock = std::chrono::steady_clock;
    EngineResult out;
    out.engine = e.name();
    const std::size_t nl = levels.size();
    const auto n_val = d.y_val.size();
    const auto wl = width_level(cfg.levels);
    const double nan = std::numeric_limits<double>::quiet_NaN();

    const auto t0 = clock::now();
    IntervalFn fn;
    try {
        fn = build_engine(e, cfg, bm, basis, d, rep_seed, levels);
    } catch (const std::exception& ex) {
        out.error = ex.what();
        out.coverage.assign(nl, nan);
        return out;
    }
    const auto t1 = clock::now();

    std::vector<std::size_t> hits(nl, 0);
    std::vector<double> widths(static_cast<std::size_t>(n_val), nan);
    std::vector<double> w_ok, err_ok;
    const Eigen::VectorXd pred = d.psi_val * d.coeffs;
    for (Eigen::Index i = 0; i < n_val; ++i) {
        std::vector<PredictionInterval> iv;
        try {
            iv = fn(i);
        } catch (const std::exception&) {
            ++out.failed_points;
            continue;
        }
        for (std::size_t l = 0; l < nl; ++l) hits[l] += iv[l].contains(d.y_val[i]) ? 1 : 0;
        if (wl) {
            const double w = normalized_width(iv[*wl], var_val);
            widths[static_cast<std::size_t>(i)] = w;
            w_ok.push_back(w);
            err_ok.push_back(std::abs(d.y_val[i] - pred[i]));
        }
    }
    const auto t2 = clock::now();
    out.setup_seconds = std::chrono::duration<double>(t1 - t0).count();
    out.interval_seconds = std::chrono::duration<double>(t2 - t1).count();

    const auto ok = static_cast<std::size_t>(n_val) - out.failed_points;
    if (ok == 0) {
        out.error = "interval generation failed at every validation point";
        out.coverage.assign(nl, nan);
        return out;
    }
    for (std::size_t l = 0; l < nl; ++l) out.coverage.push_back(static_cast<double>(hits[l]) / static_cast<double>(ok));
    if (wl) {
        out.widths = std::move(widths);
        // widths equal up to rounding (split conformal) carry no ranking
        const auto [wmin, wmax] = std::minmax_element(w_ok.begin(), w_ok.end());
        const bool flat = !w_ok.empty() && *wmax - *wmin <= 1e-9 * std::abs(*wmax);
        if (w_ok.size() >= 3 && !flat) out.spearman = spearman_rho(w_ok, err_ok);
    }
    return out;
}

}  // namespace detail

/// One replication: fresh LHS design, fit, fresh Monte Carlo validation set, every engine.
inline ReplicationResult run_replication(const ExperimentConfig& cfg, std::size_t r) {
    ReplicationResult out;
    out.index = r;
    out.seed = derive_seed(cfg.seed, r);
    try {
        const auto bm = benchmark_registry(cfg.model, cfg.gaussian_param);
        const PceBasis basis(bm.input, cfg.degree);
        std::vector<Level> levels;
        for (double c : cfg.levels) levels.push_back(Level::from_confidence(c));

        detail::ReplicationData d;
        const Eigen::MatrixXd x = sample_lhs(bm.input, cfg.n_ed, derive_seed(out.seed, 0));
        d.y = bm.evaluate_rows(x);
        d.psi = basis.matrix(x);
        const Eigen::MatrixXd xv = sample_mc(bm.input, cfg.n_val, derive_seed(out.seed, 1));
        d.y_val = bm.evaluate_rows(xv);
        d.psi_val = basis.matrix(xv);

        if (cfg.mode == PceMode::Full) {
            d.ols = ols_fit(d.psi, d.y);
            d.coeffs = d.ols.coeffs;
        } else {
            d.sparse = fit_hybrid_lars(d.psi, d.y, cfg.loo);
            out.n_active = d.sparse.active.size();
            out.lambda_hat = d.sparse.lambda_hat;
            if (cfg.naive_sparse) {
                // freeze the selected basis and treat it as a full expansion
                d.psi = detail::columns(d.psi, d.sparse.active);
                d.psi_val = detail::columns(d.psi_val, d.sparse.active);
                d.ols = ols_fit(d.psi, d.y);
                d.coeffs = d.ols.coeffs;
            } else {
                d.coeffs = d.sparse.coeffs;
            }
        }
        out.var_val = sample_variance(d.y_val);
        out.eps_val = validation_error(d.y_val, d.psi_val * d.coeffs);

        for (const auto& e : cfg.engines) {
            out.engines.push_back(detail::run_engine(e, cfg, bm, basis, d, out.seed, levels, out.var_val));
        }
    } catch (const std::exception& ex) {
        out.error = ex.what();
        out.engines.clear();
        for (const auto& e : cfg.engines) {
            EngineResult er;
            er.engine = e.name();
            er.coverage.assign(cfg.levels.size(), std::numeric_limits<double>::quiet_NaN());
            out.engines.push_back(std::move(er));
        }
    }
    return out;
}

/// All replications, spread over `cfg.threads` workers and gathered in index order.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    validate(cfg);
    ExperimentReport report;
    report.config = cfg;
    report.replications.resize(cfg.n_replications);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t r; (r = next.fetch_add(1)) < cfg.n_replications;) {
            report.replications[r] = run_replication(cfg, r);
        }
    };
    const std::size_t nt = std::min(cfg.threads, cfg.n_replications);
    if (nt <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < nt; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    return report;
}

/// Frozen-basis baseline: the Hybrid-LARS basis of each replication is treated
/// as fixed and every engine runs as for a full expansion over it.
inline ExperimentReport naive_sparse_mode(ExperimentConfig cfg) {
    if (cfg.mode != PceMode::Sparse) throw ConfigError("naive mode is only defined for sparse PCE");
    cfg.naive_sparse = true;
    return run_experiment(cfg);
}

// ---------------------------------------------------------------- report files

namespace detail {

inline json optional_string(const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); }

inline json width_summary(std::vector<double> w) {
    std::erase_if(w, [](double v) { return std::isnan(v); });
    if (w.empty()) return nullptr;
    return {{"q10", encode_double(empirical_quantile(w, 0.1))},
            {"q50", encode_double(empirical_quantile(w, 0.5))},
            {"q90", encode_double(empirical_quantile(w, 0.9))}};
}

}  // namespace detail

/// Nested report. Timings are left out unless asked for, so that the default
/// document is a pure function of the configuration.
inline json to_json(const ExperimentReport& report, bool with_timings = false) {
    json reps = json::array();
    for (const auto& r : report.replications) {
        json engines = json::array();
        for (const auto& e : r.engines) {
            json cov = json::array();
            for (double c : e.coverage) cov.push_back(encode_double(c));
            json ej{{"engine", e.engine},
                    {"error", detail::optional_string(e.error)},
                    {"coverage", cov},
                    {"failed_points", e.failed_points},
                    {"spearman", e.spearman ? encode_double(*e.spearman) : json(nullptr)},
                    {"widths", encode_vector(Eigen::Map<const Eigen::VectorXd>(
                                   e.widths.data(), static_cast<Eigen::Index>(e.widths.size())))}};
            if (with_timings) {
                ej["setup_seconds"] = e.setup_seconds;
                ej["interval_seconds"] = e.interval_seconds;
            }
            engines.push_back(std::move(ej));
        }
        reps.push_back({{"index", r.index},
                        {"seed", r.seed},
                        {"error", detail::optional_string(r.error)},
                        {"eps_val", encode_double(r.eps_val)},
                        {"var_val", encode_double(r.var_val)},
                        {"n_active", r.n_active},
                        {"lambda_hat", encode_double(r.lambda_hat)},
                        {"engines", engines}});
    }

    json agg = json::array();
    for (std::size_t e = 0; e < report.config.engines.size(); ++e) {
        json mean = json::array();
        for (std::size_t l = 0; l < report.config.levels.size(); ++l) {
            mean.push_back({{"level", report.config.levels[l]},
                            {"mean_coverage", encode_double(report.mean_coverage(e, l))}});
        }
        std::vector<double> w;
        for (const auto& r : report.replications) {
            if (e < r.engines.size()) w.insert(w.end(), r.engines[e].widths.begin(), r.engines[e].widths.end());
        }
        const auto rho = report.spearman(e);
        agg.push_back({{"engine", report.config.engines[e].name()},
                       {"coverage", mean},
                       {"width", detail::width_summary(std::move(w))},
                       {"spearman_median", rho.empty() ? json(nullptr) : encode_double(median(rho))},
                       {"spearman", rho}});
    }
    std::vector<double> eps;
    for (const auto& r : report.replications) {
        if (!r.error) eps.push_back(r.eps_val);
    }
    return {{"schema_version", kSchemaVersion},
            {"config", to_json(report.config)},
            {"replications", reps},
            {"aggregate",
             {{"engines", agg},
              {"eps_val_median", eps.empty() ? json(nullptr) : encode_double(median(eps))},
              {"errored_replications", report.errored_replications()},
              {"failed", report.failed()}}}};
}

inline ExperimentReport report_from_json(const json& j) {
    ExperimentReport report;
    report.config = config_from_json(j.at("config"));
    for (const auto& rj : j.at("replications")) {
        ReplicationResult r;
        r.index = rj.at("index").get<std::size_t>();
        r.seed = rj.at("seed").get<std::uint64_t>();
        if (!rj.at("error").is_null()) r.error = rj["error"].get<std::string>();
        r.eps_val = decode_double(rj.at("eps_val"));
        r.var_val = decode_double(rj.at("var_val"));
        r.n_active = rj.at("n_active").get<std::size_t>();
        r.lambda_hat = decode_double(rj.at("lambda_hat"));
        for (const auto& ej : rj.at("engines")) {
            EngineResult e;
            e.engine = ej.at("engine").get<std::string>();
            if (!ej.at("error").is_null()) e.error = ej["error"].get<std::string>();
            for (const auto& c : ej.at("coverage")) e.coverage.push_back(decode_double(c));
            e.failed_points = ej.at("failed_points").get<std::size_t>();
            if (!ej.at("spearman").is_null()) e.spearman = decode_double(ej["spearman"]);
            for (const auto& w : ej.at("widths")) e.widths.push_back(decode_double(w));
            if (ej.contains("setup_seconds")) e.setup_seconds = ej["setup_seconds"].get<double>();
            if (ej.contains("interval_seconds")) e.interval_seconds = ej["interval_seconds"].get<double>();
            r.engines.push_back(std::move(e));
        }
        report.replications.push_back(std::move(r));
    }
    return report;
}

inline const char* kCoverageHeader = "model,pce_mode,engine,level,replication,coverage";
inline const char* kWidthsHeader = "model,pce_mode,engine,replication,point_index,norm_width";
inline const char* kTimingsHeader = "model,pce_mode,engine,replication,setup_seconds,seconds_per_1000_points";

inline std::string coverage_csv(const ExperimentReport& report) {
    const auto& c = report.config;
    std::ostringstream out;
    out << kCoverageHeader << '\n';
    for (const auto& r : report.replications) {
        for (std::size_t e = 0; e < r.engines.size(); ++e) {
            for (std::size_t l = 0; l < c.levels.size(); ++l) {
                out << c.model << ',' << c.pce_label() << ',' << r.engines[e].engine << ',' << format_double(c.levels[l])
                    << ',' << r.index << ',' << format_double(r.engines[e].coverage.at(l)) << '\n';
            }
        }
    }
    return out.str();
}

inline std::string widths_csv(const ExperimentReport& report) {
    const auto& c = report.config;
    std::ostringstream out;
    out << kWidthsHeader << '\n';
    for (const auto& r : report.replications) {
        for (const auto& e : r.engines) {
            for (std::size_t i = 0; i < e.widths.size(); ++i) {
                out << c.model << ',' << c.pce_label() << ',' << e.engine << ',' << r.index << ',' << i << ','
                    << format_double(e.widths[i]) << '\n';
            }
        }
    }
    return out.str();
}

inline std::string timings_csv(const ExperimentReport& report) {
    const auto& c = report.config;
    std::ostringstream out;
    out << kTimingsHeader << '\n';
    for (const auto& r : report.replications) {
        for (const auto& e : r.engines) {
            const double per_1000 = e.interval_seconds * 1000.0 / static_cast<double>(c.n_val);
            out << c.model << ',' << c.pce_label() << ',' << e.engine << ',' << r.index << ','
                << format_double(e.setup_seconds) << ',' << format_double(per_1000) << '\n';
        }
    }
    return out.str();
}

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << text;
    out.flush();
    if (!out) throw IoError("write to " + path.string() + " failed");
}

}  // namespace detail

/// Writes coverage.csv, widths.csv, timings.csv and summary.json into `dir`.
inline void emit_report(const ExperimentReport& report, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
    detail::write_file(dir / "coverage.csv", coverage_csv(report));
    detail::write_file(dir / "widths.csv", widths_csv(report));
    detail::write_file(dir / "timings.csv", timings_csv(report));
    detail::write_file(dir / "summary.json", to_json(report).dump(2) + "\n");
}

/// Output directory: explicit flag, else CPCE_OUT_DIR, else the config value.
inline std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg, const std::optional<std::string>& flag) {
    if (flag && !flag->empty()) return *flag;
    if (const char* env = std::getenv("CPCE_OUT_DIR"); env != nullptr && *env != '\0') return env;
    return cfg.output_dir;
}

// ---------------------------------------------------------------- canned settings

inline const std::vector<std::string>& figure_ids() {
    static const std::vector<std::string> ids{"ishigami-full", "borehole-full", "ishigami-sparse", "borehole-sparse",
                                              "naive-sparse"};
    return ids;
}

/// Benchmark settings of the published studies, with replication counts cut to 20.
inline ExperimentConfig canned_config(const std::string& figure) {
    ExperimentConfig c;
    EngineConfig split, fc, jk, bs;
    split.kind = EngineKind::Split;
    split.n_cal = 2000;
    fc.kind = EngineKind::FullConformal;
    jk.kind = EngineKind::JackknifePlus;
    bs.kind = EngineKind::Bootstrap;
    bs.b = 100;
    c.n_val = 500;
    c.n_replications = 20;
    c.engines = {split, fc, jk, bs};
    if (figure == "ishigami-full") {
        c.model = "ishigami";
        c.mode = PceMode::Full;
        c.degree = 5;
        c.n_ed = 200;
    } else if (figure == "borehole-full") {
        c.model = "borehole";
        c.mode = PceMode::Full;
        c.degree = 2;
        c.n_ed = 200;
    } else if (figure == "ishigami-sparse" || figure == "naive-sparse") {
        c.model = "ishigami";
        c.mode = PceMode::Sparse;
        c.degree = 6;
        c.n_ed = 40;
        c.naive_sparse = figure == "naive-sparse";
    } else if (figure == "borehole-sparse") {
        c.model = "borehole";
        c.mode = PceMode::Sparse;
        c.degree = 2;
        c.n_ed = 40;
    } else {
        throw ConfigError("unknown figure id '" + figure + "'");
    }
    c.output_dir = "cpce_out/" + figure;
    validate(c);
    return c;
}

}  // namespace cpce
