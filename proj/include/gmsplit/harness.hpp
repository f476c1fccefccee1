/**
 * @file harness.hpp
 * @brief Run configuration and the library-generation, truth, run and
 *        compare commands behind the command-line tool.
 */

#ifndef GMSPLIT_HARNESS_HPP
#define GMSPLIT_HARNESS_HPP

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gmsplit/errors.hpp"
#include "gmsplit/gaussian.hpp"
#include "gmsplit/hash.hpp"
#include "gmsplit/heuristics.hpp"
#include "gmsplit/metrics.hpp"
#include "gmsplit/monte_carlo.hpp"
#include "gmsplit/parallel.hpp"
#include "gmsplit/propagate.hpp"
#include "gmsplit/scenarios/presets.hpp"
#include "gmsplit/split_engine.hpp"
#include "gmsplit/split_library.hpp"

namespace gmsplit {

enum class MademCov { Approx, Linear, MonteCarlo };

inline std::string to_string(MademCov m)
{
    switch (m) {
    case MademCov::Approx: return "approx";
    case MademCov::Linear: return "linear";
    case MademCov::MonteCarlo: return "mc";
    }
    return "approx";
}

inline MademCov parse_madem_cov(const std::string& s)
{
    if (s == "approx") {
        return MademCov::Approx;
    }
    if (s == "linear") {
        return MademCov::Linear;
    }
    if (s == "mc") {
        return MademCov::MonteCarlo;
    }
    throw ConfigError("madem-cov must be approx, linear or mc");
}

struct RunConfig {
    ScenarioSpec scenario;
    std::vector<HeuristicKind> heuristics{kAllHeuristics.begin(), kAllHeuristics.end()};
    std::string library_path;  ///< empty: generate the (L, λ) entry on the fly
    int L = 3;
    double lambda = 1e-3;
    double gamma = 0.5;
    double threshold = 0.0;
    bool benchmark = true;
    MademCov madem_cov = MademCov::Approx;
    Propagation propagation = Propagation::Linear;
    std::string out_dir = "out";
    unsigned threads = 0;      ///< not part of the hash: results do not depend on it
    int plot_grid = 101;

    [[nodiscard]] std::string canonical() const
    {
        std::string s = scenario.canonical() + ";heuristics=";
        for (std::size_t i = 0; i < heuristics.size(); ++i) {
            s += (i ? "," : "") + to_string(heuristics[i]);
        }
        s += ";library=" + library_path + ";L=" + std::to_string(L) + ";lambda=" + detail::fmt17(lambda);
        s += ";gamma=" + detail::fmt17(gamma) + ";threshold=" + detail::fmt17(threshold);
        s += ";benchmark=" + std::string(benchmark ? "1" : "0") + ";madem_cov=" + to_string(madem_cov);
        s += ";propagation=" + std::string(propagation == Propagation::Linear ? "linear" : "unscented");
        s += ";plot_grid=" + std::to_string(plot_grid);
        return s;
    }

    [[nodiscard]] std::string hash() const { return hex16(fnv1a64(canonical())); }
};

/**
 * @brief Builds a RunConfig from a JSON object. "scenario" picks the preset;
 *        every other key overrides a preset or run field.
 */
inline RunConfig resolve_run_config(const nlohmann::json& j)
{
    RunConfig c;
    try {
        c.scenario = preset(j.value("scenario", std::string("polar")));
        apply_overrides(c.scenario, j);
        if (j.contains("heuristics")) {
            c.heuristics.clear();
            for (const auto& h : j.at("heuristics")) {
                c.heuristics.push_back(parse_heuristic(h.get<std::string>()));
            }
            if (c.heuristics.empty()) {
                throw ConfigError("heuristic list is empty");
            }
        }
        c.library_path = j.value("library", c.library_path);
        c.L = j.value("L", c.L);
        c.lambda = j.value("lambda", c.lambda);
        c.gamma = j.value("gamma", c.gamma);
        c.threshold = j.value("threshold", c.threshold);
        c.benchmark = j.value("benchmark", c.benchmark);
        if (j.contains("madem_cov")) {
            c.madem_cov = parse_madem_cov(j.at("madem_cov").get<std::string>());
        }
        if (j.contains("propagation")) {
            const auto p = j.at("propagation").get<std::string>();
            if (p != "linear" && p != "unscented") {
                throw ConfigError("propagation must be linear or unscented");
            }
            c.propagation = p == "linear" ? Propagation::Linear : Propagation::Unscented;
        }
        c.out_dir = j.value("out", c.out_dir);
        c.threads = j.value("threads", c.threads);
        c.plot_grid = j.value("plot_grid", c.plot_grid);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(e.what());
    }
    c.scenario.validate();
    SplitCriterion{c.gamma, c.threshold, c.scenario.depth, c.benchmark}.validate();
    if (c.L < 2) {
        throw ConfigError("L must be at least 2");
    }
    if (c.plot_grid < 2) {
        throw ConfigError("plot_grid must be at least 2");
    }
    return c;
}

inline nlohmann::json read_json_file(const std::string& path)
{
    std::ifstream is(path);
    if (!is) {
        throw ConfigError("cannot read " + path);
    }
    try {
        return nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
}

inline void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw ConfigError("cannot write " + path.string());
    }
    os << text;
}

// gen-library --------------------------------------------------------------

inline SplitLibrary cmd_gen_library(const std::vector<int>& Ls, const std::vector<double>& lambdas, const std::string& path)
{
    if (Ls.empty() || lambdas.empty()) {
        throw ConfigError("gen-library needs at least one L and one lambda");
    }
    std::vector<std::pair<int, double>> keys;
    for (int L : Ls) {
        for (double lam : lambdas) {
            keys.emplace_back(L, lam);
        }
    }
    std::vector<UnivariateSplit> entries(keys.size());
    parallel_for(keys.size(), [&](std::size_t i) { entries[i] = generate_entry(keys[i].first, keys[i].second); });
    SplitLibrary lib;
    for (auto& e : entries) {
        lib.add(std::move(e));
    }
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) {
        std::filesystem::create_directories(parent);
    }
    save(lib, path);
    return lib;
}

// truth --------------------------------------------------------------------

struct TruthResult {
    bool analytic = true;
    std::string path;     ///< marker or sample cache
    bool reused = false;
    McSamples mc;
};

/// Hash of the fields that determine the Monte Carlo cloud.
inline std::string mc_hash(const ScenarioSpec& s)
{
    ScenarioSpec k = s;
    k.depth = 0;
    return hex16(fnv1a64("mc;" + k.canonical()));
}

inline TruthResult cmd_truth(const RunConfig& cfg, bool load_samples = true)
{
    const auto& s = cfg.scenario;
    std::filesystem::create_directories(cfg.out_dir);
    TruthResult r;
    if (s.truth == TruthMode::Analytic) {
        r.analytic = true;
        r.path = (std::filesystem::path(cfg.out_dir) / (s.name + "_truth.marker")).string();
        write_text(r.path, "truth=analytic\nscenario=" + s.name + "\nspec_hash=" + s.hash() + "\n");
        return r;
    }
    r.analytic = false;
    const std::string h = mc_hash(s);
    r.path = (std::filesystem::path(cfg.out_dir) / (s.name + "_mc_" + h + ".bin")).string();
    if (std::filesystem::exists(r.path) && std::filesystem::exists(r.path + ".hdr")) {
        try {
            const auto hdr = read_sample_cache_header(r.path);
            if (hdr.spec_hash == h && hdr.requested == s.samples && hdr.seed == s.seed) {
                r.reused = true;
                if (load_samples) {
                    r.mc = read_sample_cache(r.path);
                }
                std::cerr << "truth: reusing Monte Carlo cache " << r.path << "\n";
                return r;
            }
        } catch (const ParseError&) {
            // Regenerate below.
        }
    }
    const auto model = make_model(s);
    r.mc = mc_truth_samples(*model, s.input(), s.samples, s.seed, cfg.threads);
    SampleCacheHeader hdr;
    hdr.seed = s.seed;
    hdr.requested = s.samples;
    hdr.spec_hash = h;
    write_sample_cache(r.path, r.mc, hdr);
    std::cerr << "truth: wrote " << r.mc.samples.rows() << " samples (" << r.mc.failed << " failed) to " << r.path << "\n";
    return r;
}

// run ----------------------------------------------------------------------

struct HeuristicOutcome {
    HeuristicKind kind{};
    bool ok = false;
    std::string error;
    MetricReport report;
    GaussianMixture split;
    GaussianMixture propagated;
};

struct RunResult {
    std::vector<HeuristicOutcome> outcomes;
    std::string csv;
    std::string csv_path;
    bool any_error = false;
};

inline std::string fmt_metric(const std::optional<double>& v)
{
    if (!v) {
        return "error";
    }
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", *v);
    return buf;
}

inline std::string metrics_csv(const std::vector<HeuristicOutcome>& outs, bool analytic)
{
    std::string s = analytic ? "method,NISE\n" : "method,ELK,MaDEM,MCR,CvMnorm\n";
    for (const auto& o : outs) {
        const auto& r = o.report;
        s += to_string(o.kind);
        if (analytic) {
            s += "," + fmt_metric(o.ok ? r.nise : std::nullopt);
        } else {
            s += "," + fmt_metric(o.ok ? r.elk : std::nullopt) + "," + fmt_metric(o.ok ? r.madem : std::nullopt) + ","
                 + fmt_metric(o.ok ? r.mcr : std::nullopt) + "," + fmt_metric(o.ok ? r.cvm_norm : std::nullopt);
        }
        s += "\n";
    }
    return s;
}

/// Marginal of a mixture over coordinates (i, j).
inline GaussianMixture marginal2(const GaussianMixture& gm, Index i, Index j)
{
    std::vector<MixtureComponent> comps;
    for (const auto& c : gm.components()) {
        VectorXd m(2);
        m << c.gaussian.mean(i), c.gaussian.mean(j);
        MatrixXd p(2, 2);
        const auto& full = c.gaussian.cov.matrix();
        p << full(i, i), full(i, j), full(j, i), full(j, j);
        comps.push_back({c.weight, Gaussian(m, SpdMatrix::semidefinite(p).is_strict() ? SpdMatrix(p) : SpdMatrix(p + 1e-300 * MatrixXd::Identity(2, 2)))});
    }
    return GaussianMixture(std::move(comps), 1e-9);
}

/// Tab-separated grid "z0 z1 pdf" of the first two output coordinates, and the mixand means.
inline std::pair<std::string, std::string> plot_data(const GaussianMixture& gm, int grid)
{
    const auto m2 = gm.dim() == 2 ? gm : marginal2(gm, 0, 1);
    const auto mom = mixture_moments(m2);
    const MixtureEvaluator eval(m2);
    const double sx = std::sqrt(mom.cov(0, 0));
    const double sy = std::sqrt(mom.cov(1, 1));
    std::ostringstream os;
    os.precision(10);
    os << "z0\tz1\tpdf\n";
    for (int a = 0; a < grid; ++a) {
        for (int b = 0; b < grid; ++b) {
            VectorXd z(2);
            z << mom.mean(0) + sx * (-4.0 + 8.0 * a / (grid - 1)), mom.mean(1) + sy * (-4.0 + 8.0 * b / (grid - 1));
            os << z(0) << "\t" << z(1) << "\t" << eval.pdf(z) << "\n";
        }
    }
    std::ostringstream ms;
    ms.precision(17);
    ms << "weight";
    for (Index k = 0; k < gm.dim(); ++k) {
        ms << "\tmean" << k;
    }
    ms << "\n";
    for (const auto& c : gm.components()) {
        ms << c.weight;
        for (Index k = 0; k < gm.dim(); ++k) {
            ms << "\t" << c.gaussian.mean(k);
        }
        ms << "\n";
    }
    return {os.str(), ms.str()};
}

inline UnivariateSplit resolve_library_entry(const RunConfig& cfg)
{
    if (!cfg.library_path.empty()) {
        return load_library(cfg.library_path).at(cfg.L, cfg.lambda);
    }
    return generate_entry(cfg.L, cfg.lambda);
}

/// Splits, propagates and scores one heuristic. Exceptions propagate.
inline HeuristicOutcome run_heuristic(const RunConfig& cfg, HeuristicKind kind, const NonlinearModel& model,
                                      const UnivariateSplit& entry, const TruthDensity* truth, const McSamples* mc,
                                      unsigned threads)
{
    const auto& s = cfg.scenario;
    HeuristicOutcome o;
    o.kind = kind;
    o.report.scenario = s.name;
    o.report.heuristic = to_string(kind);
    const auto input = GaussianMixture::single(s.input());
    const SplitCriterion crit{cfg.gamma, cfg.threshold, s.depth, cfg.benchmark};
    o.split = recursive_split(input, make_selector(kind, model), crit, entry, threads);
    o.propagated = propagate(o.split, model, cfg.propagation, SutConfig{}, threads);
    if (truth) {
        QuadratureOptions q;
        q.threads = threads;
        o.report.nise = nise(o.propagated, *truth, q);
    }
    if (mc) {
        const auto& z = mc->samples;
        o.report.samples = static_cast<std::size_t>(z.rows());
        const auto approx = mixture_moments(o.propagated);
        const auto truth_mom = sample_moments(z);
        o.report.elk = elk(o.propagated, z, threads);
        o.report.cvm_norm = cvm_norm(o.propagated, z, threads);
        o.report.mcr = mcr(SpdMatrix(approx.cov), SpdMatrix(truth_mom.cov));
        MatrixXd norm_cov = approx.cov;
        if (cfg.madem_cov == MademCov::Linear) {
            const auto d = model.evaluate(s.mean, DerivativeOrder::Jacobian);
            norm_cov = d.jacobian * s.cov * d.jacobian.transpose();
        } else if (cfg.madem_cov == MademCov::MonteCarlo) {
            norm_cov = truth_mom.cov;
        }
        o.report.madem = madem(approx.mean, truth_mom.mean, SpdMatrix(norm_cov));
    }
    o.ok = true;
    return o;
}

/**
 * @brief Runs every configured heuristic and writes the metric CSV, one
 *        mixture file and plot-data files per heuristic, and a manifest.
 *
 * A heuristic that throws gets an "error" row; the others still run.
 */
inline RunResult cmd_run(const RunConfig& cfg)
{
    const auto& s = cfg.scenario;
    const std::filesystem::path out(cfg.out_dir);
    std::filesystem::create_directories(out);
    const auto model = make_model(s);
    const auto entry = resolve_library_entry(cfg);

    std::unique_ptr<TruthDensity> truth;
    TruthResult tr;
    if (s.truth == TruthMode::Analytic) {
        truth = make_truth_density(s);
    } else {
        tr = cmd_truth(cfg);
        if (tr.mc.samples.rows() < 2) {
            throw ConfigError("Monte Carlo truth needs at least two successful samples");
        }
    }

    RunResult res;
    res.outcomes.resize(cfg.heuristics.size());
    const unsigned total = cfg.threads ? cfg.threads : default_thread_count();
    const unsigned outer = std::max(1u, std::min<unsigned>(total, static_cast<unsigned>(cfg.heuristics.size())));
    const unsigned inner = std::max(1u, total / outer);
    parallel_for(
        cfg.heuristics.size(),
        [&](std::size_t i) {
            const auto kind = cfg.heuristics[i];
            try {
                res.outcomes[i] = run_heuristic(cfg, kind, *model, entry, truth.get(), truth ? nullptr : &tr.mc, inner);
            } catch (const std::exception& e) {
                res.outcomes[i] = HeuristicOutcome{};
                res.outcomes[i].kind = kind;
                res.outcomes[i].error = e.what();
            }
        },
        outer);

    res.csv = metrics_csv(res.outcomes, truth != nullptr);
    res.csv_path = (out / (s.name + "_metrics.csv")).string();
    write_text(res.csv_path, res.csv);

    nlohmann::ordered_json manifest;
    manifest["config"] = cfg.canonical();
    manifest["config_hash"] = cfg.hash();
    manifest["scenario"] = s.name;
    manifest["library_entry"] = {{"L", entry.L}, {"lambda", entry.lambda}, {"sigma", entry.sigma}, {"weights", entry.weights}, {"means", entry.means}};
    manifest["truth"] = truth ? "analytic" : tr.path;
    if (!truth) {
        manifest["mc_failed_samples"] = tr.mc.failed;
    }
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& o : res.outcomes) {
        const std::string tag = s.name + "_" + to_string(o.kind);
        nlohmann::ordered_json row{{"heuristic", to_string(o.kind)}, {"ok", o.ok}};
        if (o.ok) {
            row["mixands"] = o.propagated.size();
            nlohmann::ordered_json mix;
            mix["config_hash"] = cfg.hash();
            mix["heuristic"] = to_string(o.kind);
            mix["split"] = to_json(o.split);
            mix["propagated"] = to_json(o.propagated);
            write_text(out / (tag + "_mixture.json"), mix.dump(1) + "\n");
            const auto [grid, means] = plot_data(o.propagated, cfg.plot_grid);
            write_text(out / (tag + "_pdf.tsv"), grid);
            write_text(out / (tag + "_means.tsv"), means);
        } else {
            res.any_error = true;
            row["error"] = o.error;
        }
        rows.push_back(row);
    }
    manifest["heuristics"] = rows;
    write_text(out / (s.name + "_manifest.json"), manifest.dump(1) + "\n");
    return res;
}

// compare ------------------------------------------------------------------

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

inline std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) {
        if (!cell.empty() && cell.back() == '\r') {
            cell.pop_back();
        }
        out.push_back(cell);
    }
    return out;
}

inline CsvTable read_csv(const std::string& path)
{
    std::ifstream is(path);
    if (!is) {
        throw ParseError("cannot read " + path);
    }
    CsvTable t;
    std::string line;
    if (!std::getline(is, line)) {
        throw ParseError(path + " is empty");
    }
    t.header = split_csv_line(line);
    if (t.header.empty() || t.header[0] != "method") {
        throw ParseError(path + " does not start with a 'method' column");
    }
    while (std::getline(is, line)) {
        if (line.empty()) {
            continue;
        }
        auto r = split_csv_line(line);
        if (r.size() != t.header.size()) {
            throw ParseError(path + ": row width differs from header");
        }
        t.rows.push_back(std::move(r));
    }
    return t;
}

/**
 * @brief Joins metric CSVs on the method column. Each input contributes its
 *        metric columns prefixed with its label; methods appear in order of
 *        first appearance and missing cells are left empty.
 */
inline std::string cmd_compare(const std::vector<std::string>& paths, const std::vector<std::string>& labels = {})
{
    if (paths.empty()) {
        throw ConfigError("compare needs at least one CSV");
    }
    std::vector<CsvTable> tables;
    for (const auto& p : paths) {
        tables.push_back(read_csv(p));
    }
    std::vector<std::string> methods;
    std::map<std::string, std::map<std::size_t, std::vector<std::string>>> cells;
    for (std::size_t t = 0; t < tables.size(); ++t) {
        for (const auto& r : tables[t].rows) {
            if (!cells.count(r[0])) {
                methods.push_back(r[0]);
            }
            cells[r[0]][t] = std::vector<std::string>(r.begin() + 1, r.end());
        }
    }
    std::string out = "method";
    for (std::size_t t = 0; t < tables.size(); ++t) {
        const std::string label = t < labels.size() ? labels[t] : std::filesystem::path(paths[t]).stem().string();
        for (std::size_t c = 1; c < tables[t].header.size(); ++c) {
            out += "," + label + ":" + tables[t].header[c];
        }
    }
    out += "\n";
    for (const auto& m : methods) {
        out += m;
        for (std::size_t t = 0; t < tables.size(); ++t) {
            const auto it = cells[m].find(t);
            for (std::size_t c = 1; c < tables[t].header.size(); ++c) {
                out += "," + (it == cells[m].end() ? std::string() : it->second[c - 1]);
            }
        }
        out += "\n";
    }
    return out;
}

} // namespace gmsplit

#endif // GMSPLIT_HARNESS_HPP
