#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "kcore/acceptance.hpp"
#include "kcore/forge.hpp"
#include "kcore/graph.hpp"
#include "kcore/llt.hpp"
#include "kcore/mc.hpp"
#include "kcore/params.hpp"

using json = nlohmann::json;
using namespace kcore;

namespace {

struct RunConfig {
    std::int64_t n = 0;
    std::int64_t m = -1;
    double d = -1.0;
    int k = 3;
    std::uint64_t seed = 1;
    std::int64_t reps = 1000;
    std::vector<std::int64_t> targets;
    std::string in_path, out_path;
    std::string format = "json";
    int jobs = 1;
    bool deterministic = false;
    bool quick = false;
    std::uint64_t max_attempts = 1000000000ULL;

    // Resolve m = ceil(d*n/2) when only d was given.
    void resolve_m(bool required) {
        if (m >= 0 && d >= 0.0)
            throw CLI::ValidationError("--m/--d", "provide exactly one of --m and --d");
        if (m < 0) {
            if (d < 0.0) {
                if (required) throw CLI::ValidationError("--m/--d", "one of --m or --d is required");
                return;
            }
            m = std::int64_t(std::ceil(d * double(n) / 2.0));
        } else if (d < 0.0 && n > 0) {
            d = 2.0 * double(m) / double(n);
        }
    }

    int effective_jobs() const { return deterministic ? 1 : jobs; }
};

void emit(const RunConfig& cfg, const std::string& text) {
    if (cfg.out_path.empty()) {
        std::cout << text;
        if (!text.empty() && text.back() != '\n') std::cout << '\n';
    } else {
        std::ofstream out(cfg.out_path);
        if (!out) throw std::runtime_error("cannot open output file: " + cfg.out_path);
        out << text;
    }
}

json mat_to_json(const Mat& m) {
    json rows = json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(double(m(i, j)));
        rows.push_back(std::move(row));
    }
    return rows;
}

json params_to_json(const ModelParams& p) {
    return json{{"d", p.d},
                {"k", p.k},
                {"p", p.p},
                {"q", p.q},
                {"q_bar", p.q_bar},
                {"nu", {p.nu[0], p.nu[1], p.nu[2]}},
                {"mu", {p.mu[0], p.mu[1], p.mu[2], p.mu[3]}},
                {"lambda", {p.lambda[0], p.lambda[1], p.lambda[2], p.lambda[3]}},
                {"zeta", p.zeta},
                {"gamma_plus", p.gamma_plus}};
}

json decomposition_to_json(const Decomposition& dec, std::int64_t rounds) {
    json j;
    j["n_0"] = dec.n0;
    j["n_star"] = dec.nstar;
    j["n_1"] = dec.n1;
    j["counts"] = {{"n_0", dec.n0.size()},
                   {"n_star", dec.nstar.size()},
                   {"n_1", dec.n1.size()},
                   {"m_00", dec.m_ab[0]},
                   {"m_01", dec.m_ab[1]},
                   {"m_10", dec.m_ab[2]},
                   {"m_11", dec.m_ab[3]}};
    j["wp_rounds"] = rounds;
    return j;
}

json report_to_json(const StatReport& rep) {
    json lines = json::array();
    for (const auto& l : rep.lines)
        lines.push_back(json{{"observable", l.observable},
                             {"empirical", l.empirical},
                             {"predicted", l.predicted},
                             {"stderr", l.stderr_est},
                             {"tolerance", l.tolerance},
                             {"pass", l.pass}});
    return json{{"lines", std::move(lines)}, {"chi_square", rep.chi_square},
                {"dof", rep.dof},           {"p_value", rep.p_value},
                {"tv_distance", rep.tv_distance}, {"pass", rep.pass}};
}

std::string graph_to_edge_list(const Graph& g) {
    std::ostringstream os;
    g.write_edge_list(os);
    return os.str();
}

Graph read_graph(const RunConfig& cfg) {
    if (cfg.in_path.empty()) throw CLI::ValidationError("--in", "an input graph file is required");
    std::ifstream in(cfg.in_path);
    if (!in) throw std::runtime_error("cannot open input file: " + cfg.in_path);
    return Graph::read_edge_list(in);
}

int cmd_params(const RunConfig& cfg) {
    const ModelParams mp = derive_params(cfg.d, cfg.k);
    json j;
    j["schema"] = 1;
    j["params"] = params_to_json(mp);
    j["threshold"] = threshold(cfg.k);
    j["q4"] = mat_to_json(q4_matrix(mp));
    j["q2"] = mat_to_json(q2_matrix(mp));
    j["clt_covariance"] = mat_to_json(clt_covariance(mp));
    j["sigma"] = mat_to_json(sigma_matrix(mp));
    j["l"] = mat_to_json(l_matrix(mp));
    j["checks"] = {{"block_identity", block_identity_check(mp)},
                   {"marginal_consistency", marginal_consistency_check(mp)},
                   {"det_identity", det_identity_check(mp)}};
    emit(cfg, j.dump(2));
    std::cerr << "d=" << mp.d << " k=" << mp.k << " p=" << mp.p << " q=" << mp.q
              << " zeta=" << mp.zeta << "\n";
    return 0;
}

int cmd_threshold(const RunConfig& cfg) {
    const double dk = threshold(cfg.k);
    json j{{"schema", 1}, {"k", cfg.k}, {"d_k", dk}};
    emit(cfg, j.dump(2));
    std::cerr << "d_" << cfg.k << " = " << dk << "\n";
    return 0;
}

int cmd_core(const RunConfig& cfg) {
    Graph g = read_graph(cfg);
    auto core = peel_core(g, cfg.k);
    json j{{"schema", 1}, {"k", cfg.k}, {"core_order", core.size()}, {"core", core}};
    emit(cfg, j.dump(2));
    std::cerr << core.size() << " vertices in the " << cfg.k << "-core\n";
    return 0;
}

int cmd_wp(const RunConfig& cfg) {
    Graph g = read_graph(cfg);
    Decomposition dec = decompose(g, cfg.k);
    auto cycles = count_forbidden_cycles(g, dec, cfg.k);
    json j;
    j["schema"] = 1;
    j["k"] = cfg.k;
    j["decomposition"] = decomposition_to_json(dec, dec.wp.rounds);
    j["forbidden_cycles"] = {{"x_star", cycles.x_star}, {"x_plus", cycles.x_plus}};
    emit(cfg, j.dump(2));
    std::cerr << "n_0=" << dec.n0.size() << " n_star=" << dec.nstar.size()
              << " n_1=" << dec.n1.size() << " rounds=" << dec.wp.rounds << "\n";
    return 0;
}

json forge_result_json(const ForgeResult& r) {
    return json{{"stage", to_string(r.stage)},
                {"Y", r.loops},
                {"Z", r.multi_pairs},
                {"x_star", r.x_star},
                {"x_plus", r.x_plus},
                {"n_hat", {r.assignment.n_hat[0], r.assignment.n_hat[1], r.assignment.n_hat[2]}},
                {"m_hat",
                 {r.assignment.m_hat[0], r.assignment.m_hat[1], r.assignment.m_hat[2],
                  r.assignment.m_hat[3]}},
                {"attempts", r.attempts}};
}

int cmd_forge(const RunConfig& cfg) {
    const ModelParams mp = derive_params(cfg.d, cfg.k);
    Rng rng(cfg.seed);
    ForgeResult r = forge_once(cfg.n, cfg.m, mp, rng);
    json j;
    j["schema"] = 1;
    j["diagnostics"] = forge_result_json(r);
    if (r.stage == ForgeStage::Success) j["graph"] = graph_to_edge_list(*r.graph);
    emit(cfg, j.dump(2));
    std::cerr << "forge: " << to_string(r.stage) << "\n";
    return 0;
}

int cmd_forge_cond(const RunConfig& cfg) {
    ConditionalTargets targets;
    if (cfg.targets.size() == 4) {
        targets = {cfg.targets[0], cfg.targets[1], cfg.targets[2], cfg.targets[3]};
    } else if (cfg.targets.empty()) {
        const ModelParams mp = derive_params(cfg.d, cfg.k);
        targets = centered_targets(cfg.n, cfg.m, mp);
    } else {
        throw CLI::ValidationError("--targets", "expected n_star,n_1,m_10,m_11");
    }
    ConditionalForge cf(cfg.n, cfg.m, cfg.k, targets);
    ForgeResult r = cf.sample_parallel(cfg.seed, cfg.effective_jobs(), cfg.max_attempts);
    json j;
    j["schema"] = 1;
    j["targets"] = {targets.n_star, targets.n_1, targets.m_10, targets.m_11};
    j["diagnostics"] = forge_result_json(r);
    j["graph"] = graph_to_edge_list(*r.graph);
    emit(cfg, j.dump(2));
    std::cerr << "forge-cond: success after " << r.attempts << " attempts\n";
    return 0;
}

int cmd_mc(const RunConfig& cfg) {
    EmpiricalDist dist = mc_core_stats(cfg.n, cfg.m, cfg.k, cfg.reps, cfg.seed,
                                       cfg.effective_jobs());
    if (cfg.format == "csv") {
        std::ostringstream os;
        dist.write_csv(os);
        emit(cfg, os.str());
    } else {
        json rows = json::array();
        for (const auto& [key, c] : dist.counts)
            rows.push_back(json{{"n_star", key[0]},
                                {"n_1", key[1]},
                                {"m_10", key[2]},
                                {"m_11", key[3]},
                                {"count", c}});
        json j{{"schema", 1}, {"total", dist.total}, {"histogram", std::move(rows)}};
        try {
            LltComparisonConfig lcfg;
            j["llt_comparison"] = report_to_json(llt_comparison(dist, cfg.n, cfg.m, cfg.k, lcfg));
        } catch (const std::exception& e) {
            j["llt_comparison"] = json{{"skipped", e.what()}};
        }
        emit(cfg, j.dump(2));
    }
    std::cerr << "mc: " << cfg.reps << " replicates, " << dist.counts.size()
              << " distinct outcomes\n";
    return 0;
}

int cmd_llt(const RunConfig& cfg) {
    const ModelParams mp = derive_params(cfg.d, cfg.k);
    // Heatmap of the (core order, core size) point probabilities.
    const double cx = double(cfg.n) * mp.p * (1.0 - mp.q);
    const double cy = double(cfg.m) * mp.p * mp.p;
    const auto w = std::int64_t(std::ceil(4.0 * std::sqrt(double(cfg.n))));
    std::ostringstream os;
    os << "x,y,predicted_probability\n";
    const CoreLaw law(cfg.n, cfg.m, mp);
    const auto step = std::max<std::int64_t>(1, w / 64);
    for (std::int64_t x = std::llround(cx) - w; x <= std::llround(cx) + w; x += step)
        for (std::int64_t y = std::llround(cy) - w; y <= std::llround(cy) + w; y += step)
            os << x << ',' << y << ',' << law.at(x, y) << '\n';
    emit(cfg, os.str());
    std::cerr << "llt: grid written\n";
    return 0;
}

int cmd_enumerate(const RunConfig& cfg) {
    GammaCensus census = enumerate_gamma(cfg.n, cfg.m, cfg.k);
    if (cfg.format == "csv") {
        std::ostringstream os;
        os << "n_star,n_1,m_10,m_11,count\n";
        for (const auto& [key, c] : census.classes)
            os << key[0] << ',' << key[1] << ',' << key[2] << ',' << key[3] << ',' << c << '\n';
        emit(cfg, os.str());
    } else {
        json rows = json::array();
        for (const auto& [key, c] : census.classes)
            rows.push_back(json{{"n_star", key[0]},
                                {"n_1", key[1]},
                                {"m_10", key[2]},
                                {"m_11", key[3]},
                                {"count", c}});
        json j{{"schema", 1}, {"total", census.total}, {"classes", std::move(rows)}};
        emit(cfg, j.dump(2));
    }
    std::cerr << "enumerate: " << census.total << " graphs in " << census.classes.size()
              << " classes\n";
    return 0;
}

int cmd_validate(const RunConfig& cfg) {
    acceptance::Options opt;
    opt.quick = cfg.quick;
    opt.seed = cfg.seed;
    opt.jobs = cfg.effective_jobs();
    std::ostringstream os;
    auto results = acceptance::run_all(opt, os);
    emit(cfg, os.str());
    std::cerr << (acceptance::all_passed(results) ? "all criteria passed"
                                                  : "some criteria FAILED")
              << "\n";
    return acceptance::all_passed(results) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"k-core analysis and generation toolkit"};
    app.require_subcommand(1);
    RunConfig cfg;

    auto add_common = [&](CLI::App* sub, bool needs_n, bool needs_dm) {
        if (needs_n) sub->add_option("--n", cfg.n, "number of vertices")->required();
        if (needs_dm) {
            sub->add_option("--m", cfg.m, "number of edges");
            sub->add_option("--d", cfg.d, "average degree (m = ceil(d*n/2))");
        }
        sub->add_option("--seed", cfg.seed, "64-bit rng seed");
        sub->add_option("--out", cfg.out_path, "output file (default stdout)");
        sub->add_option("--format", cfg.format, "json or csv")
            ->check(CLI::IsMember({"json", "csv"}));
        sub->add_option("--jobs", cfg.jobs, "worker threads");
        sub->add_flag("--deterministic", cfg.deterministic, "force sequential execution");
    };

    auto* s_params = app.add_subcommand("params", "model constants and limit matrices");
    s_params->add_option("--d", cfg.d, "average degree")->required();
    s_params->add_option("--k", cfg.k, "core order k >= 3");
    s_params->add_option("--out", cfg.out_path, "output file");
    s_params->add_option("--format", cfg.format, "json");

    auto* s_thresh = app.add_subcommand("threshold", "k-core threshold d_k");
    s_thresh->add_option("--k", cfg.k, "core order")->required();
    s_thresh->add_option("--out", cfg.out_path, "output file");

    auto* s_core = app.add_subcommand("core", "peel the k-core of an edge-list graph");
    s_core->add_option("--k", cfg.k, "core order")->required();
    s_core->add_option("--in", cfg.in_path, "edge-list file")->required();
    s_core->add_option("--out", cfg.out_path, "output file");

    auto* s_wp = app.add_subcommand("wp", "warning propagation decomposition");
    s_wp->add_option("--k", cfg.k, "core order")->required();
    s_wp->add_option("--in", cfg.in_path, "edge-list file")->required();
    s_wp->add_option("--out", cfg.out_path, "output file");

    auto* s_forge = app.add_subcommand("forge", "one unconditional forge run");
    s_forge->add_option("--k", cfg.k, "core order")->required();
    add_common(s_forge, true, true);

    auto* s_cond = app.add_subcommand("forge-cond", "conditional forge sample");
    s_cond->add_option("--k", cfg.k, "core order")->required();
    s_cond->add_option("--targets", cfg.targets, "n_star,n_1,m_10,m_11")->delimiter(',');
    s_cond->add_option("--max-attempts", cfg.max_attempts, "restart budget");
    add_common(s_cond, true, true);

    auto* s_mc = app.add_subcommand("mc", "Monte Carlo core statistics");
    s_mc->add_option("--k", cfg.k, "core order")->required();
    s_mc->add_option("--reps", cfg.reps, "replicates");
    add_common(s_mc, true, true);

    auto* s_llt = app.add_subcommand("llt", "limit-law heatmap CSV");
    s_llt->add_option("--k", cfg.k, "core order")->required();
    add_common(s_llt, true, true);

    auto* s_enum = app.add_subcommand("enumerate", "exhaustive tiny-n census");
    s_enum->add_option("--k", cfg.k, "core order")->required();
    add_common(s_enum, true, true);

    auto* s_val = app.add_subcommand("validate", "run the acceptance suite");
    s_val->add_flag("--quick", cfg.quick, "reduced-size variants");
    s_val->add_option("--seed", cfg.seed, "rng seed");
    s_val->add_option("--jobs", cfg.jobs, "worker threads");
    s_val->add_option("--out", cfg.out_path, "output file");
    s_val->add_flag("--deterministic", cfg.deterministic, "force sequential execution");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (s_params->parsed()) return cmd_params(cfg);
        if (s_thresh->parsed()) return cmd_threshold(cfg);
        if (s_core->parsed()) return cmd_core(cfg);
        if (s_wp->parsed()) return cmd_wp(cfg);
        if (s_forge->parsed()) { cfg.resolve_m(true); return cmd_forge(cfg); }
        if (s_cond->parsed()) { cfg.resolve_m(true); return cmd_forge_cond(cfg); }
        if (s_mc->parsed()) { cfg.resolve_m(true); return cmd_mc(cfg); }
        if (s_llt->parsed()) { cfg.resolve_m(true); return cmd_llt(cfg); }
        if (s_enum->parsed()) { cfg.resolve_m(true); return cmd_enumerate(cfg); }
        if (s_val->parsed()) return cmd_validate(cfg);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
