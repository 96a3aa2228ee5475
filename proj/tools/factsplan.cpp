#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "facts/initializer.hpp"
#include "facts/parallel.hpp"
#include "facts/planner.hpp"
#include "facts/report.hpp"
#include "facts/scenarios.hpp"

using namespace facts;
using nlohmann::json;

namespace {

enum Exit { ok = 0, failure = 1, bad_input = 2, invalid_case = 3, not_converged = 4, infeasible = 5 };

// Case errors map to exit 2 (unreadable) or 3 (readable but invalid).
struct CaseLoad {
    std::unique_ptr<Network> net;
    int code = ok;
};

CaseLoad load_case(const std::string& path) {
    CaseLoad out;
    try {
        out.net = std::make_unique<Network>(parse_case_file(path));
    } catch (const CaseError& e) {
        const bool unreadable = e.kind() == CaseError::Kind::io || e.kind() == CaseError::Kind::syntax;
        std::cerr << path;
        if (e.line() > 0) std::cerr << ':' << e.line() << ':' << e.column();
        std::cerr << ": error: " << e.what() << '\n';
        out.code = unreadable ? bad_input : invalid_case;
    }
    return out;
}

// Writes to `path`, or stdout for "" and "-".
bool emit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return true;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        std::cerr << "error: cannot write '" << path << "'\n";
        return false;
    }
    f << text;
    return static_cast<bool>(f);
}

json violations_json(const Network& net, const std::vector<Violation>& v) {
    json a = json::array();
    for (const auto& x : v) a.push_back({{"kind", to_string(x.kind)}, {"element", element_name(net, x)}, {"magnitude", x.magnitude}});
    return a;
}

json state_json(const Network& net, const SystemState& s) {
    const double base = net.base_mva();
    json buses = json::array(), gens = json::array(), branches = json::array();
    for (std::size_t i = 0; i < net.n_bus(); ++i)
        buses.push_back({{"id", net.bus(i).id},
                         {"vm", s.v[static_cast<Eigen::Index>(i)]},
                         {"va_deg", s.theta[static_cast<Eigen::Index>(i)] * 180.0 / std::numbers::pi},
                         {"svc_mvar", s.dq[static_cast<Eigen::Index>(i)] * base}});
    for (std::size_t g = 0; g < net.n_gen(); ++g)
        gens.push_back({{"bus", net.bus(net.gen_bus(g)).id},
                        {"pg_mw", s.p_gen[static_cast<Eigen::Index>(g)] * base},
                        {"qg_mvar", s.q_gen[static_cast<Eigen::Index>(g)] * base}});
    const BranchFlows f = branch_flows(net, s);
    for (std::size_t k = 0; k < net.n_branch(); ++k) {
        const Branch& br = net.branch(k);
        json b = {{"from", br.from},
                  {"to", br.to},
                  {"pf_mw", f.s_from[k].real() * base},
                  {"qf_mvar", f.s_from[k].imag() * base},
                  {"pt_mw", f.s_to[k].real() * base},
                  {"qt_mvar", f.s_to[k].imag() * base}};
        if (br.s_rate > 0.0) b["loading"] = std::max(std::abs(f.s_from[k]), std::abs(f.s_to[k])) / br.s_rate;
        if (s.dx[static_cast<Eigen::Index>(k)] != 0.0) b["dx_pu"] = s.dx[static_cast<Eigen::Index>(k)];
        branches.push_back(std::move(b));
    }
    return {{"buses", buses}, {"generators", gens}, {"branches", branches}};
}

int cmd_validate(const std::string& path) {
    const CaseLoad c = load_case(path);
    if (!c.net) return c.code;
    const Network& net = *c.net;
    std::cout << path << ": ok (" << net.n_bus() << " buses, " << net.n_branch() << " branches, " << net.n_gen()
              << " generators, slack bus " << net.bus(net.slack()).id << ")\n";
    return ok;
}

struct PfArgs {
    std::string path, out;
    double scale = 1.0;
    int max_iter = 30;
    double tol = 1e-8;
    double tol_feas = 1e-4;
    bool no_q_limits = false;
};

int cmd_pf(const PfArgs& a) {
    const CaseLoad c = load_case(a.path);
    if (!c.net) return c.code;
    const Network net = scale_loads(*c.net, a.scale);
    PfOptions opt;
    opt.max_iter = a.max_iter;
    opt.tol = a.tol;
    opt.enforce_q_limits = !a.no_q_limits;
    opt.flat_start_fallback = false;
    std::ostringstream trace;
    opt.trace = &trace;
    const PfResult r = solve_pf(net, SystemState::from_case(net), Loads::from_network(net), opt);
    if (!r.converged) {
        std::cerr << "power flow did not converge: " << r.diagnostic << '\n' << trace.str();
        return failure;
    }
    json j = state_json(net, r.state);
    j["converged"] = true;
    j["iterations"] = r.iterations;
    j["max_mismatch"] = r.max_mismatch;
    j["load_scale"] = a.scale;
    j["violations"] = violations_json(net, check_feasibility(net, r.state, a.tol_feas));
    return emit(a.out, j.dump(2) + "\n") ? ok : failure;
}

struct SampleArgs {
    std::string path, out;
    int years = 1;
    int per_year = 16;
    double beta = 0.015;
    std::uint64_t seed = 1;
    double scale = 1.0;
    bool zero_noise = false;
    bool filter = false;
    int threads = 0;
};

std::vector<Scenario> sample_set(const Network& net, const SampleArgs& a) {
    const auto table = default_ld_table();
    std::vector<Scenario> set = sample_years(net, table, MultiYearSpec{a.years, a.per_year, a.beta, a.seed, a.zero_noise});
    if (!a.filter) return set;
    // Classify every sample once, in parallel, then collapse per segment.
    std::vector<Congestion> cls(set.size());
    parallel_for(set.size(), a.threads, [&](std::size_t k) { cls[k] = classify_congestion(net, set[k]); });
    std::map<std::string, Congestion> by_tag;
    for (std::size_t k = 0; k < set.size(); ++k) by_tag[set[k].seed_tag] = cls[k];
    return congestion_filter_all(net, table, set, [&](const Scenario& s) { return by_tag.at(s.seed_tag); }, a.beta);
}

int cmd_sample(const SampleArgs& a) {
    const CaseLoad c = load_case(a.path);
    if (!c.net) return c.code;
    const Network net = scale_loads(*c.net, a.scale);
    const std::vector<Scenario> set = sample_set(net, a);
    std::ostringstream os;
    os.precision(17);
    write_scenarios(os, set);
    std::cerr << set.size() << " scenarios\n";
    return emit(a.out, os.str()) ? ok : failure;
}

struct PlanArgs {
    std::string path, scenarios, config, out, dot, dump_qp, init = "opf";
    double scale = 1.0;
    SampleArgs sampling;
    bool sample = false;
    PlanConfig cfg;
    bool freeze = false, no_lines = false;
};

int cmd_plan(PlanArgs a, const CLI::App& sub) {
    const CaseLoad c = load_case(a.path);
    if (!c.net) return c.code;
    const Network net = scale_loads(*c.net, a.scale);

    // File values first, explicit flags on top.
    PlanConfig cfg;
    try {
        if (!a.config.empty()) {
            std::ifstream f(a.config);
            if (!f) throw SchemaError("cannot read configuration '" + a.config + "'");
            std::stringstream ss;
            ss << f.rdbuf();
            cfg = config_from_json(ss.str(), net);
        }
        auto set = [&](const char* flag) { return sub.get_option(flag)->count() > 0; };
        if (set("--c-sc")) cfg.c_sc = a.cfg.c_sc;
        if (set("--c-svc")) cfg.c_svc = a.cfg.c_svc;
        if (set("--n-years")) cfg.n_years = a.cfg.n_years;
        if (set("--max-outer-iter")) cfg.max_outer_iter = a.cfg.max_outer_iter;
        if (set("--tol-feas")) cfg.tol_feas = a.cfg.tol_feas;
        if (set("--threads")) cfg.threads = a.cfg.threads;
        if (a.freeze) cfg.freeze_dispatch = true;
        if (a.no_lines) cfg.include_line_limits = false;
        cfg.validate();
    } catch (const std::exception& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return bad_input;
    }

    std::vector<Scenario> scenarios;
    try {
        if (!a.scenarios.empty()) {
            std::ifstream f(a.scenarios);
            if (!f) throw std::runtime_error("cannot read scenario file '" + a.scenarios + "'");
            scenarios = read_scenarios(f, net);
            if (scenarios.empty()) throw std::runtime_error("scenario file is empty");
        } else if (a.sample) {
            a.sampling.threads = cfg.threads;
            scenarios = sample_set(net, a.sampling);
        } else {
            scenarios.push_back(Scenario::from_network(net));
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return bad_input;
    }

    std::vector<SystemState> starts(scenarios.size());
    try {
        parallel_for(scenarios.size(), cfg.threads, [&](std::size_t k) {
            starts[k] = a.init == "proportional" ? init_proportional(net, scenarios[k]).state
                                                 : init_opf_no_thermal(net, scenarios[k]).state;
        });
    } catch (const std::exception& e) {
        std::cerr << "initialization failed: " << e.what() << '\n';
        return infeasible;
    }

    if (!a.dump_qp.empty()) {
        std::ostringstream os;
        write_triplets(assemble_qp(net, scenarios, starts, annual_hours(scenarios), cfg).qp, os);
        if (!emit(a.dump_qp, os.str())) return failure;
    }

    const PlanResult r = plan(net, scenarios, starts, cfg);
    const PlanReport report = make_report(net, scenarios, r, cfg);
    if (!emit(a.out, report_to_json(report) + "\n")) return failure;
    if (!a.dot.empty() && !emit(a.dot, plan_dot(net, r))) return failure;

    std::cerr << "status " << report.status << ": " << report.svc.size() << " SVC, " << report.sc.size()
              << " SC, investment " << report.investment << " $, operation " << report.hourly << " $/h\n";
    if (!report.message.empty()) std::cerr << report.message << '\n';
    switch (r.plan.status) {
        case PlanStatus::converged: return ok;
        case PlanStatus::not_converged: return not_converged;
        case PlanStatus::infeasible: return infeasible;
    }
    return failure;
}

void add_sampling(CLI::App* cmd, SampleArgs& s) {
    cmd->add_option("--years", s.years, "Planning years to sample")->check(CLI::PositiveNumber);
    cmd->add_option("--per-year", s.per_year, "Samples per year across all segments")->check(CLI::PositiveNumber);
    cmd->add_option("--beta", s.beta, "Annual load growth")->check(CLI::NonNegativeNumber);
    cmd->add_option("--seed", s.seed, "Random seed");
    cmd->add_flag("--zero-noise", s.zero_noise, "Use segment base loads without noise");
    cmd->add_flag("--filter", s.filter, "Collapse segments whose samples are all uncongested");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"FACTS placement and sizing planner"};
    app.require_subcommand(1);

    std::string validate_path;
    auto* validate = app.add_subcommand("validate", "Parse and check a case file");
    validate->add_option("case", validate_path, "MATPOWER .m or JSON case")->required();

    PfArgs pf;
    auto* pfc = app.add_subcommand("pf", "Solve the AC power flow at the case dispatch");
    pfc->add_option("case", pf.path, "Case file")->required();
    pfc->add_option("--scale", pf.scale, "Multiply every load")->check(CLI::PositiveNumber);
    pfc->add_option("--max-iter", pf.max_iter, "Newton iteration limit")->check(CLI::PositiveNumber);
    pfc->add_option("--tol", pf.tol, "Mismatch tolerance (pu)")->check(CLI::PositiveNumber);
    pfc->add_option("--tol-feas", pf.tol_feas, "Limit violation tolerance (pu)")->check(CLI::NonNegativeNumber);
    pfc->add_flag("--no-q-limits", pf.no_q_limits, "Keep PV buses regardless of reactive limits");
    pfc->add_option("-o,--out", pf.out, "Output JSON (default stdout)");

    SampleArgs sa;
    auto* sample = app.add_subcommand("sample", "Generate load scenarios");
    sample->add_option("case", sa.path, "Case file")->required();
    add_sampling(sample, sa);
    sample->add_option("--scale", sa.scale, "Multiply every base load")->check(CLI::PositiveNumber);
    sample->add_option("--threads", sa.threads, "Worker threads for --filter (0 = all cores)");
    sample->add_option("-o,--out", sa.out, "Output JSON lines (default stdout)");

    PlanArgs pa;
    auto* planc = app.add_subcommand("plan", "Place and size SC and SVC devices");
    planc->add_option("case", pa.path, "Case file")->required();
    planc->add_option("--scenarios", pa.scenarios, "Scenario file from 'sample'");
    planc->add_flag("--sample", pa.sample, "Sample scenarios with the sampling flags instead of a single case scenario");
    add_sampling(planc, pa.sampling);
    planc->add_option("--scale", pa.scale, "Multiply every base load")->check(CLI::PositiveNumber);
    planc->add_option("--config", pa.config, "Flat JSON configuration");
    planc->add_option("--c-sc", pa.cfg.c_sc, "Series compensation cost ($/Ohm)");
    planc->add_option("--c-svc", pa.cfg.c_svc, "Shunt compensation cost ($/MVAr)");
    planc->add_option("--n-years", pa.cfg.n_years, "Planning horizon (years)");
    planc->add_option("--max-outer-iter", pa.cfg.max_outer_iter, "Outer iteration limit");
    planc->add_option("--tol-feas", pa.cfg.tol_feas, "Feasibility tolerance (pu)");
    planc->add_option("--threads", pa.cfg.threads, "Scenario worker threads (0 = all cores)");
    planc->add_flag("--freeze-dispatch", pa.freeze, "Hold generator outputs and voltages at their initial values");
    planc->add_flag("--no-line-limits", pa.no_lines, "Ignore line ratings");
    planc->add_option("--init", pa.init, "Initial dispatch")->check(CLI::IsMember({"opf", "proportional"}));
    planc->add_option("-o,--out", pa.out, "Report JSON (default stdout)");
    planc->add_option("--dot", pa.dot, "Write a Graphviz view of the plan");
    planc->add_option("--dump-qp", pa.dump_qp, "Write the first QP as sparse triplets");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : bad_input;
    }

    try {
        if (*validate) return cmd_validate(validate_path);
        if (*pfc) return cmd_pf(pf);
        if (*sample) return cmd_sample(sa);
        if (*planc) return cmd_plan(pa, *planc);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return failure;
    }
    return failure;
}
