#include "facts/report.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

namespace facts {

using nlohmann::json;

namespace {

std::size_t dense_branch_of_row(const Network& net, int row) {
    for (std::size_t k = 0; k < net.n_branch(); ++k)
        if (static_cast<int>(net.branch_record(k)) + 1 == row) return k;
    throw SchemaError("candidate_sc_branches: no in-service branch on case row " + std::to_string(row));
}

template <typename T>
T get_as(const json& v, const std::string& key) {
    try {
        return v.get<T>();
    } catch (const json::exception&) {
        throw SchemaError("configuration key '" + key + "' has the wrong type");
    }
}

PlanReport::Sc sc_entry(const Network& net, std::size_t k, double value) {
    const Branch& br = net.branch(k);
    return {static_cast<int>(net.branch_record(k)) + 1, br.from, br.to, value, 100.0 * value / std::abs(br.x0)};
}

std::vector<PlanReport::ViolationEntry> entries(const Network& net, const std::vector<Violation>& v) {
    std::vector<PlanReport::ViolationEntry> out;
    for (const auto& x : v) out.push_back({to_string(x.kind), element_name(net, x), x.magnitude});
    return out;
}

json to_json(const PlanReport::Svc& s) { return {{"bus", s.bus}, {"mvar", s.mvar}}; }
json to_json(const PlanReport::Sc& s) {
    return {{"branch", s.branch}, {"from", s.from}, {"to", s.to}, {"x_pu", s.x_pu}, {"percent", s.percent}};
}
json to_json(const PlanReport::ViolationEntry& v) {
    return {{"kind", v.kind}, {"element", v.element}, {"magnitude", v.magnitude}};
}

template <typename T>
json array_of(const std::vector<T>& v) {
    json a = json::array();
    for (const auto& x : v) a.push_back(to_json(x));
    return a;
}

PlanReport::Svc svc_from(const json& j) { return {j.at("bus").get<int>(), j.at("mvar").get<double>()}; }
PlanReport::Sc sc_from(const json& j) {
    return {j.at("branch").get<int>(), j.at("from").get<int>(), j.at("to").get<int>(), j.at("x_pu").get<double>(),
            j.at("percent").get<double>()};
}
PlanReport::ViolationEntry violation_from(const json& j) {
    return {j.at("kind").get<std::string>(), j.at("element").get<std::string>(), j.at("magnitude").get<double>()};
}

template <typename T, typename F>
std::vector<T> list_from(const json& j, F f) {
    std::vector<T> out;
    for (const auto& x : j) out.push_back(f(x));
    return out;
}

}  // namespace

std::string element_name(const Network& net, const Violation& v) {
    switch (v.kind) {
        case Violation::Kind::voltage: return "bus " + std::to_string(net.bus(v.element).id);
        case Violation::Kind::p_gen:
        case Violation::Kind::q_gen:
            return "gen " + std::to_string(v.element + 1) + " at bus " + std::to_string(net.bus(net.gen_bus(v.element)).id);
        case Violation::Kind::line: {
            const std::size_t nl = net.n_branch();
            const Branch& br = net.branch(v.element % nl);
            return "line " + std::to_string(br.from) + "-" + std::to_string(br.to) +
                   (v.element < nl ? " from" : " to");
        }
    }
    return "?";
}

PlanConfig config_from_json(std::string_view text, const Network& net, const PlanConfig& base) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw SchemaError(std::string("configuration is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw SchemaError("configuration must be a JSON object");

    PlanConfig cfg = base;
    for (const auto& [key, v] : j.items()) {
        if (key == "c_sc") cfg.c_sc = get_as<double>(v, key);
        else if (key == "c_svc") cfg.c_svc = get_as<double>(v, key);
        else if (key == "n_years") cfg.n_years = get_as<double>(v, key);
        else if (key == "eps_q") cfg.eps_q = get_as<double>(v, key);
        else if (key == "trust_v") cfg.trust_v = get_as<double>(v, key);
        else if (key == "trust_theta") cfg.trust_theta = get_as<double>(v, key);
        else if (key == "trust_dx") cfg.trust_dx = get_as<double>(v, key);
        else if (key == "sc_max") cfg.sc_max = get_as<double>(v, key);
        else if (key == "sparsity_threshold_svc") cfg.svc_threshold_mvar = get_as<double>(v, key);
        else if (key == "sparsity_threshold_sc") cfg.sc_threshold = get_as<double>(v, key);
        else if (key == "tol_feas") cfg.tol_feas = get_as<double>(v, key);
        else if (key == "tol_outer") cfg.tol_outer = get_as<double>(v, key);
        else if (key == "max_outer_iter") cfg.max_outer_iter = get_as<int>(v, key);
        else if (key == "freeze_dispatch") cfg.freeze_dispatch = get_as<bool>(v, key);
        else if (key == "include_line_limits") cfg.include_line_limits = get_as<bool>(v, key);
        else if (key == "threads") cfg.threads = get_as<int>(v, key);
        else if (key == "qp_tol_primal") cfg.qp.tol_primal = get_as<double>(v, key);
        else if (key == "qp_tol_dual") cfg.qp.tol_dual = get_as<double>(v, key);
        else if (key == "qp_max_iter") cfg.qp.max_iter = get_as<int>(v, key);
        else if (key == "qp_rho") cfg.qp.rho = get_as<double>(v, key);
        else if (key == "qp_sigma") cfg.qp.sigma = get_as<double>(v, key);
        else if (key == "qp_alpha") cfg.qp.alpha = get_as<double>(v, key);
        else if (key == "qp_polish") cfg.qp.polish = get_as<bool>(v, key);
        else if (key == "qp_ipm_max_iter") cfg.qp.ipm_max_iter = get_as<int>(v, key);
        else if (key == "qp_method") {
            const auto m = get_as<std::string>(v, key);
            if (m == "admm") cfg.qp.method = QpMethod::admm;
            else if (m == "interior_point") cfg.qp.method = QpMethod::interior_point;
            else throw SchemaError("qp_method must be \"admm\" or \"interior_point\"");
        }
        else if (key == "candidate_sc_branches") {
            std::vector<std::size_t> k;
            for (int row : get_as<std::vector<int>>(v, key)) k.push_back(dense_branch_of_row(net, row));
            cfg.candidate_sc = k;
        } else if (key == "candidate_svc_buses") {
            std::vector<std::size_t> b;
            for (int id : get_as<std::vector<int>>(v, key)) {
                const auto i = net.dense_bus(id);
                if (!i) throw SchemaError("candidate_svc_buses: unknown bus " + std::to_string(id));
                b.push_back(*i);
            }
            cfg.candidate_svc = b;
        } else {
            throw SchemaError("unknown configuration key '" + key + "'");
        }
    }
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw SchemaError(e.what());
    }
    return cfg;
}

std::string config_to_json(const PlanConfig& cfg, const Network& net) {
    json j = {{"c_sc", cfg.c_sc},
              {"c_svc", cfg.c_svc},
              {"n_years", cfg.n_years},
              {"eps_q", cfg.eps_q},
              {"trust_v", cfg.trust_v},
              {"trust_theta", cfg.trust_theta},
              {"trust_dx", cfg.trust_dx},
              {"sc_max", cfg.sc_max},
              {"sparsity_threshold_svc", cfg.svc_threshold_mvar},
              {"sparsity_threshold_sc", cfg.sc_threshold},
              {"tol_feas", cfg.tol_feas},
              {"tol_outer", cfg.tol_outer},
              {"max_outer_iter", cfg.max_outer_iter},
              {"freeze_dispatch", cfg.freeze_dispatch},
              {"include_line_limits", cfg.include_line_limits},
              {"threads", cfg.threads},
              {"qp_tol_primal", cfg.qp.tol_primal},
              {"qp_tol_dual", cfg.qp.tol_dual},
              {"qp_max_iter", cfg.qp.max_iter},
              {"qp_rho", cfg.qp.rho},
              {"qp_sigma", cfg.qp.sigma},
              {"qp_alpha", cfg.qp.alpha},
              {"qp_polish", cfg.qp.polish},
              {"qp_ipm_max_iter", cfg.qp.ipm_max_iter},
              {"qp_method", to_string(cfg.qp.method)}};
    if (cfg.candidate_sc) {
        std::vector<int> rows;
        for (auto k : *cfg.candidate_sc) rows.push_back(static_cast<int>(net.branch_record(k)) + 1);
        j["candidate_sc_branches"] = rows;
    }
    if (cfg.candidate_svc) {
        std::vector<int> ids;
        for (auto i : *cfg.candidate_svc) ids.push_back(net.bus(i).id);
        j["candidate_svc_buses"] = ids;
    }
    return j.dump();
}

PlanReport make_report(const Network& net, const std::vector<Scenario>& scenarios, const PlanResult& result,
                       const PlanConfig& cfg) {
    const InvestmentPlan& p = result.plan;
    PlanReport r;
    r.status = to_string(p.status);
    r.message = result.message;
    r.investment = p.cost.investment;
    r.hourly = p.cost.hourly;
    r.total = p.cost.total;
    r.n_years = cfg.n_years;
    const double base = net.base_mva();
    for (std::size_t i = 0; i < net.n_bus(); ++i) {
        const double c = p.capacity.svc.size() ? p.capacity.svc[static_cast<Eigen::Index>(i)] : 0.0;
        if (c > 0.0) r.svc.push_back({net.bus(i).id, c * base});
    }
    for (std::size_t k = 0; k < net.n_branch(); ++k) {
        const double c = p.capacity.sc.size() ? p.capacity.sc[static_cast<Eigen::Index>(k)] : 0.0;
        if (c > 0.0) r.sc.push_back(sc_entry(net, k, c));
    }
    for (std::size_t a = 0; a < scenarios.size(); ++a) {
        PlanReport::ScenarioEntry e;
        e.year = scenarios[a].year;
        e.segment = scenarios[a].segment;
        e.sample = scenarios[a].sample;
        e.probability = scenarios[a].probability;
        e.hours = scenarios[a].hours_per_year;
        if (a < p.states.size()) {
            const SystemState& st = p.states[a];
            for (std::size_t g = 0; g < net.n_gen(); ++g) e.hourly_cost += net.gen_cost(g, st.p_gen[static_cast<Eigen::Index>(g)]);
            for (std::size_t i = 0; i < net.n_bus(); ++i)
                if (st.dq[static_cast<Eigen::Index>(i)] != 0.0)
                    e.svc_settings.push_back({net.bus(i).id, st.dq[static_cast<Eigen::Index>(i)] * base});
            for (std::size_t k = 0; k < net.n_branch(); ++k)
                if (st.dx[static_cast<Eigen::Index>(k)] != 0.0)
                    e.sc_settings.push_back(sc_entry(net, k, st.dx[static_cast<Eigen::Index>(k)]));
        }
        if (a < result.violations_before.size()) e.before = entries(net, result.violations_before[a]);
        if (a < result.violations_after.size()) e.after = entries(net, result.violations_after[a]);
        r.scenarios.push_back(std::move(e));
    }
    for (const auto& t : result.trace)
        r.trace.push_back({t.iteration, t.objective, t.max_violation, to_string(t.qp_status), t.qp_iterations,
                           t.pf_iterations, t.step_norm, t.trust_v, t.accepted});
    r.config = config_to_json(cfg, net);
    return r;
}

std::string report_to_json(const PlanReport& r) {
    json scen = json::array();
    for (const auto& e : r.scenarios)
        scen.push_back({{"year", e.year},
                        {"segment", e.segment},
                        {"sample", e.sample},
                        {"probability", e.probability},
                        {"hours", e.hours},
                        {"hourly_cost", e.hourly_cost},
                        {"svc_settings", array_of(e.svc_settings)},
                        {"sc_settings", array_of(e.sc_settings)},
                        {"violations_before", array_of(e.before)},
                        {"violations_after", array_of(e.after)}});
    json trace = json::array();
    for (const auto& t : r.trace)
        trace.push_back({{"iteration", t.iteration},
                         {"objective", t.objective},
                         {"max_violation", t.max_violation},
                         {"qp_status", t.qp_status},
                         {"qp_iterations", t.qp_iterations},
                         {"pf_iterations", t.pf_iterations},
                         {"step_norm", t.step_norm},
                         {"trust_v", t.trust_v},
                         {"accepted", t.accepted}});
    const json j = {{"schema", r.schema},
                    {"status", r.status},
                    {"message", r.message},
                    {"cost", {{"investment", r.investment}, {"hourly", r.hourly}, {"total", r.total}, {"n_years", r.n_years}}},
                    {"svc", array_of(r.svc)},
                    {"sc", array_of(r.sc)},
                    {"scenarios", scen},
                    {"trace", trace},
                    {"config", json::parse(r.config.empty() ? "{}" : r.config)}};
    return j.dump(2);
}

PlanReport report_from_json(std::string_view text) {
    try {
        const json j = json::parse(text);
        PlanReport r;
        r.schema = j.at("schema").get<int>();
        if (r.schema != 1) throw SchemaError("unsupported report schema " + std::to_string(r.schema));
        r.status = j.at("status").get<std::string>();
        r.message = j.at("message").get<std::string>();
        const json& c = j.at("cost");
        r.investment = c.at("investment").get<double>();
        r.hourly = c.at("hourly").get<double>();
        r.total = c.at("total").get<double>();
        r.n_years = c.at("n_years").get<double>();
        r.svc = list_from<PlanReport::Svc>(j.at("svc"), svc_from);
        r.sc = list_from<PlanReport::Sc>(j.at("sc"), sc_from);
        for (const auto& s : j.at("scenarios")) {
            PlanReport::ScenarioEntry e;
            e.year = s.at("year").get<int>();
            e.segment = s.at("segment").get<int>();
            e.sample = s.at("sample").get<int>();
            e.probability = s.at("probability").get<double>();
            e.hours = s.at("hours").get<double>();
            e.hourly_cost = s.at("hourly_cost").get<double>();
            e.svc_settings = list_from<PlanReport::Svc>(s.at("svc_settings"), svc_from);
            e.sc_settings = list_from<PlanReport::Sc>(s.at("sc_settings"), sc_from);
            e.before = list_from<PlanReport::ViolationEntry>(s.at("violations_before"), violation_from);
            e.after = list_from<PlanReport::ViolationEntry>(s.at("violations_after"), violation_from);
            r.scenarios.push_back(std::move(e));
        }
        for (const auto& t : j.at("trace"))
            r.trace.push_back({t.at("iteration").get<int>(), t.at("objective").get<double>(),
                               t.at("max_violation").get<double>(), t.at("qp_status").get<std::string>(),
                               t.at("qp_iterations").get<int>(), t.at("pf_iterations").get<int>(),
                               t.at("step_norm").get<double>(), t.at("trust_v").get<double>(),
                               t.at("accepted").get<bool>()});
        r.config = j.at("config").dump();
        return r;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("malformed plan report: ") + e.what());
    }
}

std::string plan_dot(const Network& net, const PlanResult& result) {
    const InvestmentPlan& p = result.plan;
    std::set<std::size_t> overloaded;
    for (const auto& list : result.violations_before)
        for (const auto& v : list)
            if (v.kind == Violation::Kind::line) overloaded.insert(v.element % net.n_branch());

    std::ostringstream os;
    os.precision(6);
    os << "graph grid {\n  node [shape=circle];\n";
    for (std::size_t i = 0; i < net.n_bus(); ++i) {
        const double mvar = p.capacity.svc.size() ? p.capacity.svc[static_cast<Eigen::Index>(i)] * net.base_mva() : 0.0;
        os << "  b" << net.bus(i).id << " [label=\"" << net.bus(i).id << "\"";
        if (!net.gens_at(i).empty()) os << ", shape=doublecircle";
        if (mvar > 0.0) os << ", svc_mvar=" << mvar << ", style=filled, fillcolor=lightblue";
        os << "];\n";
    }
    for (std::size_t k = 0; k < net.n_branch(); ++k) {
        const Branch& br = net.branch(k);
        const double pct = p.capacity.sc.size() ? 100.0 * p.capacity.sc[static_cast<Eigen::Index>(k)] / std::abs(br.x0) : 0.0;
        const bool hot = overloaded.count(k) > 0;
        os << "  b" << br.from << " -- b" << br.to << " [overloaded=" << (hot ? "true" : "false");
        if (pct > 0.0) os << ", sc_pct=" << pct << ", penwidth=3";
        if (hot) os << ", color=red";
        else if (pct > 0.0) os << ", color=blue";
        os << "];\n";
    }
    os << "}\n";
    return os.str();
}

}  // namespace facts
