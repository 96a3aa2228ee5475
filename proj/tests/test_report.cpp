#include <doctest.h>

#include <regex>

#include "facts/initializer.hpp"
#include "facts/report.hpp"
#include "support/cases.hpp"

using namespace facts;
namespace ft = facts::testing;

namespace {

struct Planned {
    Network net = scale_loads(ft::case30(), 1.05);
    std::vector<Scenario> scenarios{Scenario::from_network(net)};
    PlanConfig cfg;
    PlanResult result = plan(net, scenarios, {init_opf_no_thermal(net, scenarios[0]).state}, cfg);
};

const Planned& planned() {
    static const Planned p;
    return p;
}

}  // namespace

TEST_CASE("configuration documents") {
    const Network net = ft::case30();
    SUBCASE("overrides apply on top of the base") {
        const PlanConfig c = config_from_json(R"({"c_svc": 1234.5, "n_years": 10, "freeze_dispatch": true,
                                                  "candidate_svc_buses": [8, 30], "candidate_sc_branches": [10],
                                                  "qp_max_iter": 500})", net);
        CHECK(c.c_svc == 1234.5);
        CHECK(c.n_years == 10.0);
        CHECK(c.freeze_dispatch);
        CHECK(c.qp.max_iter == 500);
        REQUIRE(c.candidate_svc);
        CHECK(*c.candidate_svc == std::vector<std::size_t>{*net.dense_bus(8), *net.dense_bus(30)});
        REQUIRE(c.candidate_sc);
        REQUIRE(c.candidate_sc->size() == 1);
        CHECK(net.branch(c.candidate_sc->front()).from == 6);
        CHECK(net.branch(c.candidate_sc->front()).to == 8);
        CHECK(c.c_sc == PlanConfig{}.c_sc);
        CHECK(c.qp.method == QpMethod::interior_point);
        CHECK(config_from_json(R"({"qp_method": "admm"})", net).qp.method == QpMethod::admm);
    }
    SUBCASE("serialization round-trips") {
        PlanConfig c;
        c.eps_q = 0.07;
        c.candidate_svc = std::vector<std::size_t>{3, 7};
        const std::string text = config_to_json(c, net);
        CHECK(config_to_json(config_from_json(text, net), net) == text);
    }
    SUBCASE("schema errors") {
        CHECK_THROWS_WITH_AS(config_from_json(R"({"c_svc": 1, "bogus": 2})", net), doctest::Contains("bogus"), SchemaError);
        CHECK_THROWS_AS(config_from_json(R"({"c_svc": "cheap"})", net), SchemaError);
        CHECK_THROWS_AS(config_from_json(R"({"eps_q": 0})", net), SchemaError);
        CHECK_THROWS_AS(config_from_json(R"([1, 2])", net), SchemaError);
        CHECK_THROWS_AS(config_from_json(R"({"c_svc": )", net), SchemaError);
        CHECK_THROWS_AS(config_from_json(R"({"candidate_svc_buses": [99]})", net), SchemaError);
        CHECK_THROWS_AS(config_from_json(R"({"candidate_sc_branches": [0]})", net), SchemaError);
        CHECK_THROWS_AS(config_from_json(R"({"qp_method": "simplex"})", net), SchemaError);
    }
}

TEST_CASE("element names use case identifiers") {
    const Network net = ft::case30();
    const std::size_t k = *config_from_json(R"({"candidate_sc_branches": [10]})", net).candidate_sc->begin();
    CHECK(element_name(net, {Violation::Kind::line, k, 0.1}) == "line 6-8 from");
    CHECK(element_name(net, {Violation::Kind::line, net.n_branch() + k, 0.1}) == "line 6-8 to");
    CHECK(element_name(net, {Violation::Kind::voltage, *net.dense_bus(8), 0.1}) == "bus 8");
    CHECK(element_name(net, {Violation::Kind::q_gen, 0, 0.1}) == "gen 1 at bus 1");
}

TEST_CASE("plan reports") {
    const Planned& p = planned();
    const PlanReport r = make_report(p.net, p.scenarios, p.result, p.cfg);
    CHECK(r.schema == 1);
    CHECK(r.status == "converged");
    REQUIRE(r.svc.size() == 1);
    CHECK(r.svc[0].bus == 8);
    CHECK(r.svc[0].mvar == doctest::Approx(100.0 * p.result.plan.capacity.svc.maxCoeff()));
    CHECK(r.sc.empty());
    REQUIRE(r.scenarios.size() == 1);
    CHECK(!r.scenarios[0].before.empty());
    CHECK(r.scenarios[0].after.empty());
    CHECK(r.trace.size() == p.result.trace.size());

    const std::string text = report_to_json(r);
    const PlanReport back = report_from_json(text);
    CHECK(back == r);
    CHECK(report_to_json(back) == text);

    CHECK_THROWS_AS(report_from_json(std::regex_replace(text, std::regex("\"schema\": 1"), "\"schema\": 2")), SchemaError);
    CHECK_THROWS_AS(report_from_json("{\"schema\": 1}"), SchemaError);
}

TEST_CASE("DOT output marks devices and initial overloads") {
    const Planned& p = planned();
    const std::string dot = plan_dot(p.net, p.result);
    CHECK(dot.rfind("graph grid {", 0) == 0);
    CHECK(std::regex_search(dot, std::regex(R"(b8 \[label="8", svc_mvar=2\.[0-9]+)")));
    CHECK(std::regex_search(dot, std::regex(R"(b6 -- b8 \[overloaded=true)")));
    std::size_t edges = 0;
    for (std::size_t at = dot.find(" -- "); at != std::string::npos; at = dot.find(" -- ", at + 1)) ++edges;
    CHECK(edges == p.net.n_branch());
    CHECK(dot.find("sc_pct") == std::string::npos);
}
