#include "facts/grid_model.hpp"

#include <cmath>
#include <queue>
#include <sstream>

namespace facts {

namespace {

std::string bus_label(int id) { return "bus " + std::to_string(id); }

}  // namespace

Network::Network(double base_mva, std::vector<Bus> buses, std::vector<Branch> branches,
                 std::vector<Generator> generators)
    : base_mva_(base_mva),
      buses_(std::move(buses)),
      branches_(std::move(branches)),
      generators_(std::move(generators)) {
    validate_and_index();
}

void Network::validate_and_index() {
    using K = CaseError::Kind;
    if (!(base_mva_ > 0.0)) throw CaseError(K::invalid_value, "base_mva must be positive");
    if (buses_.empty()) throw CaseError(K::invalid_value, "case has no buses");

    std::unordered_map<int, std::size_t> record_of_id;
    for (std::size_t r = 0; r < buses_.size(); ++r) {
        const Bus& b = buses_[r];
        if (!record_of_id.emplace(b.id, r).second)
            throw CaseError(K::duplicate_bus, "duplicate bus id " + std::to_string(b.id));
        if (!(b.v_min > 0.0) || b.v_min > b.v_max)
            throw CaseError(K::invalid_value, bus_label(b.id) + ": voltage limits require 0 < v_min <= v_max");
        if (b.kind == BusKind::isolated) continue;
        dense_of_id_.emplace(b.id, bus_rows_.size());
        bus_rows_.push_back(r);
    }
    if (bus_rows_.empty()) throw CaseError(K::invalid_value, "case has no energized buses");

    const std::size_t nb = bus_rows_.size();
    gens_at_.assign(nb, {});
    branches_at_.assign(nb, {});

    auto lookup = [&](int id, const char* what) -> std::optional<std::size_t> {
        if (!record_of_id.count(id))
            throw CaseError(K::unknown_bus, std::string("unknown bus reference ") + std::to_string(id) + " in " + what);
        auto it = dense_of_id_.find(id);
        if (it == dense_of_id_.end()) return std::nullopt;
        return it->second;
    };

    for (std::size_t r = 0; r < branches_.size(); ++r) {
        const Branch& br = branches_[r];
        auto f = lookup(br.from, "branch table");
        auto t = lookup(br.to, "branch table");
        if (!br.in_service) continue;
        if (!f || !t)
            throw CaseError(K::invalid_value, "in-service branch " + std::to_string(br.from) + "-" +
                                                  std::to_string(br.to) + " touches an isolated bus");
        if (br.x0 == 0.0)
            throw CaseError(K::invalid_value, "branch " + std::to_string(br.from) + "-" + std::to_string(br.to) +
                                                  " has zero series reactance");
        if (!(br.tau > 0.0))
            throw CaseError(K::invalid_value, "branch " + std::to_string(br.from) + "-" + std::to_string(br.to) +
                                                  " has non-positive tap ratio");
        const std::size_t k = branch_rows_.size();
        branch_rows_.push_back(r);
        branch_from_.push_back(*f);
        branch_to_.push_back(*t);
        branches_at_[*f].push_back(k);
        if (*t != *f) branches_at_[*t].push_back(k);
    }

    for (std::size_t r = 0; r < generators_.size(); ++r) {
        const Generator& g = generators_[r];
        auto bi = lookup(g.bus, "generator table");
        if (g.p_min > g.p_max)
            throw CaseError(K::invalid_value, "generator at " + bus_label(g.bus) + ": p_min > p_max");
        if (g.q_min > g.q_max)
            throw CaseError(K::invalid_value, "generator at " + bus_label(g.bus) + ": q_min > q_max");
        if (g.cost.c2 < 0.0)
            throw CaseError(K::unsupported, "generator at " + bus_label(g.bus) + ": non-convex cost (c2 < 0)");
        if (!g.in_service) continue;
        if (!bi)
            throw CaseError(K::invalid_value, "in-service generator on isolated " + bus_label(g.bus));
        const std::size_t gi = gen_rows_.size();
        gen_rows_.push_back(r);
        gen_bus_.push_back(*bi);
        gens_at_[*bi].push_back(gi);
    }

    roles_.resize(nb);
    std::vector<std::size_t> slacks;
    for (std::size_t i = 0; i < nb; ++i) {
        BusKind k = bus(i).kind;
        if (k == BusKind::slack) slacks.push_back(i);
        if (k == BusKind::pv && gens_at_[i].empty()) k = BusKind::pq;
        roles_[i] = k;
    }
    if (slacks.empty()) throw CaseError(K::no_slack, "no slack bus");
    if (slacks.size() > 1) {
        std::ostringstream os;
        os << "multiple slack buses in one island:";
        for (auto s : slacks) os << ' ' << bus(s).id;
        throw CaseError(K::multiple_slack, os.str());
    }
    slack_ = slacks.front();
    if (gens_at_[slack_].empty())
        throw CaseError(K::invalid_value, "slack " + bus_label(bus(slack_).id) + " has no in-service generator");

    std::vector<char> seen(nb, 0);
    std::queue<std::size_t> frontier;
    frontier.push(slack_);
    seen[slack_] = 1;
    std::size_t reached = 1;
    while (!frontier.empty()) {
        const std::size_t i = frontier.front();
        frontier.pop();
        for (std::size_t k : branches_at_[i]) {
            const std::size_t j = branch_from_[k] == i ? branch_to_[k] : branch_from_[k];
            if (!seen[j]) {
                seen[j] = 1;
                ++reached;
                frontier.push(j);
            }
        }
    }
    if (reached != nb) {
        std::size_t first = 0;
        while (seen[first]) ++first;
        throw CaseError(K::disconnected, "disconnected in-service grid: " + bus_label(bus(first).id) +
                                             " is not reachable from the slack bus");
    }
}

std::optional<std::size_t> Network::dense_bus(int id) const {
    auto it = dense_of_id_.find(id);
    if (it == dense_of_id_.end()) return std::nullopt;
    return it->second;
}

double Network::total_p_load() const {
    double s = 0.0;
    for (std::size_t i = 0; i < n_bus(); ++i) s += bus(i).p_load;
    return s;
}

double Network::total_q_load() const {
    double s = 0.0;
    for (std::size_t i = 0; i < n_bus(); ++i) s += bus(i).q_load;
    return s;
}

Network scale_loads(const Network& net, double factor) {
    if (!(factor > 0.0)) throw std::invalid_argument("factor must be positive");
    std::vector<Bus> buses(net.all_buses().begin(), net.all_buses().end());
    for (Bus& b : buses) {
        b.p_load *= factor;
        b.q_load *= factor;
    }
    return Network(net.base_mva(), std::move(buses),
                   {net.all_branches().begin(), net.all_branches().end()},
                   {net.all_generators().begin(), net.all_generators().end()});
}

}  // namespace facts
