#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace facts {

/// Bus type codes follow the MATPOWER BUS_TYPE column.
enum class BusKind { pq = 1, pv = 2, slack = 3, isolated = 4 };

/// Static bus data in per-unit. Loads and shunts are divided by the system
/// base; angles are radians.
struct Bus {
    int id = 0;
    BusKind kind = BusKind::pq;
    double p_load = 0.0;
    double q_load = 0.0;
    double g_shunt = 0.0;
    double b_shunt = 0.0;
    int area = 1;
    double v_init = 1.0;
    double theta_init = 0.0;
    double base_kv = 0.0;
    int zone = 1;
    double v_max = 1.1;
    double v_min = 0.9;
};

/// Polynomial generator cost in MATPOWER units: C(P) = c2 P^2 + c1 P + c0 with
/// P in MW and C in $/h.
struct CostPoly {
    double c2 = 0.0;
    double c1 = 0.0;
    double c0 = 0.0;
    double startup = 0.0;
    double shutdown = 0.0;

    double operator()(double p_mw) const { return (c2 * p_mw + c1) * p_mw + c0; }
};

struct Generator {
    int bus = 0;
    double p_init = 0.0;
    double q_init = 0.0;
    double q_max = 0.0;
    double q_min = 0.0;
    double v_setpoint = 1.0;
    double m_base = 100.0;
    bool in_service = true;
    double p_max = 0.0;
    double p_min = 0.0;
    CostPoly cost;
};

/// Pi-model branch. `x0` is the series reactance before any series
/// compensation; `tau` is 1 for lines without a transformer.
struct Branch {
    int from = 0;
    int to = 0;
    double r = 0.0;
    double x0 = 0.0;
    double b = 0.0;
    double s_rate = 0.0;  // 0 = unlimited
    double rate_b = 0.0;
    double rate_c = 0.0;
    double tau = 1.0;
    double theta_shift = 0.0;
    bool in_service = true;
    double ang_min = -360.0;
    double ang_max = 360.0;
};

class CaseError : public std::runtime_error {
public:
    enum class Kind {
        io,
        syntax,
        unknown_bus,
        duplicate_bus,
        no_slack,
        multiple_slack,
        disconnected,
        invalid_value,
        unsupported
    };

    CaseError(Kind kind, const std::string& what, int line = 0, int column = 0)
        : std::runtime_error(what), kind_(kind), line_(line), column_(column) {}

    Kind kind() const { return kind_; }
    int line() const { return line_; }
    int column() const { return column_; }

private:
    Kind kind_;
    int line_;
    int column_;
};

/// Immutable grid description. All records are kept in input order (so that
/// a case round-trips losslessly); the dense index sets enumerate only the
/// elements that take part in the AC model: non-isolated buses, in-service
/// branches and in-service generators.
class Network {
public:
    Network(double base_mva, std::vector<Bus> buses, std::vector<Branch> branches,
            std::vector<Generator> generators);

    double base_mva() const { return base_mva_; }

    // Raw records in input order.
    std::span<const Bus> all_buses() const { return buses_; }
    std::span<const Branch> all_branches() const { return branches_; }
    std::span<const Generator> all_generators() const { return generators_; }

    std::size_t n_bus() const { return bus_rows_.size(); }
    std::size_t n_branch() const { return branch_rows_.size(); }
    std::size_t n_gen() const { return gen_rows_.size(); }

    const Bus& bus(std::size_t i) const { return buses_[bus_rows_[i]]; }
    const Branch& branch(std::size_t k) const { return branches_[branch_rows_[k]]; }
    const Generator& gen(std::size_t g) const { return generators_[gen_rows_[g]]; }

    std::size_t branch_from(std::size_t k) const { return branch_from_[k]; }
    std::size_t branch_to(std::size_t k) const { return branch_to_[k]; }
    std::size_t gen_bus(std::size_t g) const { return gen_bus_[g]; }
    std::size_t slack() const { return slack_; }

    /// Power-flow role of a dense bus: PV buses without an in-service
    /// generator act as PQ.
    BusKind role(std::size_t i) const { return roles_[i]; }

    std::span<const std::size_t> gens_at(std::size_t i) const { return gens_at_[i]; }
    std::span<const std::size_t> branches_at(std::size_t i) const { return branches_at_[i]; }

    std::optional<std::size_t> dense_bus(int id) const;

    /// Record index of dense element, for reporting against input order.
    std::size_t branch_record(std::size_t k) const { return branch_rows_[k]; }
    std::size_t gen_record(std::size_t g) const { return gen_rows_[g]; }

    /// Operational cost of generator g at output p (per-unit), $/h.
    double gen_cost(std::size_t g, double p_pu) const {
        return gen(g).cost(p_pu * base_mva_);
    }

    double total_p_load() const;
    double total_q_load() const;

private:
    double base_mva_;
    std::vector<Bus> buses_;
    std::vector<Branch> branches_;
    std::vector<Generator> generators_;

    std::vector<std::size_t> bus_rows_;
    std::vector<std::size_t> branch_rows_;
    std::vector<std::size_t> gen_rows_;
    std::vector<std::size_t> branch_from_;
    std::vector<std::size_t> branch_to_;
    std::vector<std::size_t> gen_bus_;
    std::vector<BusKind> roles_;
    std::vector<std::vector<std::size_t>> gens_at_;
    std::vector<std::vector<std::size_t>> branches_at_;
    std::unordered_map<int, std::size_t> dense_of_id_;
    std::size_t slack_ = 0;

    void validate_and_index();
};

/// Returns a copy with every bus load multiplied by `factor` (> 0).
Network scale_loads(const Network& net, double factor);

/// Parses either the JSON mirror format or the MATPOWER `.m` numeric subset.
/// The syntax is detected from the first non-blank character.
Network parse_case(std::string_view text);
Network parse_case_file(const std::string& path);

/// Serializes to the JSON mirror format (MATPOWER units and column order).
std::string to_case_json(const Network& net);

}  // namespace facts
