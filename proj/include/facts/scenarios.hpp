#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "facts/acpf.hpp"
#include "facts/grid_model.hpp"

namespace facts {

/// One piece of a piecewise-constant load duration curve.
struct LdSegment {
    int index = 0;
    double weight = 0.0;  // percent of the year
    double alpha_lo = 0.0;
    double alpha_hi = 0.0;

    double alpha() const { return 0.5 * (alpha_lo + alpha_hi); }
    /// Relative standard deviation (alpha_hi - alpha) / alpha.
    double sigma() const { return (alpha_hi - alpha()) / alpha(); }

    /// Builds the segment from its level and relative deviation.
    static LdSegment from_level(int index, double weight, double alpha, double sigma);
};

/// A load scenario: per-bus demand (pu, dense bus order), its probability
/// within its year and the hours per year it stands for.
struct Scenario {
    Eigen::VectorXd p_load;
    Eigen::VectorXd q_load;
    double probability = 1.0;
    double hours_per_year = 8760.0;
    int year = 0;
    int segment = 0;
    int sample = 0;
    std::string seed_tag;

    Loads loads() const { return {p_load, q_load}; }

    /// The network's own loads as a single full-year scenario.
    static Scenario from_network(const Network& net);
};

/// Six-segment curve used by default.
std::vector<LdSegment> default_ld_table();

struct SampleSpec {
    double growth = 0.015;  // annual load growth beta
    int year = 0;
    std::uint64_t seed = 1;
    bool zero_noise = false;
};

/// Draws n samples for one segment: base level alpha (1 + beta)^year times
/// the network loads, plus independent Gaussian noise of relative size sigma
/// on every load element; negative draws are clamped to zero.
std::vector<Scenario> sample_segment(const Network& net, const LdSegment& seg, int n, const SampleSpec& spec);

/// Splits `per_year` samples across segments in proportion to their weights
/// (largest remainder), with at least one sample per segment.
std::vector<int> allocate_samples(const std::vector<LdSegment>& table, int per_year);

struct MultiYearSpec {
    int years = 1;
    int per_year = 16;
    double growth = 0.015;
    std::uint64_t seed = 1;
    bool zero_noise = false;
};

/// Scenarios for years 0..years-1, each year sampled from its own scaled curve.
std::vector<Scenario> sample_years(const Network& net, const std::vector<LdSegment>& table, const MultiYearSpec& spec);

enum class Congestion { uncongested, congested, infeasible };

using CongestionOracle = std::function<Congestion(const Scenario&)>;

/// Collapses a segment whose samples are all uncongested into its unperturbed
/// base scenario carrying the whole probability mass. Other segments are
/// returned unchanged. `samples` must belong to one (year, segment).
std::vector<Scenario> congestion_filter(const Network& net, const LdSegment& seg, const std::vector<Scenario>& samples,
                                        const CongestionOracle& oracle, double growth = 0.015);

/// Applies congestion_filter to every (year, segment) group of a scenario set.
std::vector<Scenario> congestion_filter_all(const Network& net, const std::vector<LdSegment>& table,
                                            const std::vector<Scenario>& set, const CongestionOracle& oracle,
                                            double growth = 0.015);

/// JSON lines, one scenario per line.
void write_scenarios(std::ostream& os, const std::vector<Scenario>& set);
std::vector<Scenario> read_scenarios(std::istream& is, const Network& net);

/// Weight of each scenario in an average year: hours_per_year divided by the
/// number of distinct years in the set.
std::vector<double> annual_hours(const std::vector<Scenario>& set);

}  // namespace facts
