#include "facts/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace facts {

namespace {

std::mt19937_64 sample_rng(std::uint64_t seed, int year, int segment, int sample) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(year), static_cast<std::uint32_t>(segment),
                      static_cast<std::uint32_t>(sample)};
    return std::mt19937_64(seq);
}

// A draw may not cross zero: consumers stay consumers.
double clamp_sign(double base, double draw) { return base >= 0.0 ? std::max(0.0, draw) : std::min(0.0, draw); }

double level(const LdSegment& seg, double growth, int year) { return seg.alpha() * std::pow(1.0 + growth, year); }

Scenario base_scenario(const Network& net, const LdSegment& seg, double growth, int year) {
    const Loads l = Loads::from_network(net);
    const double a = level(seg, growth, year);
    Scenario s;
    s.p_load = a * l.p;
    s.q_load = a * l.q;
    s.year = year;
    s.segment = seg.index;
    s.sample = 0;
    s.seed_tag = "base";
    return s;
}

}  // namespace

LdSegment LdSegment::from_level(int index, double weight, double alpha, double sigma) {
    LdSegment s;
    s.index = index;
    s.weight = weight;
    s.alpha_hi = alpha * (1.0 + sigma);
    s.alpha_lo = alpha * (1.0 - sigma);
    return s;
}

Scenario Scenario::from_network(const Network& net) {
    const Loads l = Loads::from_network(net);
    Scenario s;
    s.p_load = l.p;
    s.q_load = l.q;
    s.seed_tag = "case";
    return s;
}

std::vector<LdSegment> default_ld_table() {
    return {LdSegment::from_level(1, 5.50, 0.940, 0.064), LdSegment::from_level(2, 19.50, 0.845, 0.041),
            LdSegment::from_level(3, 25.00, 0.775, 0.045), LdSegment::from_level(4, 25.00, 0.685, 0.080),
            LdSegment::from_level(5, 18.80, 0.590, 0.068), LdSegment::from_level(6, 6.20, 0.510, 0.078)};
}

std::vector<Scenario> sample_segment(const Network& net, const LdSegment& seg, int n, const SampleSpec& spec) {
    if (n < 1) throw std::invalid_argument("sample_segment: n must be at least 1");
    const Scenario base = base_scenario(net, seg, spec.growth, spec.year);
    const double sigma = spec.zero_noise ? 0.0 : seg.sigma();
    std::vector<Scenario> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        Scenario s = base;
        s.sample = j;
        s.probability = seg.weight / (100.0 * n);
        s.hours_per_year = 8760.0 * s.probability;
        s.seed_tag = std::to_string(spec.seed) + ":" + std::to_string(spec.year) + ":" + std::to_string(seg.index) +
                     ":" + std::to_string(j);
        if (sigma > 0.0) {
            auto rng = sample_rng(spec.seed, spec.year, seg.index, j);
            std::normal_distribution<double> noise(0.0, 1.0);
            for (Eigen::Index i = 0; i < s.p_load.size(); ++i) {
                const double ep = noise(rng), eq = noise(rng);
                s.p_load[i] = clamp_sign(base.p_load[i], base.p_load[i] + sigma * std::abs(base.p_load[i]) * ep);
                s.q_load[i] = clamp_sign(base.q_load[i], base.q_load[i] + sigma * std::abs(base.q_load[i]) * eq);
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<int> allocate_samples(const std::vector<LdSegment>& table, int per_year) {
    if (per_year < 1) throw std::invalid_argument("allocate_samples: per_year must be at least 1");
    const double total_w = std::accumulate(table.begin(), table.end(), 0.0,
                                           [](double a, const LdSegment& s) { return a + s.weight; });
    std::vector<int> n(table.size());
    std::vector<std::pair<double, std::size_t>> rem;
    int used = 0;
    for (std::size_t i = 0; i < table.size(); ++i) {
        const double share = per_year * table[i].weight / total_w;
        n[i] = static_cast<int>(std::floor(share));
        used += n[i];
        rem.emplace_back(share - n[i], i);
    }
    std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t r = 0; used < per_year && r < rem.size(); ++r, ++used) ++n[rem[r].second];
    for (std::size_t i = 0; i < n.size(); ++i) {
        if (n[i] > 0) continue;
        n[i] = 1;
        const auto big = std::max_element(n.begin(), n.end());
        if (*big > 1) --*big;
    }
    return n;
}

std::vector<Scenario> sample_years(const Network& net, const std::vector<LdSegment>& table, const MultiYearSpec& spec) {
    if (spec.years < 1) throw std::invalid_argument("sample_years: years must be at least 1");
    const std::vector<int> counts = allocate_samples(table, spec.per_year);
    std::vector<Scenario> out;
    for (int y = 0; y < spec.years; ++y)
        for (std::size_t i = 0; i < table.size(); ++i) {
            SampleSpec s{spec.growth, y, spec.seed, spec.zero_noise};
            auto part = sample_segment(net, table[i], counts[i], s);
            out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
        }
    return out;
}

std::vector<Scenario> congestion_filter(const Network& net, const LdSegment& seg, const std::vector<Scenario>& samples,
                                        const CongestionOracle& oracle, double growth) {
    if (samples.empty()) return {};
    for (const auto& s : samples) {
        Congestion c = Congestion::infeasible;
        try {
            c = oracle(s);
        } catch (const std::exception&) {
            c = Congestion::infeasible;
        }
        if (c != Congestion::uncongested) return samples;
    }
    Scenario base = base_scenario(net, seg, growth, samples.front().year);
    base.probability = 0.0;
    base.hours_per_year = 0.0;
    for (const auto& s : samples) {
        base.probability += s.probability;
        base.hours_per_year += s.hours_per_year;
    }
    return {base};
}

std::vector<Scenario> congestion_filter_all(const Network& net, const std::vector<LdSegment>& table,
                                            const std::vector<Scenario>& set, const CongestionOracle& oracle,
                                            double growth) {
    std::vector<Scenario> out;
    std::size_t i = 0;
    while (i < set.size()) {
        std::size_t j = i;
        while (j < set.size() && set[j].year == set[i].year && set[j].segment == set[i].segment) ++j;
        const auto seg = std::find_if(table.begin(), table.end(), [&](const LdSegment& s) { return s.index == set[i].segment; });
        std::vector<Scenario> group(set.begin() + static_cast<long>(i), set.begin() + static_cast<long>(j));
        if (seg == table.end()) {
            out.insert(out.end(), group.begin(), group.end());
        } else {
            auto kept = congestion_filter(net, *seg, group, oracle, growth);
            out.insert(out.end(), kept.begin(), kept.end());
        }
        i = j;
    }
    return out;
}

void write_scenarios(std::ostream& os, const std::vector<Scenario>& set) {
    for (const auto& s : set) {
        nlohmann::json j;
        j["year"] = s.year;
        j["segment"] = s.segment;
        j["sample"] = s.sample;
        j["probability"] = s.probability;
        j["hours"] = s.hours_per_year;
        j["seed_tag"] = s.seed_tag;
        j["p_load"] = std::vector<double>(s.p_load.data(), s.p_load.data() + s.p_load.size());
        j["q_load"] = std::vector<double>(s.q_load.data(), s.q_load.data() + s.q_load.size());
        os << j.dump() << '\n';
    }
}

std::vector<Scenario> read_scenarios(std::istream& is, const Network& net) {
    std::vector<Scenario> out;
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            Scenario s;
            s.year = j.at("year").get<int>();
            s.segment = j.at("segment").get<int>();
            s.sample = j.value("sample", 0);
            s.probability = j.at("probability").get<double>();
            s.hours_per_year = j.at("hours").get<double>();
            s.seed_tag = j.value("seed_tag", std::string());
            const auto p = j.at("p_load").get<std::vector<double>>();
            const auto q = j.at("q_load").get<std::vector<double>>();
            if (p.size() != net.n_bus() || q.size() != net.n_bus())
                throw std::runtime_error("load vectors do not match the network's bus count");
            s.p_load = Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size()));
            s.q_load = Eigen::Map<const Eigen::VectorXd>(q.data(), static_cast<Eigen::Index>(q.size()));
            if (!(s.probability > 0.0)) throw std::runtime_error("probability must be positive");
            out.push_back(std::move(s));
        } catch (const std::exception& e) {
            throw std::runtime_error("scenario file line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

std::vector<double> annual_hours(const std::vector<Scenario>& set) {
    std::set<int> years;
    for (const auto& s : set) years.insert(s.year);
    const double ny = years.empty() ? 1.0 : static_cast<double>(years.size());
    std::vector<double> out;
    out.reserve(set.size());
    for (const auto& s : set) out.push_back(s.hours_per_year / ny);
    return out;
}

}  // namespace facts
