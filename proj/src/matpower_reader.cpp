#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "facts/grid_model.hpp"

namespace facts {

namespace {

using K = CaseError::Kind;
using Matrix = std::vector<std::vector<double>>;

constexpr double kDeg = std::numbers::pi / 180.0;

struct RawCase {
    std::optional<double> base_mva;
    std::optional<Matrix> bus, gen, branch, gencost;
};

// Scanner for the numeric subset of MATPOWER case files.
class MScanner {
public:
    explicit MScanner(std::string_view text) : s_(text) {}

    RawCase parse() {
        RawCase rc;
        for (;;) {
            skip_blank(true);
            if (eof()) break;
            if (std::isalpha(static_cast<unsigned char>(peek()))) {
                std::string ident = identifier();
                if (ident == "function") {
                    skip_line();
                    continue;
                }
                if (ident != "mpc") {
                    // end/return and similar keywords carry no data.
                    skip_line();
                    continue;
                }
                expect('.');
                std::string field = identifier();
                skip_blank(false);
                expect('=');
                skip_blank(false);
                assign(rc, field);
                skip_blank(false);
                if (!eof() && peek() == ';') advance();
                continue;
            }
            if (peek() == ';') {
                advance();
                continue;
            }
            fail("unexpected character '" + std::string(1, peek()) + "'");
        }
        return rc;
    }

private:
    std::string_view s_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;

    bool eof() const { return pos_ >= s_.size(); }
    char peek() const { return s_[pos_]; }

    void advance() {
        if (s_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw CaseError(K::syntax,
                        "syntax error at line " + std::to_string(line_) + ", column " + std::to_string(col_) + ": " + msg,
                        line_, col_);
    }

    void skip_line() {
        while (!eof() && peek() != '\n') advance();
    }

    // Skips spaces and comments; newlines only when `newlines` is set.
    void skip_blank(bool newlines) {
        while (!eof()) {
            const char c = peek();
            if (c == '%' || c == '#') {
                skip_line();
            } else if (c == ' ' || c == '\t' || c == '\r' || (newlines && c == '\n')) {
                advance();
            } else if (c == '.' && s_.substr(pos_, 3) == "...") {
                skip_line();
                if (!eof()) advance();
            } else {
                break;
            }
        }
    }

    void expect(char c) {
        if (eof() || peek() != c) fail(std::string("expected '") + c + "'");
        advance();
    }

    std::string identifier() {
        std::string out;
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_')) {
            out.push_back(peek());
            advance();
        }
        if (out.empty()) fail("expected identifier");
        return out;
    }

    bool at_number_start() const {
        if (eof()) return false;
        const char c = peek();
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '+') return true;
        return c == 'I' || c == 'N' || c == 'i' || c == 'n';
    }

    double number() {
        const std::size_t start = pos_;
        const int start_line = line_, start_col = col_;
        std::string tok;
        while (!eof()) {
            const char c = peek();
            if (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '+') {
                // a sign is only part of a number at the start or after an exponent
                if ((c == '-' || c == '+') && pos_ != start) {
                    const char prev = s_[pos_ - 1];
                    if (prev != 'e' && prev != 'E') break;
                }
                tok.push_back(c);
                advance();
            } else {
                break;
            }
        }
        std::string body = tok;
        double sign = 1.0;
        if (!body.empty() && (body[0] == '-' || body[0] == '+')) {
            if (body[0] == '-') sign = -1.0;
            body.erase(0, 1);
        }
        if (body == "Inf" || body == "inf") return sign * std::numeric_limits<double>::infinity();
        if (body == "NaN" || body == "nan") return std::numeric_limits<double>::quiet_NaN();
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(tok, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != tok.size() || tok.empty()) {
            line_ = start_line;
            col_ = start_col;
            fail("invalid numeric literal '" + tok + "'");
        }
        return v;
    }

    Matrix matrix() {
        expect('[');
        Matrix m;
        std::vector<double> row;
        auto flush = [&] {
            if (!row.empty()) m.push_back(std::move(row));
            row.clear();
        };
        for (;;) {
            skip_blank(false);
            if (eof()) fail("unterminated matrix");
            const char c = peek();
            if (c == ']') {
                advance();
                break;
            }
            if (c == ';' || c == '\n') {
                advance();
                flush();
                continue;
            }
            if (c == ',') {
                advance();
                continue;
            }
            if (!at_number_start()) fail("unexpected character '" + std::string(1, c) + "' in matrix");
            row.push_back(number());
        }
        flush();
        return m;
    }

    void skip_group(char open, char close) {
        int depth = 0;
        while (!eof()) {
            const char c = peek();
            if (c == '\'') {
                skip_string();
                continue;
            }
            if (c == '%') {
                skip_line();
                continue;
            }
            if (c == open) ++depth;
            if (c == close && --depth == 0) {
                advance();
                return;
            }
            advance();
        }
        fail("unterminated group");
    }

    void skip_string() {
        advance();
        while (!eof() && peek() != '\'' && peek() != '\n') advance();
        if (eof() || peek() != '\'') fail("unterminated string");
        advance();
    }

    void assign(RawCase& rc, const std::string& field) {
        if (eof()) fail("missing value");
        const char c = peek();
        if (c == '[') {
            Matrix m = matrix();
            if (field == "bus") rc.bus = std::move(m);
            else if (field == "gen") rc.gen = std::move(m);
            else if (field == "branch") rc.branch = std::move(m);
            else if (field == "gencost") rc.gencost = std::move(m);
            return;
        }
        if (c == '{') {
            skip_group('{', '}');
            return;
        }
        if (c == '\'') {
            skip_string();
            return;
        }
        if (at_number_start()) {
            const double v = number();
            if (field == "baseMVA") rc.base_mva = v;
            return;
        }
        fail("unsupported expression for mpc." + field);
    }
};

std::pair<int, int> line_col_of(std::string_view text, std::size_t byte) {
    int line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

Matrix json_matrix(const nlohmann::json& j, const char* key) {
    if (!j.is_array()) throw CaseError(K::syntax, std::string("'") + key + "' must be an array of rows");
    Matrix m;
    for (const auto& row : j) {
        if (!row.is_array()) throw CaseError(K::syntax, std::string("'") + key + "' rows must be arrays");
        std::vector<double> r;
        for (const auto& v : row) {
            if (v.is_number()) r.push_back(v.get<double>());
            else if (v.is_string() && (v == "Inf" || v == "inf")) r.push_back(std::numeric_limits<double>::infinity());
            else if (v.is_string() && (v == "-Inf" || v == "-inf")) r.push_back(-std::numeric_limits<double>::infinity());
            else throw CaseError(K::syntax, std::string("'") + key + "' entries must be numbers");
        }
        m.push_back(std::move(r));
    }
    return m;
}

RawCase parse_json(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text.begin(), text.end());
    } catch (const nlohmann::json::parse_error& e) {
        auto [line, col] = line_col_of(text, e.byte == 0 ? 0 : e.byte - 1);
        throw CaseError(K::syntax,
                        "syntax error at line " + std::to_string(line) + ", column " + std::to_string(col) + ": " +
                            e.what(),
                        line, col);
    }
    if (!doc.is_object()) throw CaseError(K::syntax, "case document must be a JSON object");
    static const char* known[] = {"base_mva", "bus", "gen", "branch", "gencost", "version", "name"};
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        bool ok = false;
        for (const char* k : known) ok = ok || it.key() == k;
        if (!ok) throw CaseError(K::syntax, "unknown key '" + it.key() + "' in case document");
    }
    RawCase rc;
    if (doc.contains("base_mva")) {
        if (!doc["base_mva"].is_number()) throw CaseError(K::syntax, "'base_mva' must be a number");
        rc.base_mva = doc["base_mva"].get<double>();
    }
    if (doc.contains("bus")) rc.bus = json_matrix(doc["bus"], "bus");
    if (doc.contains("gen")) rc.gen = json_matrix(doc["gen"], "gen");
    if (doc.contains("branch")) rc.branch = json_matrix(doc["branch"], "branch");
    if (doc.contains("gencost")) rc.gencost = json_matrix(doc["gencost"], "gencost");
    return rc;
}

int as_int(double v, const char* what) {
    if (!std::isfinite(v) || std::floor(v) != v)
        throw CaseError(K::invalid_value, std::string(what) + " must be an integer");
    return static_cast<int>(v);
}

void require_columns(const Matrix& m, std::size_t n, const char* table) {
    for (std::size_t r = 0; r < m.size(); ++r)
        if (m[r].size() < n)
            throw CaseError(K::syntax, std::string(table) + " row " + std::to_string(r + 1) + " has " +
                                           std::to_string(m[r].size()) + " columns, expected at least " +
                                           std::to_string(n));
}

Network build(const RawCase& rc) {
    if (!rc.base_mva) throw CaseError(K::syntax, "missing baseMVA");
    if (!rc.bus) throw CaseError(K::syntax, "missing bus table");
    if (!rc.branch) throw CaseError(K::syntax, "missing branch table");
    if (!rc.gen) throw CaseError(K::syntax, "missing gen table");
    const double base = *rc.base_mva;
    if (!(base > 0.0)) throw CaseError(K::invalid_value, "baseMVA must be positive");

    require_columns(*rc.bus, 13, "bus");
    require_columns(*rc.gen, 10, "gen");
    require_columns(*rc.branch, 11, "branch");

    std::vector<Bus> buses;
    for (const auto& r : *rc.bus) {
        Bus b;
        b.id = as_int(r[0], "bus id");
        const int type = as_int(r[1], "bus type");
        if (type < 1 || type > 4) throw CaseError(K::invalid_value, "bus " + std::to_string(b.id) + ": bad type");
        b.kind = static_cast<BusKind>(type);
        b.p_load = r[2] / base;
        b.q_load = r[3] / base;
        b.g_shunt = r[4] / base;
        b.b_shunt = r[5] / base;
        b.area = as_int(r[6], "bus area");
        b.v_init = r[7];
        b.theta_init = r[8] * kDeg;
        b.base_kv = r[9];
        b.zone = as_int(r[10], "bus zone");
        b.v_max = r[11];
        b.v_min = r[12];
        buses.push_back(b);
    }

    std::vector<Generator> gens;
    for (const auto& r : *rc.gen) {
        Generator g;
        g.bus = as_int(r[0], "generator bus");
        g.p_init = r[1] / base;
        g.q_init = r[2] / base;
        g.q_max = r[3] / base;
        g.q_min = r[4] / base;
        g.v_setpoint = r[5];
        g.m_base = r[6];
        g.in_service = r[7] > 0.0;
        g.p_max = r[8] / base;
        g.p_min = r[9] / base;
        gens.push_back(g);
    }

    if (rc.gencost) {
        const Matrix& gc = *rc.gencost;
        if (gc.size() < gens.size())
            throw CaseError(K::invalid_value, "gencost has fewer rows than gen table");
        // Rows beyond the generator count are reactive-power costs; ignored.
        for (std::size_t i = 0; i < gens.size(); ++i) {
            const auto& r = gc[i];
            if (r.size() < 4) throw CaseError(K::syntax, "gencost row " + std::to_string(i + 1) + " is too short");
            const int model = as_int(r[0], "gencost model");
            if (model != 2)
                throw CaseError(K::unsupported,
                                "gencost row " + std::to_string(i + 1) + ": only polynomial (model 2) costs supported");
            const int n = as_int(r[3], "gencost ncost");
            if (n < 0 || n > 3)
                throw CaseError(K::unsupported,
                                "gencost row " + std::to_string(i + 1) + ": polynomial degree above 2 not supported");
            if (r.size() < static_cast<std::size_t>(4 + n))
                throw CaseError(K::syntax, "gencost row " + std::to_string(i + 1) + " is too short");
            CostPoly c;
            c.startup = r[1];
            c.shutdown = r[2];
            double coef[3] = {0.0, 0.0, 0.0};  // c2, c1, c0
            for (int k = 0; k < n; ++k) coef[3 - n + k] = r[4 + k];
            c.c2 = coef[0];
            c.c1 = coef[1];
            c.c0 = coef[2];
            gens[i].cost = c;
        }
    }

    std::vector<Branch> branches;
    for (const auto& r : *rc.branch) {
        Branch br;
        br.from = as_int(r[0], "branch from bus");
        br.to = as_int(r[1], "branch to bus");
        br.r = r[2];
        br.x0 = r[3];
        br.b = r[4];
        br.s_rate = r[5] / base;
        br.rate_b = r[6] / base;
        br.rate_c = r[7] / base;
        br.tau = r[8] == 0.0 ? 1.0 : r[8];
        br.theta_shift = r[9] * kDeg;
        br.in_service = r[10] > 0.0;
        if (r.size() >= 13) {
            br.ang_min = r[11];
            br.ang_max = r[12];
        }
        branches.push_back(br);
    }

    return Network(base, std::move(buses), std::move(branches), std::move(gens));
}

}  // namespace

Network parse_case(std::string_view text) {
    std::size_t i = 0;
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i < text.size() && text[i] == '{') return build(parse_json(text));
    return build(MScanner(text).parse());
}

Network parse_case_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CaseError(K::io, "cannot open case file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_case(buf.str());
}

std::string to_case_json(const Network& net) {
    const double base = net.base_mva();
    nlohmann::json doc;
    doc["base_mva"] = base;
    auto bus = nlohmann::json::array();
    for (const Bus& b : net.all_buses()) {
        bus.push_back({b.id, static_cast<int>(b.kind), b.p_load * base, b.q_load * base, b.g_shunt * base,
                       b.b_shunt * base, b.area, b.v_init, b.theta_init / kDeg, b.base_kv, b.zone, b.v_max, b.v_min});
    }
    auto gen = nlohmann::json::array();
    auto gencost = nlohmann::json::array();
    for (const Generator& g : net.all_generators()) {
        gen.push_back({g.bus, g.p_init * base, g.q_init * base, g.q_max * base, g.q_min * base, g.v_setpoint,
                       g.m_base, g.in_service ? 1 : 0, g.p_max * base, g.p_min * base});
        gencost.push_back({2, g.cost.startup, g.cost.shutdown, 3, g.cost.c2, g.cost.c1, g.cost.c0});
    }
    auto branch = nlohmann::json::array();
    for (const Branch& br : net.all_branches()) {
        branch.push_back({br.from, br.to, br.r, br.x0, br.b, br.s_rate * base, br.rate_b * base, br.rate_c * base,
                          br.tau == 1.0 ? 0.0 : br.tau, br.theta_shift / kDeg, br.in_service ? 1 : 0, br.ang_min,
                          br.ang_max});
    }
    doc["bus"] = std::move(bus);
    doc["gen"] = std::move(gen);
    doc["branch"] = std::move(branch);
    doc["gencost"] = std::move(gencost);
    return doc.dump();
}

}  // namespace facts
