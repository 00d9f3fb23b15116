#include "latreg/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace latreg {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

Config Config::parse(const std::string& text) {
    Config c;
    std::istringstream is(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": bad section");
            section = trim(t.substr(1, t.size() - 2));
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(t.substr(0, eq));
        if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        c.kv_[section.empty() ? key : section + "." + key] = trim(t.substr(eq + 1));
    }
    return c;
}

Config Config::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

const std::string& Config::get(const std::string& key) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) throw ConfigError("missing key " + key);
    return it->second;
}

std::string Config::get(const std::string& key, const std::string& fallback) const {
    const auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
}

namespace {

double to_number(const std::string& s, const std::string& what) {
    const std::string t = trim(s);
    std::size_t used = 0;
    double x = 0;
    try {
        x = std::stod(t, &used);
    } catch (const std::exception&) {
        throw ConfigError("bad number '" + t + "' for " + what);
    }
    if (used != t.size()) throw ConfigError("bad number '" + t + "' for " + what);
    return x;
}

}  // namespace

double Config::number(const std::string& key) const { return to_number(get(key), key); }

double Config::number(const std::string& key, double fallback) const {
    return has(key) ? number(key) : fallback;
}

long Config::integer(const std::string& key) const {
    const double x = number(key);
    if (x != std::floor(x)) throw ConfigError(key + " must be an integer");
    return static_cast<long>(x);
}

long Config::integer(const std::string& key, long fallback) const {
    return has(key) ? integer(key) : fallback;
}

bool Config::flag(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string v = get(key);
    if (v == "true" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "no" || v == "0") return false;
    throw ConfigError("bad boolean '" + v + "' for " + key);
}

std::vector<double> parse_numbers(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(to_number(tok, "list"));
    return out;
}

std::vector<double> Config::list(const std::string& key) const {
    const std::string v = get(key);
    auto args = [&](const std::string& name) {
        if (v.back() != ')') throw ConfigError("bad " + name + "() in " + key);
        return parse_numbers(v.substr(name.size() + 1, v.size() - name.size() - 2));
    };
    if (v.rfind("geom(", 0) == 0) {
        const auto a = args("geom");
        if (a.size() != 3 || a[2] < 1 || a[2] != std::floor(a[2]))
            throw ConfigError("geom(first, ratio, count) expected for " + key);
        std::vector<double> out;
        double x = a[0];
        for (int i = 0; i < static_cast<int>(a[2]); ++i, x *= a[1]) out.push_back(x);
        return out;
    }
    if (v.rfind("repeat(", 0) == 0) {
        const auto a = args("repeat");
        if (a.size() != 2 || a[1] < 1) throw ConfigError("repeat(value, count) expected for " + key);
        return std::vector<double>(static_cast<std::size_t>(a[1]), a[0]);
    }
    return parse_numbers(v);
}

Mat parse_matrix(const std::string& s) {
    std::vector<std::vector<double>> rows;
    std::stringstream ss(s);
    std::string row;
    while (std::getline(ss, row, ';')) rows.push_back(parse_numbers(row));
    if (rows.empty()) throw ConfigError("empty matrix");
    Mat m(rows.size(), rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows[0].size()) throw ConfigError("ragged matrix rows");
        for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
    }
    return m;
}

PhiFunction parse_phi(const std::string& name) {
    if (name == "kl") return kl_phi();
    if (name == "chi2") return chi2_phi();
    if (name == "hellinger2") return hellinger2_phi();
    if (name == "tv") return tv_phi();
    if (name == "reverse_kl") return reverse_kl_phi();
    throw ConfigError("unknown phi function " + name);
}

namespace {

struct SpecParser {
    const std::string& s;
    std::size_t pos = 0;

    void skip() {
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }
    std::string word() {
        skip();
        const std::size_t a = pos;
        while (pos < s.size() && (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_' ||
                                  s[pos] == '.' || s[pos] == '-' || s[pos] == '+'))
            ++pos;
        if (a == pos) throw ConfigError("bad fidelity spec '" + s + "'");
        return s.substr(a, pos - a);
    }
    bool accept(char c) {
        skip();
        if (pos < s.size() && s[pos] == c) {
            ++pos;
            return true;
        }
        return false;
    }
    void expect(char c) {
        if (!accept(c)) throw ConfigError(std::string("expected '") + c + "' in '" + s + "'");
    }

    Fidelity fidelity() {
        const std::string name = word();
        if (name == "sum" || name == "infconv") {
            expect('(');
            Fidelity a = fidelity();
            expect(',');
            Fidelity b = fidelity();
            expect(')');
            return name == "sum" ? combine_sum(std::move(a), std::move(b))
                                 : combine_infconv(std::move(a), std::move(b));
        }
        if (name == "ball" || name == "sq_norm") {
            double x = name == "ball" ? 0.0 : 2.0;
            NormKind k = NormKind::l2;
            if (accept('(')) {
                x = to_number(word(), name);
                if (accept(',')) k = parse_norm(word());
                expect(')');
            }
            return name == "ball" ? Fidelity::ball(x, k) : Fidelity::sq_norm(x, k);
        }
        if (name == "phi") {
            expect('(');
            PhiFunction p = parse_phi(word());
            expect(')');
            return Fidelity::phi_generic(std::move(p));
        }
        if (name == "kl") return Fidelity::kl();
        if (name == "chi2") return Fidelity::chi2();
        if (name == "hellinger2") return Fidelity::hellinger2();
        if (name == "tv") return Fidelity::tv();
        if (name == "w1") return Fidelity::w1();
        throw ConfigError("unknown fidelity " + name);
    }
};

}  // namespace

Fidelity parse_fidelity(const std::string& spec) {
    SpecParser p{spec};
    Fidelity f = p.fidelity();
    p.skip();
    if (p.pos != spec.size()) throw ConfigError("trailing text in fidelity spec '" + spec + "'");
    return f;
}

Regulariser parse_regulariser(const std::string& name, bool nonneg) {
    Regulariser r;
    r.nonneg = nonneg;
    if (name == "sq_l2")
        r.kind = RegKind::sq_l2;
    else if (name == "l1")
        r.kind = RegKind::l1;
    else if (name == "tv" || name == "tv1d")
        r.kind = RegKind::tv1d;
    else
        throw ConfigError("unknown regulariser " + name);
    return r;
}

Problem load_tiny_problem(const Config& cfg) {
    const double dxu = cfg.number("problem.dx_u", 1.0), dxv = cfg.number("problem.dx_v", 1.0);
    const Mat L = parse_matrix(cfg.get("problem.lower"));
    const Mat U = parse_matrix(cfg.get("problem.upper"));
    if (L.rows() != U.rows() || L.cols() != U.cols())
        throw ConfigError("lower and upper operators differ in shape");
    std::optional<DenseOperator> truth;
    if (cfg.has("problem.truth")) truth = DenseOperator(parse_matrix(cfg.get("problem.truth")), dxu, dxv);
    const auto fv = parse_numbers(cfg.get("problem.f"));
    if (static_cast<Eigen::Index>(fv.size()) != L.rows()) throw ConfigError("data length mismatch");
    Problem p;
    p.bracket = BracketPair(DenseOperator(L, dxu, dxv), DenseOperator(U, dxu, dxv), truth);
    p.fidelity = parse_fidelity(cfg.get("problem.fidelity"));
    p.regulariser = parse_regulariser(cfg.get("problem.regulariser"), cfg.flag("problem.nonneg", false));
    p.f = Signal(Eigen::Map<const Vec>(fv.data(), static_cast<Eigen::Index>(fv.size())), dxv);
    p.alpha = cfg.number("problem.alpha", 1.0);
    return p;
}

}  // namespace latreg
