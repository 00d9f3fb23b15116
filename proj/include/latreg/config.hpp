#pragma once

#include <map>
#include <string>
#include <vector>

#include "latreg/solver.hpp"

namespace latreg {

// INI-style text: "[section]" headers and "key = value" lines; keys are stored as
// "section.key". Lines starting with '#' or ';' are comments.
class Config {
public:
    static Config parse(const std::string& text);
    static Config load(const std::string& path);

    bool has(const std::string& key) const { return kv_.count(key) != 0; }
    const std::string& get(const std::string& key) const;
    std::string get(const std::string& key, const std::string& fallback) const;
    double number(const std::string& key) const;
    double number(const std::string& key, double fallback) const;
    long integer(const std::string& key) const;
    long integer(const std::string& key, long fallback) const;
    bool flag(const std::string& key, bool fallback) const;
    // Comma-separated numbers, or geom(first, ratio, count) / repeat(value, count).
    std::vector<double> list(const std::string& key) const;
    void set(const std::string& key, const std::string& value) { kv_[key] = value; }
    const std::map<std::string, std::string>& entries() const { return kv_; }

private:
    std::map<std::string, std::string> kv_;
};

std::string trim(const std::string& s);
std::vector<double> parse_numbers(const std::string& s);
// Rows separated by ';', entries by ','.
Mat parse_matrix(const std::string& s);

// Examples: kl, chi2, hellinger2, tv, w1, ball(0.1, l2), sq_norm(2, l1), phi(reverse_kl),
// sum(kl, sq_norm(2, l2)), infconv(sq_norm(2, l2), tv).
Fidelity parse_fidelity(const std::string& spec);
PhiFunction parse_phi(const std::string& name);
Regulariser parse_regulariser(const std::string& name, bool nonneg);

// Tiny instance file: [problem] with n, m, dx_u, dx_v, lower, upper, truth (optional),
// f, fidelity, regulariser, nonneg, alpha.
Problem load_tiny_problem(const Config& cfg);

}  // namespace latreg
