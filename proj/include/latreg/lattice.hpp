#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>

#include "latreg/errors.hpp"

namespace latreg {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class NormKind { max, l1, l2 };

NormKind parse_norm(const std::string& s);
const char* norm_name(NormKind k);
NormKind dual_norm(NormKind k);

// Coordinate vector on a uniform grid; pairings are weighted by dx.
struct Signal {
    Vec values;
    double dx = 1.0;

    Signal() = default;
    Signal(Vec v, double spacing);
    static Signal zeros(Eigen::Index n, double spacing);
    static Signal constant(Eigen::Index n, double value, double spacing);

    Eigen::Index size() const { return values.size(); }
    double operator[](Eigen::Index i) const { return values[i]; }
    double mass() const { return dx * values.sum(); }
};

void require_same(const Signal& a, const Signal& b);
double dot(const Signal& a, const Signal& b);
double norm(const Signal& a, NormKind k);
Signal operator+(const Signal& a, const Signal& b);
Signal operator-(const Signal& a, const Signal& b);
Signal operator*(double s, const Signal& a);

bool leq(const Signal& x, const Signal& y, double tol_order = 0.0);
std::pair<Signal, Signal> pos_neg_split(const Signal& x);
Signal am_unit(Eigen::Index n, double dx = 1.0);

// Matrix acting between grids; the adjoint is taken in the dx-weighted pairings.
class DenseOperator {
public:
    DenseOperator() = default;
    DenseOperator(Mat matrix, double dx_in, double dx_out);

    const Mat& matrix() const { return m_; }
    const Mat& adjoint_matrix() const { return mstar_; }
    double dx_in() const { return dx_in_; }
    double dx_out() const { return dx_out_; }
    Eigen::Index rows() const { return m_.rows(); }
    Eigen::Index cols() const { return m_.cols(); }

    Signal apply(const Signal& u) const;
    Signal apply_adjoint(const Signal& w) const;
    DenseOperator adjoint() const;
    double norm(NormKind k) const;

private:
    Mat m_, mstar_;
    double dx_in_ = 1.0, dx_out_ = 1.0;
};

DenseOperator operator-(const DenseOperator& a, const DenseOperator& b);

struct BracketPair {
    DenseOperator lower, upper;
    std::optional<DenseOperator> truth;
    double width = 0.0;
    NormKind width_norm = NormKind::max;

    BracketPair() = default;
    BracketPair(DenseOperator l, DenseOperator u, std::optional<DenseOperator> t,
                NormKind k = NormKind::max);
    bool degenerate() const;
};

struct BracketReport {
    bool ok = false;
    double violation = 0.0;
    int samples = 0;
};

BracketReport check_bracketing(const BracketPair& pair, int samples, std::uint64_t seed);

// Smallest entry of (A^u - A^l)·1 over two; zero for degenerate brackets.
double robinson_margin(const BracketPair& pair);

}  // namespace latreg
