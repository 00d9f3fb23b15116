#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "latreg/lattice.hpp"

namespace latreg {

// Convex φ on (0,∞) with φ(1) = 0, its conjugate and derivative.
struct PhiFunction {
    std::string name;
    std::function<double(double)> phi, dphi, conj;
    double slope_inf = 0.0;  // lim φ(x)/x as x → ∞ (may be +inf)
    double remainder(double x) const { return conj(x) - x; }
};

PhiFunction kl_phi();
PhiFunction chi2_phi();
PhiFunction hellinger2_phi();
PhiFunction tv_phi();
PhiFunction reverse_kl_phi();

enum class FidKind { sq_norm, kl, chi2, hellinger2, tv, ball, w1, phi, sum, infconv };

struct Fidelity {
    FidKind kind = FidKind::sq_norm;
    double lambda = 2.0;
    double radius = 0.0;
    NormKind norm = NormKind::l2;
    std::shared_ptr<const PhiFunction> phi;
    std::vector<Fidelity> parts;
    bool requires_probability = false;
    bool requires_abs_continuity = false;
    bool coercive = false;

    static Fidelity sq_norm(double lambda, NormKind norm = NormKind::l2);
    static Fidelity kl();
    static Fidelity chi2();
    static Fidelity hellinger2();
    static Fidelity tv();
    static Fidelity ball(double radius, NormKind norm = NormKind::l2);
    static Fidelity w1();
    static Fidelity phi_generic(PhiFunction phi);

    bool is_divergence() const;
    bool is_leaf() const { return kind != FidKind::sum && kind != FidKind::infconv; }
    std::string describe() const;
};

Fidelity combine_sum(Fidelity a, Fidelity b);
Fidelity combine_infconv(Fidelity a, Fidelity b);

// Same fidelity with every ball radius replaced.
Fidelity with_ball_radius(Fidelity fid, double radius);
bool prox_supported(const Fidelity& fid);

constexpr double tol_mass = 1e-9;

// Value on the fidelity's domain; divergences and w1 also require v on the simplex.
double eval(const Fidelity& fid, const Signal& v, const Signal& f);
// Value without the mass constraint; this is the form the solver minimises.
double eval_relaxed(const Fidelity& fid, const Signal& v, const Signal& f);
// argmin_v ½‖v − w‖² + τ·H(v|f) in the weighted 2-norm.
Signal prox(const Fidelity& fid, const Signal& w, const Signal& f, double tau);
double conjugate(const Fidelity& fid, const Signal& q, const Signal& f);
// An element of ∂H(v|f) in the weighted pairing (relaxed form, leaf kinds and sums).
Signal subgradient(const Fidelity& fid, const Signal& v, const Signal& f);

Signal random_direction(Eigen::Index n, double dx, std::uint64_t seed);
Signal calibrate_noise(const Fidelity& fid, const Signal& fbar, const Signal& direction,
                       double delta);
Signal calibrate_noise(const Fidelity& fid, const Signal& fbar, double delta, std::uint64_t seed);
// The functional used for calibration: H itself, or the ball's norm for ball fidelities.
double calibration_measure(const Fidelity& fid, const Signal& fbar, const Signal& fn);

namespace detail {
// Prox including kinds the public prox rejects (tv, w1); used by the infconv evaluation.
Signal prox_any(const Fidelity& fid, const Signal& w, const Signal& f, double tau);
double project_l1_ball(Vec& y, double radius);
}  // namespace detail

}  // namespace latreg
