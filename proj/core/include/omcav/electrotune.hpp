#ifndef OMCAV_ELECTROTUNE_HPP
#define OMCAV_ELECTROTUNE_HPP

// DC-bias tuning of the mechanical resonator: direct electrostatic drive,
// capacitive spring softening (negative parabolic dispersion of the drum
// frequency with gate voltage), and parabola fitting of measured
// frequency-vs-voltage sweeps.

#include <vector>

#include "omcav/omresponse.hpp"

namespace omcav {

// Lumped softening model: k_eff(V) = k - V^2 C''/2.
struct TuneModel {
    double omega_m0 = 0.0;  // rad/s at V = 0
    double spring_k = 0.0;  // N/m, must equal mass_eff * omega_m0^2
    double d2c_dx2 = 0.0;   // F/m^2, > 0 for parallel plates
    double mass_eff = 0.0;  // kg

    void validate() const;
    static TuneModel from_mass(double mass_eff, double omega_m0, double d2c_dx2);
};

struct VSweep {
    std::vector<double> volts;
    std::vector<double> freqs;  // rad/s

    void validate() const;  // equal lengths >= 3, finite
};

// Amplitude of the resonant drive force C'_m * V_dc * V_ac.
double drive_force(double c_m_prime, double v_dc, double v_ac);

// omega_m0 * sqrt(1 - V^2 C''/(2k)). Throws PullInExceeded when the
// radicand is not positive.
double softened_frequency(const TuneModel& model, double v_dc);

struct ParabolaFit {
    double omega_m0 = 0.0;        // rad/s intercept
    double curvature = 0.0;       // rad/s per V^2, negative for softening
    bool positive_curvature = false;  // flag only; may indicate stress stiffening
};

// Least-squares fit of omega(V) = omega_m0 + c2 V^2.
// Throws TooFewPoints below 3 distinct voltages.
ParabolaFit fit_parabola(const VSweep& sweep);

// C'' inferred from a fitted curvature and a known spring constant:
// c2 = -omega_m0 C''/(4k)  =>  C'' = -4 k c2 / omega_m0.
double infer_d2c_dx2(const ParabolaFit& fit, double spring_k);

struct PlateDerivatives {
    double c_m = 0.0;      // F
    double c_prime = 0.0;  // F/m
    double c_dprime = 0.0; // F/m^2
};

// Parallel-plate closure: C = eps0 A/d, C' = eps0 A/d^2, C'' = 2 eps0 A/d^3.
PlateDerivatives parallel_plate_derivatives(const DrumGeometry& geom);

}  // namespace omcav

#endif  // OMCAV_ELECTROTUNE_HPP
