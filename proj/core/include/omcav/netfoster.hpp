#ifndef OMCAV_NETFOSTER_HPP
#define OMCAV_NETFOSTER_HPP

// Lossless one-port network admittance: synthesis of the canonical
// admittance form (shunt C + series L + parallel-LC branches), mode
// location as positive-slope zero crossings of Im[Y], and per-mode
// lumped-element extraction from the slope at the crossing.

#include <optional>
#include <vector>

namespace omcav {

// Tabulated Im[Y(w)] of a one-port environment. Frequencies are angular
// (rad/s), strictly increasing, length >= 3; susceptance in siemens.
struct AdmittanceTrace {
    std::vector<double> freqs;
    std::vector<double> y_imag;

    // Throws ValidationError if the invariants above do not hold or any
    // value is non-finite.
    void validate() const;
};

// One parallel-LC resonant branch of the canonical admittance form.
struct LcBranch {
    double l_h = 0.0;  // henry, > 0
    double c_f = 0.0;  // farad, > 0

    double pole_freq() const;  // 1/sqrt(LC), rad/s
};

// Canonical lossless admittance form:
//   Im[Y(w)] = w*C_shunt - 1/(w*L_series) + sum_k w*C_k / (1 - w^2 L_k C_k)
struct FosterNetwork {
    double shunt_c = 0.0;                 // farad, >= 0
    std::optional<double> series_l;       // henry, > 0 when present
    std::vector<LcBranch> branches;

    bool empty() const;
    // Branch pole frequencies, sorted ascending (rad/s).
    std::vector<double> pole_freqs() const;
    // Throws EmptyNetwork / ValidationError (branch poles must be
    // pairwise distinct, elements positive).
    void validate() const;
};

// One extracted electromagnetic mode.
//
// impedance_z is defined from the slope of the *total* susceptance at the
// crossing, Z = 2/(w0 * slope); c_p = 1/(Z*w0) is therefore the full mode
// capacitance including any compliant capacitance added to the trace.
// An alternative convention normalizes the impedance by the compliant
// capacitance alone and yields a larger value (sqrt(L/C_m) instead of
// sqrt(L/(C_p+C_m)) for a single-resonance network); this library reports
// the slope-derived value only.
struct ModeParams {
    double omega0 = 0.0;       // rad/s, > 0
    double slope = 0.0;        // d(Im Y)/dw at omega0, farad-equivalent, > 0
    double impedance_z = 0.0;  // ohm
    double c_p = 0.0;          // farad, = 1/(Z*omega0)
    double l_p = 0.0;          // henry, = Z/omega0
};

// Evaluate the canonical form on a caller-supplied angular frequency grid.
// Grid points closer than 1e-6 relative to a branch pole are rejected
// (GridAtPole); a network with no elements is rejected (EmptyNetwork).
AdmittanceTrace synthesize_admittance(const FosterNetwork& network,
                                      const std::vector<double>& grid);

// Y_t(w) = Y_p(w) + w*C_m on the same grid. c_m >= 0.
AdmittanceTrace total_admittance(const AdmittanceTrace& trace, double c_m);

// Locate every positive-slope zero crossing of the trace and extract mode
// parameters. Roots are refined on a local least-squares quadratic
// (window >= 5 points) by bisection to 1e-10 relative plus one inverse
// quadratic interpolation step; the slope comes from the same quadratic.
// Negative-slope crossings are excluded. Modes are sorted ascending.
// Throws NoModeFound if there is no positive-slope crossing and
// GridTooCoarse if a crossing bracket spans a pole.
std::vector<ModeParams> find_modes(const AdmittanceTrace& trace);

// c_m / (c_m + c_p). Throws NonPositiveCp.
double participation_ratio(double c_m, double c_p);

// Lowest resonant mode of the network after adding a compliant
// capacitance c_m: synthesizes on an auto-chosen grid, adds w*c_m, and
// returns the first positive-slope zero. Adding capacitance never raises
// the returned frequency.
double coupled_mode_frequency(const FosterNetwork& network, double c_m);

}  // namespace omcav

#endif  // OMCAV_NETFOSTER_HPP
