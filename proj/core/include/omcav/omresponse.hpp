#ifndef OMCAV_OMRESPONSE_HPP
#define OMCAV_OMRESPONSE_HPP

// Forward model of the optomechanical cavity: bare and two-tone
// transmission with a red-detuned pump, cooperativity, pump photon
// calibration from input power, and a geometric estimate of the
// single-photon coupling rate.

#include <complex>
#include <optional>
#include <span>
#include <vector>

namespace omcav {

// Cavity mode and coupling rates, all angular (rad/s). amp_scale is the
// dimensionless transmission prefactor sqrt(eta_L * eta_R); it is treated
// as a free amplitude and never derived from the coupling rates.
struct CavityParams {
    double omega_c = 0.0;
    double kappa_int = 0.0;
    double kappa_in = 0.0;
    double kappa_out = 0.0;
    double amp_scale = 1.0;

    double kappa() const { return kappa_int + kappa_in + kappa_out; }
    void validate() const;
};

// One mechanical mode (rad/s). mass_eff is optional and only used by
// estimate_g0.
struct MechMode {
    double omega_m = 0.0;
    double gamma_m = 0.0;
    double g0 = 0.0;
    std::optional<double> mass_eff;  // kg

    void validate() const;
};

// Drive tone. Exactly one of n_d / power_w is the source of truth; a
// power-specified pump needs the input-chain attenuation to be usable.
struct PumpConfig {
    double omega_d = 0.0;                    // rad/s
    std::optional<double> n_d;               // intracavity pump photons
    std::optional<double> power_w;           // watts at the chain input
    std::optional<double> attenuation_db;    // input chain attenuation

    void validate() const;
};

// Drumhead capacitor geometry (SI).
struct DrumGeometry {
    double diameter = 0.0;
    double gap_d = 0.0;
    double plate_area = 0.0;
    double film_thickness = 0.0;
    double density = 0.0;

    void validate() const;  // plate_area must equal pi*(diameter/2)^2 to 1e-12
};

// C = 4 g0^2 n_d / (kappa gamma_m).
double cooperativity(double g0, double n_d, double kappa, double gamma_m);

// 1 / (1 + C): transmission magnitude at the absorption feature relative
// to the bare-cavity peak.
double omia_depth(double coop);

// gamma_m * (1 + C): back-action-broadened linewidth of the feature under
// a red-detuned pump.
double effective_mech_linewidth(double gamma_m, double coop);

// True when the two-tone model assumptions hold (omega_m > kappa).
bool sideband_resolved(const CavityParams& cav, const MechMode& mech);

// One interference term in the two-tone denominator. delta_offset shifts
// the feature away from the cavity center (rad/s); the principal mode
// under an exactly red-detuned pump sits at zero offset.
struct MechTerm {
    double coop = 0.0;
    double gamma_m = 0.0;
    double delta_offset = 0.0;
};

struct TwoToneResponse {
    std::vector<std::complex<double>> s21;
    bool sideband_resolved = true;  // warning flag, never an error
};

// Two-tone transmission at probe offsets Delta = omega_p - omega_c:
//   S21 = amp / [ (-i*Delta/(kappa/2) + 1) + sum_k C_k/(-i*(Delta-d_k)/(gamma_k/2) + 1) ]
TwoToneResponse s21_two_tone(const CavityParams& cav, const MechMode& mech, double coop,
                             std::span<const double> probe_offsets);
TwoToneResponse s21_two_tone(const CavityParams& cav, const MechMode& mech,
                             std::span<const MechTerm> terms,
                             std::span<const double> probe_offsets);

// Bare Lorentzian of full width kappa (the C = 0 limit of the above).
std::vector<std::complex<double>> s21_bare(const CavityParams& cav,
                                           std::span<const double> probe_offsets);

// Intracavity pump photon number. For a power-specified pump:
//   n_d = (P_in * kappa_in / (hbar omega_d)) / (Delta_d^2 + (kappa/2)^2)
// with P_in the power after attenuation and Delta_d = omega_d - omega_c.
// A photon-number-specified pump passes through unchanged.
double photons_from_power(const CavityParams& cav, const PumpConfig& pump);

// g0 = (omega_c/2) * eta * x_zpf / gap with x_zpf = sqrt(hbar/(2 m omega_m)).
// Requires mech.mass_eff; throws MissingMass otherwise.
double estimate_g0(const CavityParams& cav, const MechMode& mech, double eta, double gap_d);

// Same, with the effective mass taken from mech.mass_eff when set and
// otherwise computed as mass_factor * density * plate_area * thickness
// (0.27 is the usual fundamental-mode factor for a clamped drum).
double estimate_g0(const CavityParams& cav, const MechMode& mech, const DrumGeometry& geom,
                   double eta, double mass_factor = 0.27);

}  // namespace omcav

#endif  // OMCAV_OMRESPONSE_HPP
