#include "omcav/omresponse.hpp"

#include <cmath>

#include "omcav/constants.hpp"
#include "omcav/errors.hpp"

namespace omcav {

void CavityParams::validate() const {
    if (!(omega_c > 0.0)) throw ValidationError("cavity: omega_c must be > 0");
    if (!(kappa_int > 0.0) || !(kappa_in > 0.0) || !(kappa_out > 0.0))
        throw NonPositiveRate("cavity: all decay rates must be > 0");
    if (!(amp_scale > 0.0) || amp_scale > 1.0)
        throw ValidationError("cavity: amp_scale must be in (0, 1]");
}

void MechMode::validate() const {
    if (!(gamma_m > 0.0)) throw NonPositiveRate("mech mode: gamma_m must be > 0");
    if (!(omega_m > gamma_m))
        throw ValidationError("mech mode: omega_m must exceed gamma_m");
    if (g0 < 0.0) throw ValidationError("mech mode: g0 must be >= 0");
    if (mass_eff && !(*mass_eff > 0.0))
        throw ValidationError("mech mode: mass_eff must be > 0 when set");
}

void PumpConfig::validate() const {
    if (!(omega_d > 0.0)) throw ValidationError("pump: omega_d must be > 0");
    if (n_d.has_value() == power_w.has_value())
        throw ValidationError("pump: exactly one of n_d / power_w must be set");
    if (n_d && *n_d < 0.0) throw ValidationError("pump: n_d must be >= 0");
    if (power_w && *power_w < 0.0) throw ValidationError("pump: power must be >= 0");
}

void DrumGeometry::validate() const {
    if (!(diameter > 0.0) || !(gap_d > 0.0) || !(plate_area > 0.0) ||
        !(film_thickness > 0.0) || !(density > 0.0))
        throw ValidationError("drum geometry: all dimensions must be > 0");
    const double disc = kPi * (diameter / 2.0) * (diameter / 2.0);
    if (std::abs(plate_area - disc) > 1e-12 * disc)
        throw ValidationError("drum geometry: plate_area inconsistent with diameter");
}

double cooperativity(double g0, double n_d, double kappa, double gamma_m) {
    if (!(g0 > 0.0) || !(kappa > 0.0) || !(gamma_m > 0.0))
        throw NonPositiveRate("cooperativity: g0, kappa, gamma_m must be > 0");
    if (n_d < 0.0) throw ValidationError("cooperativity: n_d must be >= 0");
    return 4.0 * g0 * g0 * n_d / (kappa * gamma_m);
}

double omia_depth(double coop) {
    if (coop < 0.0) throw NegativeCooperativity("omia_depth: C must be >= 0");
    return 1.0 / (1.0 + coop);
}

double effective_mech_linewidth(double gamma_m, double coop) {
    if (!(gamma_m > 0.0)) throw NonPositiveRate("effective_mech_linewidth: gamma_m must be > 0");
    if (coop < 0.0) throw NegativeCooperativity("effective_mech_linewidth: C must be >= 0");
    return gamma_m * (1.0 + coop);
}

bool sideband_resolved(const CavityParams& cav, const MechMode& mech) {
    return mech.omega_m > cav.kappa();
}

TwoToneResponse s21_two_tone(const CavityParams& cav, const MechMode& mech,
                             std::span<const MechTerm> terms,
                             std::span<const double> probe_offsets) {
    cav.validate();
    mech.validate();
    for (const auto& t : terms) {
        if (t.coop < 0.0) throw NegativeCooperativity("s21_two_tone: C must be >= 0");
        if (!(t.gamma_m > 0.0)) throw NonPositiveRate("s21_two_tone: gamma_m must be > 0");
    }

    const double half_kappa = cav.kappa() / 2.0;
    TwoToneResponse out;
    out.sideband_resolved = sideband_resolved(cav, mech);
    out.s21.reserve(probe_offsets.size());
    for (double delta : probe_offsets) {
        std::complex<double> denom(1.0, -delta / half_kappa);
        for (const auto& t : terms)
            denom += t.coop / std::complex<double>(1.0, -(delta - t.delta_offset) / (t.gamma_m / 2.0));
        out.s21.push_back(cav.amp_scale / denom);
    }
    return out;
}

TwoToneResponse s21_two_tone(const CavityParams& cav, const MechMode& mech, double coop,
                             std::span<const double> probe_offsets) {
    const MechTerm term{coop, mech.gamma_m, 0.0};
    return s21_two_tone(cav, mech, std::span<const MechTerm>(&term, 1), probe_offsets);
}

std::vector<std::complex<double>> s21_bare(const CavityParams& cav,
                                           std::span<const double> probe_offsets) {
    cav.validate();
    const double half_kappa = cav.kappa() / 2.0;
    std::vector<std::complex<double>> out;
    out.reserve(probe_offsets.size());
    for (double delta : probe_offsets)
        out.push_back(cav.amp_scale / std::complex<double>(1.0, -delta / half_kappa));
    return out;
}

double photons_from_power(const CavityParams& cav, const PumpConfig& pump) {
    cav.validate();
    pump.validate();
    if (pump.n_d) return *pump.n_d;
    if (!pump.attenuation_db)
        throw MissingAttenuation("photons_from_power: power-specified pump needs attenuation_db");
    const double p_in = *pump.power_w / db_to_power_ratio(*pump.attenuation_db);
    const double delta_d = pump.omega_d - cav.omega_c;
    const double half_kappa = cav.kappa() / 2.0;
    return (p_in * cav.kappa_in / (kHbar * pump.omega_d)) /
           (delta_d * delta_d + half_kappa * half_kappa);
}

double estimate_g0(const CavityParams& cav, const MechMode& mech, double eta, double gap_d) {
    cav.validate();
    mech.validate();
    if (!(gap_d > 0.0)) throw ValidationError("estimate_g0: gap must be > 0");
    if (eta < 0.0 || eta > 1.0) throw ValidationError("estimate_g0: eta must be in [0, 1]");
    if (!mech.mass_eff) throw MissingMass("estimate_g0: mech mode carries no effective mass");
    const double x_zpf = std::sqrt(kHbar / (2.0 * *mech.mass_eff * mech.omega_m));
    return (cav.omega_c / 2.0) * eta * x_zpf / gap_d;
}

double estimate_g0(const CavityParams& cav, const MechMode& mech, const DrumGeometry& geom,
                   double eta, double mass_factor) {
    geom.validate();
    if (!(mass_factor > 0.0)) throw ValidationError("estimate_g0: mass_factor must be > 0");
    MechMode m = mech;
    if (!m.mass_eff)
        m.mass_eff = mass_factor * geom.density * geom.plate_area * geom.film_thickness;
    return estimate_g0(cav, m, eta, geom.gap_d);
}

}  // namespace omcav
