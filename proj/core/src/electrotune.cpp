#include "omcav/electrotune.hpp"

#include <cmath>
#include <set>

#include "omcav/constants.hpp"
#include "omcav/errors.hpp"

namespace omcav {

void TuneModel::validate() const {
    if (!(omega_m0 > 0.0) || !(mass_eff > 0.0) || !(spring_k > 0.0))
        throw ValidationError("tune model: omega_m0, mass_eff, spring_k must be > 0");
    const double k_expected = mass_eff * omega_m0 * omega_m0;
    if (std::abs(spring_k - k_expected) > 1e-9 * k_expected)
        throw ValidationError("tune model: spring_k inconsistent with mass_eff * omega_m0^2");
    if (!(d2c_dx2 > 0.0))
        throw ValidationError("tune model: d2c_dx2 must be > 0 for a parallel-plate gap");
}

TuneModel TuneModel::from_mass(double mass_eff, double omega_m0, double d2c_dx2) {
    TuneModel m;
    m.mass_eff = mass_eff;
    m.omega_m0 = omega_m0;
    m.spring_k = mass_eff * omega_m0 * omega_m0;
    m.d2c_dx2 = d2c_dx2;
    m.validate();
    return m;
}

void VSweep::validate() const {
    if (volts.size() != freqs.size())
        throw ValidationError("voltage sweep: lengths differ");
    if (volts.size() < 3) throw TooFewPoints("voltage sweep: need at least 3 points");
    for (size_t i = 0; i < volts.size(); ++i)
        if (!std::isfinite(volts[i]) || !std::isfinite(freqs[i]))
            throw ValidationError("voltage sweep: non-finite value");
}

double drive_force(double c_m_prime, double v_dc, double v_ac) {
    return c_m_prime * v_dc * v_ac;
}

double softened_frequency(const TuneModel& model, double v_dc) {
    model.validate();
    const double radicand = 1.0 - v_dc * v_dc * model.d2c_dx2 / (2.0 * model.spring_k);
    if (!(radicand > 0.0))
        throw PullInExceeded("softened_frequency: bias beyond pull-in of the linearized model");
    return model.omega_m0 * std::sqrt(radicand);
}

ParabolaFit fit_parabola(const VSweep& sweep) {
    sweep.validate();
    std::set<double> distinct(sweep.volts.begin(), sweep.volts.end());
    if (distinct.size() < 3)
        throw TooFewPoints("fit_parabola: need at least 3 distinct voltages");

    // Normal equations for omega = a + c * V^2.
    double s0 = 0.0, s2 = 0.0, s4 = 0.0, sy = 0.0, s2y = 0.0;
    for (size_t i = 0; i < sweep.volts.size(); ++i) {
        const double v2 = sweep.volts[i] * sweep.volts[i];
        s0 += 1.0;
        s2 += v2;
        s4 += v2 * v2;
        sy += sweep.freqs[i];
        s2y += v2 * sweep.freqs[i];
    }
    const double det = s0 * s4 - s2 * s2;
    if (det == 0.0)
        throw TooFewPoints("fit_parabola: degenerate voltage pattern");

    ParabolaFit fit;
    fit.omega_m0 = (s4 * sy - s2 * s2y) / det;
    fit.curvature = (s0 * s2y - s2 * sy) / det;
    fit.positive_curvature = fit.curvature > 0.0;
    return fit;
}

double infer_d2c_dx2(const ParabolaFit& fit, double spring_k) {
    if (!(spring_k > 0.0)) throw ValidationError("infer_d2c_dx2: spring_k must be > 0");
    if (!(fit.omega_m0 > 0.0)) throw ValidationError("infer_d2c_dx2: omega_m0 must be > 0");
    return -4.0 * spring_k * fit.curvature / fit.omega_m0;
}

PlateDerivatives parallel_plate_derivatives(const DrumGeometry& geom) {
    geom.validate();
    const double ea = kEps0 * geom.plate_area;
    PlateDerivatives d;
    d.c_m = ea / geom.gap_d;
    d.c_prime = ea / (geom.gap_d * geom.gap_d);
    d.c_dprime = 2.0 * ea / (geom.gap_d * geom.gap_d * geom.gap_d);
    return d;
}

}  // namespace omcav
