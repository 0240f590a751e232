#ifndef OMCAV_FITKIT_HPP
#define OMCAV_FITKIT_HPP

// Damped Gauss-Newton least squares and the three-stage parameter
// extraction chain: bare-cavity fit, per-power absorption-feature fit,
// and the linear cooperativity-vs-photon-number fit that yields the
// single-photon coupling rate.

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "omcav/omresponse.hpp"

namespace omcav {

// ---------------------------------------------------------------------------
// Data carriers
// ---------------------------------------------------------------------------

struct TraceMeta {
    std::optional<double> pump_dbm;   // drive power at the chain input
    std::optional<double> atten_db;   // input chain attenuation
    std::optional<double> vdc_v;      // DC bias, when swept
    std::optional<double> pump_hz;    // drive tone frequency
    std::map<std::string, double> extra;  // free-form bookkeeping (generator params etc.)
};

// A measured or synthesized probe sweep. Frequencies are ordinary Hz (this
// mirrors the on-disk format); magnitudes are linear |S21|. Phase is only
// present for complex traces.
struct Trace {
    std::vector<double> freqs_hz;
    std::vector<double> mag;
    std::optional<std::vector<double>> phase_rad;
    TraceMeta meta;

    bool magnitude_only() const { return !phase_rad.has_value(); }
    void validate() const;
};

// Fit outcome. Parameter keys are unit-suffixed (omega_c_hz, kappa_hz,
// amp_scale, omega_m_hz, gamma_m_hz, coop, g0_hz, ...) with frequencies in
// ordinary Hz; sigmas share the keys.
struct FitReport {
    std::map<std::string, double> params;
    std::map<std::string, double> sigmas;
    double residual_norm = 0.0;
    bool converged = false;
    int iterations = 0;
};

struct CoopPoint {
    double n_d = 0.0;
    double coop = 0.0;
    double coop_sigma = 0.0;
};

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

// Fills `out` with the m residuals at parameter vector p. The residual
// count must not change between calls.
using ResidualFn = std::function<void(std::span<const double> p, std::vector<double>& out)>;

// Fills `out` with the row-major m x n Jacobian at p.
using JacobianFn =
    std::function<void(std::span<const double> p, std::vector<double>& out)>;

struct LsqOptions {
    int max_iterations = 200;
    double cost_rel_tol = 1e-10;   // stop when the relative cost drop is below this
    double grad_tol = 1e-12;       // stop when max|grad| is below this
    double fd_rel_step = 1e-7;     // forward-difference step, relative
    double fd_floor = 1.0;         // |x| floor for the relative step
    double lambda_init = 1e-3;
    double lambda_grow = 10.0;     // on rejected step
    double lambda_shrink = 0.3;    // on accepted step
    std::vector<double> lower;     // optional per-parameter bounds (empty = none)
    std::vector<double> upper;
};

struct LsqResult {
    std::vector<double> x;
    std::vector<double> sigma;        // 1-sigma from linearized covariance
    std::vector<double> covariance;   // row-major n x n
    std::vector<double> cost_history; // accepted costs, non-increasing
    double residual_norm = 0.0;       // ||r||_2 at the solution
    bool converged = false;
    int iterations = 0;
};

// Levenberg-Marquardt minimization of 0.5*||r(x)||^2. The Jacobian is
// forward finite differences unless an analytic one is supplied.
// Throws NonFiniteResidual (bad start), SingularJacobian, NotConverged.
LsqResult least_squares(const ResidualFn& residual, std::vector<double> init,
                        const LsqOptions& options = {},
                        const JacobianFn* analytic_jacobian = nullptr);

// Forward-difference Jacobian (row-major m x n), exposed for verification
// against analytic Jacobians.
std::vector<double> finite_difference_jacobian(const ResidualFn& residual,
                                               std::span<const double> x,
                                               double fd_rel_step = 1e-7,
                                               double fd_floor = 1.0);

// ---------------------------------------------------------------------------
// Extraction chain
// ---------------------------------------------------------------------------

// Stage 1: Lorentzian fit of a probe-only sweep.
// Report keys: omega_c_hz, kappa_hz, amp_scale.
// Throws NoResonanceFound when no peak stands 3 dB above the median.
FitReport fit_bare_cavity(const Trace& trace);

// Stage 2: fit of the two-tone absorption feature with the cavity fixed.
// The drive frequency comes from the trace's pump_hz metadata; the
// mechanical frequency is reported as the feature offset from the drive.
// Report keys: omega_m_hz, gamma_m_hz, coop.
// Throws MissingMetadata, NoDipFound, DegenerateFit (coop < 0.01),
// NotConverged.
FitReport fit_omia(const Trace& trace, const CavityParams& fixed,
                   std::optional<std::pair<double, double>> window_hz = std::nullopt);

// Stage 3: weighted (1/sigma^2) line through the origin, slope
// s = 4 g0^2/(kappa gamma_m), so g0 = sqrt(s kappa gamma_m)/2.
// Report keys: g0_hz, slope_per_photon. Throws TooFewPoints (< 3 points),
// NegativeSlope.
FitReport fit_coop_linear(const std::vector<CoopPoint>& points, double kappa,
                          double gamma_m);

struct BatchOptions {
    double atten_db = 0.0;                // used when a trace has no atten_db of its own
    double kappa_in_hz = 0.0;             // input coupling rate for photon calibration
    double kappa_out_hz = 0.0;
    std::optional<double> linear_max_nd;  // user-declared linear-regime boundary
    std::optional<std::pair<double, double>> window_hz;
};

struct TraceOutcome {
    bool ok = false;
    std::string error;     // empty when ok
    FitReport omia;
    double n_d = 0.0;
    double pump_dbm = 0.0;
};

// Category of a recorded failure, for callers that map errors onto the
// CLI exit-code contract.
enum class FailKind { none, input, domain, convergence, insufficient };

struct BatchResult {
    FitReport cavity;
    std::vector<TraceOutcome> traces;   // one per input sweep, input order
    std::vector<CoopPoint> points;      // successful fits, ascending n_d
    std::optional<FitReport> g0;        // absent when the final fit failed
    std::string g0_error;               // reason when absent
    FailKind g0_fail = FailKind::none;
    std::vector<std::string> warnings;  // e.g. sublinear high-power points
};

// Full pipeline over sweeps at increasing pump power: bare fit on the
// lowest-power trace, per-trace feature fits and photon calibration, then
// the linear cooperativity fit over the declared linear regime. Per-trace
// failures are flagged and skipped; the rest proceeds.
BatchResult batch_extract(const std::vector<Trace>& sweeps, const BatchOptions& options);

}  // namespace omcav

#endif  // OMCAV_FITKIT_HPP
