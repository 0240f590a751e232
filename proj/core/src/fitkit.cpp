#include "omcav/fitkit.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "omcav/constants.hpp"
#include "omcav/errors.hpp"

namespace omcav {

void Trace::validate() const {
    if (freqs_hz.size() != mag.size())
        throw ValidationError("trace: freqs and magnitudes lengths differ");
    if (freqs_hz.size() < 3) throw ValidationError("trace: need at least 3 points");
    if (phase_rad && phase_rad->size() != freqs_hz.size())
        throw ValidationError("trace: phase length differs from grid");
    for (size_t i = 0; i < freqs_hz.size(); ++i) {
        if (!std::isfinite(freqs_hz[i]) || !std::isfinite(mag[i]) || mag[i] < 0.0)
            throw ValidationError("trace: non-finite or negative sample");
        if (i > 0 && freqs_hz[i] <= freqs_hz[i - 1])
            throw ValidationError("trace: frequencies must be strictly increasing");
    }
    if (phase_rad)
        for (double p : *phase_rad)
            if (!std::isfinite(p)) throw ValidationError("trace: non-finite phase");
}

// ---------------------------------------------------------------------------
// Levenberg-Marquardt
// ---------------------------------------------------------------------------

namespace {

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void clamp_to_bounds(std::vector<double>& x, const LsqOptions& opt) {
    if (!opt.lower.empty())
        for (size_t i = 0; i < x.size(); ++i) x[i] = std::max(x[i], opt.lower[i]);
    if (!opt.upper.empty())
        for (size_t i = 0; i < x.size(); ++i) x[i] = std::min(x[i], opt.upper[i]);
}

}  // namespace

std::vector<double> finite_difference_jacobian(const ResidualFn& residual,
                                               std::span<const double> x,
                                               double fd_rel_step, double fd_floor) {
    std::vector<double> base;
    residual(x, base);
    const size_t m = base.size();
    const size_t n = x.size();
    std::vector<double> jac(m * n);
    std::vector<double> xp(x.begin(), x.end());
    std::vector<double> rp;
    for (size_t j = 0; j < n; ++j) {
        const double h = fd_rel_step * std::max(std::abs(x[j]), fd_floor);
        xp[j] = x[j] + h;
        residual(xp, rp);
        xp[j] = x[j];
        for (size_t i = 0; i < m; ++i) jac[i * n + j] = (rp[i] - base[i]) / h;
    }
    return jac;
}

LsqResult least_squares(const ResidualFn& residual, std::vector<double> init,
                        const LsqOptions& opt, const JacobianFn* analytic_jacobian) {
    const size_t n = init.size();
    if (n == 0) throw ValidationError("least_squares: empty parameter vector");
    if ((!opt.lower.empty() && opt.lower.size() != n) ||
        (!opt.upper.empty() && opt.upper.size() != n))
        throw ValidationError("least_squares: bounds length mismatch");
    if (!opt.lower.empty() && !opt.upper.empty())
        for (size_t i = 0; i < n; ++i)
            if (opt.lower[i] > opt.upper[i])
                throw ValidationError("least_squares: inconsistent bounds");

    std::vector<double> x = std::move(init);
    clamp_to_bounds(x, opt);

    std::vector<double> r;
    residual(x, r);
    if (r.empty()) throw ValidationError("least_squares: residual function returned nothing");
    if (!all_finite(r)) throw NonFiniteResidual("least_squares: residual not finite at start");
    const size_t m = r.size();

    auto cost_of = [](const std::vector<double>& v) {
        double c = 0.0;
        for (double e : v) c += e * e;
        return 0.5 * c;
    };
    double cost = cost_of(r);

    LsqResult out;
    out.cost_history.push_back(cost);

    auto eval_jacobian = [&](const std::vector<double>& at, std::vector<double>& jac) {
        if (analytic_jacobian && *analytic_jacobian) {
            (*analytic_jacobian)(at, jac);
            if (jac.size() != m * n)
                throw ValidationError("least_squares: analytic Jacobian has wrong shape");
        } else {
            jac = finite_difference_jacobian(residual, at, opt.fd_rel_step, opt.fd_floor);
        }
    };

    double lambda = opt.lambda_init;
    std::vector<double> jac, x_try, r_try;
    Eigen::MatrixXd jtj(n, n);
    bool converged = false;
    int iter = 0;

    for (; iter < opt.max_iterations && !converged; ++iter) {
        eval_jacobian(x, jac);
        if (!all_finite(jac)) throw SingularJacobian("least_squares: non-finite Jacobian");

        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
            jmat(jac.data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
        Eigen::Map<const Eigen::VectorXd> rvec(r.data(), static_cast<Eigen::Index>(m));
        jtj = jmat.transpose() * jmat;
        Eigen::VectorXd grad = jmat.transpose() * rvec;

        if (grad.cwiseAbs().maxCoeff() < opt.grad_tol) {
            converged = true;
            break;
        }
        for (size_t j = 0; j < n; ++j)
            if (!(jtj(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) > 0.0))
                throw SingularJacobian("least_squares: parameter " + std::to_string(j) +
                                       " has no effect on the residuals");

        bool accepted = false;
        for (int attempt = 0; attempt < 60 && !accepted; ++attempt) {
            Eigen::MatrixXd damped = jtj;
            for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(n); ++j)
                damped(j, j) += lambda * jtj(j, j);
            Eigen::VectorXd step = damped.ldlt().solve(-grad);
            if (!step.allFinite()) throw SingularJacobian("least_squares: singular normal equations");

            x_try.assign(x.begin(), x.end());
            for (size_t j = 0; j < n; ++j) x_try[j] += step(static_cast<Eigen::Index>(j));
            clamp_to_bounds(x_try, opt);

            residual(x_try, r_try);
            const double cost_try = all_finite(r_try)
                                        ? cost_of(r_try)
                                        : std::numeric_limits<double>::infinity();
            if (cost_try < cost) {
                const double rel_drop = (cost - cost_try) / std::max(cost, 1e-300);
                x.swap(x_try);
                r.swap(r_try);
                cost = cost_try;
                out.cost_history.push_back(cost);
                lambda *= opt.lambda_shrink;
                accepted = true;
                if (rel_drop < opt.cost_rel_tol) converged = true;
            } else {
                lambda *= opt.lambda_grow;
                if (lambda > 1e15) break;
            }
        }
        if (!accepted && !converged) {
            // Fully damped with no admissible descent: every candidate step
            // changed the cost by less than the relative tolerance, which is
            // the cost-stall convergence condition.
            converged = true;
        }
    }

    if (!converged)
        throw NotConverged("least_squares: no convergence in " +
                           std::to_string(opt.max_iterations) + " iterations");

    // Covariance from the linearization at the solution, scaled by the
    // residual variance.
    eval_jacobian(x, jac);
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
        jmat(jac.data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
    jtj = jmat.transpose() * jmat;
    const double dof = static_cast<double>(m > n ? m - n : 1);
    const double s2 = 2.0 * cost / dof;
    Eigen::MatrixXd cov =
        jtj.ldlt().solve(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n),
                                                   static_cast<Eigen::Index>(n))) *
        s2;

    out.x = std::move(x);
    out.sigma.resize(n);
    out.covariance.resize(n * n);
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < n; ++j)
            out.covariance[i * n + j] = cov(static_cast<Eigen::Index>(i),
                                            static_cast<Eigen::Index>(j));
        const double v = cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
        out.sigma[i] = v > 0.0 ? std::sqrt(v) : 0.0;
    }
    out.residual_norm = std::sqrt(2.0 * cost);
    out.converged = true;
    out.iterations = iter;
    return out;
}

// ---------------------------------------------------------------------------
// Stage 1: bare cavity
// ---------------------------------------------------------------------------

namespace {

double median_of(std::vector<double> v) {
    const size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    return v[mid];
}

// Median over frequency rather than over samples, so clustered sweep
// grids (coarse span + fine feature zones) do not skew the baseline.
double freq_weighted_median(const std::vector<double>& freqs, const std::vector<double>& values) {
    const size_t n = values.size();
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return values[a] < values[b]; });
    std::vector<double> weight(n);
    double total = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double left = i > 0 ? freqs[i] - freqs[i - 1] : freqs[1] - freqs[0];
        const double right = i + 1 < n ? freqs[i + 1] - freqs[i] : freqs[n - 1] - freqs[n - 2];
        weight[i] = 0.5 * (left + right);
        total += weight[i];
    }
    double acc = 0.0;
    for (size_t idx : order) {
        acc += weight[idx];
        if (acc >= 0.5 * total) return values[idx];
    }
    return values[order.back()];
}

double mad_scale(const std::vector<double>& v) {
    std::vector<double> dev(v.size());
    const double med = median_of(v);
    for (size_t i = 0; i < v.size(); ++i) dev[i] = std::abs(v[i] - med);
    return 1.4826 * median_of(dev);
}

struct BareModel {
    const std::vector<double>& omega;  // rad/s
    const Trace& trace;

    // p = {omega_c, kappa, amp}
    void operator()(std::span<const double> p, std::vector<double>& out) const {
        const double wc = p[0], kappa = p[1], amp = p[2];
        const bool complex_fit = !trace.magnitude_only();
        out.resize(omega.size() * (complex_fit ? 2 : 1));
        for (size_t i = 0; i < omega.size(); ++i) {
            const std::complex<double> model =
                amp / std::complex<double>(1.0, -(omega[i] - wc) / (kappa / 2.0));
            if (complex_fit) {
                const std::complex<double> data =
                    std::polar(trace.mag[i], (*trace.phase_rad)[i]);
                out[2 * i] = model.real() - data.real();
                out[2 * i + 1] = model.imag() - data.imag();
            } else {
                out[i] = std::abs(model) - trace.mag[i];
            }
        }
    }
};

}  // namespace

FitReport fit_bare_cavity(const Trace& trace) {
    trace.validate();
    const size_t n = trace.freqs_hz.size();

    const double peak = *std::max_element(trace.mag.begin(), trace.mag.end());
    const double med = freq_weighted_median(trace.freqs_hz, trace.mag);
    if (peak < med * std::pow(10.0, 3.0 / 20.0))
        throw NoResonanceFound("fit_bare_cavity: no peak 3 dB above the median");

    std::vector<double> omega(n);
    for (size_t i = 0; i < n; ++i) omega[i] = hz_to_rad(trace.freqs_hz[i]);

    const size_t ipk = static_cast<size_t>(
        std::max_element(trace.mag.begin(), trace.mag.end()) - trace.mag.begin());
    // Half-power width around the peak as the linewidth seed.
    const double half = peak / std::sqrt(2.0);
    size_t lo = ipk, hi = ipk;
    while (lo > 0 && trace.mag[lo - 1] >= half) --lo;
    while (hi + 1 < n && trace.mag[hi + 1] >= half) ++hi;
    double kappa0 = omega[hi] - omega[lo];
    if (!(kappa0 > 0.0)) kappa0 = (omega.back() - omega.front()) / 10.0;

    BareModel model{omega, trace};
    LsqOptions opt;
    opt.lower = {omega.front(), kappa0 * 1e-3, 1e-12};
    opt.upper = {omega.back(), (omega.back() - omega.front()) * 10.0, 1.0};
    LsqResult res = least_squares(model, {omega[ipk], kappa0, peak}, opt);

    // Refit once with the worst residual's contiguous neighborhood masked;
    // a narrow interference feature riding on the resonance would
    // otherwise bias the linewidth. The mask grows until the residuals
    // fall back to the noise floor, then doubles for the feature's wings.
    std::vector<double> resid;
    model(res.x, resid);
    const double scale = mad_scale(resid);
    const double cut = std::max(5.0 * scale, 1e-6 * res.x[2]);
    std::vector<char> keep(resid.size(), 1);
    size_t masked = 0;
    const size_t iworst = static_cast<size_t>(
        std::max_element(resid.begin(), resid.end(),
                         [](double a, double b) { return std::abs(a) < std::abs(b); }) -
        resid.begin());
    if (std::abs(resid[iworst]) > cut) {
        const double floor_cut = std::max(1.5 * scale, 1e-6 * res.x[2]);
        size_t mlo = iworst, mhi = iworst;
        while (mlo > 0 && std::abs(resid[mlo - 1]) > floor_cut) --mlo;
        while (mhi + 1 < resid.size() && std::abs(resid[mhi + 1]) > floor_cut) ++mhi;
        const size_t extent = mhi - mlo + 1;
        mlo = mlo > extent ? mlo - extent : 0;
        mhi = std::min(mhi + extent, resid.size() - 1);
        for (size_t i = mlo; i <= mhi; ++i) keep[i] = 0;
        masked = mhi - mlo + 1;
    }
    if (masked > 0 && masked < resid.size() / 5) {
        ResidualFn masked_model = [&](std::span<const double> p, std::vector<double>& out) {
            std::vector<double> full;
            model(p, full);
            out.clear();
            out.reserve(full.size() - masked);
            for (size_t i = 0; i < full.size(); ++i)
                if (keep[i]) out.push_back(full[i]);
        };
        res = least_squares(masked_model, res.x, opt);
    }

    FitReport report;
    report.params = {{"omega_c_hz", rad_to_hz(res.x[0])},
                     {"kappa_hz", rad_to_hz(res.x[1])},
                     {"amp_scale", res.x[2]}};
    report.sigmas = {{"omega_c_hz", rad_to_hz(res.sigma[0])},
                     {"kappa_hz", rad_to_hz(res.sigma[1])},
                     {"amp_scale", res.sigma[2]}};
    report.residual_norm = res.residual_norm;
    report.converged = res.converged;
    report.iterations = res.iterations;
    return report;
}

// ---------------------------------------------------------------------------
// Stage 2: absorption feature
// ---------------------------------------------------------------------------

namespace {

// Residuals on |S21|^2 with an additive noise-floor parameter: for
// complex Gaussian noise the expectation of the squared magnitude is the
// model power plus a constant, so deep features fitted this way stay
// unbiased even when the dip bottom reaches the noise floor. The floor
// carries a soft prior at its robust pre-fit estimate; without it, deep
// features leave (coop, floor) nearly degenerate and the fit crawls.
struct OmiaModel {
    const std::vector<double>& omega;  // rad/s
    const std::vector<double>& mag;
    double omega_c, half_kappa, amp, omega_d;
    double floor0, floor_scale;

    // p = {omega_m, gamma_m, coop, noise_floor_power}
    void operator()(std::span<const double> p, std::vector<double>& out) const {
        const double wm = p[0], gm = p[1], coop = p[2], floor = p[3];
        out.resize(omega.size() + 1);
        for (size_t i = 0; i < omega.size(); ++i) {
            const double delta = omega[i] - omega_c;
            const double delta_m = omega[i] - omega_d - wm;
            const std::complex<double> denom =
                std::complex<double>(1.0, -delta / half_kappa) +
                coop / std::complex<double>(1.0, -delta_m / (gm / 2.0));
            out[i] = std::norm(amp / denom) + floor - mag[i] * mag[i];
        }
        out[omega.size()] = (floor - floor0) / floor_scale;
    }
};

}  // namespace

FitReport fit_omia(const Trace& trace, const CavityParams& fixed,
                   std::optional<std::pair<double, double>> window_hz) {
    trace.validate();
    fixed.validate();
    if (!trace.meta.pump_hz)
        throw MissingMetadata("fit_omia: trace carries no pump_hz metadata");

    std::vector<double> omega, mag;
    for (size_t i = 0; i < trace.freqs_hz.size(); ++i) {
        if (window_hz && (trace.freqs_hz[i] < window_hz->first ||
                          trace.freqs_hz[i] > window_hz->second))
            continue;
        omega.push_back(hz_to_rad(trace.freqs_hz[i]));
        mag.push_back(trace.mag[i]);
    }
    if (omega.size() < 8) throw TooFewPoints("fit_omia: window leaves too few points");

    const double half_kappa = fixed.kappa() / 2.0;
    const double amp = fixed.amp_scale;
    const double omega_d = hz_to_rad(*trace.meta.pump_hz);

    // Deviation from the bare response locates the feature.
    std::vector<double> dev(omega.size());
    for (size_t i = 0; i < omega.size(); ++i) {
        const double bare =
            std::abs(amp / std::complex<double>(1.0, -(omega[i] - fixed.omega_c) / half_kappa));
        dev[i] = bare - mag[i];
    }
    const size_t idip = static_cast<size_t>(
        std::max_element(dev.begin(), dev.end()) - dev.begin());
    const double dmax = dev[idip];
    const double noise = mad_scale(dev);
    if (dmax < std::max(5.0 * noise, 0.005 * amp))
        throw NoDipFound("fit_omia: no absorption feature above the noise");

    const double omega_m0 = omega[idip] - omega_d;
    if (!(omega_m0 > 0.0))
        throw NoDipFound("fit_omia: feature sits below the drive tone");

    // Feature width at half depth seeds gamma*(1+C). The depth seeds C; a
    // local median keeps a deep, noise-floor-level dip from producing a
    // wild starting value.
    size_t lo = idip, hi = idip;
    while (lo > 0 && dev[lo - 1] > dmax / 2.0) --lo;
    while (hi + 1 < omega.size() && dev[hi + 1] > dmax / 2.0) ++hi;
    double width = omega[hi] - omega[lo];
    const double min_step = omega[idip + 1 < omega.size() ? idip + 1 : idip] -
                            omega[idip > 0 ? idip - 1 : idip];
    width = std::max(width, min_step / 2.0);

    std::vector<double> local_dev(dev.begin() + (idip >= 2 ? idip - 2 : 0),
                                  dev.begin() + std::min(idip + 3, dev.size()));
    const double depth = std::clamp(median_of(std::move(local_dev)), 0.0, amp * (1.0 - 1e-3));
    const double coop0 = std::clamp(depth / (amp - depth), 0.05, 5e3);
    const double gamma0 = std::clamp(width / (1.0 + coop0), min_step / 4.0, fixed.kappa() * 5.0);

    // Magnitude deviations fluctuate with the per-quadrature sigma, so the
    // expected power floor is twice the squared MAD scale.
    const double floor0 = 2.0 * noise * noise;
    const double floor_scale = 0.25 * floor0 + 1e-9 * amp * amp;
    OmiaModel model{omega,      mag,    fixed.omega_c, half_kappa,
                    amp,        omega_d, floor0,        floor_scale};
    LsqOptions opt;
    opt.lower = {omega.front() - omega_d, std::min(gamma0 * 1e-3, min_step * 1e-3), 0.0, 0.0};
    opt.upper = {omega.back() - omega_d, fixed.kappa() * 10.0, 1e6, 0.01 * amp * amp};
    LsqResult res = least_squares(model, {omega_m0, gamma0, coop0, floor0}, opt);

    if (res.x[2] < 0.01)
        throw DegenerateFit("fit_omia: cooperativity below 0.01, gamma_m and C are not separable");

    FitReport report;
    report.params = {{"omega_m_hz", rad_to_hz(res.x[0])},
                     {"gamma_m_hz", rad_to_hz(res.x[1])},
                     {"coop", res.x[2]}};
    report.sigmas = {{"omega_m_hz", rad_to_hz(res.sigma[0])},
                     {"gamma_m_hz", rad_to_hz(res.sigma[1])},
                     {"coop", res.sigma[2]}};
    report.residual_norm = res.residual_norm;
    report.converged = res.converged;
    report.iterations = res.iterations;
    return report;
}

// ---------------------------------------------------------------------------
// Stage 3: cooperativity vs photon number
// ---------------------------------------------------------------------------

FitReport fit_coop_linear(const std::vector<CoopPoint>& points, double kappa,
                          double gamma_m) {
    if (points.size() < 3)
        throw TooFewPoints("fit_coop_linear: need at least 3 points, got " +
                           std::to_string(points.size()));
    if (!(kappa > 0.0) || !(gamma_m > 0.0))
        throw NonPositiveRate("fit_coop_linear: kappa and gamma_m must be > 0");
    bool weighted = true;
    for (const auto& p : points) {
        if (!(p.n_d > 0.0)) throw ValidationError("fit_coop_linear: n_d must be > 0");
        if (p.coop < 0.0) throw ValidationError("fit_coop_linear: coop must be >= 0");
        if (!(p.coop_sigma > 0.0)) weighted = false;
    }

    double snc = 0.0, snn = 0.0;
    for (const auto& p : points) {
        const double w = weighted ? 1.0 / (p.coop_sigma * p.coop_sigma) : 1.0;
        snc += w * p.n_d * p.coop;
        snn += w * p.n_d * p.n_d;
    }
    const double slope = snc / snn;
    if (!(slope > 0.0)) throw NegativeSlope("fit_coop_linear: non-positive slope");

    double slope_var;
    double chi2 = 0.0;
    for (const auto& p : points) {
        const double w = weighted ? 1.0 / (p.coop_sigma * p.coop_sigma) : 1.0;
        const double r = p.coop - slope * p.n_d;
        chi2 += w * r * r;
    }
    if (weighted) {
        slope_var = 1.0 / snn;
    } else {
        slope_var = (chi2 / static_cast<double>(points.size() - 1)) / snn;
    }
    const double slope_sigma = std::sqrt(slope_var);

    const double g0 = 0.5 * std::sqrt(slope * kappa * gamma_m);
    const double g0_sigma = g0 * slope_sigma / (2.0 * slope);

    FitReport report;
    report.params = {{"g0_hz", rad_to_hz(g0)}, {"slope_per_photon", slope}};
    report.sigmas = {{"g0_hz", rad_to_hz(g0_sigma)}, {"slope_per_photon", slope_sigma}};
    report.residual_norm = std::sqrt(chi2);
    report.converged = true;
    report.iterations = 1;
    return report;
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

BatchResult batch_extract(const std::vector<Trace>& sweeps, const BatchOptions& options) {
    if (sweeps.empty()) throw TooFewPoints("batch_extract: no traces");
    if (!(options.kappa_in_hz > 0.0))
        throw ValidationError("batch_extract: kappa_in_hz must be > 0 for photon calibration");

    BatchResult result;
    result.traces.resize(sweeps.size());

    // Lowest-power valid trace anchors the cavity fit.
    std::optional<size_t> anchor;
    for (size_t i = 0; i < sweeps.size(); ++i) {
        if (!sweeps[i].meta.pump_dbm) continue;
        if (!anchor || *sweeps[i].meta.pump_dbm < *sweeps[*anchor].meta.pump_dbm) anchor = i;
    }
    if (!anchor) throw MissingMetadata("batch_extract: no trace carries pump_dbm metadata");
    result.cavity = fit_bare_cavity(sweeps[*anchor]);

    CavityParams cav;
    cav.omega_c = hz_to_rad(result.cavity.params.at("omega_c_hz"));
    cav.kappa_in = hz_to_rad(options.kappa_in_hz);
    cav.kappa_out = hz_to_rad(options.kappa_out_hz > 0.0 ? options.kappa_out_hz
                                                         : options.kappa_in_hz);
    const double kappa_total = hz_to_rad(result.cavity.params.at("kappa_hz"));
    cav.kappa_int = std::max(kappa_total - cav.kappa_in - cav.kappa_out, 1e-9 * kappa_total);
    cav.amp_scale = std::min(result.cavity.params.at("amp_scale"), 1.0);

    for (size_t i = 0; i < sweeps.size(); ++i) {
        TraceOutcome& outcome = result.traces[i];
        try {
            const auto& meta = sweeps[i].meta;
            if (!meta.pump_dbm) throw MissingMetadata("trace has no pump_dbm metadata");
            if (!meta.pump_hz) throw MissingMetadata("trace has no pump_hz metadata");
            outcome.pump_dbm = *meta.pump_dbm;

            PumpConfig pump;
            pump.omega_d = hz_to_rad(*meta.pump_hz);
            pump.power_w = dbm_to_watt(*meta.pump_dbm);
            pump.attenuation_db = meta.atten_db ? *meta.atten_db : options.atten_db;
            outcome.n_d = photons_from_power(cav, pump);

            outcome.omia = fit_omia(sweeps[i], cav, options.window_hz);
            outcome.ok = true;
        } catch (const Error& e) {
            outcome.ok = false;
            outcome.error = e.what();
        }
    }

    for (const auto& outcome : result.traces)
        if (outcome.ok)
            result.points.push_back({outcome.n_d, outcome.omia.params.at("coop"),
                                     outcome.omia.sigmas.at("coop")});
    std::sort(result.points.begin(), result.points.end(),
              [](const CoopPoint& a, const CoopPoint& b) { return a.n_d < b.n_d; });

    std::vector<CoopPoint> linear;
    for (const auto& p : result.points)
        if (!options.linear_max_nd || p.n_d <= *options.linear_max_nd) linear.push_back(p);

    // Weighted mean of the per-trace gamma_m feeds the slope-to-g0 conversion.
    double gamma_sum = 0.0, gamma_wsum = 0.0;
    for (const auto& outcome : result.traces) {
        if (!outcome.ok) continue;
        const double g = outcome.omia.params.at("gamma_m_hz");
        const double s = outcome.omia.sigmas.at("gamma_m_hz");
        const double w = s > 0.0 ? 1.0 / (s * s) : 1.0;
        gamma_sum += w * g;
        gamma_wsum += w;
    }

    try {
        if (linear.size() < 3)
            throw TooFewPoints("batch_extract: " + std::to_string(linear.size()) +
                               " points in the linear regime, need 3");
        const double gamma_m = hz_to_rad(gamma_sum / gamma_wsum);
        auto g0_report = fit_coop_linear(linear, kappa_total, gamma_m);

        // Diagnostic only: excluded high-power points far below the line
        // indicate the onset of extra cavity dissipation.
        const double slope = g0_report.params.at("slope_per_photon");
        for (const auto& p : result.points) {
            if (options.linear_max_nd && p.n_d > *options.linear_max_nd) {
                const double resid = p.coop - slope * p.n_d;
                if (p.coop_sigma > 0.0 && resid < -3.0 * p.coop_sigma)
                    result.warnings.push_back(
                        "cooperativity at n_d=" + std::to_string(p.n_d) +
                        " falls more than 3 sigma below the linear fit");
            }
        }
        result.g0 = std::move(g0_report);
    } catch (const Error& e) {
        result.g0_error = e.what();
        if (dynamic_cast<const InsufficientData*>(&e))
            result.g0_fail = FailKind::insufficient;
        else if (dynamic_cast<const ConvergenceError*>(&e))
            result.g0_fail = FailKind::convergence;
        else if (dynamic_cast<const DomainError*>(&e))
            result.g0_fail = FailKind::domain;
        else
            result.g0_fail = FailKind::input;
    }

    return result;
}

}  // namespace omcav
