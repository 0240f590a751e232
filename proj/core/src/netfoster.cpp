#include "omcav/netfoster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "omcav/errors.hpp"

namespace omcav {

namespace {

constexpr double kPoleMarginRel = 1e-6;   // synthesis keeps this far from poles
constexpr double kRootTolRel = 1e-10;     // bisection stop on the refined root
constexpr int kSlopeWindowMin = 5;

bool all_finite(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// Least-squares quadratic y = c0 + c1*x + c2*x^2 over a window, with x
// pre-shifted and scaled by the caller for conditioning.
struct Quadratic {
    double c0 = 0.0, c1 = 0.0, c2 = 0.0;

    double eval(double x) const { return c0 + x * (c1 + x * c2); }
    double deriv(double x) const { return c1 + 2.0 * c2 * x; }
};

Quadratic fit_quadratic(const std::vector<double>& x, const std::vector<double>& y) {
    const auto n = static_cast<Eigen::Index>(x.size());
    Eigen::MatrixXd a(n, 3);
    Eigen::VectorXd b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        a(i, 0) = 1.0;
        a(i, 1) = x[static_cast<size_t>(i)];
        a(i, 2) = x[static_cast<size_t>(i)] * x[static_cast<size_t>(i)];
        b(i) = y[static_cast<size_t>(i)];
    }
    Eigen::Vector3d c = (a.transpose() * a).ldlt().solve(a.transpose() * b);
    return {c(0), c(1), c(2)};
}

// Bracketing bisection to kRootTolRel relative, then a single inverse
// quadratic interpolation step. Assumes f(a) < 0 < f(b) on entry.
template <typename F>
double refine_root(F&& f, double a, double b) {
    double fa = f(a);
    double fb = f(b);
    for (int it = 0; it < 200 && (b - a) > kRootTolRel * std::max(std::abs(a), std::abs(b)); ++it) {
        const double m = 0.5 * (a + b);
        const double fm = f(m);
        if (fm == 0.0) return m;
        if ((fa < 0.0) == (fm < 0.0)) {
            a = m;
            fa = fm;
        } else {
            b = m;
            fb = fm;
        }
    }
    const double m = 0.5 * (a + b);
    const double fm = f(m);
    // Inverse quadratic interpolation through (a,fa), (m,fm), (b,fb).
    const double d1 = (fa - fm) * (fa - fb);
    const double d2 = (fm - fa) * (fm - fb);
    const double d3 = (fb - fa) * (fb - fm);
    if (d1 != 0.0 && d2 != 0.0 && d3 != 0.0) {
        const double x = a * fm * fb / d1 + m * fa * fb / d2 + b * fa * fm / d3;
        if (std::isfinite(x) && x > a && x < b) return x;
    }
    return m;
}

}  // namespace

void AdmittanceTrace::validate() const {
    if (freqs.size() != y_imag.size())
        throw ValidationError("admittance trace: freqs and y_imag lengths differ");
    if (freqs.size() < 3)
        throw ValidationError("admittance trace: need at least 3 grid points");
    if (!all_finite(freqs) || !all_finite(y_imag))
        throw ValidationError("admittance trace: non-finite value");
    if (freqs.front() <= 0.0)
        throw ValidationError("admittance trace: frequencies must be positive");
    for (size_t i = 1; i < freqs.size(); ++i)
        if (freqs[i] <= freqs[i - 1])
            throw ValidationError("admittance trace: frequencies must be strictly increasing");
}

double LcBranch::pole_freq() const { return 1.0 / std::sqrt(l_h * c_f); }

bool FosterNetwork::empty() const {
    return shunt_c == 0.0 && !series_l.has_value() && branches.empty();
}

std::vector<double> FosterNetwork::pole_freqs() const {
    std::vector<double> poles;
    poles.reserve(branches.size());
    for (const auto& br : branches) poles.push_back(br.pole_freq());
    std::sort(poles.begin(), poles.end());
    return poles;
}

void FosterNetwork::validate() const {
    if (empty()) throw EmptyNetwork("foster network: no elements");
    if (shunt_c < 0.0 || !std::isfinite(shunt_c))
        throw ValidationError("foster network: shunt capacitance must be >= 0");
    if (series_l && (*series_l <= 0.0 || !std::isfinite(*series_l)))
        throw ValidationError("foster network: series inductance must be > 0");
    for (const auto& br : branches)
        if (br.l_h <= 0.0 || br.c_f <= 0.0 || !std::isfinite(br.l_h) || !std::isfinite(br.c_f))
            throw ValidationError("foster network: branch L and C must be > 0");
    const auto poles = pole_freqs();
    for (size_t i = 1; i < poles.size(); ++i)
        if (poles[i] - poles[i - 1] <= kPoleMarginRel * poles[i])
            throw ValidationError("foster network: branch resonances must be pairwise distinct");
}

namespace {

double foster_y_imag_at(const FosterNetwork& net, double w) {
    double y = w * net.shunt_c;
    if (net.series_l) y -= 1.0 / (w * *net.series_l);
    for (const auto& br : net.branches) y += w * br.c_f / (1.0 - w * w * br.l_h * br.c_f);
    return y;
}

}  // namespace

AdmittanceTrace synthesize_admittance(const FosterNetwork& network,
                                      const std::vector<double>& grid) {
    network.validate();
    const auto poles = network.pole_freqs();
    AdmittanceTrace out;
    out.freqs = grid;
    out.y_imag.reserve(grid.size());
    for (double w : grid) {
        for (double p : poles)
            if (std::abs(w - p) < kPoleMarginRel * p)
                throw GridAtPole("grid point " + std::to_string(w) +
                                 " rad/s within 1e-6 of pole at " + std::to_string(p));
        out.y_imag.push_back(foster_y_imag_at(network, w));
    }
    out.validate();
    return out;
}

AdmittanceTrace total_admittance(const AdmittanceTrace& trace, double c_m) {
    trace.validate();
    if (c_m < 0.0 || !std::isfinite(c_m))
        throw ValidationError("total_admittance: c_m must be >= 0");
    if (c_m == 0.0) return trace;
    AdmittanceTrace out = trace;
    for (size_t i = 0; i < out.freqs.size(); ++i) out.y_imag[i] += out.freqs[i] * c_m;
    return out;
}

std::vector<ModeParams> find_modes(const AdmittanceTrace& trace) {
    trace.validate();
    const auto& w = trace.freqs;
    const auto& y = trace.y_imag;
    const auto n = static_cast<long>(w.size());

    std::vector<ModeParams> modes;
    for (long i = 0; i + 1 < n; ++i) {
        if (!(y[i] < 0.0 && y[i + 1] >= 0.0)) continue;  // upward crossings only

        // Slope window of >= 5 points centered on the bracket.
        long lo = std::max<long>(0, i - 2);
        long hi = std::min<long>(n - 1, i + 3);
        while (hi - lo + 1 < kSlopeWindowMin && (lo > 0 || hi < n - 1)) {
            if (lo > 0) --lo;
            if (hi - lo + 1 < kSlopeWindowMin && hi < n - 1) ++hi;
        }
        if (hi - lo + 1 < kSlopeWindowMin)
            throw GridTooCoarse("crossing near " + std::to_string(w[i]) +
                                " rad/s: too few surrounding points");

        // Between poles the susceptance is monotone increasing; a large
        // decrease inside the window means the bracket spans a pole.
        double wmin = y[lo], wmax = y[lo], max_drop = 0.0;
        for (long k = lo; k <= hi; ++k) {
            wmin = std::min(wmin, y[k]);
            wmax = std::max(wmax, y[k]);
            if (k > lo) max_drop = std::max(max_drop, y[k - 1] - y[k]);
        }
        if (max_drop > 0.05 * (wmax - wmin))
            throw GridTooCoarse("crossing near " + std::to_string(w[i]) +
                                " rad/s: bracket spans a pole");

        // Local quadratic in scaled coordinates.
        const double center = 0.5 * (w[i] + w[i + 1]);
        const double scale = std::max(w[hi] - center, center - w[lo]);
        std::vector<double> xs, ys;
        xs.reserve(hi - lo + 1);
        ys.reserve(hi - lo + 1);
        for (long k = lo; k <= hi; ++k) {
            xs.push_back((w[k] - center) / scale);
            ys.push_back(y[k]);
        }
        const Quadratic q = fit_quadratic(xs, ys);

        const double xa = (w[i] - center) / scale;
        const double xb = (w[i + 1] - center) / scale;
        if (!(q.eval(xa) < 0.0 && q.eval(xb) > 0.0))
            throw GridTooCoarse("crossing near " + std::to_string(w[i]) +
                                " rad/s: local fit inconsistent with samples");

        const double xr = refine_root([&q](double x) { return q.eval(x); }, xa, xb);
        const double omega0 = center + xr * scale;
        const double slope = q.deriv(xr) / scale;
        if (!(slope > 0.0) || !(omega0 > 0.0))
            throw GridTooCoarse("crossing near " + std::to_string(w[i]) +
                                " rad/s: non-positive slope at refined root");

        ModeParams mode;
        mode.omega0 = omega0;
        mode.slope = slope;
        mode.impedance_z = 2.0 / (omega0 * slope);
        mode.c_p = 1.0 / (mode.impedance_z * omega0);
        mode.l_p = mode.impedance_z / omega0;
        modes.push_back(mode);
    }

    if (modes.empty()) throw NoModeFound("no positive-slope zero crossing in trace");
    std::sort(modes.begin(), modes.end(),
              [](const ModeParams& a, const ModeParams& b) { return a.omega0 < b.omega0; });
    return modes;
}

double participation_ratio(double c_m, double c_p) {
    if (!(c_p > 0.0)) throw NonPositiveCp("participation_ratio: c_p must be > 0");
    if (c_m < 0.0) throw ValidationError("participation_ratio: c_m must be >= 0");
    return c_m / (c_m + c_p);
}

namespace {

// Scan [lo, hi] with a linear grid for the first upward crossing; on a hit,
// re-synthesize a dense local grid around the bracket and hand it to
// find_modes. Returns the refined frequency or nothing.
std::optional<double> lowest_mode_in_interval(const FosterNetwork& net, double c_m,
                                              double lo, double hi) {
    if (!(hi > lo)) return std::nullopt;
    constexpr int kCoarse = 4001;
    auto y_total = [&](double w) { return foster_y_imag_at(net, w) + w * c_m; };

    const double step = (hi - lo) / (kCoarse - 1);
    double prev_w = lo, prev_y = y_total(lo);
    for (int k = 1; k < kCoarse; ++k) {
        const double wk = lo + k * step;
        const double yk = y_total(wk);
        if (prev_y < 0.0 && yk >= 0.0) {
            const double span = wk - prev_w;
            const double win_lo = std::max(lo, prev_w - 3.0 * span);
            const double win_hi = std::min(hi, wk + 3.0 * span);
            std::vector<double> grid(kCoarse);
            for (int j = 0; j < kCoarse; ++j)
                grid[j] = win_lo + (win_hi - win_lo) * j / (kCoarse - 1);
            const auto trace = total_admittance(synthesize_admittance(net, grid), c_m);
            return find_modes(trace).front().omega0;
        }
        prev_w = wk;
        prev_y = yk;
    }
    return std::nullopt;
}

}  // namespace

double coupled_mode_frequency(const FosterNetwork& network, double c_m) {
    network.validate();
    if (c_m < 0.0 || !std::isfinite(c_m))
        throw ValidationError("coupled_mode_frequency: c_m must be >= 0");

    double c_total = network.shunt_c + c_m;
    for (const auto& br : network.branches) c_total += br.c_f;
    const auto poles = network.pole_freqs();
    const double margin = 10.0 * kPoleMarginRel;

    // Below the first pole a zero exists only when a series inductor pulls
    // the susceptance negative at low frequency.
    if (network.series_l && c_total > 0.0) {
        const double w_est = 1.0 / std::sqrt(*network.series_l * c_total);
        double lo = (poles.empty() ? w_est : std::min(w_est, poles.front())) / 100.0;
        double hi = poles.empty() ? 100.0 * w_est : std::min(100.0 * w_est, poles.front() * (1.0 - margin));
        if (auto w0 = lowest_mode_in_interval(network, c_m, lo, hi)) return *w0;
    }

    for (size_t k = 0; k < poles.size(); ++k) {
        const double lo = poles[k] * (1.0 + margin);
        double hi;
        if (k + 1 < poles.size()) {
            hi = poles[k + 1] * (1.0 - margin);
        } else {
            // Expand past the last pole until the susceptance turns positive.
            hi = poles[k] * 2.0;
            auto y_total = [&](double w) { return foster_y_imag_at(network, w) + w * c_m; };
            int doublings = 0;
            while (y_total(hi) <= 0.0 && doublings++ < 60) hi *= 2.0;
        }
        if (auto w0 = lowest_mode_in_interval(network, c_m, lo, hi)) return *w0;
    }

    throw NoModeFound("network has no resonance after adding c_m");
}

}  // namespace omcav
