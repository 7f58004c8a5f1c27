#include "qscope/analysis.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <initializer_list>
#include <limits>
#include <mutex>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace qscope {

namespace {

constexpr double kPi = std::numbers::pi;

std::mutex& fftw_mutex() {
    static std::mutex m;
    return m;
}

std::vector<std::complex<double>> rfft(std::span<const double> x) {
    std::size_t n = x.size();
    std::vector<double> in(x.begin(), x.end());
    std::vector<std::complex<double>> out(n / 2 + 1);
    {
        std::lock_guard<std::mutex> lock(fftw_mutex());
        fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(),
                                              reinterpret_cast<fftw_complex*>(out.data()),
                                              FFTW_ESTIMATE);
        fftw_execute(plan);
        fftw_destroy_plan(plan);
    }
    return out;
}

std::vector<double> irfft(std::vector<std::complex<double>> spec, std::size_t n) {
    std::vector<double> out(n);
    {
        std::lock_guard<std::mutex> lock(fftw_mutex());
        fftw_plan plan = fftw_plan_dft_c2r_1d(static_cast<int>(n),
                                              reinterpret_cast<fftw_complex*>(spec.data()),
                                              out.data(), FFTW_ESTIMATE);
        fftw_execute(plan);
        fftw_destroy_plan(plan);
    }
    for (double& v : out) v /= static_cast<double>(n);
    return out;
}

double sinc(double x) {
    if (x == 0.0) return 1.0;
    return std::sin(kPi * x) / (kPi * x);
}

void write_csv_line(std::ostream& out, std::initializer_list<double> vals) {
    char buf[64];
    bool first = true;
    for (double v : vals) {
        if (!first) out << ',';
        std::snprintf(buf, sizeof buf, "%.12g", v);
        out << buf;
        first = false;
    }
    out << '\n';
}

}  // namespace

// --- rise time ------------------------------------------------------------------

RiseTimeResult rise_time_10_90(const SweepResult& rec) {
    auto n = rec.points.size();
    if (n < 10) throw std::invalid_argument("rise time needs >= 10 points across the edge");

    std::vector<double> t(n), y(n);
    bool use_b = std::isfinite(rec.points.front().b_est_t);
    for (std::size_t i = 0; i < n; ++i) {
        t[i] = rec.points[i].t_s;
        y[i] = use_b ? rec.points[i].b_est_t : rec.points[i].p_mean;
    }

    std::size_t tail = std::max<std::size_t>(1, n / 10);
    double y0 = 0.0, y1 = 0.0;
    for (std::size_t i = 0; i < tail; ++i) {
        y0 += y[i];
        y1 += y[n - 1 - i];
    }
    y0 /= tail;
    y1 /= tail;
    double amp = y1 - y0;
    if (amp == 0.0) throw std::runtime_error("rise time: flat record, no edge found");
    if (amp < 0.0) {  // falling edge: flip
        for (double& v : y) v = -v;
        y0 = -y0;
        y1 = -y1;
        amp = -amp;
    }

    // non-monotone beyond noise ends the analysis
    double worst = 0.0;
    double run_max = y[0];
    for (double v : y) {
        run_max = std::max(run_max, v);
        worst = std::max(worst, run_max - v);
    }
    double noise_scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) noise_scale = std::max(noise_scale, rec.points[i].b_sem_t);
    if (!std::isfinite(noise_scale)) noise_scale = 0.0;
    if (worst > 0.25 * amp + 5.0 * noise_scale)
        throw std::runtime_error("rise time: edge is not monotone beyond noise");

    auto crossing = [&](double level) {
        for (std::size_t i = 0; i + 1 < n; ++i) {
            if (y[i] <= level && y[i + 1] > level) {
                double frac = (level - y[i]) / (y[i + 1] - y[i]);
                return t[i] + frac * (t[i + 1] - t[i]);
            }
        }
        throw std::runtime_error("rise time: threshold crossing not found");
    };

    RiseTimeResult r;
    r.t10_s = crossing(y0 + 0.1 * amp);
    r.t90_s = crossing(y0 + 0.9 * amp);
    r.rise_10_90_s = r.t90_s - r.t10_s;
    r.model_max_tpi_tint_s = std::numeric_limits<double>::quiet_NaN();
    if (rec.metadata.contains("tint_s") && rec.metadata.contains("sensor")) {
        double tint = rec.metadata["tint_s"].get<double>();
        double tpi = rec.metadata["sensor"]["tpi_s"].get<double>();
        r.model_max_tpi_tint_s = std::max(tint, tpi);
    }
    return r;
}

// --- transfer function -------------------------------------------------------------

double hann_transfer_mag(double f_hz, double support_s) {
    double x = std::abs(f_hz * support_s);
    // sin(pi x) = sin(pi (1-x)) removes the singularity at x = 1:
    // sinc(x)/(1-x^2) = sinc(1-x) / (x (1+x))
    if (std::abs(x - 1.0) < 0.5) return std::abs(sinc(1.0 - x) / (x * (1.0 + x)));
    return std::abs(sinc(x) / (1.0 - x * x));
}

void TransferFunction::write_csv(std::ostream& out) const {
    out << "f_hz,mag,mag_db,model_mag\n";
    for (std::size_t i = 0; i < freqs_hz.size(); ++i) {
        double db = 20.0 * std::log10(std::max(magnitude[i], 1e-30));
        write_csv_line(out, {freqs_hz[i], magnitude[i], db, model_reference[i]});
    }
}

TransferFunction transfer_function(const TfConfig& cfg, const SensorParams& p) {
    p.validate();
    double tpi = p.tpi_s();
    double support = cfg.tint_s + tpi;

    TransferFunction tf;
    tf.support_s = support;

    if (cfg.method == TfMethod::analytic_hann) {
        for (double f = 0.0; f <= cfg.fmax_hz * (1.0 + 1e-12); f += cfg.df_hz) {
            tf.freqs_hz.push_back(f);
            tf.magnitude.push_back(hann_transfer_mag(f, support));
            tf.model_reference.push_back(tf.magnitude.back());
        }
        return tf;
    }

    // sim_impulse: sweep a narrow Gaussian field impulse through the backend
    if (cfg.impulse_sigma_s >= cfg.tint_s / 4.0)
        throw std::invalid_argument("impulse width must be < tint/4");

    const double sigma = cfg.impulse_sigma_s;
    const double amp = 1e-6;       // small enough for a strictly linear response
    const double tau0 = 400e-9;    // impulse position within the passage
    const double trep = 1000e-9;
    const double ts = 1e-9;
    const std::size_t n = 512;

    Waveform impulse = Waveform::from_function("gaussian_impulse", [=](double t) {
        double u = (t - tau0) / sigma;
        return amp * std::exp(-0.5 * u * u);
    });
    TriggeredSignal sig(impulse, trep);

    SweepConfig sweep;
    sweep.protocol = Protocol::differential_echo;
    // place the response support (t in [tau0 - support, tau0]) well inside the
    // swept range so the FFT sees the whole impulse plus zero padding
    sweep.t_start_s = tau0 - 248e-9;
    sweep.t_stop_s = sweep.t_start_s + static_cast<double>(n - 1) * ts;
    sweep.ts_s = ts;
    sweep.tint_s = cfg.tint_s;
    sweep.k = 1;
    sweep.trep_s = trep;
    sweep.noiseless = true;
    sweep.backend = cfg.backend;
    sweep.inversion = FieldInversion::linear;
    sweep.quadrature_step_s = std::min(0.25e-9, sigma / 8.0);
    sweep.bloch_dt_s = std::min(0.25e-9, sigma / 8.0);
    SweepResult rec = run_sweep(sweep, sig, p);

    std::vector<double> resp(n);
    for (std::size_t i = 0; i < n; ++i) resp[i] = rec.points[i].b_est_t;
    auto spec = rfft(resp);

    double dc = std::abs(spec[0]);
    if (dc <= 0.0) throw std::runtime_error("impulse response has zero DC component");
    for (std::size_t m = 0; m < spec.size(); ++m) {
        double f = static_cast<double>(m) / (static_cast<double>(n) * ts);
        if (f > cfg.fmax_hz) break;
        // divide out the finite impulse's own spectrum
        double gauss = std::exp(-2.0 * (kPi * f * sigma) * (kPi * f * sigma));
        tf.freqs_hz.push_back(f);
        tf.magnitude.push_back(std::abs(spec[m]) / dc / gauss);
        tf.model_reference.push_back(hann_transfer_mag(f, support));
    }
    return tf;
}

double minus3db_frequency_hz(const TransferFunction& tf) {
    const double target = 1.0 / std::numbers::sqrt2;
    for (std::size_t i = 0; i + 1 < tf.magnitude.size(); ++i) {
        if (tf.magnitude[i] >= target && tf.magnitude[i + 1] < target) {
            double frac = (tf.magnitude[i] - target) / (tf.magnitude[i] - tf.magnitude[i + 1]);
            return tf.freqs_hz[i] + frac * (tf.freqs_hz[i + 1] - tf.freqs_hz[i]);
        }
    }
    throw std::runtime_error("-3 dB point not inside the evaluated band");
}

// --- sensitivity -----------------------------------------------------------------

double bmin_eq6(const SensorParams& p, double tint_s, double tw_s, double k) {
    if (tint_s <= 0.0 || tw_s <= 0.0 || k <= 0.0)
        throw std::invalid_argument("bmin_eq6 needs positive parameters");
    double span = 2.0 * k * tw_s;
    return std::sqrt(p.tm_s + span) * std::exp(span / p.t2_s) /
           (2.0 * p.gamma_rad_per_s_per_t * k * p.readout_c * tint_s);
}

SensitivityCurve bmin_curve(const SensorParams& p, double tint_s, double tw_s,
                            const std::vector<double>& k_values) {
    p.validate();
    SensitivityCurve c;
    for (double k : k_values) {
        double den = 2.0 * p.gamma_rad_per_s_per_t * k * p.readout_c * tint_s;
        double span = 2.0 * k * tw_s;
        c.k.push_back(k);
        c.bmin.push_back(bmin_eq6(p, tint_s, tw_s, k));
        c.branch_k1.push_back(std::sqrt(p.tm_s) / den);
        c.branch_khalf.push_back(std::sqrt(span) / den);
        c.branch_decoh.push_back(std::sqrt(span) * std::exp(span / p.t2_s) / den);
    }
    return c;
}

void SensitivityCurve::write_csv(std::ostream& out) const {
    out << "k,bmin_t_per_sqrthz,branch_k1,branch_khalf,branch_decoh\n";
    for (std::size_t i = 0; i < k.size(); ++i)
        write_csv_line(out, {k[i], bmin[i], branch_k1[i], branch_khalf[i], branch_decoh[i]});
}

// --- k scaling -------------------------------------------------------------------

std::vector<KScalingPoint> peak_signal_vs_k(const TriggeredSignal& sig, const SensorParams& p,
                                            const std::vector<int>& k_values,
                                            const SweepConfig& base) {
    std::vector<KScalingPoint> out;
    for (int k : k_values) {
        SweepConfig cfg = base;
        cfg.k = k;
        cfg.noiseless = true;
        SweepResult rec = run_sweep(cfg, sig, p);
        double dp = 0.0;
        for (const auto& pt : rec.points) dp = std::max(dp, std::abs(pt.p_mean - 0.5));
        double span = 2.0 * k * cfg.trep_s;
        double corrected = std::clamp(2.0 * dp * std::exp(span / p.t2_s), -1.0, 1.0);
        out.push_back({static_cast<double>(k), dp, std::asin(corrected)});
    }
    return out;
}

// --- power spectrum ----------------------------------------------------------------

PowerSpectrum power_spectrum(std::span<const double> values, double dt_s,
                             SpectralWindow window) {
    if (values.size() < 2) throw std::invalid_argument("spectrum needs >= 2 samples");
    if (dt_s <= 0.0) throw std::invalid_argument("dt must be positive");
    std::size_t n = values.size();

    std::vector<double> x(values.begin(), values.end());
    if (window == SpectralWindow::hann) {
        for (std::size_t i = 0; i < n; ++i)
            x[i] *= 0.5 * (1.0 - std::cos(2.0 * kPi * static_cast<double>(i) /
                                          static_cast<double>(n - 1)));
    }

    double ms = 0.0;
    for (double v : x) ms += v * v;
    ms /= static_cast<double>(n);

    auto spec = rfft(x);
    PowerSpectrum ps;
    ps.mean_square = ms;
    double nn = static_cast<double>(n) * static_cast<double>(n);
    for (std::size_t m = 0; m < spec.size(); ++m) {
        double pw = std::norm(spec[m]) / nn;
        bool interior = m > 0 && !(n % 2 == 0 && m == n / 2);
        if (interior) pw *= 2.0;  // fold the negative frequencies
        ps.freq_hz.push_back(static_cast<double>(m) / (static_cast<double>(n) * dt_s));
        ps.power_prenorm.push_back(pw);
        ps.total_power_prenorm += pw;
    }
    double peak = *std::max_element(ps.power_prenorm.begin(), ps.power_prenorm.end());
    ps.power.resize(ps.power_prenorm.size(), 0.0);
    if (peak > 0.0)
        for (std::size_t m = 0; m < ps.power.size(); ++m)
            ps.power[m] = ps.power_prenorm[m] / peak;
    return ps;
}

PowerSpectrum power_spectrum(const SweepResult& rec, SpectralWindow window) {
    auto n = rec.points.size();
    if (n < 2) throw std::invalid_argument("spectrum needs >= 2 samples");
    double ts = rec.points[1].t_s - rec.points[0].t_s;
    for (std::size_t i = 1; i < n; ++i) {
        double d = rec.points[i].t_s - rec.points[i - 1].t_s;
        if (std::abs(d - ts) > 1e-6 * ts)
            throw std::invalid_argument("spectrum requires a uniform t grid");
    }
    std::vector<double> vals(n);
    for (std::size_t i = 0; i < n; ++i) vals[i] = rec.points[i].b_est_t;
    return power_spectrum(vals, ts, window);
}

// --- inverse filter ---------------------------------------------------------------

SweepResult inverse_filter(const SweepResult& rec, const TransferFunction& tf,
                           double regularization) {
    if (regularization <= 0.0) throw std::invalid_argument("regularization must be positive");
    auto n = rec.points.size();
    if (n < 2) throw std::invalid_argument("record too short");
    double ts = rec.points[1].t_s - rec.points[0].t_s;

    std::vector<double> vals(n);
    for (std::size_t i = 0; i < n; ++i) vals[i] = rec.points[i].b_est_t;
    auto spec = rfft(vals);

    auto mag_at = [&](double f) {
        if (tf.freqs_hz.empty()) return 1.0;
        if (f <= tf.freqs_hz.front()) return tf.magnitude.front();
        if (f >= tf.freqs_hz.back()) return tf.magnitude.back();
        auto it = std::lower_bound(tf.freqs_hz.begin(), tf.freqs_hz.end(), f);
        auto j = static_cast<std::size_t>(it - tf.freqs_hz.begin());
        double f0 = tf.freqs_hz[j - 1], f1 = tf.freqs_hz[j];
        double w = (f - f0) / (f1 - f0);
        return tf.magnitude[j - 1] * (1.0 - w) + tf.magnitude[j] * w;
    };

    for (std::size_t m = 0; m < spec.size(); ++m) {
        double f = static_cast<double>(m) / (static_cast<double>(n) * ts);
        double mag = mag_at(f);
        // record response centroid sits support/2 after the reported timestamp
        std::complex<double> G =
            mag * std::exp(std::complex<double>(0.0, kPi * f * tf.support_s));
        spec[m] = spec[m] * std::conj(G) / (std::norm(G) + regularization);
    }
    auto comp = irfft(std::move(spec), n);

    SweepResult out = rec;
    for (std::size_t i = 0; i < n; ++i) {
        out.points[i].b_est_t = comp[i];
        out.points[i].b_sem_t = std::numeric_limits<double>::quiet_NaN();
    }
    out.metadata["inverse_filter"] = {{"regularization", regularization},
                                      {"kernel_support_s", tf.support_s}};
    return out;
}

// --- baseline noise ----------------------------------------------------------------

double baseline_noise_rms(const SweepResult& rec,
                          const std::vector<std::pair<double, double>>& masks_s,
                          std::size_t min_points) {
    double acc = 0.0;
    std::size_t count = 0;
    for (const auto& pt : rec.points) {
        for (const auto& [a, b] : masks_s) {
            if (pt.t_s >= a - 1e-15 && pt.t_s <= b + 1e-15) {
                acc += pt.b_est_t * pt.b_est_t;
                ++count;
                break;
            }
        }
    }
    if (count < min_points)
        throw std::invalid_argument("baseline mask too small: " + std::to_string(count) +
                                    " points, need >= " + std::to_string(min_points));
    return std::sqrt(acc / static_cast<double>(count));
}

}  // namespace qscope
