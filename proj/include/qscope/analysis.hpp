#pragma once

#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "qscope/acquisition.hpp"

namespace qscope {

struct RiseTimeResult {
    double rise_10_90_s = 0.0;
    double t10_s = 0.0;
    double t90_s = 0.0;
    double model_max_tpi_tint_s = 0.0;  // tau ~ max(tpi, tint)
};

/// 10-90% rise time of a monotone-edge record (linear-interpolated threshold
/// crossings of the B_est column, falling back to p_mean).
RiseTimeResult rise_time_10_90(const SweepResult& step_record);

/// Closed-form magnitude of the Fourier transform of a Hann window of total
/// duration `support_s`, normalized to 1 at DC: |sinc(f L) / (1 - (f L)^2)|.
double hann_transfer_mag(double f_hz, double support_s);

struct TransferFunction {
    std::vector<double> freqs_hz;
    std::vector<double> magnitude;        // normalized, DC = 1
    std::vector<double> model_reference;  // analytic Hann curve on the same grid
    double support_s = 0.0;               // tint + tpi
    void write_csv(std::ostream& out) const;  // f_hz,mag,mag_db,model_mag
};

enum class TfMethod { analytic_hann, sim_impulse };

struct TfConfig {
    TfMethod method = TfMethod::analytic_hann;
    double tint_s = 20e-9;
    double fmax_hz = 60e6;
    double df_hz = 0.25e6;          // analytic grid only
    double impulse_sigma_s = 0.5e-9;  // sim mode: Gaussian impulse width
    Backend backend = Backend::filter;
};

/// analytic_hann: closed form for a Hann window of duration tint + tpi.
/// sim_impulse: sweeps a narrow Gaussian field impulse through the chosen
/// backend, FFTs the recorded response and divides out the impulse spectrum.
TransferFunction transfer_function(const TfConfig& cfg, const SensorParams& p);

/// Interpolated frequency where magnitude first crosses 1/sqrt(2).
double minus3db_frequency_hz(const TransferFunction& tf);

struct SensitivityCurve {
    std::vector<double> k;
    std::vector<double> bmin;          // minimum detectable field, T / sqrt(Hz)
    std::vector<double> branch_k1;     // k^-1 asymptote (k tw << tm)
    std::vector<double> branch_khalf;  // k^-1/2 asymptote (k tw >> tm)
    std::vector<double> branch_decoh;  // decoherence-dominated branch
    void write_csv(std::ostream& out) const;
    // k,bmin_t_per_sqrthz,branch_k1,branch_khalf,branch_decoh
};

/// Minimum detectable field for unity SNR at 1 s integration:
/// Bmin = sqrt(tm + 2k tw) exp(2k tw / T2) / (2 gamma k C tint).
double bmin_eq6(const SensorParams& p, double tint_s, double tw_s, double k);

SensitivityCurve bmin_curve(const SensorParams& p, double tint_s, double tw_s,
                            const std::vector<double>& k_values);

struct KScalingPoint {
    double k = 0.0;
    double dp_max = 0.0;               // peak |p - 1/2|, decoherence included
    double dphi_max_corrected = 0.0;   // arcsin(2 dp e^{2k trep / T2})
};

/// Runs noiseless sweeps per k and extracts the peak response.
std::vector<KScalingPoint> peak_signal_vs_k(const TriggeredSignal& sig, const SensorParams& p,
                                            const std::vector<int>& k_values,
                                            const SweepConfig& base);

enum class SpectralWindow { none, hann };

struct PowerSpectrum {
    std::vector<double> freq_hz;
    std::vector<double> power;          // peak normalized
    std::vector<double> power_prenorm;  // |X|^2 / N^2, one sided
    double total_power_prenorm = 0.0;   // equals the time-domain mean square
    double mean_square = 0.0;
};

PowerSpectrum power_spectrum(std::span<const double> values, double dt_s,
                             SpectralWindow window = SpectralWindow::none);

/// Spectrum of the B_est column; requires a uniform t grid.
PowerSpectrum power_spectrum(const SweepResult& rec,
                             SpectralWindow window = SpectralWindow::none);

/// Frequency-domain deconvolution with Tikhonov regularization
/// G* / (|G|^2 + lambda); the kernel phase comes from the transfer function's
/// support (response centroid at support/2 after the reported timestamp).
SweepResult inverse_filter(const SweepResult& rec, const TransferFunction& tf,
                           double regularization);

/// RMS of B_est over the points whose t falls inside any [t0, t1] mask window.
double baseline_noise_rms(const SweepResult& rec,
                          const std::vector<std::pair<double, double>>& masks_s,
                          std::size_t min_points = 20);

}  // namespace qscope
