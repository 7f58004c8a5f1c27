#include "qscope/sim_engine.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include "qscope/rng.hpp"

namespace qscope {

namespace {
constexpr double kPi = std::numbers::pi;
}

// --- modulation function --------------------------------------------------------

ModulationFunction::ModulationFunction(std::vector<Segment> segs) : segs_(std::move(segs)) {
    if (!segs_.empty()) {
        begin_ = segs_.front().t0_s;
        end_ = segs_.back().t1_s;
    }
}

double ModulationFunction::operator()(double T_s) const {
    if (segs_.empty() || T_s < begin_ || T_s > end_) return 0.0;
    // segments are few; linear scan keeps this trivially correct
    for (const Segment& s : segs_) {
        if (T_s <= s.t1_s) {
            if (!s.ramp) return s.sign;
            return s.sign * std::cos(kPi * (T_s - s.pulse_start_s) / s.tpi_s);
        }
    }
    return 0.0;
}

void ModulationFunction::dump_csv(std::ostream& out, double dt_s) const {
    out << "T_ns,f\n";
    if (segs_.empty()) return;
    auto n = static_cast<std::size_t>(std::ceil((end_ - begin_) / dt_s));
    char buf[64];
    for (std::size_t i = 0; i <= n; ++i) {
        double T = begin_ + static_cast<double>(i) * dt_s;
        if (T > end_) T = end_;
        std::snprintf(buf, sizeof buf, "%.12g,%.12g\n", T * 1e9, (*this)(T));
        out << buf;
    }
}

ModulationFunction build_modulation(const PulseSequence& seq) {
    std::vector<ModulationFunction::Segment> segs;
    switch (seq.protocol) {
        case Protocol::integrative_ramsey:
            if (seq.t_s > 0.0) segs.push_back({0.0, seq.t_s, false, 1.0, 0.0, 0.0});
            break;
        case Protocol::small_interval_ramsey:
            segs.push_back({seq.t_s, seq.t_s + seq.tint_s, false, 1.0, 0.0, 0.0});
            break;
        case Protocol::differential_echo: {
            double cursor = seq.sense_begin_s;
            double sign = 1.0;
            for (const Pulse& pulse : seq.pulses) {
                if (std::abs(pulse.angle_rad - kPi) > 1e-12) continue;  // pi pulses only
                if (pulse.start_s > cursor)
                    segs.push_back({cursor, pulse.start_s, false, sign, 0.0, 0.0});
                segs.push_back({pulse.start_s, pulse.end_s(), true, sign, pulse.start_s,
                                pulse.duration_s});
                sign = -sign;
                cursor = pulse.end_s();
            }
            if (cursor < seq.sense_end_s)
                segs.push_back({cursor, seq.sense_end_s, false, sign, 0.0, 0.0});
            break;
        }
    }
    return ModulationFunction(std::move(segs));
}

// --- filter backend ---------------------------------------------------------------

double modulation_phase_integral(const PulseSequence& seq, const TriggeredSignal& sig,
                                 const SensorParams& p, double step_s) {
    if (step_s <= 0.0) throw std::invalid_argument("quadrature step must be positive");
    ModulationFunction f = build_modulation(seq);
    double acc = 0.0;
    for (const auto& s : f.segments()) {
        double len = s.t1_s - s.t0_s;
        if (len <= 0.0) continue;
        auto n = static_cast<std::size_t>(std::ceil(len / step_s));
        double h = len / static_cast<double>(n);
        double seg_acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double Tm = s.t0_s + (static_cast<double>(i) + 0.5) * h;
            double fv = s.ramp ? s.sign * std::cos(kPi * (Tm - s.pulse_start_s) / s.tpi_s)
                               : s.sign;
            double b = sig.field(Tm);
            if (!std::isfinite(b))
                throw std::runtime_error("quadrature failure: non-finite field value");
            seg_acc += fv * b;
        }
        acc += seg_acc * h;
    }
    return p.gamma_rad_per_s_per_t * acc;
}

double population_from_phase(double alpha_rad, double readout_phase_rad) {
    return 0.5 * (1.0 + std::cos(alpha_rad - readout_phase_rad));
}

double phase_filter(const PulseSequence& seq, const TriggeredSignal& sig,
                    const SensorParams& p, double step_s) {
    return seq.readout_sign * modulation_phase_integral(seq, sig, p, step_s);
}

// --- Bloch oracle -----------------------------------------------------------------

namespace {

struct TwoLevelState {
    std::complex<double> c0{1.0, 0.0};
    std::complex<double> c1{0.0, 0.0};

    // U = cos(theta/2) I - i sin(theta/2) (n . sigma), exact for constant H over the step
    void rotate(double hx, double hy, double hz, double dt) {
        double mag = std::sqrt(hx * hx + hy * hy + hz * hz);
        if (mag == 0.0) return;
        double theta = mag * dt;
        double nx = hx / mag, ny = hy / mag, nz = hz / mag;
        double c = std::cos(0.5 * theta), s = std::sin(0.5 * theta);
        std::complex<double> u00(c, -s * nz);
        std::complex<double> u01(-s * ny, -s * nx);
        std::complex<double> u10(s * ny, -s * nx);
        std::complex<double> u11(c, s * nz);
        std::complex<double> a = u00 * c0 + u01 * c1;
        std::complex<double> b = u10 * c0 + u11 * c1;
        c0 = a;
        c1 = b;
    }

    double norm2() const { return std::norm(c0) + std::norm(c1); }
};

}  // namespace

SensorOutput bloch_evolve(const PulseSequence& seq, const TriggeredSignal& sig,
                          const SensorParams& p, double dt_s) {
    p.validate();
    double tpi = p.tpi_s();
    if (dt_s > tpi / 50.0)
        throw std::invalid_argument("bloch_evolve: dt must be <= tpi/50");

    double omega = 2.0 * kPi * p.rabi_hz;
    double gamma = p.gamma_rad_per_s_per_t;
    TwoLevelState st;

    // intervals: each pulse plus the free gaps between them
    struct Interval {
        double a, b;
        bool driven;
        double phase;
    };
    std::vector<Interval> timeline;
    for (std::size_t i = 0; i < seq.pulses.size(); ++i) {
        const Pulse& pl = seq.pulses[i];
        timeline.push_back({pl.start_s, pl.end_s(), true, pl.phase_rad});
        if (i + 1 < seq.pulses.size()) {
            double gap_a = pl.end_s(), gap_b = seq.pulses[i + 1].start_s;
            if (gap_b > gap_a) timeline.push_back({gap_a, gap_b, false, 0.0});
        }
    }

    std::uint64_t steps_done = 0;
    for (const Interval& iv : timeline) {
        double len = iv.b - iv.a;
        auto n = static_cast<std::size_t>(std::ceil(len / dt_s));
        if (n == 0) continue;
        double h = len / static_cast<double>(n);
        double hx = iv.driven ? omega * std::cos(iv.phase) : 0.0;
        double hy = iv.driven ? omega * std::sin(iv.phase) : 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double Tm = iv.a + (static_cast<double>(i) + 0.5) * h;
            double hz = gamma * sig.field(Tm);
            st.rotate(hx, hy, hz, h);
            if ((++steps_done & 0xfffu) == 0 && std::abs(st.norm2() - 1.0) > 1e-6)
                throw std::runtime_error("bloch_evolve: state norm drift exceeds 1e-6");
        }
    }
    if (std::abs(st.norm2() - 1.0) > 1e-6)
        throw std::runtime_error("bloch_evolve: state norm drift exceeds 1e-6");

    SensorOutput out;
    out.p_ideal = std::norm(st.c1);
    out.p_decohered = out.p_ideal;
    out.p_sampled = out.p_ideal;
    out.sem = 0.0;
    out.phase_rad = std::asin(std::clamp(2.0 * out.p_ideal - 1.0, -1.0, 1.0));
    out.norm_error = std::abs(st.norm2() - 1.0);
    return out;
}

// --- decoherence and readout -------------------------------------------------------

double apply_decoherence(double p_ideal, double span_s, const SensorParams& p) {
    if (span_s < 0.0) throw std::invalid_argument("span must be >= 0");
    return 0.5 + (p_ideal - 0.5) * std::exp(-span_s / p.t2_s);
}

double readout_sigma_p(const ReadoutModel& r) {
    if (r.n_shots < 1.0) throw std::invalid_argument("n_shots must be >= 1");
    return 1.0 / (2.0 * r.readout_c * std::sqrt(r.n_shots));
}

ReadoutSample sample_readout(double p_dec, const ReadoutModel& r,
                             std::uint64_t point_index, std::uint64_t draw_index) {
    double sigma = readout_sigma_p(r);
    CounterRng rng{r.rng_seed};
    double z = rng.gaussian(point_index, draw_index);
    double est = std::clamp(p_dec + sigma * z, 0.0, 1.0);
    return {est, sigma};
}

}  // namespace qscope
