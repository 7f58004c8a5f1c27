#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qscope {

/// Error raised while parsing a waveform expression. `position` is the byte
/// offset into the source string where the error was detected.
struct ParseError : std::runtime_error {
    ParseError(std::size_t pos, const std::string& what)
        : std::runtime_error(what + " (at position " + std::to_string(pos) + ")"),
          position(pos) {}
    std::size_t position;
};

/// Error raised while evaluating an expression (e.g. division by zero).
struct EvalError : std::runtime_error {
    EvalError(double t_s, const std::string& what)
        : std::runtime_error(what + " (at t = " + std::to_string(t_s) + " s)"), t(t_s) {}
    double t;
};

// --- expression mini-language -------------------------------------------------
//
// Grammar (standard precedence, left associative, '^' right associative):
//   expr    := term (('+'|'-') term)*
//   term    := factor (('*'|'/') factor)*
//   factor  := ('-'|'+') factor | power
//   power   := primary ('^' factor)?
//   primary := number | 'pi' | 't' | func '(' expr ')' | '(' expr ')'
// Functions: sin cos exp sqrt abs.  Numbers accept scientific notation.

struct ExprNode;
using ExprPtr = std::shared_ptr<const ExprNode>;

struct ExprNode {
    enum class Kind { number, time_var, pi_const, unary_minus, binary, call };
    Kind kind = Kind::number;
    double value = 0.0;   // number
    char op = 0;          // binary: + - * / ^
    std::string func;     // call: sin cos exp sqrt abs
    ExprPtr lhs, rhs;
};

ExprPtr parse_expression(std::string_view src);            // throws ParseError
double eval_expression(const ExprNode& node, double t_s);  // throws EvalError
std::string print_expression(const ExprNode& node);

/// A scalar magnetic waveform B(t) in tesla, defined for all t >= 0.
/// Immutable after construction; evaluation is pure.
class Waveform {
public:
    enum class Kind { expression, samples, builtin };

    Waveform() : kind_(Kind::builtin), name_("zero"), fn_([](double) { return 0.0; }) {}

    static Waveform zero() { return Waveform(); }
    static Waveform expression(std::string_view src);
    static Waveform samples(double dt_s, std::vector<double> values_t);
    static Waveform builtin(std::string_view name);
    static Waveform from_function(std::string name, std::function<double(double)> fn);
    /// Text file: first line "dt_ns=<float>", then one tesla value per line.
    static Waveform from_file(const std::filesystem::path& path);

    double operator()(double t_s) const;

    Kind kind() const { return kind_; }
    const std::string& describe() const { return name_; }
    double sample_dt_s() const { return dt_s_; }
    const std::vector<double>& sample_values() const { return values_; }

    /// Peak-to-peak value estimated on a uniform grid over [0, duration).
    double peak_to_peak(double duration_s, std::size_t n_grid = 4096) const;

private:
    Kind kind_;
    std::string name_;
    ExprPtr expr_;
    double dt_s_ = 0.0;
    std::vector<double> values_;
    std::function<double(double)> fn_;
};

/// First-order low-pass with time constant tau = rise_10_90 / ln 9, applied by
/// causal convolution on a uniform grid (exact for piecewise-linear input).
/// Filter state starts at zero at t = 0.
Waveform apply_circuit_lowpass(const Waveform& w, double rise_10_90_s,
                               double duration_s, double dt_s = 0.1e-9);

/// A burst of `n_passages` repetitions of the waveform, one per trigger, with
/// trigger period trep.  Field is zero before the first trigger and after the
/// last passage.  n_passages == 0 means "unbounded" (repeats forever for T >= 0).
struct TriggeredSignal {
    Waveform waveform;
    double trep_s = 0.0;
    int n_passages = 0;
    std::optional<double> lowpass_rise_10_90_s;

    TriggeredSignal() = default;
    TriggeredSignal(Waveform w, double trep, int passages = 0,
                    std::optional<double> lowpass = std::nullopt);

    /// Emitted field at global time T (total function; 0 outside the burst).
    double field(double T_s) const;

private:
    Waveform emitted_;  // waveform after the optional circuit low-pass
};

inline double eval_field(const TriggeredSignal& sig, double T_s) { return sig.field(T_s); }

}  // namespace qscope
