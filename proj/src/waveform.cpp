#include "qscope/waveform.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace qscope {

namespace {

struct Token {
    enum class Type { number, ident, op, lparen, rparen, end };
    Type type = Type::end;
    double value = 0.0;
    std::string text;
    char op = 0;
    std::size_t pos = 0;
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) { advance(); }

    const Token& peek() const { return cur_; }

    Token take() {
        Token t = cur_;
        advance();
        return t;
    }

private:
    void advance() {
        while (i_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[i_]))) ++i_;
        cur_ = Token{};
        cur_.pos = i_;
        if (i_ >= src_.size()) {
            cur_.type = Token::Type::end;
            return;
        }
        char c = src_[i_];
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '.' && i_ + 1 < src_.size() &&
             std::isdigit(static_cast<unsigned char>(src_[i_ + 1])))) {
            std::size_t j = i_;
            while (j < src_.size() && (std::isdigit(static_cast<unsigned char>(src_[j])) || src_[j] == '.'))
                ++j;
            if (j < src_.size() && (src_[j] == 'e' || src_[j] == 'E')) {
                std::size_t k = j + 1;
                if (k < src_.size() && (src_[k] == '+' || src_[k] == '-')) ++k;
                if (k < src_.size() && std::isdigit(static_cast<unsigned char>(src_[k]))) {
                    ++k;
                    while (k < src_.size() && std::isdigit(static_cast<unsigned char>(src_[k]))) ++k;
                    j = k;
                }
            }
            double v = 0.0;
            auto res = std::from_chars(src_.data() + i_, src_.data() + j, v);
            if (res.ec != std::errc{}) throw ParseError(i_, "malformed number");
            cur_.type = Token::Type::number;
            cur_.value = v;
            i_ = j;
            return;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t j = i_;
            while (j < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[j])) || src_[j] == '_'))
                ++j;
            cur_.type = Token::Type::ident;
            cur_.text = std::string(src_.substr(i_, j - i_));
            i_ = j;
            return;
        }
        switch (c) {
            case '+': case '-': case '*': case '/': case '^':
                cur_.type = Token::Type::op;
                cur_.op = c;
                break;
            case '(': cur_.type = Token::Type::lparen; break;
            case ')': cur_.type = Token::Type::rparen; break;
            default:
                throw ParseError(i_, std::string("unexpected character '") + c + "'");
        }
        ++i_;
    }

    std::string_view src_;
    std::size_t i_ = 0;
    Token cur_;
};

ExprPtr make_num(double v) {
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprNode::Kind::number;
    n->value = v;
    return n;
}

ExprPtr make_binary(char op, ExprPtr l, ExprPtr r) {
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprNode::Kind::binary;
    n->op = op;
    n->lhs = std::move(l);
    n->rhs = std::move(r);
    return n;
}

class Parser {
public:
    explicit Parser(std::string_view src) : lex_(src), len_(src.size()) {}

    ExprPtr parse() {
        ExprPtr e = expr();
        if (lex_.peek().type != Token::Type::end)
            throw ParseError(lex_.peek().pos, "unexpected trailing input");
        return e;
    }

private:
    ExprPtr expr() {
        ExprPtr lhs = term();
        while (lex_.peek().type == Token::Type::op &&
               (lex_.peek().op == '+' || lex_.peek().op == '-')) {
            char op = lex_.take().op;
            lhs = make_binary(op, lhs, term());
        }
        return lhs;
    }

    ExprPtr term() {
        ExprPtr lhs = factor();
        while (lex_.peek().type == Token::Type::op &&
               (lex_.peek().op == '*' || lex_.peek().op == '/')) {
            char op = lex_.take().op;
            lhs = make_binary(op, lhs, factor());
        }
        return lhs;
    }

    ExprPtr factor() {
        if (lex_.peek().type == Token::Type::op) {
            char op = lex_.peek().op;
            if (op == '-') {
                lex_.take();
                auto n = std::make_shared<ExprNode>();
                n->kind = ExprNode::Kind::unary_minus;
                n->lhs = factor();
                return n;
            }
            if (op == '+') {
                lex_.take();
                return factor();
            }
        }
        return power();
    }

    ExprPtr power() {
        ExprPtr base = primary();
        if (lex_.peek().type == Token::Type::op && lex_.peek().op == '^') {
            lex_.take();
            return make_binary('^', base, factor());  // right associative
        }
        return base;
    }

    ExprPtr primary() {
        const Token& t = lex_.peek();
        switch (t.type) {
            case Token::Type::number:
                return make_num(lex_.take().value);
            case Token::Type::ident: {
                Token id = lex_.take();
                if (id.text == "t") {
                    auto n = std::make_shared<ExprNode>();
                    n->kind = ExprNode::Kind::time_var;
                    return n;
                }
                if (id.text == "pi") {
                    auto n = std::make_shared<ExprNode>();
                    n->kind = ExprNode::Kind::pi_const;
                    return n;
                }
                if (id.text == "sin" || id.text == "cos" || id.text == "exp" ||
                    id.text == "sqrt" || id.text == "abs") {
                    expect(Token::Type::lparen, "expected '(' after function name");
                    auto n = std::make_shared<ExprNode>();
                    n->kind = ExprNode::Kind::call;
                    n->func = id.text;
                    n->lhs = expr();
                    expect(Token::Type::rparen, "expected ')'");
                    return n;
                }
                throw ParseError(id.pos, "unknown identifier '" + id.text + "'");
            }
            case Token::Type::lparen: {
                lex_.take();
                ExprPtr e = expr();
                expect(Token::Type::rparen, "expected ')'");
                return e;
            }
            case Token::Type::end:
                throw ParseError(len_, "unexpected end of input");
            default:
                throw ParseError(t.pos, "unexpected token");
        }
    }

    void expect(Token::Type type, const char* msg) {
        if (lex_.peek().type != type) {
            std::size_t pos = lex_.peek().type == Token::Type::end ? len_ : lex_.peek().pos;
            throw ParseError(pos, msg);
        }
        lex_.take();
    }

    Lexer lex_;
    std::size_t len_;
};

}  // namespace

ExprPtr parse_expression(std::string_view src) { return Parser(src).parse(); }

double eval_expression(const ExprNode& node, double t_s) {
    switch (node.kind) {
        case ExprNode::Kind::number: return node.value;
        case ExprNode::Kind::time_var: return t_s;
        case ExprNode::Kind::pi_const: return std::numbers::pi;
        case ExprNode::Kind::unary_minus: return -eval_expression(*node.lhs, t_s);
        case ExprNode::Kind::binary: {
            double a = eval_expression(*node.lhs, t_s);
            double b = eval_expression(*node.rhs, t_s);
            switch (node.op) {
                case '+': return a + b;
                case '-': return a - b;
                case '*': return a * b;
                case '/':
                    if (b == 0.0) throw EvalError(t_s, "division by zero");
                    return a / b;
                case '^': return std::pow(a, b);
            }
            throw EvalError(t_s, "bad operator");
        }
        case ExprNode::Kind::call: {
            double a = eval_expression(*node.lhs, t_s);
            if (node.func == "sin") return std::sin(a);
            if (node.func == "cos") return std::cos(a);
            if (node.func == "exp") return std::exp(a);
            if (node.func == "sqrt") return std::sqrt(a);
            if (node.func == "abs") return std::fabs(a);
            throw EvalError(t_s, "bad function");
        }
    }
    throw EvalError(t_s, "bad node");
}

std::string print_expression(const ExprNode& node) {
    switch (node.kind) {
        case ExprNode::Kind::number: {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.17g", node.value);
            return buf;
        }
        case ExprNode::Kind::time_var: return "t";
        case ExprNode::Kind::pi_const: return "pi";
        case ExprNode::Kind::unary_minus:
            return "(-" + print_expression(*node.lhs) + ")";
        case ExprNode::Kind::binary:
            return "(" + print_expression(*node.lhs) + node.op + print_expression(*node.rhs) + ")";
        case ExprNode::Kind::call:
            return node.func + "(" + print_expression(*node.lhs) + ")";
    }
    return "";
}

// --- Waveform ------------------------------------------------------------------

Waveform Waveform::expression(std::string_view src) {
    Waveform w;
    w.kind_ = Kind::expression;
    w.expr_ = parse_expression(src);
    w.name_ = std::string(src);
    w.fn_ = nullptr;
    return w;
}

Waveform Waveform::samples(double dt_s, std::vector<double> values_t) {
    if (dt_s <= 0.0) throw std::invalid_argument("sample spacing must be positive");
    if (values_t.empty()) throw std::invalid_argument("empty sample vector");
    Waveform w;
    w.kind_ = Kind::samples;
    w.name_ = "samples[" + std::to_string(values_t.size()) + "]";
    w.dt_s_ = dt_s;
    w.values_ = std::move(values_t);
    w.fn_ = nullptr;
    return w;
}

Waveform Waveform::from_function(std::string name, std::function<double(double)> fn) {
    Waveform w;
    w.kind_ = Kind::builtin;
    w.name_ = std::move(name);
    w.fn_ = std::move(fn);
    return w;
}

Waveform Waveform::builtin(std::string_view name) {
    // square270: the 270 ns test square pulse (10 uT, starting 50 ns after trigger).
    if (name == "square270") {
        return from_function("square270", [](double t) {
            return (t >= 50e-9 && t < 320e-9) ? 10e-6 : 0.0;
        });
    }
    // sine4MHz: 10 uT sine at 4 MHz.
    if (name == "sine4MHz") return expression("10e-6 * sin(2*pi*4e6*t)");
    // fig4: complex multi-component test waveform, B = 81.87 uT, omega = 2*pi*1 MHz.
    if (name == "fig4") {
        return expression(
            "81.87e-6 * sin(2*pi*1e6*t/2)^2 * "
            "(sin(12*2*pi*1e6*t) * cos(2*pi*1e6*t) * sin(2*pi*1e6*t)^2)");
    }
    if (name == "zero") return zero();
    throw std::invalid_argument("unknown builtin waveform '" + std::string(name) + "'");
}

Waveform Waveform::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open waveform file: " + path.string());
    std::string header;
    if (!std::getline(in, header)) throw std::runtime_error("empty waveform file: " + path.string());
    const std::string key = "dt_ns=";
    if (header.rfind(key, 0) != 0)
        throw std::runtime_error("waveform file must start with 'dt_ns=<float>': " + path.string());
    double dt_ns = std::stod(header.substr(key.size()));
    std::vector<double> values;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        values.push_back(std::stod(line));
    }
    Waveform w = samples(dt_ns * 1e-9, std::move(values));
    w.name_ = "file:" + path.filename().string();
    return w;
}

double Waveform::operator()(double t_s) const {
    switch (kind_) {
        case Kind::expression:
            return eval_expression(*expr_, t_s);
        case Kind::samples: {
            if (t_s < 0.0) return 0.0;
            double x = t_s / dt_s_;
            auto i = static_cast<std::size_t>(x);
            if (i + 1 >= values_.size()) {
                // zero-extended beyond the sampled support
                if (i + 1 == values_.size() && x <= static_cast<double>(i)) return values_.back();
                return 0.0;
            }
            double frac = x - static_cast<double>(i);
            return values_[i] * (1.0 - frac) + values_[i + 1] * frac;
        }
        case Kind::builtin:
            return fn_(t_s);
    }
    return 0.0;
}

double Waveform::peak_to_peak(double duration_s, std::size_t n_grid) const {
    double lo = 0.0, hi = 0.0;
    for (std::size_t i = 0; i < n_grid; ++i) {
        double v = (*this)(duration_s * static_cast<double>(i) / static_cast<double>(n_grid));
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return hi - lo;
}

// --- circuit low-pass ------------------------------------------------------------

Waveform apply_circuit_lowpass(const Waveform& w, double rise_10_90_s,
                               double duration_s, double dt_s) {
    if (rise_10_90_s <= 0.0) throw std::invalid_argument("rise time must be positive");
    if (duration_s <= 0.0) throw std::invalid_argument("duration must be positive");
    double tau = rise_10_90_s / std::log(9.0);
    auto n = static_cast<std::size_t>(std::ceil(duration_s / dt_s)) + 1;
    std::vector<double> y(n);
    double a = dt_s / tau;
    double ea = std::exp(-a);
    // exact step for piecewise-linear input on the grid
    double c_new = 1.0 - (1.0 - ea) / a;
    double c_old = (1.0 - ea) / a - ea;
    y[0] = 0.0;
    double xk = w(0.0);
    for (std::size_t k = 0; k + 1 < n; ++k) {
        double xk1 = w(static_cast<double>(k + 1) * dt_s);
        y[k + 1] = ea * y[k] + c_old * xk + c_new * xk1;
        xk = xk1;
    }
    return Waveform::samples(dt_s, std::move(y));
}

// --- TriggeredSignal --------------------------------------------------------------

TriggeredSignal::TriggeredSignal(Waveform w, double trep, int passages,
                                 std::optional<double> lowpass)
    : waveform(std::move(w)), trep_s(trep), n_passages(passages),
      lowpass_rise_10_90_s(lowpass) {
    if (trep_s <= 0.0) throw std::invalid_argument("trep must be positive");
    if (n_passages < 0) throw std::invalid_argument("n_passages must be >= 0");
    if (lowpass_rise_10_90_s)
        emitted_ = apply_circuit_lowpass(waveform, *lowpass_rise_10_90_s, trep_s);
    else
        emitted_ = waveform;
}

double TriggeredSignal::field(double T_s) const {
    if (T_s < 0.0) return 0.0;
    if (n_passages > 0 && T_s >= static_cast<double>(n_passages) * trep_s) return 0.0;
    double local = std::fmod(T_s, trep_s);
    if (local < 0.0) local += trep_s;
    return emitted_(local);
}

}  // namespace qscope
