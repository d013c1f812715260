#include "mncastle/kernel.hpp"

#include <cctype>
#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "mncastle/errors.hpp"

namespace mncastle::stochastic {

struct Kernel::Node {
  Kind kind;
  double variance = 0.0;
  double lengthscale = 0.0;
  double period = 0.0;
  std::shared_ptr<const Node> lhs;
  std::shared_ptr<const Node> rhs;
};

namespace {

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw InvalidArgument(std::string("kernel ") + what + " must be positive and finite");
  }
}

double evaluate(const Kernel::Node& n, double t, double u);

std::string format_number(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

std::string render(const Kernel::Node& n, int parent_precedence) {
  switch (n.kind) {
    case Kernel::Kind::Rbf:
      return "rbf(" + format_number(n.variance) + "," + format_number(n.lengthscale) + ")";
    case Kernel::Kind::Periodic:
      return "periodic(" + format_number(n.variance) + "," + format_number(n.lengthscale) + "," +
             format_number(n.period) + ")";
    case Kernel::Kind::Linear:
      return "linear(" + format_number(n.variance) + ")";
    case Kernel::Kind::Matern32:
      return "matern32(" + format_number(n.variance) + "," + format_number(n.lengthscale) + ")";
    case Kernel::Kind::Sum: {
      std::string s = render(*n.lhs, 1) + "+" + render(*n.rhs, 1);
      return parent_precedence > 1 ? "(" + s + ")" : s;
    }
    case Kernel::Kind::Product:
      return render(*n.lhs, 2) + "*" + render(*n.rhs, 2);
  }
  return {};
}

double evaluate(const Kernel::Node& n, double t, double u) {
  const double r = std::abs(t - u);
  switch (n.kind) {
    case Kernel::Kind::Rbf:
      return n.variance * std::exp(-r * r / (2.0 * n.lengthscale * n.lengthscale));
    case Kernel::Kind::Periodic: {
      const double s = std::sin(std::numbers::pi * r / n.period);
      return n.variance * std::exp(-2.0 * s * s / (n.lengthscale * n.lengthscale));
    }
    case Kernel::Kind::Linear:
      return n.variance * t * u;
    case Kernel::Kind::Matern32: {
      const double a = std::sqrt(3.0) * r / n.lengthscale;
      return n.variance * (1.0 + a) * std::exp(-a);
    }
    case Kernel::Kind::Sum:
      return evaluate(*n.lhs, t, u) + evaluate(*n.rhs, t, u);
    case Kernel::Kind::Product:
      return evaluate(*n.lhs, t, u) * evaluate(*n.rhs, t, u);
  }
  return 0.0;
}

double variance_of(const Kernel::Node& n) {
  switch (n.kind) {
    case Kernel::Kind::Sum:
      return variance_of(*n.lhs) + variance_of(*n.rhs);
    case Kernel::Kind::Product:
      return variance_of(*n.lhs) * variance_of(*n.rhs);
    default:
      return n.variance;
  }
}

class Parser {
 public:
  Parser(std::string_view text, std::optional<double> tau) : text_(text), tau_(tau) {}

  Kernel parse() {
    Kernel k = expression();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    return k;
  }

 private:
  Kernel expression() {
    Kernel k = term();
    while (consume('+')) k = k + term();
    return k;
  }

  Kernel term() {
    Kernel k = factor();
    while (consume('*')) k = k * factor();
    return k;
  }

  Kernel factor() {
    if (consume('(')) {
      Kernel k = expression();
      expect(')');
      return k;
    }
    const std::string name = identifier();
    expect('(');
    std::vector<double> args;
    if (!peek(')')) {
      args.push_back(argument());
      while (consume(',')) args.push_back(argument());
    }
    expect(')');
    auto arity = [&](std::size_t n) {
      if (args.size() != n) fail(name + " expects " + std::to_string(n) + " argument(s)");
    };
    if (name == "rbf") {
      arity(2);
      return Kernel::rbf(args[0], args[1]);
    }
    if (name == "periodic") {
      arity(3);
      return Kernel::periodic(args[0], args[1], args[2]);
    }
    if (name == "linear") {
      arity(1);
      return Kernel::linear(args[0]);
    }
    if (name == "matern32") {
      arity(2);
      return Kernel::matern32(args[0], args[1]);
    }
    fail("unknown kernel '" + name + "'");
    return Kernel::linear(1.0);
  }

  double argument() {
    skip_space();
    if (text_.substr(pos_, 5) == "1/tau") {
      pos_ += 5;
      if (!tau_ || !(*tau_ > 0.0)) fail("'1/tau' needs a positive tau");
      return 1.0 / *tau_;
    }
    const std::string rest(text_.substr(pos_));
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(rest, &used);
    } catch (const std::exception&) {
      fail("expected a number");
    }
    pos_ += used;
    return v;
  }

  std::string identifier() {
    skip_space();
    std::string out;
    while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(text_[pos_]))));
      ++pos_;
    }
    if (out.empty()) fail("expected a kernel name");
    return out;
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  bool peek(char c) {
    skip_space();
    return pos_ < text_.size() && text_[pos_] == c;
  }
  bool consume(char c) {
    if (!peek(c)) return false;
    ++pos_;
    return true;
  }
  void expect(char c) {
    if (!consume(c)) fail(std::string("expected '") + c + "'");
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("kernel expression '" + std::string(text_) + "' at offset " + std::to_string(pos_) + ": " + what);
  }

  std::string_view text_;
  std::optional<double> tau_;
  std::size_t pos_ = 0;
};

}  // namespace

Kernel Kernel::rbf(double variance, double lengthscale) {
  require_positive(variance, "variance");
  require_positive(lengthscale, "lengthscale");
  return Kernel(std::make_shared<const Node>(Node{Kind::Rbf, variance, lengthscale, 0.0, nullptr, nullptr}));
}

Kernel Kernel::periodic(double variance, double lengthscale, double period) {
  require_positive(variance, "variance");
  require_positive(lengthscale, "lengthscale");
  require_positive(period, "period");
  return Kernel(std::make_shared<const Node>(Node{Kind::Periodic, variance, lengthscale, period, nullptr, nullptr}));
}

Kernel Kernel::linear(double variance) {
  require_positive(variance, "variance");
  return Kernel(std::make_shared<const Node>(Node{Kind::Linear, variance, 0.0, 0.0, nullptr, nullptr}));
}

Kernel Kernel::matern32(double variance, double lengthscale) {
  require_positive(variance, "variance");
  require_positive(lengthscale, "lengthscale");
  return Kernel(std::make_shared<const Node>(Node{Kind::Matern32, variance, lengthscale, 0.0, nullptr, nullptr}));
}

Kernel operator+(const Kernel& a, const Kernel& b) {
  return Kernel(std::make_shared<const Kernel::Node>(Kernel::Node{Kernel::Kind::Sum, 0, 0, 0, a.node_, b.node_}));
}

Kernel operator*(const Kernel& a, const Kernel& b) {
  return Kernel(
      std::make_shared<const Kernel::Node>(Kernel::Node{Kernel::Kind::Product, 0, 0, 0, a.node_, b.node_}));
}

Kernel::Kind Kernel::kind() const { return node_->kind; }

double Kernel::operator()(double t, double u) const { return evaluate(*node_, t, u); }

Tensor Kernel::gram(std::span<const double> times) const {
  const std::size_t n = times.size();
  Tensor k(Shape{n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      const double v = evaluate(*node_, times[i], times[j]);
      k[i * n + j] = v;
      k[j * n + i] = v;
    }
  return k;
}

std::string Kernel::to_string() const { return render(*node_, 0); }

double Kernel::variance_scale() const { return variance_of(*node_); }

Kernel parse_kernel(std::string_view text, std::optional<double> tau) { return Parser(text, tau).parse(); }

Tensor gp_sample_batched(const Kernel& kernel, std::span<const double> times, std::size_t batch, Rng& rng,
                         double jitter) {
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) throw InvalidArgument("GP sample times must be strictly increasing");
  }
  const std::size_t n = times.size();
  const Tensor l = cholesky_with_retries(kernel.gram(times), jitter, 3);
  Tensor eps(Shape{n, batch});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t i = 0; i < n; ++i) eps[i * batch + b] = rng.normal();
  return transpose_last2(matmul(l, eps));
}

}  // namespace mncastle::stochastic
