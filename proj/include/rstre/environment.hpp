#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "error.hpp"
#include "graph.hpp"
#include "rng.hpp"

namespace rstre {

struct Uniform01 {};

/// F(t) = c_mu t^alpha on [0, rho]. With complete_tail the same power law is
/// continued up to c_mu^{-1/alpha}, where it reaches mass one.
struct PowerTail {
  double alpha = 1;
  double c_mu = 1;
  double rho = 1;
  bool complete_tail = true;
};

struct Gaussian {
  double mean = 0;
  double variance = 1;
};

struct Bounded {
  double a = 0;
  double b = 1;
};

/// Law of -exp(1/U), U uniform on (0, 1).
struct NegExpInv {};

/// Piecewise-linear inverse CDF through (p, x) knots, p from 0 to 1.
struct TableInverseCdf {
  std::vector<std::pair<double, double>> points;
};

using DisorderLaw = std::variant<Uniform01, PowerTail, Gaussian, Bounded, NegExpInv, TableInverseCdf>;

inline void validate(const DisorderLaw& law) {
  std::visit(
      [](const auto& l) {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, PowerTail>) {
          require(l.alpha > 0 && l.c_mu > 0 && l.rho > 0, ErrorKind::InvalidArgument,
                  "power_tail parameters must be positive");
          require(l.c_mu * std::pow(l.rho, l.alpha) <= 1 + 1e-12, ErrorKind::InvalidArgument,
                  "power_tail needs c_mu * rho^alpha <= 1");
        } else if constexpr (std::is_same_v<T, Gaussian>) {
          require(l.variance > 0, ErrorKind::InvalidArgument, "gaussian variance must be positive");
        } else if constexpr (std::is_same_v<T, Bounded>) {
          require(l.a <= l.b, ErrorKind::InvalidArgument, "bounded law needs a <= b");
        } else if constexpr (std::is_same_v<T, TableInverseCdf>) {
          const auto& pts = l.points;
          require(pts.size() >= 2, ErrorKind::InvalidArgument, "table needs two knots");
          require(pts.front().first == 0 && pts.back().first == 1, ErrorKind::InvalidArgument,
                  "table knots must span p in [0, 1]");
          for (std::size_t i = 1; i < pts.size(); ++i)
            require(pts[i].first > pts[i - 1].first && pts[i].second >= pts[i - 1].second,
                    ErrorKind::InvalidArgument, "table must be monotone");
        }
      },
      law);
}

inline double inverse_cdf(const DisorderLaw& law, double p) {
  require(p >= 0 && p <= 1, ErrorKind::InvalidArgument, "probability outside [0, 1]");
  return std::visit(
      [p](const auto& l) -> double {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, Uniform01>) {
          return p;
        } else if constexpr (std::is_same_v<T, PowerTail>) {
          if (p > l.c_mu * std::pow(l.rho, l.alpha) && !l.complete_tail)
            fail(ErrorKind::UnsupportedRange, "power_tail quantile beyond c_mu rho^alpha");
          return std::pow(p / l.c_mu, 1 / l.alpha);
        } else if constexpr (std::is_same_v<T, Gaussian>) {
          if (p == 0) return -std::numeric_limits<double>::infinity();
          if (p == 1) return std::numeric_limits<double>::infinity();
          return boost::math::quantile(boost::math::normal(l.mean, std::sqrt(l.variance)), p);
        } else if constexpr (std::is_same_v<T, Bounded>) {
          return l.a + p * (l.b - l.a);
        } else if constexpr (std::is_same_v<T, NegExpInv>) {
          // Clamped to the lowest finite double once exp(1/p) overflows.
          if (p <= 0 || 1 / p > 709.0) return std::numeric_limits<double>::lowest();
          return -std::exp(1 / p);
        } else {
          const auto& pts = l.points;
          auto it = std::lower_bound(pts.begin(), pts.end(), p,
                                     [](const auto& k, double q) { return k.first < q; });
          if (it == pts.begin()) return it->second;
          auto lo = it - 1;
          double t = (p - lo->first) / (it->first - lo->first);
          return lo->second + t * (it->second - lo->second);
        }
      },
      law);
}

inline double cdf(const DisorderLaw& law, double x) {
  return std::visit(
      [x](const auto& l) -> double {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, Uniform01>) {
          return std::clamp(x, 0.0, 1.0);
        } else if constexpr (std::is_same_v<T, PowerTail>) {
          if (x <= 0) return 0;
          if (x > l.rho && !l.complete_tail)
            fail(ErrorKind::UnsupportedRange, "power_tail cdf beyond rho");
          return std::min(1.0, l.c_mu * std::pow(x, l.alpha));
        } else if constexpr (std::is_same_v<T, Gaussian>) {
          return boost::math::cdf(boost::math::normal(l.mean, std::sqrt(l.variance)), x);
        } else if constexpr (std::is_same_v<T, Bounded>) {
          if (l.a == l.b) return x >= l.a ? 1.0 : 0.0;
          return std::clamp((x - l.a) / (l.b - l.a), 0.0, 1.0);
        } else if constexpr (std::is_same_v<T, NegExpInv>) {
          if (x >= -std::exp(1.0)) return 1;
          return 1 / std::log(-x);
        } else {
          const auto& pts = l.points;
          if (x < pts.front().second) return 0;
          if (x >= pts.back().second) return 1;
          auto it = std::upper_bound(pts.begin(), pts.end(), x,
                                     [](double q, const auto& k) { return q < k.second; });
          auto lo = it - 1;
          if (it->second == lo->second) return it->first;
          double t = (x - lo->second) / (it->second - lo->second);
          return lo->first + t * (it->first - lo->first);
        }
      },
      law);
}

// ------------------------------------------------------ law text format

/// Parses "uniform01", "power_tail alpha=2 c_mu=1 rho=1", "gaussian mean=0
/// variance=1", "bounded a=0 b=1", "neg_exp_inv"; a leading "law=" is allowed.
inline DisorderLaw parse_law(const std::string& text) {
  std::istringstream in(text);
  std::string name;
  in >> name;
  if (name.rfind("law=", 0) == 0) name = name.substr(4);
  std::vector<std::pair<std::string, double>> params;
  for (std::string tok; in >> tok;) {
    auto eq = tok.find('=');
    require(eq != std::string::npos, ErrorKind::Parse, "law parameter '" + tok + "' lacks '='");
    try {
      params.emplace_back(tok.substr(0, eq), std::stod(tok.substr(eq + 1)));
    } catch (const std::exception&) {
      fail(ErrorKind::Parse, "bad law parameter '" + tok + "'");
    }
  }
  auto get = [&](const std::string& key, double fallback) {
    for (const auto& [k, v] : params)
      if (k == key) return v;
    return fallback;
  };
  auto check_keys = [&](std::initializer_list<const char*> allowed) {
    for (const auto& [k, v] : params) {
      bool ok = false;
      for (auto a : allowed) ok = ok || k == a;
      require(ok, ErrorKind::Parse, "unknown parameter '" + k + "' for law " + name);
    }
  };
  DisorderLaw law;
  if (name == "uniform01") {
    check_keys({});
    law = Uniform01{};
  } else if (name == "power_tail") {
    check_keys({"alpha", "c_mu", "rho", "complete"});
    law = PowerTail{get("alpha", 1), get("c_mu", 1), get("rho", 1), get("complete", 1) != 0};
  } else if (name == "gaussian") {
    check_keys({"mean", "variance"});
    law = Gaussian{get("mean", 0), get("variance", 1)};
  } else if (name == "bounded") {
    check_keys({"a", "b"});
    law = Bounded{get("a", 0), get("b", 1)};
  } else if (name == "neg_exp_inv") {
    check_keys({});
    law = NegExpInv{};
  } else {
    fail(ErrorKind::Parse, "unknown law '" + name + "'");
  }
  validate(law);
  return law;
}

inline std::string format_law(const DisorderLaw& law) {
  std::ostringstream out;
  out.precision(17);
  std::visit(
      [&out](const auto& l) {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, Uniform01>) {
          out << "uniform01";
        } else if constexpr (std::is_same_v<T, PowerTail>) {
          out << "power_tail alpha=" << l.alpha << " c_mu=" << l.c_mu << " rho=" << l.rho;
          if (!l.complete_tail) out << " complete=0";
        } else if constexpr (std::is_same_v<T, Gaussian>) {
          out << "gaussian mean=" << l.mean << " variance=" << l.variance;
        } else if constexpr (std::is_same_v<T, Bounded>) {
          out << "bounded a=" << l.a << " b=" << l.b;
        } else if constexpr (std::is_same_v<T, NegExpInv>) {
          out << "neg_exp_inv";
        } else {
          out << "table";
        }
      },
      law);
  return out.str();
}

// ---------------------------------------------------------- environments

struct Environment {
  std::vector<double> omega;
  std::uint64_t seed = 0;
};

inline constexpr std::uint64_t kEnvironmentLabel = stream_label("environment");

/// Disorder of edge `e` under (law, seed); depends on nothing else.
inline double omega_at(const DisorderLaw& law, std::uint64_t seed, std::uint64_t e) {
  return inverse_cdf(law, keyed_uniform(seed, kEnvironmentLabel, e));
}

inline Environment sample_environment(const DisorderLaw& law, std::size_t edge_count,
                                      std::uint64_t seed) {
  validate(law);
  Environment env{std::vector<double>(edge_count), seed};
  for (std::size_t e = 0; e < edge_count; ++e) env.omega[e] = omega_at(law, seed, e);
  return env;
}

inline Environment sample_environment(const DisorderLaw& law, const MultiGraph& g,
                                      std::uint64_t seed) {
  return sample_environment(law, g.m(), seed);
}

inline double edge_weight(const Environment& env, EdgeId e, double beta) {
  if (beta == 0) return 1;
  return std::exp(-beta * env.omega[e]);
}

/// Graph plus disorder plus inverse temperature; w(e) = exp(-beta omega_e).
class WeightedGraphView {
 public:
  WeightedGraphView() = default;
  WeightedGraphView(std::shared_ptr<const MultiGraph> g, std::vector<double> omega, double beta)
      : graph_(std::move(g)), omega_(std::move(omega)), beta_(beta) {
    require(graph_ != nullptr, ErrorKind::InvalidArgument, "null graph");
    require(omega_.size() == graph_->m(), ErrorKind::InvalidArgument,
            "one disorder value per edge required");
    require(beta >= 0 && std::isfinite(beta), ErrorKind::InvalidArgument, "beta must be >= 0");
    for (double w : omega_)
      require(std::isfinite(w), ErrorKind::InvalidArgument, "disorder values must be finite");
  }
  WeightedGraphView(const MultiGraph& g, std::vector<double> omega, double beta)
      : WeightedGraphView(std::make_shared<const MultiGraph>(g), std::move(omega), beta) {}

  /// Explicit positive weights, encoded as beta = 1 and omega = -log w.
  static WeightedGraphView from_weights(const MultiGraph& g, const std::vector<double>& w) {
    std::vector<double> omega(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
      require(w[i] > 0 && std::isfinite(w[i]), ErrorKind::InvalidArgument,
              "weights must be positive and finite");
      omega[i] = -std::log(w[i]);
    }
    return WeightedGraphView(g, std::move(omega), 1.0);
  }
  static WeightedGraphView from_log_weights(const MultiGraph& g, const std::vector<double>& lw) {
    std::vector<double> omega(lw.size());
    for (std::size_t i = 0; i < lw.size(); ++i) omega[i] = -lw[i];
    return WeightedGraphView(g, std::move(omega), 1.0);
  }
  static WeightedGraphView unweighted(const MultiGraph& g) {
    return WeightedGraphView(g, std::vector<double>(g.m(), 0.0), 0.0);
  }

  const MultiGraph& graph() const { return *graph_; }
  const std::shared_ptr<const MultiGraph>& graph_ptr() const { return graph_; }
  std::size_t n() const { return graph_->n(); }
  std::size_t m() const { return graph_->m(); }
  double beta() const { return beta_; }
  const std::vector<double>& omega() const { return omega_; }
  double omega(EdgeId e) const { return omega_[e]; }
  double log_weight(EdgeId e) const { return beta_ == 0 ? 0.0 : -beta_ * omega_[e]; }
  double weight(EdgeId e) const { return std::exp(log_weight(e)); }

  WeightedGraphView with_beta(double beta) const {
    return WeightedGraphView(graph_, omega_, beta);
  }
  WeightedGraphView with_omega(std::vector<double> omega) const {
    return WeightedGraphView(graph_, std::move(omega), beta_);
  }

  /// Weights divided by the largest one, w'(e) = exp(-beta (omega_e - omega_min)),
  /// together with log of the factor removed. Trees' relative weights are
  /// unchanged by the global rescaling.
  std::pair<std::vector<long double>, long double> scaled_weights() const {
    std::vector<long double> w(m(), 1.0L);
    if (m() == 0 || beta_ == 0) return {w, 0.0L};
    double lo = *std::min_element(omega_.begin(), omega_.end());
    for (std::size_t e = 0; e < m(); ++e)
      w[e] = std::exp(-static_cast<long double>(beta_) * (static_cast<long double>(omega_[e]) - lo));
    return {w, -static_cast<long double>(beta_) * lo};
  }

 private:
  std::shared_ptr<const MultiGraph> graph_;
  std::vector<double> omega_;
  double beta_ = 0;
};

/// Hamiltonian H(T, omega) = sum of disorder over tree edges.
inline double hamiltonian(const std::vector<double>& omega, std::span<const EdgeId> tree) {
  double h = 0;
  for (EdgeId e : tree) h += omega[e];
  return h;
}

struct OpenSubgraph {
  MultiGraph graph;           // all vertices, open edges only
  std::vector<EdgeId> edges;  // new edge id -> original edge id
};

/// Edges with omega_e <= F^{-1}(p), i.e. the p-open edges of the coupling.
inline OpenSubgraph open_subgraph(const MultiGraph& g, const std::vector<double>& omega,
                                  const DisorderLaw& law, double p) {
  double threshold = inverse_cdf(law, p);
  OpenSubgraph out;
  for (EdgeId e = 0; e < g.m(); ++e)
    if (omega[e] <= threshold) out.edges.push_back(e);
  out.graph = edge_subgraph(g, out.edges);
  return out;
}

// ----------------------------------------------------------- concentration

struct WeightStats {
  double xi = 1;      // E[w]
  double sigma2 = 0;  // Var[w]
  double K = 1;       // almost-sure bound on w
};

inline WeightStats weight_stats(const DisorderLaw& law, double beta) {
  require(beta >= 0, ErrorKind::InvalidArgument, "beta must be >= 0");
  return std::visit(
      [beta](const auto& l) -> WeightStats {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, Uniform01>) {
          if (beta == 0) return {1, 0, 1};
          double xi = -std::expm1(-beta) / beta;
          double second = -std::expm1(-2 * beta) / (2 * beta);
          return {xi, std::max(0.0, second - xi * xi), 1};
        } else if constexpr (std::is_same_v<T, PowerTail>) {
          require(l.complete_tail, ErrorKind::Unsupported,
                  "weight_stats needs the completed power_tail law");
          validate(DisorderLaw{l});
          // E[exp(-s X)] = c Gamma(alpha+1) s^-alpha P(alpha, s X_max) for the
          // density c alpha x^(alpha-1) on [0, X_max], X_max = c^(-1/alpha).
          const double xmax = std::pow(l.c_mu, -1 / l.alpha);
          auto laplace = [&](double s) {
            if (s * xmax < 1e-12) return 1.0;
            return std::exp(std::log(l.c_mu) + std::lgamma(l.alpha + 1) - l.alpha * std::log(s)) *
                   boost::math::gamma_p(l.alpha, s * xmax);
          };
          double xi = laplace(beta);
          return {xi, std::max(0.0, laplace(2 * beta) - xi * xi), 1};
        } else if constexpr (std::is_same_v<T, Bounded>) {
          double width = l.b - l.a;
          double K = std::exp(-beta * l.a);
          if (beta == 0 || width == 0) return {K, 0, K};
          auto laplace = [&](double s) { return std::exp(-s * l.a) * -std::expm1(-s * width) / (s * width); };
          double xi = laplace(beta);
          return {xi, std::max(0.0, laplace(2 * beta) - xi * xi), K};
        } else {
          fail(ErrorKind::Unsupported, "weight_stats supports uniform01, power_tail and bounded");
        }
      },
      law);
}

/// Bernstein ratio xi^2 / (2 sigma^2 + 2 K delta xi / 3).
inline double bernstein_ratio(const WeightStats& s, double delta) {
  return s.xi * s.xi / (2 * s.sigma2 + 2 * s.K * delta * s.xi / 3);
}

/// A valid C_B for PowerTail: inf over beta of ratio(beta) * max(beta^alpha, 1),
/// taken on a log grid over [1e-4, 1e8].
inline double power_tail_bernstein_constant(const PowerTail& law, double delta) {
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 1200; ++i) {
    double beta = std::pow(10.0, -4 + 12.0 * i / 1200);
    double r = bernstein_ratio(weight_stats(law, beta), delta);
    best = std::min(best, r * std::max(std::pow(beta, law.alpha), 1.0));
  }
  return best;
}

/// Upper bound on P(|mean of m weights - xi| >= delta xi).
inline double bernstein_tail_bound(std::size_t m, double delta, double beta, const DisorderLaw& law) {
  require(m >= 1, ErrorKind::InvalidArgument, "m must be >= 1");
  require(delta > 0 && delta <= 1, ErrorKind::InvalidArgument, "delta must be in (0, 1]");
  if (std::holds_alternative<Uniform01>(law))
    return std::min(2.0, 2 * std::exp(-delta * delta * static_cast<double>(m) / (9 * std::max(beta, 1.0))));
  if (const auto* pt = std::get_if<PowerTail>(&law)) {
    double cb = power_tail_bernstein_constant(*pt, delta);
    return std::min(2.0, 2 * std::exp(-cb * delta * delta * static_cast<double>(m) /
                                      std::max(std::pow(beta, pt->alpha), 1.0)));
  }
  fail(ErrorKind::Unsupported, "bernstein_tail_bound supports uniform01 and power_tail");
}

/// Paley-Zygmund lower bound P(Z > t E[Z]) >= (1-t)^2 E[Z]^2 / E[Z^2].
inline double paley_zygmund(double t, double mean, double second_moment) {
  require(t >= 0 && t <= 1, ErrorKind::InvalidArgument, "t must be in [0, 1]");
  require(second_moment > 0, ErrorKind::InvalidArgument, "second moment must be positive");
  return (1 - t) * (1 - t) * mean * mean / second_moment;
}

}  // namespace rstre
