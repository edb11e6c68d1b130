#include "mixlap/inequalities.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mixlap/operators.hpp"
#include "mixlap/parallel.hpp"

namespace mixlap {

namespace {

double norm2(std::span<const double> a) {
  double s = 0.0;
  for (double x : a) s += x * x;
  return std::sqrt(s);
}

void check_sizes(std::span<const double> a, std::span<const double> b, double p) {
  if (a.size() != b.size() || a.empty()) throw Error("inequality check: vectors must have the same positive length");
  if (!(p >= 2.0)) throw Error("inequality check: p must be >= 2");
}

/// |v|^{e} v, with 0 at v = 0.
std::vector<double> scaled(std::span<const double> v, double e) {
  const double n = norm2(v);
  const double f = n == 0.0 ? (e == 0.0 ? 1.0 : 0.0) : std::pow(n, e);
  std::vector<double> out(v.begin(), v.end());
  for (auto& x : out) x *= f;
  return out;
}

double slack_ge(double lhs, double rhs) { return (lhs - rhs) / std::max(1.0, std::max(std::abs(lhs), std::abs(rhs))); }

}  // namespace

InequalityCheck check_ineq_I(std::span<const double> a, std::span<const double> b, double p, double tol) {
  check_sizes(a, b, p);
  const auto ja = scaled(a, p - 2.0), jb = scaled(b, p - 2.0);
  double lhs = 0.0, d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    lhs += (ja[i] - jb[i]) * (a[i] - b[i]);
    d2 += (a[i] - b[i]) * (a[i] - b[i]);
  }
  const double rhs = std::pow(2.0, 2.0 - p) * std::pow(d2, 0.5 * p);
  return {lhs, rhs, slack_ge(lhs, rhs) >= -tol};
}

InequalityCheck check_ineq_V(std::span<const double> a, std::span<const double> b, double p, double tol) {
  check_sizes(a, b, p);
  const auto ja = scaled(a, p - 2.0), jb = scaled(b, p - 2.0);
  const auto ha = scaled(a, 0.5 * (p - 2.0)), hb = scaled(b, 0.5 * (p - 2.0));
  double lhs = 0.0, d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    lhs += (jb[i] - ja[i]) * (b[i] - a[i]);
    d2 += (hb[i] - ha[i]) * (hb[i] - ha[i]);
  }
  const double rhs = 4.0 / (p * p) * d2;
  return {lhs, rhs, slack_ge(lhs, rhs) >= -tol};
}

InequalityCheck check_ineq_VI(std::span<const double> a, std::span<const double> b, double p, double tol) {
  check_sizes(a, b, p);
  const auto ja = scaled(a, p - 2.0), jb = scaled(b, p - 2.0);
  const auto ha = scaled(a, 0.5 * (p - 2.0)), hb = scaled(b, 0.5 * (p - 2.0));
  double l2 = 0.0, d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    l2 += (jb[i] - ja[i]) * (jb[i] - ja[i]);
    d2 += (hb[i] - ha[i]) * (hb[i] - ha[i]);
  }
  const double e = 0.5 * (p - 2.0);
  const auto pw = [&](double r) { return e == 0.0 ? 1.0 : (r == 0.0 ? 0.0 : std::pow(r, e)); };
  const double lhs = std::sqrt(l2);
  const double rhs = (p - 1.0) * (pw(norm2(b)) + pw(norm2(a))) * std::sqrt(d2);
  return {lhs, rhs, slack_ge(rhs, lhs) >= -tol};
}

PowerTest check_powertest(double a, double b, double c, double d, double p, double gamma) {
  if (!(p >= 2.0)) throw Error("check_powertest: p must be >= 2");
  if (!(gamma >= 1.0)) throw Error("check_powertest: gamma must be >= 1");
  const double f1a = jp(a - c, p), f1b = jp(b - d, p);
  const double f2a = jp(a - b, gamma + 1.0), f2b = jp(c - d, gamma + 1.0);
  const double product = (f1a - f1b) * (f2a - f2b);
  const double e = (gamma - 1.0) / p;
  const auto h = [&](double t) { return t == 0.0 ? 0.0 : std::pow(std::abs(t), e) * t; };
  const double power_term = std::pow(std::abs(h(a - b) - h(c - d)), p);
  const double scale = std::max(1.0, (std::abs(f1a) + std::abs(f1b)) * (std::abs(f2a) + std::abs(f2b)));
  const double ratio = product > 0.0 && power_term > 0.0 ? power_term / product : 0.0;
  return {product, power_term, ratio, scale};
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

void FuzzConfig::validate() const {
  if (samples < 1) throw Error("fuzz config: samples must be >= 1");
  if (!(magnitude_lo > 0.0 && magnitude_hi > magnitude_lo)) throw Error("fuzz config: invalid magnitude range");
  if (p_values.empty()) throw Error("fuzz config: p_values must not be empty");
  for (double p : p_values)
    if (!(p >= 2.0)) throw Error("fuzz config: every p must be >= 2");
  for (double g : gamma_values)
    if (!(g >= 1.0)) throw Error("fuzz config: every gamma must be >= 1");
  if (!(tolerance_rel >= 0.0) || !(product_tolerance >= 0.0)) throw Error("fuzz config: tolerances must be >= 0");
  if (block_size < 1) throw Error("fuzz config: block_size must be >= 1");
}

void to_json(nlohmann::json& j, const FuzzConfig& c) {
  j = nlohmann::json{{"samples", c.samples},
                     {"seed", c.seed},
                     {"magnitude_range", {c.magnitude_lo, c.magnitude_hi}},
                     {"p_values", c.p_values},
                     {"gamma_values", c.gamma_values},
                     {"tolerance_rel", c.tolerance_rel},
                     {"product_tolerance", c.product_tolerance},
                     {"block_size", c.block_size}};
}

void from_json(const nlohmann::json& j, FuzzConfig& c) {
  c = FuzzConfig{};
  if (j.contains("samples")) c.samples = j["samples"].get<std::uint64_t>();
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("magnitude_range")) {
    c.magnitude_lo = j["magnitude_range"].at(0).get<double>();
    c.magnitude_hi = j["magnitude_range"].at(1).get<double>();
  }
  if (j.contains("p_values")) c.p_values = j["p_values"].get<std::vector<double>>();
  if (j.contains("gamma_values")) c.gamma_values = j["gamma_values"].get<std::vector<double>>();
  if (j.contains("tolerance_rel")) c.tolerance_rel = j["tolerance_rel"].get<double>();
  if (j.contains("product_tolerance")) c.product_tolerance = j["product_tolerance"].get<double>();
  if (j.contains("block_size")) c.block_size = j["block_size"].get<std::uint64_t>();
  c.validate();
}

std::uint64_t FuzzReport::total_violations() const {
  std::uint64_t v = 0;
  for (const auto& r : records) v += r.violations;
  return v;
}

namespace {

class Sampler {
 public:
  Sampler(std::uint64_t seed, double lo, double hi) : rng_(seed), log_lo_(std::log(lo)), log_hi_(std::log(hi)) {}

  double magnitude() { return std::exp(std::uniform_real_distribution<double>(log_lo_, log_hi_)(rng_)); }
  double signed_scalar() { return (coin() ? 1.0 : -1.0) * magnitude(); }
  bool coin() { return (rng_() >> 63) != 0; }
  int pick(int n) { return static_cast<int>(rng_() % static_cast<std::uint64_t>(n)); }
  double unit() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }

  std::vector<double> vec(int dim) {
    std::normal_distribution<double> gauss;
    std::vector<double> v(dim);
    double n = 0.0;
    while (n == 0.0) {
      n = 0.0;
      for (auto& x : v) {
        x = gauss(rng_);
        n += x * x;
      }
      n = std::sqrt(n);
    }
    const double m = magnitude();
    for (auto& x : v) x *= m / n;
    return v;
  }

  /// A pair of vectors; roughly one in 32 pairs is a degenerate configuration.
  void pair(int dim, std::vector<double>& a, std::vector<double>& b) {
    a = vec(dim);
    b = vec(dim);
    if (pick(32) != 0) return;
    switch (pick(5)) {
      case 0: b = a; break;
      case 1: std::fill(a.begin(), a.end(), 0.0); break;
      case 2: std::fill(b.begin(), b.end(), 0.0); break;
      case 3:
        for (std::size_t i = 0; i < a.size(); ++i) b[i] = -a[i];
        break;
      default: {
        const double t = (coin() ? 1.0 : -1.0) * unit() * 2.0;
        for (std::size_t i = 0; i < a.size(); ++i) b[i] = t * a[i];
      }
    }
  }

 private:
  std::mt19937_64 rng_;
  double log_lo_, log_hi_;
};

struct BlockResult {
  std::uint64_t samples = 0;
  std::uint64_t violations = 0;
  std::uint64_t degenerate = 0;
  double worst_slack = 0.0;
  double max_ratio = 0.0;
};

template <class Body>
FuzzRecord run_stream(const FuzzConfig& cfg, std::uint64_t stream, Body body) {
  const std::uint64_t blocks = (cfg.samples + cfg.block_size - 1) / cfg.block_size;
  std::vector<BlockResult> res(blocks);
  const std::uint64_t key = splitmix64(cfg.seed ^ splitmix64(stream + 1));
  parallel_for(blocks, [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) {
      Sampler s(splitmix64(key + k), cfg.magnitude_lo, cfg.magnitude_hi);
      const std::uint64_t begin = k * cfg.block_size;
      const std::uint64_t count = std::min<std::uint64_t>(cfg.block_size, cfg.samples - begin);
      for (std::uint64_t i = 0; i < count; ++i) body(s, begin + i, res[k]);
      res[k].samples = count;
    }
  });
  FuzzRecord r;
  for (const auto& b : res) {
    r.samples += b.samples;
    r.violations += b.violations;
    r.degenerate += b.degenerate;
    r.worst_slack = std::min(r.worst_slack, b.worst_slack);
    r.max_ratio = std::max(r.max_ratio, b.max_ratio);
  }
  return r;
}

}  // namespace

FuzzReport run_fuzz(const FuzzConfig& cfg) {
  cfg.validate();
  FuzzReport report;
  report.config = cfg;
  std::uint64_t stream = 0;
  const char* names[3] = {"I", "V", "VI"};
  for (int which = 0; which < 3; ++which) {
    for (double p : cfg.p_values) {
      auto rec = run_stream(cfg, stream++, [&](Sampler& s, std::uint64_t idx, BlockResult& out) {
        std::vector<double> a, b;
        s.pair(1 + static_cast<int>(idx % 3), a, b);
        InequalityCheck c{};
        if (which == 0) c = check_ineq_I(a, b, p, cfg.tolerance_rel);
        if (which == 1) c = check_ineq_V(a, b, p, cfg.tolerance_rel);
        if (which == 2) c = check_ineq_VI(a, b, p, cfg.tolerance_rel);
        const double slack = which == 2 ? slack_ge(c.rhs, c.lhs) : slack_ge(c.lhs, c.rhs);
        out.worst_slack = std::min(out.worst_slack, slack);
        if (!c.ok) ++out.violations;
      });
      rec.inequality = names[which];
      rec.p = p;
      report.records.push_back(rec);
    }
  }
  for (double p : cfg.p_values) {
    for (double g : cfg.gamma_values) {
      auto rec = run_stream(cfg, stream++, [&](Sampler& s, std::uint64_t, BlockResult& out) {
        double v[4];
        for (auto& x : v) x = s.signed_scalar();
        if (s.pick(32) == 0) {
          switch (s.pick(4)) {
            case 0: v[1] = v[0]; break;
            case 1: v[3] = v[2]; break;
            case 2: v[2] = v[0]; break;
            default: v[3] = v[1]; break;
          }
        }
        const auto t = check_powertest(v[0], v[1], v[2], v[3], p, g);
        const double slack = t.product / t.scale;
        out.worst_slack = std::min(out.worst_slack, slack);
        if (slack < -cfg.product_tolerance) ++out.violations;
        if (t.product > 0.0 && t.power_term > 0.0)
          out.max_ratio = std::max(out.max_ratio, t.ratio);
        else
          ++out.degenerate;
      });
      rec.inequality = "powertest";
      rec.p = p;
      rec.gamma = g;
      report.records.push_back(rec);
    }
  }
  return report;
}

nlohmann::json to_json(const FuzzReport& report) {
  nlohmann::json j;
  j["config"] = report.config;
  nlohmann::json by_ineq = nlohmann::json::object();
  for (const auto& r : report.records) {
    auto& e = by_ineq[r.inequality];
    if (e.is_null()) e = {{"inequality", r.inequality}, {"samples", 0}, {"violations", 0}, {"max_ratio_by_params", nlohmann::json::object()}, {"runs", nlohmann::json::array()}};
    e["samples"] = e["samples"].get<std::uint64_t>() + r.samples;
    e["violations"] = e["violations"].get<std::uint64_t>() + r.violations;
    nlohmann::json run = {{"p", r.p},
                          {"samples", r.samples},
                          {"violations", r.violations},
                          {"worst_slack", r.worst_slack},
                          {"degenerate", r.degenerate}};
    if (r.inequality == "powertest") {
      run["gamma"] = r.gamma;
      run["max_ratio"] = r.max_ratio;
      char key[64];
      std::snprintf(key, sizeof key, "p=%g,gamma=%g", r.p, r.gamma);
      e["max_ratio_by_params"][key] = r.max_ratio;
    }
    e["runs"].push_back(run);
  }
  j["inequalities"] = nlohmann::json::array();
  for (const char* name : {"I", "V", "VI", "powertest"})
    if (by_ineq.contains(name)) j["inequalities"].push_back(by_ineq[name]);
  j["total_violations"] = report.total_violations();
  return j;
}

}  // namespace mixlap
