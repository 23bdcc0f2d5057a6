#include "knp/effects.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>

#include "knp/parallel.hpp"
#include "knp/rng.hpp"

namespace knp {

Vector ccp_gradient(const KnpModel& model, double v, const Vector& w) {
  if (w.size() != model.dim())
    throw ValidationError("ccp_gradient: point has dimension " + std::to_string(w.size()) + ", model expects " +
                          std::to_string(model.dim()));
  const Vector s = model.standardization.apply(w);
  double g = 0.0;
  Vector dg = Vector::Zero(model.dim());
  for (Index j = 0; j < model.centers.rows(); ++j) {
    const Vector diff = s - model.centers.row(j).transpose();
    const double k = model.kernel.from_sq_dist(diff.squaredNorm());
    g += model.delta(j) * (k - model.kernel_at_w_star(j));
    dg -= model.delta(j) * k * diff;
  }
  const double h2 = model.kernel.bandwidth() * model.kernel.bandwidth();
  const double f = model.dist.density(v + g);
  Vector out(model.dim() + 1);
  out(0) = f;
  out.tail(model.dim()) = f * (dg / h2).cwiseQuotient(model.standardization.scale);
  return out;
}

Index coordinate_index(const Dataset& data, const std::string& name) {
  if (name == "v") return 0;
  for (std::size_t j = 0; j < data.w_names.size(); ++j)
    if (data.w_names[j] == name) return static_cast<Index>(j) + 1;
  throw ValidationError("unknown coordinate '" + name + "'");
}

namespace {

void check_coordinate(const KnpModel& model, Index j) {
  if (j < 0 || j > model.dim())
    throw ValidationError("coordinate index " + std::to_string(j) + " outside [0, " + std::to_string(model.dim()) +
                          "]");
}

void check_data(const KnpModel& model, const Dataset& data) {
  if (data.dim() != model.dim())
    throw ValidationError("data has " + std::to_string(data.dim()) + " w columns, model expects " +
                          std::to_string(model.dim()));
  if (data.size() == 0) throw ValidationError("empty evaluation sample");
}

// Per-row j-th gradient entries.
Vector gradient_column(const KnpModel& model, const Dataset& data, Index j, int threads) {
  Vector out(data.size());
  parallel_for(static_cast<std::size_t>(data.size()), threads, [&](std::size_t i) {
    const Index r = static_cast<Index>(i);
    out(r) = ccp_gradient(model, data.v(r), data.w.row(r).transpose())(j);
  });
  return out;
}

}  // namespace

double ape(const KnpModel& model, const Dataset& data, Index j, int threads) {
  check_coordinate(model, j);
  check_data(model, data);
  return gradient_column(model, data, j, threads).mean();
}

Region Region::complement() const {
  auto inner = contains;
  return Region{"!(" + description + ")", [inner](double v, const Vector& w) { return !inner(v, w); }};
}

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

Region parse_comparison(const std::string& text, const Dataset& data) {
  static const char* ops[] = {"<=", ">=", "==", "!=", "<", ">"};
  for (const char* op : ops) {
    const std::size_t pos = text.find(op);
    if (pos == std::string::npos) continue;
    const std::string lhs = trim(text.substr(0, pos));
    const std::string rhs = trim(text.substr(pos + std::char_traits<char>::length(op)));
    double value = 0.0;
    const auto [end, ec] = std::from_chars(rhs.data(), rhs.data() + rhs.size(), value);
    if (ec != std::errc() || end != rhs.data() + rhs.size() || rhs.empty())
      throw ValidationError("region '" + text + "': right-hand side is not a number");
    Index col = 0;
    try {
      col = coordinate_index(data, lhs);
    } catch (const ValidationError&) {
      throw ValidationError("region '" + text + "' references unknown column '" + lhs + "'");
    }
    const std::string o = op;
    auto cmp = [o, value](double x) {
      if (o == "<=") return x <= value;
      if (o == ">=") return x >= value;
      if (o == "==") return x == value;
      if (o == "!=") return x != value;
      if (o == "<") return x < value;
      return x > value;
    };
    return Region{trim(text), [cmp, col](double v, const Vector& w) { return cmp(col == 0 ? v : w(col - 1)); }};
  }
  throw ValidationError("region '" + text + "': expected a comparison such as w1>0");
}

}  // namespace

Region parse_region(const std::string& expr, const Dataset& data) {
  std::vector<Region> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = expr.find("&&", start);
    parts.push_back(parse_comparison(expr.substr(start, pos == std::string::npos ? std::string::npos : pos - start),
                                     data));
    if (pos == std::string::npos) break;
    start = pos + 2;
  }
  if (parts.size() == 1) return parts.front();
  std::vector<std::function<bool(double, const Vector&)>> tests;
  for (const auto& p : parts) tests.push_back(p.contains);
  return Region{trim(expr), [tests](double v, const Vector& w) {
                  for (const auto& t : tests)
                    if (!t(v, w)) return false;
                  return true;
                }};
}

double region_frequency(const Dataset& data, const Region& S) {
  if (data.size() == 0) throw ValidationError("empty evaluation sample");
  Index hits = 0;
  for (Index i = 0; i < data.size(); ++i)
    if (S.contains(data.v(i), data.w.row(i).transpose())) ++hits;
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

double conditional_ape(const KnpModel& model, const Dataset& data, Index j, const Region& S, int threads) {
  check_coordinate(model, j);
  check_data(model, data);
  std::vector<Index> rows;
  for (Index i = 0; i < data.size(); ++i)
    if (S.contains(data.v(i), data.w.row(i).transpose())) rows.push_back(i);
  if (rows.empty()) throw ValidationError("region '" + S.description + "' contains no observations");
  // Same ratio as (1/n) sum 1{X_i in S} grad_i over (1/n) sum 1{X_i in S}.
  return gradient_column(model, data.subset(rows), j, threads).mean();
}

IntegrationSample uniform_box_sample(const Vector& lo, const Vector& hi, Index count, std::uint64_t seed) {
  if (lo.size() != hi.size() || lo.size() < 2) throw ValidationError("uniform_box_sample: bounds need (v, w) entries");
  if (count < 1) throw ValidationError("uniform_box_sample: count must be positive");
  if (!((hi - lo).array() > 0).all()) throw ValidationError("uniform_box_sample: empty box");
  Rng rng = substream(seed, "integration-box");
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const Index d = lo.size();
  IntegrationSample s;
  s.v.resize(count);
  s.w.resize(count, d - 1);
  for (Index i = 0; i < count; ++i) {
    s.v(i) = lo(0) + (hi(0) - lo(0)) * u01(rng);
    for (Index c = 1; c < d; ++c) s.w(i, c - 1) = lo(c) + (hi(c) - lo(c)) * u01(rng);
  }
  s.density = Vector::Constant(count, 1.0 / (hi - lo).prod());
  return s;
}

WeightedDerivative weighted_avg_derivative(const KnpModel& model, Index j,
                                           const std::function<double(double, const Vector&)>& b,
                                           const IntegrationSample& sample, const Dataset* support) {
  check_coordinate(model, j);
  const Index count = sample.v.size();
  if (count < 2 || sample.w.rows() != count || sample.density.size() != count)
    throw ValidationError("weighted_avg_derivative: inconsistent integration sample");
  if (sample.w.cols() != model.dim()) throw ValidationError("weighted_avg_derivative: dimension mismatch");

  Vector lo, hi;
  if (support) {
    check_data(model, *support);
    lo.resize(model.dim() + 1);
    hi.resize(model.dim() + 1);
    lo(0) = support->v.minCoeff();
    hi(0) = support->v.maxCoeff();
    lo.tail(model.dim()) = support->w.colwise().minCoeff().transpose();
    hi.tail(model.dim()) = support->w.colwise().maxCoeff().transpose();
  }

  WeightedDerivative r;
  Vector terms(count);
  Index outside = 0;
  for (Index i = 0; i < count; ++i) {
    const Vector w = sample.w.row(i).transpose();
    const double weight = b(sample.v(i), w);
    if (!(weight >= 0) || !std::isfinite(weight)) throw ValidationError("weighted_avg_derivative: b must be >= 0");
    if (!(sample.density(i) > 0)) throw ValidationError("weighted_avg_derivative: proposal density must be > 0");
    if (weight == 0.0) {
      terms(i) = 0.0;
      continue;
    }
    ++r.n_used;
    if (support) {
      Vector x(model.dim() + 1);
      x(0) = sample.v(i);
      x.tail(model.dim()) = w;
      if ((x.array() < lo.array()).any() || (x.array() > hi.array()).any()) ++outside;
    }
    terms(i) = weight / sample.density(i) * ccp_gradient(model, sample.v(i), w)(j);
  }
  r.estimate = terms.mean();
  r.std_error = std::sqrt((terms.array() - r.estimate).square().sum() / static_cast<double>(count - 1) /
                          static_cast<double>(count));
  if (outside > 0) {
    r.support_warning = true;
    std::ostringstream msg;
    msg << outside << " of " << r.n_used << " weighted points lie outside the sample's coordinate range";
    r.warning = msg.str();
  }
  return r;
}

}  // namespace knp
