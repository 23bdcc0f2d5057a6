#include "knp/dataset.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace knp {

Dataset Dataset::subset(const std::vector<Index>& rows) const {
  Dataset out;
  const auto m = static_cast<Index>(rows.size());
  out.y.resize(y.size() ? m : 0);
  out.v.resize(m);
  out.w.resize(m, w.cols());
  for (Index i = 0; i < m; ++i) {
    const Index r = rows[static_cast<std::size_t>(i)];
    if (y.size()) out.y(i) = y(r);
    out.v(i) = v(r);
    out.w.row(i) = w.row(r);
  }
  out.w_names = w_names;
  return out;
}

Dataset make_dataset(Vector y, Vector v, Matrix w) {
  Dataset d{std::move(y), std::move(v), std::move(w), {}};
  for (Index j = 0; j < d.w.cols(); ++j) d.w_names.push_back("w" + std::to_string(j + 1));
  return d;
}

void validate_for_fit(const Dataset& data) {
  const Index n = data.size();
  if (data.y.size() != n || data.w.rows() != n) throw ValidationError("dataset: y, v and w row counts differ");
  if (n < 10) throw ValidationError("dataset: need at least 10 observations, got " + std::to_string(n));
  if (data.w.cols() < 1) throw ValidationError("dataset: need at least one w column");
  if (!data.v.allFinite() || !data.w.allFinite()) throw ValidationError("dataset: non-finite covariate values");
  Index ones = 0;
  for (Index i = 0; i < n; ++i) {
    if (data.y(i) != 0.0 && data.y(i) != 1.0)
      throw ValidationError("dataset: y must be 0 or 1 (row " + std::to_string(i + 1) + ")");
    ones += data.y(i) == 1.0;
  }
  if (ones == 0 || ones == n) throw ValidationError("dataset: y is constant");
}

Vector Standardization::apply(const Vector& w_raw) const {
  if (w_raw.size() != mean.size()) throw ValidationError("standardization: dimension mismatch");
  return (w_raw - mean).cwiseQuotient(scale);
}

Matrix Standardization::apply_rows(const Matrix& w_raw) const {
  if (w_raw.cols() != mean.size()) throw ValidationError("standardization: dimension mismatch");
  return (w_raw.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
}

Vector Standardization::invert(const Vector& w_std) const { return w_std.cwiseProduct(scale) + mean; }

bool Standardization::any_constant() const {
  for (bool c : constant)
    if (c) return true;
  return false;
}

std::pair<Dataset, Standardization> standardize(const Dataset& data) {
  const Index n = data.size();
  const Index d = data.dim();
  Standardization s;
  s.mean = data.w.colwise().mean().transpose();
  s.scale = Vector::Ones(d);
  s.constant.assign(static_cast<std::size_t>(d), false);
  for (Index j = 0; j < d; ++j) {
    const double ss = (data.w.col(j).array() - s.mean(j)).square().sum();
    const double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    if (sd > 1e-14 * std::max(1.0, std::abs(s.mean(j)))) s.scale(j) = sd;
    else s.constant[static_cast<std::size_t>(j)] = true;
  }
  Dataset out = data;
  out.w = s.apply_rows(data.w);
  return {std::move(out), std::move(s)};
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\"");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\"");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& field, std::size_t line_no, const std::string& column) {
  const std::string t = trim(field);
  double value = 0.0;
  const auto* first = t.data();
  const auto* last = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (t.empty() || ec != std::errc() || ptr != last)
    throw ValidationError("csv line " + std::to_string(line_no) + ": cannot parse '" + t + "' in column " + column);
  return value;
}

}  // namespace

Dataset read_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header = split_line(line);
      break;
    }
  }
  if (header.empty()) throw ValidationError("csv: missing header row");
  for (auto& h : header) h = trim(h);
  if (!header.empty() && header[0].size() >= 3 && header[0].compare(0, 3, "\xEF\xBB\xBF") == 0)
    header[0] = header[0].substr(3);

  int iy = -1, iv = -1;
  std::vector<int> iw;
  std::vector<std::string> w_names;
  for (int c = 0; c < static_cast<int>(header.size()); ++c) {
    if (header[static_cast<std::size_t>(c)] == "y") iy = c;
    else if (header[static_cast<std::size_t>(c)] == "v") iv = c;
    else {
      iw.push_back(c);
      w_names.push_back(header[static_cast<std::size_t>(c)]);
    }
  }
  if (iy < 0) throw ValidationError("csv: missing column 'y'");
  if (iv < 0) throw ValidationError("csv: missing column 'v'");
  if (iw.empty()) throw ValidationError("csv: need at least one w column");

  std::vector<double> ys, vs, ws;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_line(line);
    if (fields.size() != header.size())
      throw ValidationError("csv line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                            " fields, got " + std::to_string(fields.size()));
    const double y = parse_number(fields[static_cast<std::size_t>(iy)], line_no, "y");
    if (y != 0.0 && y != 1.0)
      throw ValidationError("csv line " + std::to_string(line_no) + ": y must be 0 or 1");
    ys.push_back(y);
    vs.push_back(parse_number(fields[static_cast<std::size_t>(iv)], line_no, "v"));
    for (std::size_t k = 0; k < iw.size(); ++k)
      ws.push_back(parse_number(fields[static_cast<std::size_t>(iw[k])], line_no, w_names[k]));
  }

  const auto n = static_cast<Index>(ys.size());
  const auto d = static_cast<Index>(iw.size());
  Dataset out;
  out.y = Eigen::Map<const Vector>(ys.data(), n);
  out.v = Eigen::Map<const Vector>(vs.data(), n);
  out.w = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(ws.data(), n, d);
  out.w_names = std::move(w_names);
  return out;
}

Dataset read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open data file " + path);
  return read_csv(in);
}

void write_csv(std::ostream& out, const Dataset& data) {
  const auto old_prec = out.precision(std::numeric_limits<double>::max_digits10);
  out << "y,v";
  for (Index j = 0; j < data.dim(); ++j)
    out << ',' << (static_cast<std::size_t>(j) < data.w_names.size() ? data.w_names[static_cast<std::size_t>(j)]
                                                                      : "w" + std::to_string(j + 1));
  out << '\n';
  for (Index i = 0; i < data.size(); ++i) {
    out << (data.y.size() ? data.y(i) : 0.0) << ',' << data.v(i);
    for (Index j = 0; j < data.dim(); ++j) out << ',' << data.w(i, j);
    out << '\n';
  }
  out.precision(old_prec);
}

}  // namespace knp
