#include "knp/model_selection.hpp"

#include <algorithm>
#include <iomanip>
#include <numeric>
#include <optional>
#include <ostream>
#include <tuple>

#include "knp/parallel.hpp"
#include "knp/rng.hpp"

namespace knp {

bool tie_break_less(const TuningTriple& a, const TuningTriple& b) {
  return std::tie(a.m, a.J, a.B) < std::tie(b.m, b.J, b.B);
}

const CvRow* select_best(const std::vector<CvRow>& table, const std::function<bool(const TuningTriple&)>& allowed) {
  // Scores within solver round-off of the minimum count as tied; the tie
  // goes to the smallest (m, J, B).
  double low = std::numeric_limits<double>::infinity();
  for (const auto& row : table)
    if (!row.failed && allowed(row.triple)) low = std::min(low, row.mean);
  const CvRow* best = nullptr;
  for (const auto& row : table) {
    if (row.failed || !allowed(row.triple) || row.mean - low > 1e-10 * std::max(1.0, std::abs(low))) continue;
    if (!best || tie_break_less(row.triple, best->triple)) best = &row;
  }
  return best;
}

std::vector<TuningTriple> CvPlan::default_grid(Index n) {
  std::vector<Index> ms{10, 25, 50, std::min<Index>(100, n)};
  std::sort(ms.begin(), ms.end());
  ms.erase(std::unique(ms.begin(), ms.end()), ms.end());
  std::vector<TuningTriple> grid;
  for (double B : {1.0, 3.0, 10.0, 30.0})
    for (int J : {0, 2, 4, 6})
      for (Index m : ms) grid.push_back({B, J, m});
  return grid;
}

void CvPlan::validate(Index n) const {
  if (folds < 2) throw ValidationError("cv: folds must be at least 2");
  if (static_cast<Index>(folds) > n / 2)
    throw ValidationError("cv: " + std::to_string(folds) + " folds is too many for n = " + std::to_string(n));
  if (grid.empty()) throw ValidationError("cv: empty tuning grid");
  // Training splits hold at least n - ceil(n/k) rows.
  const Index n_train = n - (n + folds - 1) / folds;
  for (const auto& t : grid) {
    FitConfig probe;
    probe.B = t.B;
    probe.J = t.J;
    probe.m = std::min<Index>(t.m, n_train + 1);
    probe.validate(n_train, 1);
    if (t.m < 1) throw ValidationError("cv: m must be positive");
  }
}

std::vector<std::vector<Index>> make_folds(Index n, int k, std::uint64_t seed) {
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index(0));
  Rng rng = substream(seed, "cv-folds");
  // Fisher-Yates with an explicit draw so the result does not depend on the
  // standard library's shuffle implementation.
  for (std::size_t i = perm.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(perm[i - 1], perm[pick(rng)]);
  }
  std::vector<std::vector<Index>> folds(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < perm.size(); ++i) folds[i % static_cast<std::size_t>(k)].push_back(perm[i]);
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

CvResult cross_validate(const Dataset& data, const CvPlan& plan, const FitConfig& base, int threads) {
  validate_for_fit(data);
  plan.validate(data.size());
  const int k = plan.folds;
  CvResult result;
  result.folds = make_folds(data.size(), k, plan.seed);

  std::vector<Dataset> train(static_cast<std::size_t>(k)), test(static_cast<std::size_t>(k));
  std::vector<bool> in_test(static_cast<std::size_t>(data.size()));
  for (int f = 0; f < k; ++f) {
    std::fill(in_test.begin(), in_test.end(), false);
    for (Index i : result.folds[f]) in_test[static_cast<std::size_t>(i)] = true;
    std::vector<Index> rows;
    for (Index i = 0; i < data.size(); ++i)
      if (!in_test[static_cast<std::size_t>(i)]) rows.push_back(i);
    train[f] = data.subset(rows);
    test[f] = data.subset(result.folds[f]);
  }

  // One gram system per fold, shared by every triple.
  std::vector<std::optional<PreparedSample>> prepared(static_cast<std::size_t>(k));
  std::vector<std::string> prep_error(static_cast<std::size_t>(k));
  parallel_for(static_cast<std::size_t>(k), threads, [&](std::size_t f) {
    try {
      FitConfig cfg = base;
      cfg.m = 1;
      prepared[f] = prepare_sample(train[f], cfg);
    } catch (const std::exception& e) {
      prep_error[f] = e.what();
    }
  });

  const std::size_t n_grid = plan.grid.size();
  result.table.resize(n_grid);
  std::vector<double> scores(n_grid * static_cast<std::size_t>(k), std::numeric_limits<double>::infinity());
  std::vector<std::string> notes(scores.size());
  parallel_for(scores.size(), threads, [&](std::size_t idx) {
    const std::size_t t = idx / static_cast<std::size_t>(k);
    const std::size_t f = idx % static_cast<std::size_t>(k);
    if (!prepared[f]) {
      notes[idx] = prep_error[f];
      return;
    }
    FitConfig cfg = base;
    cfg.B = plan.grid[t].B;
    cfg.J = plan.grid[t].J;
    cfg.m = plan.grid[t].m;
    try {
      const KnpModel model = fit_prepared(*prepared[f], cfg);
      const Vector p = predict_p(model, test[f].v, test[f].w);
      scores[idx] = (test[f].y - p).squaredNorm() / static_cast<double>(p.size());
    } catch (const ValidationError& e) {
      notes[idx] = e.what();
    } catch (const NumericalError& e) {
      notes[idx] = e.what();
    }
  });

  for (std::size_t t = 0; t < n_grid; ++t) {
    CvRow& row = result.table[t];
    row.triple = plan.grid[t];
    row.fold_scores.assign(scores.begin() + static_cast<std::ptrdiff_t>(t * k),
                           scores.begin() + static_cast<std::ptrdiff_t>((t + 1) * k));
    double sum = 0.0;
    for (int f = 0; f < k; ++f) {
      const std::size_t idx = t * static_cast<std::size_t>(k) + static_cast<std::size_t>(f);
      if (!std::isfinite(scores[idx])) {
        row.failed = true;
        if (row.note.empty()) row.note = "fold " + std::to_string(f + 1) + ": " + notes[idx];
      }
      sum += scores[idx];
    }
    row.mean = row.failed ? std::numeric_limits<double>::infinity() : sum / k;
  }

  const CvRow* best = select_best(result.table, [](const TuningTriple&) { return true; });
  if (!best) throw NumericalError("cv: every tuning triple failed; first failure: " + result.table.front().note);
  result.best = best->triple;
  result.best_score = best->mean;
  return result;
}

void write_cv_csv(std::ostream& out, const CvResult& result) {
  const auto old_precision = out.precision(std::numeric_limits<double>::max_digits10);
  out << "B,J,m";
  const std::size_t k = result.folds.size();
  for (std::size_t f = 0; f < k; ++f) out << ",fold_" << f + 1;
  out << ",mean,failed\n";
  for (const auto& row : result.table) {
    out << row.triple.B << ',' << row.triple.J << ',' << row.triple.m;
    for (double s : row.fold_scores) out << ',' << s;
    out << ',' << row.mean << ',' << (row.failed ? 1 : 0) << '\n';
  }
  out.precision(old_precision);
}

}  // namespace knp
