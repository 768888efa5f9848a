#include "ebench/correlation.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "ebench/csv.hpp"
#include "ebench/error.hpp"

namespace ebench::eval {

namespace {

void check_pair(const char* name, std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ValidationError(std::string(name) + ": length mismatch (" + std::to_string(a.size()) +
                          " vs " + std::to_string(b.size()) + ")");
  }
  if (a.size() < 2) throw ValidationError(std::string(name) + ": needs at least 2 samples");
}

bool constant(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(), [&](double x) { return x == xs.front(); });
}

double pearson(std::span<const double> a, std::span<const double> b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

// Number of tied pairs within runs of equal values in a sorted sequence.
template <typename It, typename Eq>
std::uint64_t tied_pairs(It first, It last, Eq eq) {
  std::uint64_t total = 0;
  while (first != last) {
    auto run_end = std::find_if_not(first, last, [&](const auto& v) { return eq(*first, v); });
    const auto t = static_cast<std::uint64_t>(std::distance(first, run_end));
    total += t * (t - 1) / 2;
    first = run_end;
  }
  return total;
}

// Merge sort that returns the number of strict inversions.
std::uint64_t sort_count_swaps(std::vector<double>& v, std::vector<double>& buf, std::size_t lo,
                               std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::uint64_t swaps = sort_count_swaps(v, buf, lo, mid) + sort_count_swaps(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += mid - i;
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + lo, buf.begin() + hi, v.begin() + lo);
  return swaps;
}

}  // namespace

std::vector<double> average_ranks(std::span<const double> xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
    i = j + 1;
  }
  return ranks;
}

double srocc(std::span<const double> pred, std::span<const double> gt) {
  check_pair("srocc", pred, gt);
  if (constant(pred) || constant(gt)) throw ValidationError("srocc: undefined for constant input");
  const auto rp = average_ranks(pred);
  const auto rg = average_ranks(gt);
  return pearson(rp, rg);
}

double plcc(std::span<const double> pred, std::span<const double> gt) {
  check_pair("plcc", pred, gt);
  if (constant(pred) || constant(gt)) throw ValidationError("plcc: undefined for constant input");
  return pearson(pred, gt);
}

double krcc(std::span<const double> pred, std::span<const double> gt) {
  check_pair("krcc", pred, gt);
  if (constant(pred) || constant(gt)) throw ValidationError("krcc: undefined for constant input");
  const std::size_t n = pred.size();
  std::vector<std::pair<double, double>> xy(n);
  for (std::size_t i = 0; i < n; ++i) xy[i] = {pred[i], gt[i]};
  std::sort(xy.begin(), xy.end());

  const std::uint64_t n0 = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  const std::uint64_t n1 =
      tied_pairs(xy.begin(), xy.end(), [](const auto& a, const auto& b) { return a.first == b.first; });
  const std::uint64_t n3 = tied_pairs(xy.begin(), xy.end(), [](const auto& a, const auto& b) {
    return a.first == b.first && a.second == b.second;
  });

  std::vector<double> ys(n), buf(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = xy[i].second;
  const std::uint64_t swaps = sort_count_swaps(ys, buf, 0, n);
  const std::uint64_t n2 = tied_pairs(ys.begin(), ys.end(), [](double a, double b) { return a == b; });

  const double concordant_minus_discordant = static_cast<double>(n0) - static_cast<double>(n1) -
                                             static_cast<double>(n2) + static_cast<double>(n3) -
                                             2.0 * static_cast<double>(swaps);
  const double denom = std::sqrt(static_cast<double>(n0 - n1) * static_cast<double>(n0 - n2));
  return std::clamp(concordant_minus_discordant / denom, -1.0, 1.0);
}

double rmse(std::span<const double> pred, std::span<const double> gt) {
  if (pred.size() != gt.size() || pred.empty()) {
    throw ValidationError("rmse: inputs must be non-empty and of equal length");
  }
  double acc = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) acc += (pred[i] - gt[i]) * (pred[i] - gt[i]);
  return std::sqrt(acc / static_cast<double>(pred.size()));
}

double Poly4Fit::evaluate(double x) const {
  const double u = (x - centre) / scale;
  double acc = 0;
  for (int p = 4; p >= 0; --p) acc = acc * u + standardized[p];
  return acc;
}

Poly4Fit poly4_fit(std::span<const double> pred, std::span<const double> gt) {
  if (pred.size() != gt.size()) throw ValidationError("poly4_fit: length mismatch");
  if (pred.size() < 5) {
    throw ValidationError("poly4_fit: needs at least 5 points, got " + std::to_string(pred.size()));
  }
  const std::set<double> distinct(pred.begin(), pred.end());
  if (distinct.size() < 5) {
    throw ValidationError("poly4_fit: design matrix is singular (" +
                          std::to_string(distinct.size()) + " distinct prediction values)");
  }
  const std::size_t n = pred.size();
  Poly4Fit fit;
  fit.centre = std::accumulate(pred.begin(), pred.end(), 0.0) / static_cast<double>(n);
  double var = 0;
  for (double x : pred) var += (x - fit.centre) * (x - fit.centre);
  fit.scale = std::sqrt(var / static_cast<double>(n));

  Eigen::MatrixXd design(n, 5);
  Eigen::VectorXd target(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = (pred[i] - fit.centre) / fit.scale;
    double pw = 1;
    for (int p = 0; p < 5; ++p, pw *= u) design(static_cast<Eigen::Index>(i), p) = pw;
    target(static_cast<Eigen::Index>(i)) = gt[i];
  }
  // Unit-variance column scaling; the constant column keeps unit scale.
  Eigen::VectorXd col_scale(5);
  col_scale(0) = 1.0;
  for (int p = 1; p < 5; ++p) {
    const auto col = design.col(p);
    const double m = col.mean();
    const double sd = std::sqrt((col.array() - m).square().mean());
    col_scale(p) = sd > 0 ? sd : 1.0;
  }
  const Eigen::MatrixXd scaled = design * col_scale.cwiseInverse().asDiagonal();
  const Eigen::MatrixXd normal = scaled.transpose() * scaled;
  const Eigen::VectorXd rhs = scaled.transpose() * target;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw ValidationError("poly4_fit: normal equations are singular");
  }
  const Eigen::VectorXd beta = ldlt.solve(rhs).cwiseQuotient(col_scale);
  for (int p = 0; p < 5; ++p) fit.standardized[p] = beta(p);

  // Expand sum_p b_p ((x - c)/s)^p into the raw monomial basis.
  static constexpr double binom[5][5] = {
      {1, 0, 0, 0, 0}, {1, 1, 0, 0, 0}, {1, 2, 1, 0, 0}, {1, 3, 3, 1, 0}, {1, 4, 6, 4, 1}};
  fit.coefficients.fill(0);
  for (int p = 0; p < 5; ++p) {
    const double bp = beta(p) / std::pow(fit.scale, p);
    for (int j = 0; j <= p; ++j) {
      fit.coefficients[j] += bp * binom[p][j] * std::pow(-fit.centre, p - j);
    }
  }
  fit.fitted.reserve(n);
  for (double x : pred) fit.fitted.push_back(fit.evaluate(x));
  return fit;
}

nlohmann::json CorrelationReport::to_json() const {
  nlohmann::json j{{"n", n}, {"srocc", srocc}, {"plcc", plcc}, {"krcc", krcc}, {"rmse", rmse}};
  j["fitted_plcc"] = fitted_plcc ? nlohmann::json(*fitted_plcc) : nlohmann::json(nullptr);
  j["fitted_rmse"] = fitted_rmse ? nlohmann::json(*fitted_rmse) : nlohmann::json(nullptr);
  j["fit_coefficients"] =
      fit_coefficients ? nlohmann::json(*fit_coefficients) : nlohmann::json(nullptr);
  return j;
}

CorrelationReport correlate(std::span<const double> pred, std::span<const double> gt) {
  CorrelationReport r;
  r.n = pred.size();
  r.srocc = srocc(pred, gt);
  r.plcc = plcc(pred, gt);
  r.krcc = krcc(pred, gt);
  r.rmse = rmse(pred, gt);
  if (pred.size() >= 5) {
    try {
      const auto fit = poly4_fit(pred, gt);
      r.fitted_rmse = rmse(fit.fitted, gt);
      r.fitted_plcc = constant(fit.fitted) ? 0.0 : pearson(fit.fitted, gt);
      r.fit_coefficients = fit.coefficients;
    } catch (const ValidationError&) {
      // Too few distinct predictions for a quartic; fitted fields stay empty.
    }
  }
  return r;
}

AlignedScores align(const std::map<std::string, double>& predictions, const mos::MosTable& mos) {
  std::vector<std::string> no_mos, no_pred;
  for (const auto& [id, _] : predictions)
    if (!mos.entries.count(id)) no_mos.push_back(id);
  for (const auto& [id, _] : mos.entries)
    if (!predictions.count(id)) no_pred.push_back(id);
  if (!no_mos.empty() || !no_pred.empty()) {
    std::string msg = "prediction and MOS key sets differ;";
    if (!no_pred.empty()) {
      msg += " missing predictions:";
      for (const auto& id : no_pred) msg += " " + id;
      msg += ";";
    }
    if (!no_mos.empty()) {
      msg += " missing MOS:";
      for (const auto& id : no_mos) msg += " " + id;
    }
    throw ValidationError(msg);
  }
  AlignedScores out;
  for (const auto& [id, p] : predictions) {
    out.ids.push_back(id);
    out.pred.push_back(p);
    out.gt.push_back(mos.entries.at(id).mos);
  }
  return out;
}

CorrelationReport correlate_report(const std::map<std::string, double>& predictions,
                                   const mos::MosTable& mos) {
  const auto a = align(predictions, mos);
  return correlate(a.pred, a.gt);
}

std::map<std::string, double> read_predictions_csv(const std::filesystem::path& path) {
  const auto table = csv::read_file(path);
  const auto c_id = table.column("triplet_id");
  const auto c_score = table.column("score");
  std::map<std::string, double> out;
  for (const auto& row : table.rows) {
    const auto where = path.string() + " line " + std::to_string(row.line);
    double v;
    try {
      v = std::stod(row.fields[c_score]);
    } catch (const std::exception&) {
      throw ValidationError(where + ": score is not a number");
    }
    if (!std::isfinite(v)) throw ValidationError(where + ": score is not finite");
    if (!out.emplace(row.fields[c_id], v).second) {
      throw ValidationError(where + ": duplicate triplet_id '" + row.fields[c_id] + "'");
    }
  }
  return out;
}

void write_predictions_csv(const std::filesystem::path& path,
                           const std::map<std::string, double>& predictions) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  csv::write_row(out, {"triplet_id", "score"});
  for (const auto& [id, v] : predictions) csv::write_row(out, {id, csv::format_double(v)});
}

void write_scatter_csv(const std::filesystem::path& path, const AlignedScores& scores,
                       const std::optional<Poly4Fit>& fit) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  csv::write_row(out, {"triplet_id", "pred", "gt", "fitted"});
  for (std::size_t i = 0; i < scores.ids.size(); ++i) {
    csv::write_row(out, {scores.ids[i], csv::format_double(scores.pred[i]),
                         csv::format_double(scores.gt[i]),
                         fit ? csv::format_double(fit->fitted[i]) : std::string()});
  }
}

}  // namespace ebench::eval
