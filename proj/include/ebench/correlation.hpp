#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ebench/mos.hpp"

namespace ebench::eval {

// Spearman rank correlation; ties get average ranks.
double srocc(std::span<const double> pred, std::span<const double> gt);
// Pearson linear correlation.
double plcc(std::span<const double> pred, std::span<const double> gt);
// Kendall tau-b, O(n log n).
double krcc(std::span<const double> pred, std::span<const double> gt);
double rmse(std::span<const double> pred, std::span<const double> gt);

// Average (1-based) ranks.
std::vector<double> average_ranks(std::span<const double> xs);

// Least-squares degree-4 polynomial mapping pred -> gt.
struct Poly4Fit {
  std::array<double, 5> coefficients{};  // c0 + c1 x + ... + c4 x^4
  std::vector<double> fitted;            // mapped predictions, input order

  double evaluate(double x) const;

  // Internal standardized basis, kept for well-conditioned evaluation.
  double centre = 0;
  double scale = 1;
  std::array<double, 5> standardized{};
};

Poly4Fit poly4_fit(std::span<const double> pred, std::span<const double> gt);

struct CorrelationReport {
  double srocc = 0;
  double plcc = 0;
  double krcc = 0;
  double rmse = 0;
  std::optional<double> fitted_plcc;
  std::optional<double> fitted_rmse;
  std::optional<std::array<double, 5>> fit_coefficients;
  std::size_t n = 0;

  nlohmann::json to_json() const;
};

CorrelationReport correlate(std::span<const double> pred, std::span<const double> gt);

struct AlignedScores {
  std::vector<std::string> ids;
  std::vector<double> pred;
  std::vector<double> gt;
};

// Joins predictions and MOS on triplet id; mismatched key sets raise a
// ValidationError listing the ids missing on either side.
AlignedScores align(const std::map<std::string, double>& predictions, const mos::MosTable& mos);

CorrelationReport correlate_report(const std::map<std::string, double>& predictions,
                                   const mos::MosTable& mos);

// `triplet_id,score`
std::map<std::string, double> read_predictions_csv(const std::filesystem::path& path);
void write_predictions_csv(const std::filesystem::path& path,
                           const std::map<std::string, double>& predictions);

// `triplet_id,pred,gt,fitted` for external scatter plots.
void write_scatter_csv(const std::filesystem::path& path, const AlignedScores& scores,
                       const std::optional<Poly4Fit>& fit);

}  // namespace ebench::eval
