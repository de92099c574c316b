#include "bwest/intercept_model.hpp"

#include <array>
#include <cmath>

#include "bwest/error.hpp"

namespace bwest {

namespace {

constexpr std::size_t kMaxColumns = 3;
constexpr double kRankTolerance = 1e-10;

// Least squares for a tall design matrix with at most three columns, by
// Householder QR on the column-equilibrated matrix. Returns the coefficients.
std::array<double, kMaxColumns> solve_least_squares(std::vector<std::array<double, kMaxColumns>> a,
                                                    std::vector<double> b, std::size_t cols) {
  const std::size_t rows = a.size();

  std::array<double, kMaxColumns> scale{};
  for (std::size_t j = 0; j < cols; ++j) {
    double norm = 0.0;
    for (std::size_t i = 0; i < rows; ++i) norm += a[i][j] * a[i][j];
    norm = std::sqrt(norm);
    if (norm == 0.0) throw Error(ErrorCode::RankDeficient, "design matrix has a zero column");
    scale[j] = norm;
    for (std::size_t i = 0; i < rows; ++i) a[i][j] /= norm;
  }

  for (std::size_t k = 0; k < cols; ++k) {
    double norm = 0.0;
    for (std::size_t i = k; i < rows; ++i) norm += a[i][k] * a[i][k];
    norm = std::sqrt(norm);
    if (norm <= kRankTolerance) {
      throw Error(ErrorCode::RankDeficient, "design matrix columns are collinear");
    }
    const double alpha = a[k][k] > 0.0 ? -norm : norm;
    // v = x - alpha * e1, stored in place below the diagonal.
    std::vector<double> v(rows - k);
    for (std::size_t i = k; i < rows; ++i) v[i - k] = a[i][k];
    v[0] -= alpha;
    double vnorm2 = 0.0;
    for (double x : v) vnorm2 += x * x;
    if (vnorm2 == 0.0) continue;

    for (std::size_t j = k; j < cols; ++j) {
      double dot = 0.0;
      for (std::size_t i = k; i < rows; ++i) dot += v[i - k] * a[i][j];
      const double f = 2.0 * dot / vnorm2;
      for (std::size_t i = k; i < rows; ++i) a[i][j] -= f * v[i - k];
    }
    double dot = 0.0;
    for (std::size_t i = k; i < rows; ++i) dot += v[i - k] * b[i];
    const double f = 2.0 * dot / vnorm2;
    for (std::size_t i = k; i < rows; ++i) b[i] -= f * v[i - k];

    if (std::abs(a[k][k]) <= kRankTolerance) {
      throw Error(ErrorCode::RankDeficient, "design matrix columns are collinear");
    }
  }

  std::array<double, kMaxColumns> x{};
  for (std::size_t k = cols; k-- > 0;) {
    double s = b[k];
    for (std::size_t j = k + 1; j < cols; ++j) s -= a[k][j] * x[j];
    x[k] = s / a[k][k];
  }
  for (std::size_t j = 0; j < cols; ++j) x[j] /= scale[j];
  return x;
}

}  // namespace

void PathFeatures::validate() const {
  if (hop_count < 1) throw Error(ErrorCode::InvalidArgument, "hop_count must be >= 1");
  if (!(route_length_km >= 0.0) || !std::isfinite(route_length_km)) {
    throw Error(ErrorCode::InvalidArgument, "route_length_km must be >= 0");
  }
}

InterceptModel fit_intercept_model(std::span<const InterceptObservation> observations,
                                   InterceptFitOptions options) {
  const std::size_t cols = options.affine ? 3 : 2;
  if (observations.size() < cols) {
    throw Error(ErrorCode::InsufficientObservations,
                "need at least " + std::to_string(cols) + " observations, got " +
                    std::to_string(observations.size()));
  }

  std::vector<std::array<double, kMaxColumns>> design;
  std::vector<double> target;
  design.reserve(observations.size());
  target.reserve(observations.size());
  for (const auto& obs : observations) {
    obs.features.validate();
    design.push_back({static_cast<double>(obs.features.hop_count),
                      obs.features.route_length_km, 1.0});
    target.push_back(obs.intercept_s);
  }

  const auto coef = solve_least_squares(design, target, cols);

  InterceptModel model;
  model.alpha_s_per_hop = coef[0];
  model.beta_s_per_km = coef[1];
  model.has_constant = options.affine;
  model.constant_s = options.affine ? coef[2] : 0.0;
  model.n_observations = observations.size();

  double sum_sq = 0.0;
  for (const auto& obs : observations) {
    const double r = obs.intercept_s - predict_intercept(model, obs.features);
    sum_sq += r * r;
  }
  model.residual_rms_s = std::sqrt(sum_sq / static_cast<double>(observations.size()));
  return model;
}

double predict_intercept(const InterceptModel& model, const PathFeatures& features) {
  return model.alpha_s_per_hop * static_cast<double>(features.hop_count) +
         model.beta_s_per_km * features.route_length_km + model.constant_s;
}

BandwidthEstimate estimate_with_model(const SizeDelayPoint& point, const InterceptModel& model,
                                      const PathFeatures& features) {
  return estimate_from_intercept(point, predict_intercept(model, features));
}

}  // namespace bwest
