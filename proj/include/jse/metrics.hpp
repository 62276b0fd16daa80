#pragma once

#include <array>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "jse/scene.hpp"

namespace jse {

/// dB values are clipped to +-kDbCap.
inline constexpr double kDbCap = 100.0;

/// 10 log10(num / den) clipped to +-kDbCap; 0 dB when both are zero.
double ratio_db(double num, double den);

/// Components of an estimate: gamma_c c per period and channel plus artifacts.
struct ComponentDecomposition {
  Signal s_e_post, s_l_post, y_post, b_post, s_e_art;
  /// gamma[period][channel] for s_e, s_l, y, b.
  std::vector<std::vector<std::array<double, 4>>> gamma;
  std::vector<Period> periods;
};

/// Joint least-squares projection of each channel of `s_hat` onto
/// {s_e, s_l, y, b}, separately on every period. Zero-energy components are
/// left out of the projection.
ComponentDecomposition decompose(const Signal& s_hat, const Scene& scene);

inline constexpr double kNotEvaluated = std::numeric_limits<double>::quiet_NaN();

struct MetricValues {
  double si_sdr = kNotEvaluated;
  double erle = kNotEvaluated;
  double ser = kNotEvaluated;
  double elr = kNotEvaluated;
  double snr = kNotEvaluated;
  double si_sar = kNotEvaluated;

  static constexpr std::array<const char*, 6> kNames = {"si_sdr", "erle", "ser", "elr", "snr", "si_sar"};
  double& operator[](std::size_t i);
  double operator[](std::size_t i) const;
};

/// The single-channel formulas on one segment. `y` is the raw echo.
MetricValues segment_metrics(std::span<const double> s_e_post, std::span<const double> s_l_post,
                             std::span<const double> y_post, std::span<const double> b_post,
                             std::span<const double> s_e_art, std::span<const double> y);

/// Which metrics are evaluated in a period.
std::array<bool, 6> evaluated_in(PeriodLabel label);

struct PeriodMetrics {
  Period period;
  std::vector<MetricValues> per_channel;
  /// Mean over channels.
  MetricValues mean;
};

struct MetricsReport {
  std::vector<PeriodMetrics> periods;
  /// Segmental mean over the periods where each metric is evaluated.
  MetricValues average;
};

MetricsReport compute_metrics(const ComponentDecomposition& dec, const Scene& scene);
MetricsReport evaluate(const Signal& s_hat, const Scene& scene);

struct MetricRow {
  std::string utterance_id;
  PeriodLabel label = PeriodLabel::noise_only;
  std::size_t channel = 0;
  MetricValues values;
};

std::vector<MetricRow> metric_rows(const std::string& utterance_id, const MetricsReport& report);
/// Columns utterance_id, period_label, channel, si_sdr, erle, ser, elr, snr, si_sar.
/// Metrics not evaluated in a period are left empty.
void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricRow>& rows);

struct MetricSummary {
  double mean = kNotEvaluated;
  double ci95 = kNotEvaluated;  // 1.96 * sample standard deviation / sqrt(count)
  std::size_t count = 0;
};

/// Summary over all evaluated entries of each metric column.
std::array<MetricSummary, 6> summarize(const std::vector<MetricRow>& rows);
void write_metrics_summary(const std::filesystem::path& path, const std::vector<MetricRow>& rows);

}  // namespace jse
