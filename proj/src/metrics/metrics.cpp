#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"

#include "jse/metrics.hpp"

namespace jse {

double ratio_db(double num, double den) {
  if (num == 0.0 && den == 0.0) return 0.0;
  if (den == 0.0) return kDbCap;
  if (num == 0.0) return -kDbCap;
  return std::clamp(10.0 * std::log10(num / den), -kDbCap, kDbCap);
}

double& MetricValues::operator[](std::size_t i) {
  switch (i) {
    case 0: return si_sdr;
    case 1: return erle;
    case 2: return ser;
    case 3: return elr;
    case 4: return snr;
    case 5: return si_sar;
  }
  throw InvalidInput("metric index out of range");
}

double MetricValues::operator[](std::size_t i) const { return const_cast<MetricValues&>(*this)[i]; }

namespace {

double energy(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return acc;
}

}  // namespace

ComponentDecomposition decompose(const Signal& s_hat, const Scene& scene) {
  const std::size_t M = scene.d.channels(), T = scene.d.samples();
  if (s_hat.channels() != M || s_hat.samples() != T) throw InvalidInput("estimate and scene are not aligned");
  ComponentDecomposition dec{Signal(M, T), Signal(M, T), Signal(M, T), Signal(M, T), Signal(M, T), {}, scene.periods};
  const std::array<const Signal*, 4> comps = {&scene.s_e, &scene.s_l, &scene.y, &scene.b};
  const std::array<Signal*, 4> posts = {&dec.s_e_post, &dec.s_l_post, &dec.y_post, &dec.b_post};

  for (const Period& p : scene.periods) {
    if (p.end > T || p.start >= p.end) throw InvalidInput("scene period outside the signal");
    const auto len = static_cast<Eigen::Index>(p.end - p.start);
    std::vector<std::array<double, 4>> gammas(M);
    for (std::size_t m = 0; m < M; ++m) {
      std::array<double, 4> gamma{};
      std::vector<std::size_t> active;
      for (std::size_t c = 0; c < 4; ++c) {
        if (energy(comps[c]->channel(m).subspan(p.start, p.end - p.start)) > 0.0) active.push_back(c);
      }
      Eigen::VectorXd target(len);
      for (Eigen::Index t = 0; t < len; ++t) target(t) = s_hat(m, p.start + static_cast<std::size_t>(t));
      if (!active.empty()) {
        Eigen::MatrixXd A(len, static_cast<Eigen::Index>(active.size()));
        for (std::size_t j = 0; j < active.size(); ++j) {
          for (Eigen::Index t = 0; t < len; ++t) A(t, static_cast<Eigen::Index>(j)) = (*comps[active[j]])(m, p.start + static_cast<std::size_t>(t));
        }
        const Eigen::VectorXd sol = A.colPivHouseholderQr().solve(target);
        for (std::size_t j = 0; j < active.size(); ++j) gamma[active[j]] = sol(static_cast<Eigen::Index>(j));
      }
      for (std::size_t t = p.start; t < p.end; ++t) {
        double rest = s_hat(m, t);
        for (std::size_t c = 0; c < 4; ++c) {
          const double v = gamma[c] * (*comps[c])(m, t);
          (*posts[c])(m, t) = v;
          rest -= v;
        }
        dec.s_e_art(m, t) = rest;
      }
      gammas[m] = gamma;
    }
    dec.gamma.push_back(std::move(gammas));
  }
  return dec;
}

MetricValues segment_metrics(std::span<const double> s_e_post, std::span<const double> s_l_post,
                             std::span<const double> y_post, std::span<const double> b_post,
                             std::span<const double> s_e_art, std::span<const double> y) {
  const std::size_t T = s_e_post.size();
  if (s_l_post.size() != T || y_post.size() != T || b_post.size() != T || s_e_art.size() != T || y.size() != T) {
    throw InvalidInput("segment_metrics: length mismatch");
  }
  double distortion = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    const double v = s_l_post[t] + y_post[t] + b_post[t] + s_e_art[t];
    distortion += v * v;
  }
  const double target = energy(s_e_post), echo_post = energy(y_post);
  MetricValues out;
  out.si_sdr = ratio_db(target, distortion);
  out.erle = ratio_db(energy(y), echo_post);
  out.ser = ratio_db(target, echo_post);
  out.elr = ratio_db(target, energy(s_l_post));
  out.snr = ratio_db(target, energy(b_post));
  out.si_sar = ratio_db(target, energy(s_e_art));
  return out;
}

std::array<bool, 6> evaluated_in(PeriodLabel label) {
  // si_sdr, erle, ser, elr, snr, si_sar
  switch (label) {
    case PeriodLabel::noise_only: return {false, false, false, false, false, false};
    case PeriodLabel::near_end_talk: return {true, false, false, true, true, true};
    case PeriodLabel::double_talk: return {true, true, true, true, true, true};
    case PeriodLabel::far_end_talk: return {false, true, false, false, false, false};
  }
  return {};
}

MetricsReport compute_metrics(const ComponentDecomposition& dec, const Scene& scene) {
  const std::size_t M = scene.d.channels();
  MetricsReport report;
  std::array<double, 6> sum{};
  std::array<std::size_t, 6> count{};
  for (const Period& p : dec.periods) {
    const auto mask = evaluated_in(p.label);
    PeriodMetrics pm{p, {}, {}};
    const std::size_t len = p.end - p.start;
    std::array<double, 6> chan_sum{};
    for (std::size_t m = 0; m < M; ++m) {
      MetricValues v = segment_metrics(dec.s_e_post.channel(m).subspan(p.start, len),
                                       dec.s_l_post.channel(m).subspan(p.start, len),
                                       dec.y_post.channel(m).subspan(p.start, len),
                                       dec.b_post.channel(m).subspan(p.start, len),
                                       dec.s_e_art.channel(m).subspan(p.start, len),
                                       scene.y.channel(m).subspan(p.start, len));
      for (std::size_t i = 0; i < 6; ++i) {
        if (!mask[i]) v[i] = kNotEvaluated;
        else chan_sum[i] += v[i];
      }
      pm.per_channel.push_back(v);
    }
    for (std::size_t i = 0; i < 6; ++i) {
      if (!mask[i]) continue;
      pm.mean[i] = chan_sum[i] / static_cast<double>(M);
      sum[i] += pm.mean[i];
      ++count[i];
    }
    report.periods.push_back(std::move(pm));
  }
  for (std::size_t i = 0; i < 6; ++i) {
    if (count[i] > 0) report.average[i] = sum[i] / static_cast<double>(count[i]);
  }
  return report;
}

MetricsReport evaluate(const Signal& s_hat, const Scene& scene) { return compute_metrics(decompose(s_hat, scene), scene); }

std::vector<MetricRow> metric_rows(const std::string& utterance_id, const MetricsReport& report) {
  std::vector<MetricRow> rows;
  for (const PeriodMetrics& pm : report.periods) {
    const auto mask = evaluated_in(pm.period.label);
    if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; })) continue;
    for (std::size_t m = 0; m < pm.per_channel.size(); ++m) rows.push_back({utterance_id, pm.period.label, m, pm.per_channel[m]});
  }
  return rows;
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricRow>& rows) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << "utterance_id,period_label,channel,si_sdr,erle,ser,elr,snr,si_sar\n";
  char buf[64];
  for (const MetricRow& r : rows) {
    os << r.utterance_id << ',' << to_string(r.label) << ',' << r.channel;
    for (std::size_t i = 0; i < 6; ++i) {
      os << ',';
      if (!std::isnan(r.values[i])) {
        std::snprintf(buf, sizeof buf, "%.17g", r.values[i]);
        os << buf;
      }
    }
    os << '\n';
  }
  if (!os) throw IoError("write failed: " + path.string());
}

std::array<MetricSummary, 6> summarize(const std::vector<MetricRow>& rows) {
  std::array<MetricSummary, 6> out;
  for (std::size_t i = 0; i < 6; ++i) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const MetricRow& r : rows) {
      if (std::isnan(r.values[i])) continue;
      sum += r.values[i];
      ++n;
    }
    out[i].count = n;
    if (n == 0) continue;
    out[i].mean = sum / static_cast<double>(n);
    if (n < 2) continue;
    double ss = 0.0;
    for (const MetricRow& r : rows) {
      if (!std::isnan(r.values[i])) ss += (r.values[i] - out[i].mean) * (r.values[i] - out[i].mean);
    }
    out[i].ci95 = 1.96 * std::sqrt(ss / static_cast<double>(n - 1)) / std::sqrt(static_cast<double>(n));
  }
  return out;
}

void write_metrics_summary(const std::filesystem::path& path, const std::vector<MetricRow>& rows) {
  const auto summary = summarize(rows);
  nlohmann::json j;
  for (std::size_t i = 0; i < 6; ++i) {
    nlohmann::json entry;
    entry["count"] = summary[i].count;
    entry["mean"] = std::isnan(summary[i].mean) ? nlohmann::json() : nlohmann::json(summary[i].mean);
    entry["ci95"] = std::isnan(summary[i].ci95) ? nlohmann::json() : nlohmann::json(summary[i].ci95);
    j["metrics"][MetricValues::kNames[i]] = entry;
  }
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << j.dump(2) << '\n';
  if (!os) throw IoError("write failed: " + path.string());
}

}  // namespace jse
