#include <cmath>
#include <random>

#include "doctest.h"
#include "jse/gaussian.hpp"
#include "test_util.hpp"

using namespace jse;

namespace {

double hermitian_error(const CMat& a) { return (a - a.adjoint()).cwiseAbs().maxCoeff(); }

double min_eig(const CMat& a) {
  Eigen::SelfAdjointEigenSolver<CMatX> es(CMatX(hermitian_part(a)));
  return es.eigenvalues().minCoeff();
}

}  // namespace

TEST_CASE("mixture covariance, inverse and log-determinant") {
  const SourceStats s = test::random_stats(6, 4, 3, 1);
  const MixtureCovariance mix = mixture_covariance(s);
  CHECK(mix.regularized_bins == 0);
  for (std::size_t n = 0; n < 6; ++n) {
    for (std::size_t f = 0; f < 4; ++f) {
      CMat r = CMat::Zero(3, 3);
      for (Source c : kSources) r += s.psd(c, n, f) * s.scm(c, f);
      CHECK((mix.r_dd.at(n, f) - r).norm() < 1e-12 * r.norm());
      CHECK((mix.inverse.at(n, f) * r - CMat::Identity(3, 3)).norm() < 1e-9);
      CHECK(mix.log_det[n * 4 + f] == doctest::Approx(std::log(CMatX(r).determinant().real())).epsilon(1e-10));
    }
  }
}

TEST_CASE("mixture covariance regularizes near-singular bins") {
  SourceStats s(2, 1, 2);  // zero PSDs
  const MixtureCovariance mix = mixture_covariance(s, 1e-5);
  CHECK(mix.regularized_bins == 2);
  CHECK((mix.r_dd.at(0, 0) - 1e-5 * CMat::Identity(2, 2)).norm() < 1e-18);
}

TEST_CASE("Wiener filters partition the identity") {
  const SourceStats s = test::random_stats(20, 5, 4, 2);
  const MixtureCovariance mix = mixture_covariance(s);
  std::array<MatrixField, kNumSources> w;
  for (Source c : kSources) w[static_cast<std::size_t>(c)] = wiener_filter(s, mix, c);
  for (std::size_t n = 0; n < 20; ++n) {
    for (std::size_t f = 0; f < 5; ++f) {
      CMat sum = CMat::Zero(4, 4);
      for (const auto& wc : w) sum += wc.at(n, f);
      CHECK((sum - CMat::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("source estimates add up to the residual") {
  const SourceStats s = test::random_stats(8, 3, 2, 3);
  const MixtureCovariance mix = mixture_covariance(s);
  const Spectrogram r = test::random_spectrogram(8, 3, 2, 4);
  Spectrogram sum = r.zeros_like();
  for (Source c : kSources) sum += estimate_source(wiener_filter(s, mix, c), r);
  CHECK(test::max_abs_diff(sum, r) < 1e-10 * test::max_abs(r));
}

TEST_CASE("posterior moments are Hermitian positive semidefinite") {
  const SourceStats s = test::random_stats(8, 3, 3, 5);
  const MixtureCovariance mix = mixture_covariance(s);
  const Spectrogram r = test::random_spectrogram(8, 3, 3, 6);
  for (Source c : kSources) {
    const MatrixField w = wiener_filter(s, mix, c);
    const MatrixField rh = posterior_moment(estimate_source(w, r), w, s, c);
    for (std::size_t n = 0; n < 8; ++n) {
      for (std::size_t f = 0; f < 3; ++f) {
        CHECK(hermitian_error(rh.at(n, f)) < 1e-9 * rh.at(n, f).norm());
        CHECK(min_eig(rh.at(n, f)) > -1e-10 * rh.at(n, f).norm());
      }
    }
  }
}

TEST_CASE("update_scm matches the weighted formula") {
  const std::size_t N = 7, F = 2, M = 2;
  const SourceStats s = test::random_stats(N, F, M, 7);
  MatrixField rh(N, F, M);
  std::mt19937_64 rng(8);
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t f = 0; f < F; ++f) rh.set(n, f, test::random_hpd(M, rng));
  }
  const auto& v = s.psd(Source::s_e);
  for (ScmWeighting wt : {ScmWeighting::unweighted, ScmWeighting::psd}) {
    const auto out = update_scm(rh, v, wt, 1e-5);
    for (std::size_t f = 0; f < F; ++f) {
      CMat acc = CMat::Zero(2, 2);
      double wsum = 0.0;
      for (std::size_t n = 0; n < N; ++n) {
        const double w = wt == ScmWeighting::psd ? v[n * F + f] : 1.0;
        acc += w / v[n * F + f] * rh.at(n, f);
        wsum += w;
      }
      acc /= wsum + 1e-5;
      acc *= 2.0 / acc.trace().real();
      CHECK((out[f] - acc).norm() < 1e-12);
    }
  }
}

TEST_CASE("chained SCM updates keep the contract") {
  const std::size_t N = 10, F = 6, M = 3;
  SourceStats s = test::random_stats(N, F, M, 9);
  const Spectrogram r = test::random_spectrogram(N, F, M, 10);
  for (int it = 0; it < 10; ++it) {
    const MixtureCovariance mix = mixture_covariance(s);
    for (Source c : kSources) {
      const MatrixField w = wiener_filter(s, mix, c);
      const auto scm = update_scm(posterior_moment(estimate_source(w, r), w, s, c), s.psd(c), ScmWeighting::psd);
      for (std::size_t f = 0; f < F; ++f) s.set_scm(c, f, scm[f]);
    }
  }
  for (Source c : kSources) {
    for (std::size_t f = 0; f < F; ++f) {
      const CMat R = s.scm(c, f);
      CHECK(hermitian_error(R) < 1e-12);
      CHECK(min_eig(R) >= -1e-10);
      CHECK(std::abs(R.trace().real() - 3.0) < 1e-9);
    }
  }
}

TEST_CASE("em_step equals the explicit E and M steps") {
  const std::size_t N = 9, F = 3, M = 2;
  const SourceStats s0 = test::random_stats(N, F, M, 11);
  const Spectrogram r = test::random_spectrogram(N, F, M, 12);
  const MixtureCovariance mix = mixture_covariance(s0);
  SourceStats s = s0;
  const EmStepResult em = em_step(s, mix, r, ScmWeighting::psd, true);
  for (Source c : kSources) {
    const MatrixField w = wiener_filter(s0, mix, c);
    const MatrixField rh = posterior_moment(estimate_source(w, r), w, s0, c);
    const auto scm = update_scm(rh, s0.psd(c), ScmWeighting::psd);
    const auto v_unc = unconstrained_psd(scm, rh);
    for (std::size_t f = 0; f < F; ++f) CHECK((s.scm(c, f) - scm[f]).norm() < 1e-10);
    for (std::size_t i = 0; i < N * F; ++i) {
      CHECK(em.v_unc[static_cast<std::size_t>(c)][i] == doctest::Approx(v_unc[i]).epsilon(1e-9));
    }
  }
  SourceStats s2 = s0;
  CHECK(em_step(s2, mix, r, ScmWeighting::unweighted).v_unc[0].empty());
}

TEST_CASE("unconstrained PSD recovers a scaled SCM") {
  std::mt19937_64 rng(13);
  const CMat R = test::random_hpd(3, rng);
  MatrixField rh(2, 1, 3);
  rh.set(0, 0, 2.5 * R);
  rh.set(1, 0, CMat::Zero(3, 3));
  const auto v = unconstrained_psd({R}, rh);
  CHECK(v[0] == doctest::Approx(2.5).epsilon(1e-10));
  CHECK(v[1] == 0.0);
}

TEST_CASE("source stats shape checks") {
  CHECK_THROWS_AS(SourceStats(1, 1, 0), InvalidInput);
  CHECK_THROWS_AS(SourceStats(1, 1, 9), InvalidInput);
  SourceStats s(2, 2, 2);
  CHECK(s.scm(Source::b_r, 1) == CMat::Identity(2, 2));
  CHECK(source_name(Source::z_r) == "z_r");
  CHECK_THROWS_AS(em_step(s, mixture_covariance(s), test::random_spectrogram(3, 2, 2, 1), ScmWeighting::psd),
                  InvalidInput);
}
