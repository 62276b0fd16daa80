#include <cmath>

#include "jse/gaussian.hpp"
#include "jse/linear.hpp"

namespace jse {

namespace {

bool all_finite(const CVecX& v) { return v.allFinite(); }

}  // namespace

CVecX solve_regularized(const CMatX& a, const CVecX& b, double eps, std::size_t bin) {
  if (a.rows() != a.cols() || a.rows() != b.size()) throw InvalidInput("solve_regularized: shape mismatch");
  const CMatX reg = 0.5 * (a + a.adjoint()) + eps * CMatX::Identity(a.rows(), a.cols());
  if (!reg.allFinite() || !all_finite(b)) throw SingularSystem("non-finite normal equations", bin);
  Eigen::LLT<CMatX> llt(reg);
  if (llt.info() == Eigen::Success) {
    CVecX z = llt.solve(b);
    if (all_finite(z)) return z;
  }
  Eigen::CompleteOrthogonalDecomposition<CMatX> cod(reg);
  CVecX z = cod.solve(b);
  if (!all_finite(z)) throw SingularSystem("normal equations are singular", bin);
  return z;
}

NormalEquations echo_normal_equations(const FarendTaps& xr, const Spectrogram& r_d, const MixtureCovariance& mix) {
  const std::size_t N = r_d.frames(), F = r_d.bins(), M = r_d.channels(), K = xr.taps();
  if (xr.frames() != N || xr.bins() != F || xr.channels() != M || mix.inverse.frames() != N ||
      mix.inverse.bins() != F || mix.inverse.channels() != M) {
    throw InvalidInput("echo_normal_equations: shape mismatch");
  }
  const auto D = static_cast<Eigen::Index>(M * K);
  const auto Mi = static_cast<Eigen::Index>(M);
  // With W = L L^H the sums become Z^H Z and Z^H rho, where Z stacks L^H X(n)
  // and rho stacks L^H r_d(n) over the frames.
  NormalEquations ne{std::vector<CMatX>(F), std::vector<CVecX>(F)};
  CMatX Z(static_cast<Eigen::Index>(N) * Mi, D);
  CVecX rho(static_cast<Eigen::Index>(N) * Mi);
  for (std::size_t f = 0; f < F; ++f) {
    CMatX P = CMatX::Zero(D, D);
    CVecX p = CVecX::Zero(D);
    Eigen::Index rows = 0;
    for (std::size_t n = 0; n < N; ++n) {
      const CMatX X = xr.stacked(static_cast<long>(n), f);
      if (X.isZero(0.0)) continue;
      const CMat W = mix.inverse.at(n, f);
      const Eigen::LLT<CMat> llt(hermitian_part(W));
      if (llt.info() != Eigen::Success) {
        const CMatX WX = W * X;
        P.noalias() += X.adjoint() * WX;
        p.noalias() += WX.adjoint() * r_d.at(static_cast<long>(n), f);
        continue;
      }
      const CMat LH = llt.matrixU();
      Z.middleRows(rows, Mi).noalias() = LH * X;
      rho.segment(rows, Mi).noalias() = LH * r_d.at(static_cast<long>(n), f);
      rows += Mi;
    }
    if (rows > 0) {
      P.noalias() += Z.topRows(rows).adjoint() * Z.topRows(rows);
      p.noalias() += Z.topRows(rows).adjoint() * rho.head(rows);
    }
    ne.lhs[f] = std::move(P);
    ne.rhs[f] = std::move(p);
  }
  return ne;
}

EchoFilter update_H(const FarendTaps& xr, const Spectrogram& r_d, const MixtureCovariance& mix, double eps) {
  const NormalEquations ne = echo_normal_equations(xr, r_d, mix);
  EchoFilter h(r_d.bins(), xr.taps(), r_d.channels());
  for (std::size_t f = 0; f < r_d.bins(); ++f) h.set_stacked(f, solve_regularized(ne.lhs[f], ne.rhs[f], eps, f));
  return h;
}

NormalEquations dereverb_normal_equations(const Spectrogram& regressor, const Spectrogram& target,
                                          const MixtureCovariance& mix, std::size_t taps, std::size_t delay) {
  const std::size_t N = target.frames(), F = target.bins(), M = target.channels();
  if (regressor.frames() != N || regressor.bins() != F || regressor.channels() != M || mix.inverse.frames() != N ||
      mix.inverse.bins() != F || mix.inverse.channels() != M) {
    throw InvalidInput("dereverb_normal_equations: shape mismatch");
  }
  if (delay < 1) throw InvalidInput("dereverberation delay must be >= 1");
  const std::size_t ML = M * taps;
  const auto Mi = static_cast<Eigen::Index>(M);
  const auto MLi = static_cast<Eigen::Index>(ML);
  const auto D = static_cast<Eigen::Index>(M * ML);

  // Internal ordering (m, j, m') makes block (m, m2) equal to W(m, m2) times
  // the outer product of the lagged regressor stack. Mapped to (j, m, m') at the end.
  std::vector<Eigen::Index> to_public(static_cast<std::size_t>(D));
  for (std::size_t m = 0; m < M; ++m) {
    for (std::size_t j = 0; j < taps; ++j) {
      for (std::size_t mp = 0; mp < M; ++mp) {
        to_public[m * ML + j * M + mp] = static_cast<Eigen::Index>((j * M + m) * M + mp);
      }
    }
  }

  // Rows of E are the lagged regressor stacks, so block (m, m2) of Q is
  // E^H diag(W(m, m2)) E and segment m of q is E^H (W t)_m.
  const std::size_t rows = N > delay ? N - delay : 0;
  const auto R = static_cast<Eigen::Index>(rows);
  NormalEquations ne{std::vector<CMatX>(F), std::vector<CVecX>(F)};
  CMatX E(R, MLi), scaled(R, MLi), wt(R, Mi);
  std::vector<Eigen::VectorXcd> w(M * M, Eigen::VectorXcd(R));
  CMatX Qi(D, D);
  CVecX qi(D);
  for (std::size_t f = 0; f < F; ++f) {
    for (std::size_t i = 0; i < rows; ++i) {
      const std::size_t n = i + delay;
      for (std::size_t j = 0; j < taps; ++j) {
        const long src = static_cast<long>(n) - static_cast<long>(delay + j);
        for (std::size_t mp = 0; mp < M; ++mp) {
          E(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j * M + mp)) =
              src >= 0 ? regressor(static_cast<std::size_t>(src), f, mp) : Complex{};
        }
      }
      const CMat W = mix.inverse.at(n, f);
      wt.row(static_cast<Eigen::Index>(i)) = (W * target.at(static_cast<long>(n), f)).transpose();
      for (Eigen::Index m = 0; m < Mi; ++m) {
        for (Eigen::Index m2 = m; m2 < Mi; ++m2) w[static_cast<std::size_t>(m * Mi + m2)](static_cast<Eigen::Index>(i)) = W(m, m2);
      }
    }
    Qi.setZero();
    for (Eigen::Index m = 0; m < Mi; ++m) {
      for (Eigen::Index m2 = m; m2 < Mi; ++m2) {
        const auto& wv = w[static_cast<std::size_t>(m * Mi + m2)];
        if (R == 0 || wv.isZero(0.0)) continue;
        scaled.noalias() = wv.asDiagonal() * E;
        Qi.block(m * MLi, m2 * MLi, MLi, MLi).noalias() = E.adjoint() * scaled;
      }
    }
    if (R > 0) {
      const CMatX qm = E.adjoint() * wt;  // ML x M
      for (Eigen::Index m = 0; m < Mi; ++m) qi.segment(m * MLi, MLi) = qm.col(m);
    } else {
      qi.setZero();
    }
    // Lower blocks from Hermitian symmetry.
    for (Eigen::Index m = 0; m < Mi; ++m) {
      for (Eigen::Index m2 = m + 1; m2 < Mi; ++m2) {
        Qi.block(m2 * MLi, m * MLi, MLi, MLi) = Qi.block(m * MLi, m2 * MLi, MLi, MLi).adjoint();
      }
    }
    CMatX Q(D, D);
    CVecX q(D);
    for (Eigen::Index a = 0; a < D; ++a) {
      q(to_public[static_cast<std::size_t>(a)]) = qi(a);
      for (Eigen::Index b = 0; b < D; ++b) {
        Q(to_public[static_cast<std::size_t>(a)], to_public[static_cast<std::size_t>(b)]) = Qi(a, b);
      }
    }
    ne.lhs[f] = std::move(Q);
    ne.rhs[f] = std::move(q);
  }
  return ne;
}

DereverbFilter update_G(const Spectrogram& regressor, const Spectrogram& target, const MixtureCovariance& mix,
                        std::size_t taps, std::size_t delay, double eps) {
  const NormalEquations ne = dereverb_normal_equations(regressor, target, mix, taps, delay);
  DereverbFilter g(target.bins(), taps, target.channels(), delay);
  for (std::size_t f = 0; f < target.bins(); ++f) g.set_stacked(f, solve_regularized(ne.lhs[f], ne.rhs[f], eps, f));
  return g;
}

}  // namespace jse
