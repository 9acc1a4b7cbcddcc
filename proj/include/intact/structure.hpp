#ifndef INTACT_STRUCTURE_HPP
#define INTACT_STRUCTURE_HPP

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <complex>
#include <optional>
#include <vector>

#include "intact/model.hpp"
#include "intact/types.hpp"

namespace intact {

/// Guard band for the |lambda| >= 1 instability test: marginal eigenvalues
/// (both case-study plants carry lambda = 1 exactly) must classify unstable
/// despite round-off.
inline constexpr double kUnstableGuard = 1e-9;

template <typename Scalar>
struct JordanBlock {
  std::complex<Scalar> eigenvalue;
  int size = 1;
  /// chain[0] is the eigenvector; (A - lambda I) chain[i] = chain[i-1].
  std::vector<VectorXc<Scalar>> chain;
};

template <typename Scalar>
struct EigenCluster {
  std::complex<Scalar> eigenvalue;  // cluster representative
  int multiplicity = 0;             // algebraic
  std::vector<JordanBlock<Scalar>> blocks;
  MatrixXc<Scalar> eigenspace;      // orthonormal basis of null(A - lambda I)

  bool unstable() const { return std::abs(eigenvalue) >= Scalar(1) - Scalar(kUnstableGuard); }
};

namespace detail {

template <typename Scalar>
MatrixXc<Scalar> complex_null_basis(const MatrixXc<Scalar>& m, Scalar tol) {
  Eigen::JacobiSVD<MatrixXc<Scalar>> svd(m, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const Scalar cutoff = (sv.size() > 0 ? sv(0) : Scalar(0)) * tol;
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > cutoff) ++rank;
  return svd.matrixV().rightCols(m.cols() - rank);
}

/// Columns of `candidates` that extend the span of `existing`, orthonormalized.
template <typename Scalar>
MatrixXc<Scalar> independent_directions(const MatrixXc<Scalar>& existing,
                                        const MatrixXc<Scalar>& candidates, Scalar tol) {
  MatrixXc<Scalar> basis = existing;
  std::vector<VectorXc<Scalar>> picked;
  for (Eigen::Index j = 0; j < candidates.cols(); ++j) {
    VectorXc<Scalar> v = candidates.col(j);
    for (Eigen::Index b = 0; b < basis.cols(); ++b) {
      v -= basis.col(b) * (basis.col(b).adjoint() * v)(0);
    }
    if (v.norm() > tol) {
      v.normalize();
      basis.conservativeResize(basis.rows(), basis.cols() + 1);
      basis.col(basis.cols() - 1) = v;
      picked.push_back(v);
    }
  }
  MatrixXc<Scalar> out(existing.rows(), static_cast<Eigen::Index>(picked.size()));
  for (Eigen::Index j = 0; j < out.cols(); ++j) out.col(j) = picked[static_cast<size_t>(j)];
  return out;
}

}  // namespace detail

/// Eigenvalue clustering plus Jordan-chain construction. Rank decisions use a
/// relative tolerance of 1e-9; eigenvalues closer than ~1e-5 (relative) are
/// merged into one cluster, which is where defective pairs produced by the
/// eigensolver land.
template <typename Scalar>
std::vector<EigenCluster<Scalar>> eigenstructure(const MatrixX<Scalar>& A,
                                                 Scalar rank_tol = Scalar(1e-9)) {
  const int n = static_cast<int>(A.rows());
  Eigen::EigenSolver<MatrixX<Scalar>> es(A);
  if (es.info() != Eigen::Success) throw NumericalError("eigenstructure: eigen solver failed");
  VectorXc<Scalar> lam = es.eigenvalues();

  const Scalar scale = Scalar(1) + lam.cwiseAbs().maxCoeff();
  const Scalar cluster_tol = Scalar(1e-5) * scale;

  std::vector<bool> used(static_cast<size_t>(n), false);
  std::vector<EigenCluster<Scalar>> clusters;
  for (int i = 0; i < n; ++i) {
    if (used[static_cast<size_t>(i)]) continue;
    std::vector<int> members{i};
    used[static_cast<size_t>(i)] = true;
    for (int j = i + 1; j < n; ++j) {
      if (!used[static_cast<size_t>(j)] && std::abs(lam(i) - lam(j)) <= cluster_tol) {
        members.push_back(j);
        used[static_cast<size_t>(j)] = true;
      }
    }
    std::complex<Scalar> mean(0, 0);
    for (int m : members) mean += lam(m);
    mean /= Scalar(members.size());

    EigenCluster<Scalar> cl;
    cl.eigenvalue = mean;
    cl.multiplicity = static_cast<int>(members.size());

    const MatrixXc<Scalar> B = A.template cast<std::complex<Scalar>>() -
                               mean * MatrixXc<Scalar>::Identity(n, n);
    // null-space dimensions of B^j
    std::vector<MatrixXc<Scalar>> null_bases;  // index j-1 -> basis of null(B^j)
    MatrixXc<Scalar> Bp = MatrixXc<Scalar>::Identity(n, n);
    int smax = 0;
    for (int j = 1; j <= cl.multiplicity; ++j) {
      Bp = (Bp * B).eval();
      null_bases.push_back(detail::complex_null_basis<Scalar>(Bp, rank_tol));
      smax = j;
      if (static_cast<int>(null_bases.back().cols()) >= cl.multiplicity) break;
    }
    cl.eigenspace = null_bases.front();

    // heads of chains, longest first
    std::vector<std::pair<int, VectorXc<Scalar>>> heads;  // (length, head)
    MatrixXc<Scalar> exclusion(n, 0);
    for (int s = smax; s >= 1; --s) {
      MatrixXc<Scalar> lower(n, 0);
      if (s >= 2) lower = null_bases[static_cast<size_t>(s - 2)];
      // images of longer chains at level s
      MatrixXc<Scalar> taken(n, 0);
      for (const auto& [len, head] : heads) {
        VectorXc<Scalar> v = head;
        for (int t = 0; t < len - s; ++t) v = (B * v).eval();
        taken.conservativeResize(n, taken.cols() + 1);
        taken.col(taken.cols() - 1) = v.normalized();
      }
      MatrixXc<Scalar> excl(n, lower.cols() + taken.cols());
      excl << lower, taken;
      Eigen::HouseholderQR<MatrixXc<Scalar>> qr(excl);
      MatrixXc<Scalar> exq = excl.cols() > 0
                                 ? MatrixXc<Scalar>(qr.householderQ() *
                                                    MatrixXc<Scalar>::Identity(n, excl.cols()))
                                 : MatrixXc<Scalar>(n, 0);
      MatrixXc<Scalar> fresh = detail::independent_directions<Scalar>(
          exq, null_bases[static_cast<size_t>(s - 1)], Scalar(1e-7));
      for (Eigen::Index j = 0; j < fresh.cols(); ++j) heads.emplace_back(s, fresh.col(j));
    }

    for (const auto& [len, head] : heads) {
      JordanBlock<Scalar> blk;
      blk.eigenvalue = mean;
      blk.size = len;
      std::vector<VectorXc<Scalar>> down{head};
      for (int t = 1; t < len; ++t) down.push_back((B * down.back()).eval());
      // down.back() is the eigenvector; store eigenvector-first
      blk.chain.assign(down.rbegin(), down.rend());
      if (blk.chain.front().norm() > Scalar(0)) {
        const Scalar inv = Scalar(1) / blk.chain.front().norm();
        for (auto& v : blk.chain) v *= inv;
      }
      cl.blocks.push_back(std::move(blk));
    }
    std::sort(cl.blocks.begin(), cl.blocks.end(),
              [](const auto& a, const auto& b) { return a.size > b.size; });
    clusters.push_back(std::move(cl));
  }
  return clusters;
}

template <typename Scalar>
struct StructuralReport {
  int psi = 1;    ///< observability index
  int q_un = 0;   ///< unstable eigenvalues, with multiplicity
  int f_required = 0;
  std::vector<JordanBlock<Scalar>> unstable_eigenstructure;
};

using StructuralReportd = StructuralReport<double>;

/// Observability index, unstable-eigenvalue count and the block length
/// f = min(psi, q_un). With a compromised set the count is restricted to
/// eigen-directions whose output support lies inside the set.
template <typename Scalar>
StructuralReport<Scalar> structural_report(const PlantModel<Scalar>& model,
                                           std::optional<std::vector<int>> compromised = {}) {
  if (!model.observable()) throw ValidationError("structural_report: (A, C) pair is not observable");
  const int n = model.n();
  const int p = model.p();

  StructuralReport<Scalar> rep;
  for (int i = 1; i <= n; ++i) {
    if (numerical_rank<Scalar>(model.observability_matrix(i)) == n) {
      rep.psi = i;
      break;
    }
  }

  std::vector<int> complement;
  if (compromised) {
    std::vector<bool> in(static_cast<size_t>(p), false);
    for (int s : *compromised) {
      if (s < 0 || s >= p) throw ValidationError("structural_report: sensor index out of range");
      in[static_cast<size_t>(s)] = true;
    }
    for (int s = 0; s < p; ++s)
      if (!in[static_cast<size_t>(s)]) complement.push_back(s);
  }

  const auto clusters = eigenstructure<Scalar>(model.A);
  for (const auto& cl : clusters) {
    if (!cl.unstable()) continue;
    int counted = cl.multiplicity;
    if (compromised) {
      // dimension of the eigenspace whose output support stays inside the set
      const MatrixXc<Scalar> Cc = model.C.template cast<std::complex<Scalar>>();
      const MatrixX<Scalar> Pc = selection_columns<Scalar>(p, complement).transpose();
      const MatrixXc<Scalar> restricted =
          Pc.template cast<std::complex<Scalar>>() * Cc * cl.eigenspace;
      const int r = complement.empty()
                        ? static_cast<int>(cl.eigenspace.cols())
                        : static_cast<int>(detail::complex_null_basis<Scalar>(restricted,
                                                                              Scalar(1e-9)).cols());
      counted = 0;
      int picked = 0;
      for (const auto& blk : cl.blocks) {  // largest blocks first
        if (picked >= r) break;
        counted += blk.size;
        ++picked;
      }
    }
    rep.q_un += counted;
    if (counted > 0) {
      for (const auto& blk : cl.blocks) rep.unstable_eigenstructure.push_back(blk);
    }
  }
  rep.f_required = rep.q_un > 0 ? std::min(rep.psi, rep.q_un) : 0;
  return rep;
}

template <typename Scalar>
struct AttackabilityVerdict {
  bool attackable = false;
  std::optional<VectorXc<Scalar>> witness;
};

/// Theorem-3 test: the system is perfectly attackable iff some unstable
/// eigen-direction v has supp(Cv) inside the compromised set and v is
/// reachable for the error dynamics (Acl, K restricted to compromised
/// columns). Reachability is decided by direct projection onto the 2n-step
/// controllability range with relative residual tolerance 1e-8.
template <typename Scalar>
AttackabilityVerdict<Scalar> is_perfectly_attackable(const PlantModel<Scalar>& model,
                                                     const SteadyStateFilter<Scalar>& filter,
                                                     const AttackScenario<Scalar>& scenario) {
  scenario.validate(model.p());
  if (filter.n() != model.n() || filter.p() != model.p()) {
    throw ValidationError("is_perfectly_attackable: filter inconsistent with model");
  }
  AttackabilityVerdict<Scalar> verdict;
  if (scenario.compromised.empty()) return verdict;

  const int n = model.n();
  const int p = model.p();
  std::vector<int> complement;
  {
    std::vector<bool> in(static_cast<size_t>(p), false);
    for (int s : scenario.compromised) in[static_cast<size_t>(s)] = true;
    for (int s = 0; s < p; ++s)
      if (!in[static_cast<size_t>(s)]) complement.push_back(s);
  }

  // controllability range of (Acl, K_K)
  const MatrixX<Scalar> G = filter.K * selection_columns<Scalar>(p, scenario.compromised);
  MatrixX<Scalar> ctrb(n, 2 * n * G.cols());
  MatrixX<Scalar> blk = G;
  for (int i = 0; i < 2 * n; ++i) {
    ctrb.middleCols(i * G.cols(), G.cols()) = blk;
    blk = (filter.Acl * blk).eval();
  }
  Eigen::JacobiSVD<MatrixX<Scalar>> svd(ctrb, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > Scalar(1e-10) * sv(0)) ++rank;
  const MatrixXc<Scalar> range =
      svd.matrixU().leftCols(rank).template cast<std::complex<Scalar>>();

  const auto clusters = eigenstructure<Scalar>(model.A);
  for (const auto& cl : clusters) {
    if (!cl.unstable()) continue;
    MatrixXc<Scalar> Z = cl.eigenspace;
    if (!complement.empty()) {
      const MatrixXc<Scalar> restricted =
          selection_columns<Scalar>(p, complement).transpose().template cast<std::complex<Scalar>>() *
          model.C.template cast<std::complex<Scalar>>() * Z;
      const MatrixXc<Scalar> U = detail::complex_null_basis<Scalar>(restricted, Scalar(1e-9));
      if (U.cols() == 0) continue;
      Z = (Z * U).eval();
    }
    // principal direction of span(Z) against the controllability range
    Eigen::HouseholderQR<MatrixXc<Scalar>> qr(Z);
    const MatrixXc<Scalar> Qz = qr.householderQ() * MatrixXc<Scalar>::Identity(n, Z.cols());
    Eigen::JacobiSVD<MatrixXc<Scalar>> ang(Qz.adjoint() * range, Eigen::ComputeFullU);
    if (ang.singularValues().size() == 0) continue;
    const VectorXc<Scalar> v = Qz * ang.matrixU().col(0);
    const VectorXc<Scalar> resid = v - range * (range.adjoint() * v);
    if (resid.norm() <= Scalar(1e-8) * v.norm()) {
      verdict.attackable = true;
      verdict.witness = v;
      return verdict;
    }
  }
  return verdict;
}

}  // namespace intact

#endif  // INTACT_STRUCTURE_HPP
