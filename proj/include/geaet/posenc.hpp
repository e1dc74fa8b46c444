#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Jacobi>

#include "geaet/graph.hpp"

namespace geaet {

enum class PosEncKind { none, lappe, rwpe };

const char* to_string(PosEncKind kind);
PosEncKind pos_enc_kind_from_string(const std::string& s);

struct PosEncConfig {
  PosEncKind kind = PosEncKind::none;
  int k = 0;
  bool sign_flip = false;  // random per-column signs at train time (lappe only)
};

template <typename Scalar>
struct SymEig {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> values;  // ascending
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> vectors;  // column i pairs with values(i)
};

/// Cyclic Jacobi eigensolver for symmetric matrices. Sweeps until the
/// off-diagonal Frobenius norm drops below `tolerance`. Equal eigenvalues keep
/// the order in which the sweeps leave them.
template <typename Derived>
SymEig<typename Derived::Scalar> sym_eig(const Eigen::MatrixBase<Derived>& input,
                                         typename Derived::Scalar tolerance = 1e-12, int max_sweeps = 100) {
  using Scalar = typename Derived::Scalar;
  using Dense = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (input.rows() != input.cols()) throw std::invalid_argument("sym_eig: matrix is not square");
  Dense a = input;
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > Scalar(1e-10)) {
    throw std::invalid_argument("sym_eig: matrix is not symmetric");
  }
  const Eigen::Index n = a.rows();
  Dense v = Dense::Identity(n, n);
  auto off_norm = [&] {
    Scalar s = 0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
  };
  for (int sweep = 0; sweep < max_sweeps && off_norm() >= tolerance; ++sweep) {
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (a(p, q) == Scalar(0)) continue;
        Eigen::JacobiRotation<Scalar> rot;
        rot.makeJacobi(a, p, q);
        a.applyOnTheLeft(p, q, rot.adjoint());
        a.applyOnTheRight(p, q, rot);
        v.applyOnTheRight(p, q, rot);
        a(p, q) = a(q, p) = Scalar(0);
      }
    }
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return a(i, i) < a(j, j); });
  SymEig<Scalar> out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    out.values(c) = a(order[static_cast<std::size_t>(c)], order[static_cast<std::size_t>(c)]);
    out.vectors.col(c) = v.col(order[static_cast<std::size_t>(c)]);
  }
  return out;
}

/// Dense 0/1 adjacency with A(src, dst) = 1 for every arc.
Matrix adjacency(const Graph& g);

/// Symmetric normalized Laplacian I - D^-1/2 A D^-1/2; isolated nodes get a
/// zero D^-1/2 entry.
Matrix normalized_laplacian(const Graph& g);

/// Eigenvectors of the normalized Laplacian for eigenvalue ranks 1..k, each
/// column flipped so that its largest-magnitude entry is positive.
Matrix lap_pe(const Graph& g, int k);

/// Multiplies each column by an independent random sign.
void flip_signs(Matrix& pe, std::mt19937_64& rng);

/// Diagonals of (A D^-1)^t for t = 1..k; zero-degree columns stay zero.
/// Exactly equivariant under node relabelling.
Matrix rwpe(const Graph& g, int k);

/// Dispatches on config.kind; returns an n x 0 matrix for `none`.
Matrix positional_encoding(const Graph& g, const PosEncConfig& config);

}  // namespace geaet
