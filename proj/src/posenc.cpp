#include "geaet/posenc.hpp"

namespace geaet {

const char* to_string(PosEncKind kind) {
  switch (kind) {
    case PosEncKind::none:
      return "none";
    case PosEncKind::lappe:
      return "lappe";
    case PosEncKind::rwpe:
      return "rwpe";
  }
  return "?";
}

PosEncKind pos_enc_kind_from_string(const std::string& s) {
  if (s == "none") return PosEncKind::none;
  if (s == "lappe") return PosEncKind::lappe;
  if (s == "rwpe") return PosEncKind::rwpe;
  throw std::invalid_argument("unknown positional encoding '" + s + "'");
}

Matrix adjacency(const Graph& g) {
  Matrix a = Matrix::Zero(g.num_nodes, g.num_nodes);
  for (const Arc& arc : g.edges) a(arc.src, arc.dst) = 1.0;
  return a;
}

Matrix normalized_laplacian(const Graph& g) {
  const Matrix a = adjacency(g);
  Vector d = a.rowwise().sum();
  Vector inv_sqrt = d.unaryExpr([](double x) { return x > 0 ? 1.0 / std::sqrt(x) : 0.0; });
  Matrix l = -(inv_sqrt.asDiagonal() * a * inv_sqrt.asDiagonal());
  l.diagonal().array() += 1.0;
  return l;
}

Matrix lap_pe(const Graph& g, int k) {
  if (k < 1 || k >= g.num_nodes) {
    throw std::invalid_argument("lap_pe: k=" + std::to_string(k) + " needs 1 <= k < n=" + std::to_string(g.num_nodes));
  }
  const auto eig = sym_eig(normalized_laplacian(g));
  Matrix pe = eig.vectors.middleCols(1, k);
  for (Index c = 0; c < k; ++c) {
    const double peak = pe.col(c).cwiseAbs().maxCoeff();
    for (Index r = 0; r < pe.rows(); ++r) {
      if (std::abs(pe(r, c)) >= peak - 1e-10) {
        if (pe(r, c) < 0) pe.col(c) *= -1.0;
        break;
      }
    }
  }
  return pe;
}

void flip_signs(Matrix& pe, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(0.5);
  for (Index c = 0; c < pe.cols(); ++c) {
    if (coin(rng)) pe.col(c) *= -1.0;
  }
}

Matrix rwpe(const Graph& g, int k) {
  if (k < 1) throw std::invalid_argument("rwpe: k must be at least 1");
  const Index n = g.num_nodes;
  const Matrix a = adjacency(g);
  Eigen::RowVectorXd deg = a.rowwise().sum().transpose();
  Eigen::RowVectorXd inv = deg.unaryExpr([](double x) { return x > 0 ? 1.0 / x : 0.0; });
  // Row s of p holds the walker distribution started at s; one step is
  // (p D^-1) A. Splitting p D^-1 onto two fixed binary grids makes every
  // partial sum against the 0/1 matrix A exact, so the result does not depend
  // on node order.
  int bits = 1;
  while ((Index{1} << bits) <= n) ++bits;
  const int grid = 52 - bits;
  const double up = std::ldexp(1.0, grid), down = std::ldexp(1.0, -grid);
  Matrix p = Matrix::Identity(n, n), hi(n, n), lo(n, n), tail(n, n), pe(n, k);
  for (int t = 0; t < k; ++t) {
    for (Index r = 0; r < n; ++r) {
      for (Index c = 0; c < n; ++c) {
        const double w = p(r, c) * inv(c);
        const double h = std::trunc(w * up) * down;
        hi(r, c) = h;
        lo(r, c) = std::trunc((w - h) * up * up) * down * down;
      }
    }
    p.noalias() = hi * a;
    tail.noalias() = lo * a;
    p += tail;
    pe.col(t) = p.diagonal();
  }
  return pe;
}

Matrix positional_encoding(const Graph& g, const PosEncConfig& config) {
  switch (config.kind) {
    case PosEncKind::none:
      return Matrix(g.num_nodes, 0);
    case PosEncKind::lappe:
      return lap_pe(g, config.k);
    case PosEncKind::rwpe:
      return rwpe(g, config.k);
  }
  return Matrix(g.num_nodes, 0);
}

}  // namespace geaet
