#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "geaet/grad_check.hpp"
#include "geaet/ops.hpp"

using namespace geaet;

namespace {

Matrix randn(Index r, Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.begin()->size()));
  Index i = 0;
  for (const auto& r : rows) {
    Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

Matrix triple_loop(const Matrix& a, const Matrix& b) {
  Matrix c = Matrix::Zero(a.rows(), b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < b.cols(); ++j)
      for (Index k = 0; k < a.cols(); ++k) c(i, j) += a(i, k) * b(k, j);
  return c;
}

}  // namespace

TEST(Matmul, IdentityAndSelection) {
  Tensor a(mat({{1, 2}, {3, 4}}));
  EXPECT_EQ(matmul(a, Tensor(Matrix::Identity(2, 2))).value(), a.value());
  EXPECT_EQ(matmul(Tensor(mat({{1, 0}})), Tensor(mat({{2}, {5}}))).value(), mat({{2}}));
}

TEST(Matmul, MatchesTripleLoop) {
  std::mt19937_64 rng(1);
  const Matrix a = randn(3, 4, rng), b = randn(4, 2, rng);
  EXPECT_LT((matmul(Tensor(a), Tensor(b)).value() - triple_loop(a, b)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((matmul_nt(Tensor(a), Tensor(Matrix(b.transpose()))).value() - triple_loop(a, b)).cwiseAbs().maxCoeff(),
            1e-12);
}

TEST(Matmul, ShapeErrorNamesBothShapes) {
  try {
    matmul(Tensor::zeros(2, 3), Tensor::zeros(2, 3));
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("[2x3]"), std::string::npos);
  }
}

TEST(FlopCounter, MatmulCountsExactly) {
  FlopCounter::reset();
  matmul(Tensor::zeros(3, 5), Tensor::zeros(5, 7));
  EXPECT_EQ(FlopCounter::multiply_adds(), 3u * 5u * 7u);
  FlopCounter::reset();
  EXPECT_EQ(FlopCounter::multiply_adds(), 0u);
}

TEST(Softmax, RowExamples) {
  EXPECT_EQ(row_softmax(Tensor(mat({{0, 0}}))).value(), mat({{0.5, 0.5}}));
  EXPECT_EQ(row_softmax(Tensor(mat({{1000, 1000}}))).value(), mat({{0.5, 0.5}}));
  const Matrix p = row_softmax(Tensor(mat({{0, std::log(3.0)}}))).value();
  EXPECT_NEAR(p(0, 0), 0.25, 1e-15);
  EXPECT_NEAR(p(0, 1), 0.75, 1e-15);
}

TEST(Softmax, ColumnExamplesAndTransposeOracle) {
  EXPECT_EQ(col_softmax(Tensor(mat({{3, -1, 7}}))).value(), mat({{1, 1, 1}}));
  EXPECT_EQ(col_softmax(Tensor(mat({{0}, {0}}))).value(), mat({{0.5}, {0.5}}));
  std::mt19937_64 rng(2);
  const Tensor a(randn(5, 3, rng));
  const Matrix via_rows = transpose(row_softmax(transpose(a))).value();
  EXPECT_LT((col_softmax(a).value() - via_rows).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Softmax, SumsToOne) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 50; ++t) {
    const Tensor a(randn(4, 6, rng) * 10.0);
    EXPECT_LT((row_softmax(a).value().rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
    EXPECT_LT((col_softmax(a).value().colwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
  }
}

TEST(RowL1Normalize, Examples) {
  EXPECT_EQ(row_l1_normalize(Tensor(mat({{0.2, 0.2}})), 0.0).value(), mat({{0.5, 0.5}}));
  const Matrix z = row_l1_normalize(Tensor(mat({{0, 0}})), 1e-12).value();
  EXPECT_TRUE(z.allFinite());
  EXPECT_EQ(z, mat({{0, 0}}));
  EXPECT_EQ(row_l1_normalize(Tensor(mat({{1, 3}})), 0.0).value(), mat({{0.25, 0.75}}));
}

TEST(Pointwise, Examples) {
  EXPECT_EQ(relu(Tensor(mat({{-1, 0, 2}}))).value(), mat({{0, 0, 2}}));
  EXPECT_EQ(sigmoid(Tensor(mat({{0}}))).value(), mat({{0.5}}));
  const Matrix s = add(Tensor(mat({{1, 1}, {2, 2}})), Tensor(mat({{10, 20}}))).value();
  Matrix oracle(2, 2);
  for (Index i = 0; i < 2; ++i)
    for (Index j = 0; j < 2; ++j) oracle(i, j) = (i + 1.0) + (j + 1.0) * 10.0;
  EXPECT_EQ(s, oracle);
  EXPECT_THROW(add(Tensor::zeros(2, 2), Tensor::zeros(3, 2)), ShapeError);
}

TEST(Relu, SubgradientZeroAtKink) {
  Tensor x(mat({{0.0, 1.0, -1.0}}), true);
  backward(sum(relu(x)));
  EXPECT_EQ(x.grad(), mat({{0, 1, 0}}));
}

TEST(Routing, GatherScatterExamples) {
  const Tensor a(mat({{1}, {2}, {3}}));
  const std::vector<Index> idx{2, 0};
  EXPECT_EQ(gather_rows(a, idx).value(), mat({{3}, {1}}));
  const std::vector<Index> zeros{0, 0};
  EXPECT_EQ(scatter_add_rows(Tensor(mat({{1}, {1}})), zeros, 2).value(), mat({{2}, {0}}));
}

TEST(Routing, OutOfRangeNamesPosition) {
  const std::vector<Index> idx{0, 5};
  try {
    gather_rows(Tensor::zeros(3, 1), idx);
    FAIL();
  } catch (const IndexError& e) {
    EXPECT_NE(std::string(e.what()).find("position 1"), std::string::npos);
  }
  EXPECT_THROW(scatter_add_rows(Tensor::zeros(2, 1), idx, 3), IndexError);
}

TEST(Routing, RoundTripMatchesLoopOracle) {
  std::mt19937_64 rng(4);
  const Matrix src = randn(7, 3, rng);
  std::vector<Index> idx;
  std::uniform_int_distribution<Index> pick(0, 4);
  for (int i = 0; i < 7; ++i) idx.push_back(pick(rng));
  const Matrix scattered = scatter_add_rows(Tensor(src), idx, 5).value();
  Matrix oracle = Matrix::Zero(5, 3);
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (Index c = 0; c < 3; ++c) oracle(idx[i], c) += src(static_cast<Index>(i), c);
  EXPECT_EQ(scattered, oracle);
  const Matrix gathered = gather_rows(Tensor(scattered), idx).value();
  for (std::size_t i = 0; i < idx.size(); ++i) EXPECT_EQ(gathered.row(static_cast<Index>(i)), oracle.row(idx[i]));
}

TEST(Routing, PropagateMatchesComposedOps) {
  std::mt19937_64 rng(7);
  const Matrix h = randn(6, 3, rng);
  const std::vector<Index> src{0, 2, 5, 5, 1, 3, 0};
  const std::vector<Index> dst{1, 1, 0, 3, 2, 3, 0};
  const std::vector<double> coeff{0.5, -2.0, 1.5, 0.25, 3.0, -1.0, 0.75};
  const Matrix fused = propagate(Tensor(h), src, dst, coeff, 4).value();
  const Matrix composed = scatter_add_rows(mul_rows(gather_rows(Tensor(h), src), coeff), dst, 4).value();
  EXPECT_LT((fused - composed).cwiseAbs().maxCoeff(), 1e-14);  // may contract to fma
  EXPECT_THROW(propagate(Tensor(h), src, dst, coeff, 3), IndexError);
  EXPECT_THROW(propagate(Tensor(h), src, src, std::vector<double>{1.0}, 6), ShapeError);
}

TEST(Routing, ScatterIsBitDeterministic) {
  std::mt19937_64 rng(5);
  const Matrix src = randn(200, 4, rng) * 1e6;
  std::vector<Index> idx(200);
  for (auto& i : idx) i = static_cast<Index>(rng() % 3);
  const Matrix a = scatter_add_rows(Tensor(src), idx, 3).value();
  const Matrix b = scatter_add_rows(Tensor(src), idx, 3).value();
  EXPECT_EQ(std::memcmp(a.data(), b.data(), sizeof(double) * a.size()), 0);
}

TEST(Columns, ConcatAndSlice) {
  EXPECT_EQ(concat_cols(std::vector<Tensor>{Tensor(mat({{1}})), Tensor(mat({{2}}))}).value(), mat({{1, 2}}));
  std::mt19937_64 rng(6);
  const Matrix a = randn(3, 2, rng), b = randn(3, 1, rng), c = randn(3, 4, rng);
  const Matrix cat = concat_cols(std::vector<Tensor>{Tensor(a), Tensor(b), Tensor(c)}).value();
  for (Index i = 0; i < 3; ++i) {
    for (Index j = 0; j < 7; ++j) {
      const double want = j < 2 ? a(i, j) : (j < 3 ? b(i, 0) : c(i, j - 3));
      EXPECT_EQ(cat(i, j), want);
    }
  }
  EXPECT_EQ(slice_cols(Tensor(cat), 0, 2).value(), a);
  EXPECT_THROW(slice_cols(Tensor(cat), 3, 3), IndexError);
  EXPECT_THROW(slice_cols(Tensor(cat), 0, 8), IndexError);
}

TEST(Backward, SumAndSquare) {
  std::mt19937_64 rng(7);
  Tensor x(randn(3, 2, rng), true);
  backward(sum(x));
  EXPECT_EQ(x.grad(), Matrix::Ones(3, 2));
  x.zero_grad();
  backward(sum(mul(x, x)));
  EXPECT_LT((x.grad() - 2.0 * x.value()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Backward, RejectsNonScalarLoss) {
  Tensor x = Tensor::zeros(2, 2, true);
  Tensor y = add_scalar(x, 1.0);
  EXPECT_THROW(backward(y), ShapeError);
  Tape::current().clear();
}

TEST(Backward, VisitsOpsInReverseOrder) {
  Tensor x(Matrix::Ones(2, 2), true);
  Tensor y = relu(scale(matmul(x, x), 2.0));
  std::vector<std::string> trace;
  Tape::current().set_trace(&trace);
  backward(sum(y));
  Tape::current().set_trace(nullptr);
  EXPECT_EQ(trace, (std::vector<std::string>{"sum", "relu", "scale", "matmul"}));
  EXPECT_EQ(Tape::current().size(), 0u);
}

TEST(GradCheck, AnalyticAndLinear) {
  std::mt19937_64 rng(8);
  const Tensor x(randn(3, 3, rng));
  EXPECT_LT(grad_check([](const Tensor& t) { return sum(mul(t, t)); }, x), 1e-7);
  const Tensor w(randn(3, 2, rng));
  EXPECT_LT(grad_check([&](const Tensor& t) { return sum(matmul(t, w)); }, x), 1e-9);
}

TEST(GradCheck, EveryOpOverTwentySeeds) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const Segments seg = Segments::from_sizes(std::vector<Index>{2, 1, 3});
    const Matrix w = randn(6, 4, rng);
    const Tensor wt(w);
    auto check = [&](const char* name, auto&& f, const Matrix& at) {
      const double err = grad_check([&](const Tensor& t) { return sum(mul(f(t), wt)); }, Tensor(at));
      EXPECT_LT(err, 1e-4) << name << " seed " << seed;
    };
    Matrix x = randn(6, 4, rng);
    Matrix away = x.unaryExpr([](double v) { return v >= 0 ? v + 0.1 : v - 0.1; });
    const Tensor other(randn(4, 4, rng));
    const Tensor row(randn(1, 4, rng));
    const Tensor den(away);
    check("matmul", [&](const Tensor& t) { return matmul(t, other); }, x);
    check("matmul_nt", [&](const Tensor& t) { return matmul_nt(t, other); }, x);
    check("add", [&](const Tensor& t) { return add(t, row); }, x);
    check("sub", [&](const Tensor& t) { return sub(t, row); }, x);
    check("mul", [&](const Tensor& t) { return mul(t, t); }, x);
    check("div", [&](const Tensor& t) { return div(t, den); }, x);
    check("div_den", [&](const Tensor& t) { return div(den, t); }, away);
    check("relu", [&](const Tensor& t) { return relu(t); }, away);
    check("sigmoid", [&](const Tensor& t) { return sigmoid(t); }, x);
    check("row_softmax", [&](const Tensor& t) { return row_softmax(t); }, x);
    check("col_softmax", [&](const Tensor& t) { return col_softmax(t); }, x);
    check("segment_col_softmax", [&](const Tensor& t) { return segment_col_softmax(t, seg); }, x);
    check("row_l1_normalize", [&](const Tensor& t) { return row_l1_normalize(t, 1e-12); },
          Matrix(x.array().exp().matrix()));
    check("layer_norm", [&](const Tensor& t) { return layer_norm(t, row, row); }, x);
    check("concat_slice", [&](const Tensor& t) {
      return concat_cols(std::vector<Tensor>{slice_cols(t, 2, 4), slice_cols(t, 0, 2)});
    }, x);
    const std::vector<Index> perm{5, 0, 3, 3, 1, 2};
    check("gather_scatter", [&](const Tensor& t) { return scatter_add_rows(gather_rows(t, perm), perm, 6); }, x);
    const std::vector<Index> to{1, 1, 4, 0, 5, 5};
    const std::vector<double> arc_w{0.5, -1.0, 2.0, 0.25, 1.5, -0.75};
    check("propagate", [&](const Tensor& t) { return propagate(t, perm, to, arc_w, 6); }, x);
    check("segment_attention", [&](const Tensor& t) { return segment_attention(t, t, t, seg, 0.5); }, x);
    const Tensor seg_w(randn(3, 4, rng));
    const double err =
        grad_check([&](const Tensor& t) { return sum(mul(segment_mean(t, seg), seg_w)); }, Tensor(x));
    EXPECT_LT(err, 1e-4) << "segment_mean seed " << seed;
  }
}

TEST(NoGrad, RecordsNothing) {
  Tensor x = Tensor::zeros(2, 2, true);
  {
    NoGradGuard guard;
    Tensor y = add_scalar(x, 1.0);
    EXPECT_FALSE(y.requires_grad());
  }
  EXPECT_EQ(Tape::current().size(), 0u);
  EXPECT_TRUE(grad_enabled());
}

TEST(CorruptedBackward, IsDetected) {
  std::mt19937_64 rng(9);
  const Tensor x(randn(3, 3, rng));
  auto f = [](const Tensor& t) { return sum(mul(sigmoid(t), t)); };
  geaet::testing::set_corrupted_backward("sigmoid");
  const double bad = grad_check(f, x);
  geaet::testing::set_corrupted_backward("");
  EXPECT_GT(bad, 1e-3);
  EXPECT_LT(grad_check(f, x), 1e-6);
}
