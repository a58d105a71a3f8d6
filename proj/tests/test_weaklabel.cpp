#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pairsift/rng.hpp"
#include "pairsift/weaklabel.hpp"
#include "oracles.hpp"

#include <filesystem>

using namespace pairsift;

namespace {

Vector make_scores(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

ScoreTable one_column(const OperatorId& op, const Vector& scores) {
  ScoreTable t;
  t.operator_ids = {op};
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    t.sample_ids.push_back("s" + std::to_string(i));
  }
  t.cells = scores;
  t.rebuild_index();
  return t;
}

LabelMatrix matrix_from(std::initializer_list<std::initializer_list<int>> rows) {
  LabelMatrix m;
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto cols = static_cast<Eigen::Index>(rows.begin()->size());
  m.cells.resize(n, cols);
  Eigen::Index r = 0;
  for (const auto& row : rows) {
    Eigen::Index c = 0;
    for (int v : row) m.cells(r, c++) = static_cast<std::int8_t>(v);
    m.sample_ids.push_back("s" + std::to_string(r));
    ++r;
  }
  for (Eigen::Index c = 0; c < cols; ++c) {
    m.lf_specs.push_back({"op" + std::to_string(c), 0.0, 0.0});
  }
  return m;
}

constexpr int K = 1, D = 0, A = -1;

}  // namespace

TEST_CASE("apply_lf implements the three-case boundary rule") {
  const LFSpec spec{"clip", 0.50, 0.20};
  const Vector scores = make_scores({0.82, 0.70, 0.55, 0.30, kMissing});
  const LabelColumn out = apply_lf(spec, scores);
  CHECK(out(0) == K);   // 0.82 >= 0.70
  CHECK(out(1) == K);   // boundary inclusive
  CHECK(out(2) == A);   // inside the band
  CHECK(out(3) == D);   // 0.30 <= 0.30
  CHECK(out(4) == A);   // missing
}

TEST_CASE("apply_lf rejects invalid specs") {
  CHECK_THROWS_AS(apply_lf({"x", 0.0, -0.1}, make_scores({0.0})),
                  std::invalid_argument);
  CHECK_THROWS_AS(apply_lf({"x", std::numeric_limits<double>::infinity(), 0.0},
                           make_scores({0.0})),
                  std::invalid_argument);
}

TEST_CASE("apply_lf partitions the real line and is monotone") {
  SplitMix64 rng(11);
  for (int t = 0; t < 200; ++t) {
    const double b = -2.0 + 4.0 * rng.uniform();
    const double beta = (t % 5 == 0) ? 0.0 : rng.uniform();
    const LFSpec spec{"x", b, beta};
    // Include exact boundary points in the probe set.
    const Vector scores =
        make_scores({b - beta - 1.0, b - beta, b, b + beta, b + beta + 1.0,
                     -5.0 + 10.0 * rng.uniform()});
    const LabelColumn out = apply_lf(spec, scores);
    for (Eigen::Index i = 0; i < out.size(); ++i) {
      CHECK((out(i) == K || out(i) == D || out(i) == A));  // exactly one label
      if (beta == 0.0) CHECK(out(i) != A);  // no abstain band
    }
    // Monotone: sort scores ascending, labels never go Keep -> Drop.
    std::vector<double> sorted(scores.data(), scores.data() + scores.size());
    std::sort(sorted.begin(), sorted.end());
    bool seen_keep = false;
    for (double s : sorted) {
      const LabelColumn one = apply_lf(spec, make_scores({s}));
      if (one(0) == K) seen_keep = true;
      if (seen_keep) CHECK(one(0) != D);
    }
  }
}

TEST_CASE("generate_candidates nearest-rank boundaries") {
  Vector ladder(100);
  for (int i = 0; i < 100; ++i) ladder(i) = i + 1;  // scores 1..100
  const ScoreTable t = one_column("clip", ladder);

  SUBCASE("K = 40 puts the boundary at 60") {
    const LFCandidateGrid grid = generate_candidates(t, {40}, {0.0});
    REQUIRE(grid.candidates[0].size() == 1);
    CHECK(grid.candidates[0][0].b == 60.0);
    CHECK(grid.candidates[0][0].beta == 0.0);
  }
  SUBCASE("K = 20 puts the boundary at 80") {
    const LFCandidateGrid grid = generate_candidates(t, {20}, {0.0});
    CHECK(grid.candidates[0][0].b == 80.0);
  }
  SUBCASE("beta is a fraction of the population standard deviation") {
    const LFCandidateGrid grid = generate_candidates(t, {50}, {0.5});
    // pop std of 1..100
    double mean = 50.5, var = 0.0;
    for (int i = 1; i <= 100; ++i) var += (i - mean) * (i - mean);
    const double stddev = std::sqrt(var / 100.0);
    CHECK(grid.candidates[0][0].beta == doctest::Approx(0.5 * stddev));
  }
  SUBCASE("candidate count is |topk| x |beta| per operator") {
    const LFCandidateGrid grid = generate_candidates(t, {50}, {0.0, 0.25});
    CHECK(grid.candidates[0].size() == 2);
    // With 3 operators this grid would offer (2+1)^3 = 27 combinations.
  }
  SUBCASE("K outside (0, 100) is rejected") {
    CHECK_THROWS_AS(generate_candidates(t, {0}, {0.0}), std::invalid_argument);
    CHECK_THROWS_AS(generate_candidates(t, {100}, {0.0}), std::invalid_argument);
  }
}

TEST_CASE("generate_candidates matches the counting quantile oracle") {
  SplitMix64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(300));
    Vector scores(n);
    std::vector<double> present;
    for (int i = 0; i < n; ++i) {
      scores(i) = std::floor(rng.uniform() * 50.0);  // ties are common
      present.push_back(scores(i));
    }
    const ScoreTable t = one_column("op", scores);
    for (int k : {20, 30, 40, 50, 60, 70, 80, 99, 1}) {
      const LFCandidateGrid grid = generate_candidates(t, {k}, {0.0});
      CHECK(grid.candidates[0][0].b == oracles::topk_boundary(present, k));
    }
  }
}

TEST_CASE("generate_candidates skips missing cells and rejects empty columns") {
  Vector scores = make_scores({kMissing, 2.0, 4.0, kMissing});
  const ScoreTable t = one_column("op", scores);
  const LFCandidateGrid grid = generate_candidates(t, {50}, {0.0});
  CHECK(grid.candidates[0][0].b == 2.0);  // quantile over {2, 4}

  const ScoreTable all_missing =
      one_column("op", make_scores({kMissing, kMissing}));
  CHECK_THROWS_WITH_AS(generate_candidates(all_missing, {50}, {0.0}),
                       doctest::Contains("op"), std::runtime_error);
}

TEST_CASE("build_matrix") {
  const ScoreTable t = one_column("clip", make_scores({0.9, 0.1, 0.5}));
  SUBCASE("single LF column") {
    const LabelMatrix m = build_matrix({{"clip", 0.5, 0.2}}, t);
    REQUIRE(m.rows() == 3);
    REQUIRE(m.cols() == 1);
    CHECK(m.cells(0, 0) == K);
    CHECK(m.cells(1, 0) == D);
    CHECK(m.cells(2, 0) == A);
  }
  SUBCASE("LF on an all-missing column abstains everywhere") {
    const ScoreTable missing = one_column("clip", make_scores({kMissing, kMissing}));
    const LabelMatrix m = build_matrix({{"clip", 0.5, 0.0}}, missing);
    CHECK(m.cells(0, 0) == A);
    CHECK(m.cells(1, 0) == A);
  }
  SUBCASE("unknown operator is an error") {
    CHECK_THROWS_WITH_AS(build_matrix({{"nope", 0.5, 0.0}}, t),
                         doctest::Contains("nope"), std::runtime_error);
  }
}

TEST_CASE("diagnostics on hand-enumerated matrices") {
  SUBCASE("coverage 2/3, overlap 1/3, no conflict") {
    const Diagnostics d = diagnostics(matrix_from({{K, K}, {K, A}, {A, A}}));
    CHECK(d.coverage == doctest::Approx(2.0 / 3.0));
    CHECK(d.overlap == doctest::Approx(1.0 / 3.0));
    CHECK(d.conflict == 0.0);
  }
  SUBCASE("single disagreeing row") {
    const Diagnostics d = diagnostics(matrix_from({{K, D}}));
    CHECK(d.coverage == 1.0);
    CHECK(d.overlap == 1.0);
    CHECK(d.conflict == 1.0);
  }
  SUBCASE("all abstain") {
    const Diagnostics d = diagnostics(matrix_from({{A, A}, {A, A}}));
    CHECK(d.coverage == 0.0);
    CHECK(d.overlap == 0.0);
    CHECK(d.conflict == 0.0);
  }
  SUBCASE("zero rows is an error") {
    LabelMatrix empty;
    empty.cells.resize(0, 2);
    empty.lf_specs = {{"a", 0, 0}, {"b", 0, 0}};
    CHECK_THROWS_AS(diagnostics(empty), std::invalid_argument);
  }
  SUBCASE("agreeing votes overlap without conflicting") {
    const Diagnostics d = diagnostics(matrix_from({{D, D}}));
    CHECK(d.overlap == 1.0);
    CHECK(d.conflict == 0.0);
  }
}

TEST_CASE("diagnostics equals the row-scan oracle exactly on random matrices") {
  SplitMix64 rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(50));
    const int m = 1 + static_cast<int>(rng.below(8));
    LabelMatrix matrix;
    matrix.cells.resize(n, m);
    for (int i = 0; i < n; ++i) {
      matrix.sample_ids.push_back("s" + std::to_string(i));
      for (int j = 0; j < m; ++j) {
        const std::uint64_t v = rng.below(3);
        matrix.cells(i, j) = static_cast<std::int8_t>(v == 2 ? -1 : v);
      }
    }
    for (int j = 0; j < m; ++j) matrix.lf_specs.push_back({"op", 0, 0});

    const Diagnostics got = diagnostics(matrix);
    const oracles::DiagCounts want = oracles::diagnostics_brute_force(matrix);
    CHECK(got.coverage == want.coverage);
    CHECK(got.overlap == want.overlap);
    CHECK(got.conflict == want.conflict);
    for (int j = 0; j < m; ++j) {
      CHECK(got.per_lf[j].coverage == want.lf_coverage[j]);
      CHECK(got.per_lf[j].overlap == want.lf_overlap[j]);
      CHECK(got.per_lf[j].conflict == want.lf_conflict[j]);
    }
    // Invariant chain.
    CHECK(got.conflict <= got.overlap);
    CHECK(got.overlap <= got.coverage);
  }
}

TEST_CASE("diagnostics global values are permutation invariant") {
  SplitMix64 rng(5);
  LabelMatrix matrix = matrix_from({{K, D, A}, {K, K, K}, {A, D, A}, {D, D, K}});
  const Diagnostics base = diagnostics(matrix);

  // Shuffle rows.
  LabelMatrix rows = matrix;
  std::vector<Eigen::Index> perm = {2, 0, 3, 1};
  for (std::size_t i = 0; i < perm.size(); ++i) {
    rows.cells.row(static_cast<Eigen::Index>(i)) = matrix.cells.row(perm[i]);
  }
  const Diagnostics variant = diagnostics(rows);
  CHECK(variant.coverage == base.coverage);
  CHECK(variant.overlap == base.overlap);
  CHECK(variant.conflict == base.conflict);

  // Shuffle columns.
  LabelMatrix cols = matrix;
  std::vector<Eigen::Index> cperm = {1, 2, 0};
  for (std::size_t j = 0; j < cperm.size(); ++j) {
    cols.cells.col(static_cast<Eigen::Index>(j)) = matrix.cells.col(cperm[j]);
  }
  const Diagnostics colvar = diagnostics(cols);
  CHECK(colvar.coverage == base.coverage);
  CHECK(colvar.overlap == base.overlap);
  CHECK(colvar.conflict == base.conflict);
}

TEST_CASE("label matrix CSV round trip") {
  const LabelMatrix m = matrix_from({{K, D}, {A, K}});
  const auto path =
      std::filesystem::temp_directory_path() / "pairsift_label_matrix.csv";
  write_label_matrix(m, path);
  const LabelMatrix back = load_label_matrix(path);
  REQUIRE(back.rows() == 2);
  REQUIRE(back.cols() == 2);
  CHECK(back.cells == m.cells);
  CHECK(back.sample_ids == m.sample_ids);
  CHECK(back.lf_specs[0].op == "op0");
  CHECK(back.lf_specs[1].op == "op1");
}
