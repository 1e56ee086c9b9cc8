#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <vector>

#include "femimpute/errors.hpp"
#include "femimpute/init_select.hpp"
#include "femimpute/masked_data.hpp"
#include "femimpute/rng.hpp"
#include "femimpute/synthgen.hpp"

using namespace femimpute;

namespace {

// Two clusters at +-center with iid noise, alternating rows.
Eigen::MatrixXd two_clusters(Eigen::Index n, int m, double center, double sd, Rng& rng) {
  Eigen::MatrixXd v(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) v(i, j) = (i % 2 ? center : -center) + sd * rng.normal();
  return v;
}

}  // namespace

TEST_CASE("mean fill replaces missing cells with observed column means") {
  Eigen::MatrixXd v(4, 3);
  v << 1.0, 10.0, 5.0,  //
      3.0, 0.0, 7.0,    //
      0.0, 20.0, 0.0,   //
      5.0, 30.0, 9.0;
  BoolArray obs = BoolArray::Constant(4, 3, true);
  obs(1, 1) = false;
  obs(2, 0) = false;
  obs(2, 2) = false;
  const Eigen::MatrixXd filled = mean_fill(MaskedDataset(v, obs));
  CHECK(filled(1, 1) == 20.0);
  CHECK(filled(2, 0) == 3.0);
  CHECK(filled(2, 2) == 7.0);
  // Observed cells pass through untouched.
  for (Eigen::Index i = 0; i < 4; ++i)
    for (Eigen::Index j = 0; j < 3; ++j)
      if (obs(i, j)) CHECK(filled(i, j) == v(i, j));

  SUBCASE("identity on complete data") {
    Rng rng(8);
    Eigen::MatrixXd c(6, 2);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 2; ++j) c(i, j) = rng.normal();
    CHECK(mean_fill(MaskedDataset::from_complete(c)) == c);
  }
  SUBCASE("a column with no observed cells is an error") {
    Eigen::MatrixXd w = Eigen::MatrixXd::Ones(2, 2);
    BoolArray mask = BoolArray::Constant(2, 2, true);
    mask(0, 1) = false;
    mask(1, 1) = false;
    CHECK_THROWS_AS(mean_fill(MaskedDataset(w, mask)), EmptyColumn);
  }
}

TEST_CASE("parameter counting and the information criterion") {
  // (k - 1) weights + k*m means + k*m(m+1)/2 symmetric matrices.
  CHECK(mixture_param_count(1, 4) == 14);
  CHECK(mixture_param_count(2, 3) == 19);
  CHECK(mixture_param_count(3, 10) == 197);
  CHECK(bic(-100.0, 5, 50) ==
        doctest::Approx(200.0 + 5.0 * std::log(50.0)).epsilon(1e-15));
  // Better likelihood lowers the criterion, more parameters raise it.
  CHECK(bic(-90.0, 5, 50) < bic(-100.0, 5, 50));
  CHECK(bic(-100.0, 9, 50) > bic(-100.0, 5, 50));
}

TEST_CASE("k-means initialization recovers separated clusters") {
  Rng rng(31);
  const Eigen::MatrixXd data = two_clusters(200, 3, 4.0, 1.0, rng);
  const MixtureModel model = kmeans_init(data, InitPlan{2, 11});
  CHECK_NOTHROW(model.validate());
  CHECK(std::abs(model.weights.sum() - 1.0) < 1e-12);
  CHECK(std::abs(model.weights(0) - 0.5) < 0.05);
  const int lo = model.means[0](0) < model.means[1](0) ? 0 : 1;
  CHECK((model.means[lo] - Eigen::VectorXd::Constant(3, -4.0)).cwiseAbs().maxCoeff() < 0.5);
  CHECK((model.means[1 - lo] - Eigen::VectorXd::Constant(3, 4.0)).cwiseAbs().maxCoeff() < 0.5);
  // Elliptical scatters are reported at the canonical trace m.
  for (const auto& s : model.scatters) CHECK(std::abs(s.trace() - 3.0) < 1e-9);

  SUBCASE("the Gaussian variant keeps the within-cluster scale") {
    Rng rng2(32);
    const Eigen::MatrixXd tight = two_clusters(200, 3, 4.0, 0.5, rng2);
    const GaussianMixtureModel g = kmeans_init_gaussian(tight, InitPlan{2, 11});
    CHECK_NOTHROW(g.validate());
    // Noise sd 0.5 per coordinate puts each trace near 0.75, far from
    // the normalized value 3.
    for (const auto& c : g.covariances) {
      CHECK(c.trace() > 0.4);
      CHECK(c.trace() < 1.2);
    }
  }
  SUBCASE("identical plans give bit-identical models") {
    const MixtureModel again = kmeans_init(data, InitPlan{2, 11});
    CHECK(again.weights == model.weights);
    for (int k = 0; k < 2; ++k) {
      CHECK(again.means[k] == model.means[k]);
      CHECK(again.scatters[k] == model.scatters[k]);
    }
  }
}

TEST_CASE("initialization guards reject degenerate inputs") {
  Rng rng(33);
  Eigen::MatrixXd data(6, 2);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 2; ++j) data(i, j) = rng.normal();

  CHECK_THROWS_AS(kmeans_init(data, InitPlan{0, 1}), UsageError);
  CHECK_THROWS_AS(kmeans_init(data, InitPlan{6, 1}), DegenerateClustering);
  CHECK_THROWS_AS(kmeans_init_gaussian(data, InitPlan{7, 1}), DegenerateClustering);

  Eigen::MatrixXd bad = data;
  bad(2, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(kmeans_init(bad, InitPlan{1, 1}), DimensionMismatch);

  SUBCASE("duplicated rows cannot support two clusters") {
    const Eigen::MatrixXd same = Eigen::MatrixXd::Ones(10, 3);
    CHECK_THROWS_AS(kmeans_init(same, InitPlan{2, 5}), DegenerateClustering);
  }
  SUBCASE("a single zero-spread cluster falls back to the identity scatter") {
    const Eigen::MatrixXd same = Eigen::MatrixXd::Constant(10, 3, 2.0);
    const MixtureModel model = kmeans_init(same, InitPlan{1, 5});
    CHECK(model.weights(0) == 1.0);
    CHECK(model.means[0] == Eigen::VectorXd::Constant(3, 2.0));
    CHECK(model.scatters[0] == Eigen::MatrixXd::Identity(3, 3));
  }
}

TEST_CASE("zero-spread cluster gets a spherical covariance in the Gaussian init") {
  Rng rng(34);
  Eigen::MatrixXd data(40, 3);
  for (int i = 0; i < 20; ++i) data.row(i).setZero();
  for (int i = 20; i < 40; ++i)
    for (int j = 0; j < 3; ++j) data(i, j) = 10.0 + rng.normal();
  const GaussianMixtureModel g = kmeans_init_gaussian(data, InitPlan{2, 7});
  CHECK_NOTHROW(g.validate());
  const int zero = g.means[0].cwiseAbs().maxCoeff() < 1.0 ? 0 : 1;
  const Eigen::MatrixXd& c = g.covariances[static_cast<std::size_t>(zero)];
  // Spherical fallback scaled by the global per-column variance.
  CHECK(c.isDiagonal(0.0));
  CHECK(c(0, 0) == c(1, 1));
  CHECK(c(1, 1) == c(2, 2));
  CHECK(c(0, 0) > 1.0);
}

TEST_CASE("order selection recovers the planted component count") {
  SyntheticSpec sp;
  sp.n = 400;
  sp.m = 5;
  sp.k = 3;
  sp.family = Family::gaussian;
  sp.seed = 4242;
  const Dataset ds = generate_dataset(sp);
  const MaskedDataset data = MaskedDataset::from_complete(ds.values);

  const SelectionResult rg = select_k(data, 1, 5, FitMethod::gmm, 99);
  CHECK(rg.candidates == std::vector<int>{1, 2, 3, 4, 5});
  CHECK(rg.bics.size() == 5);
  CHECK(rg.chosen_k == 3);
  double best = std::numeric_limits<double>::infinity();
  int arg = 0;
  for (std::size_t i = 0; i < rg.bics.size(); ++i)
    if (std::isfinite(rg.bics[i]) && rg.bics[i] < best) {
      best = rg.bics[i];
      arg = rg.candidates[i];
    }
  CHECK(arg == rg.chosen_k);

  SUBCASE("the elliptical fitter never prefers fewer components here") {
    const SelectionResult rf = select_k(data, 1, 5, FitMethod::fem, 99);
    CHECK(rf.chosen_k >= 3);
  }
  SUBCASE("selection is deterministic") {
    const SelectionResult again = select_k(data, 1, 5, FitMethod::gmm, 99);
    CHECK(again.chosen_k == rg.chosen_k);
    CHECK(again.bics == rg.bics);
  }
}

TEST_CASE("order selection records infeasible candidates as NaN") {
  Rng rng(35);
  Eigen::MatrixXd v(8, 3);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 3; ++j) v(i, j) = rng.normal();
  const MaskedDataset data = MaskedDataset::from_complete(v);
  const SelectionResult res = select_k(data, 1, 9, FitMethod::gmm, 7);
  CHECK(res.bics.size() == 9);
  // k = 8 and k = 9 cannot be clustered on 8 rows.
  CHECK(std::isnan(res.bics[7]));
  CHECK(std::isnan(res.bics[8]));
  CHECK(res.chosen_k >= 1);
  CHECK(res.chosen_k <= 7);
  CHECK(std::isfinite(res.bics[static_cast<std::size_t>(res.chosen_k - 1)]));

  SUBCASE("invalid ranges are usage errors") {
    CHECK_THROWS_AS(select_k(data, 0, 3, FitMethod::gmm, 7), UsageError);
    CHECK_THROWS_AS(select_k(data, 3, 2, FitMethod::gmm, 7), UsageError);
  }
  SUBCASE("every candidate failing is reported as such") {
    Eigen::MatrixXd tiny(3, 2);
    tiny << 0.0, 1.0, 2.0, 3.0, 4.0, 5.0;
    const MaskedDataset small = MaskedDataset::from_complete(tiny);
    CHECK_THROWS_AS(select_k(small, 3, 5, FitMethod::gmm, 7), SelectionFailed);
  }
}
