#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "latcap/inference.hpp"

using namespace latcap;

namespace {

const char* kCoverageSpec =
    "[model]\nclasses = 1\nfamily = recursive\npartition = none\nlambda = 2\n"
    "[restriction]\nclass1.delta1 = l1 + l2*x\n"
    "[truth]\nlists = 4\nlambda = -1.0, 0.8\n"
    "[pool]\ncovariates = x\nentry = 0 @ 1\nentry = 1 @ 1\nentry = 2 @ 1\n";

struct Fitted {
  SimulationSpec spec;
  Model model;
  Dataset data;
  FitResult fit;
};

Fitted fitted(const char* text, int n_true, std::uint64_t seed) {
  SimulationSpec spec = testing::sim_from(text);
  Model model(spec.model, spec.lists, spec.covariate_names);
  Dataset data = testing::simulate(spec, model, n_true, seed);
  FitResult f = latcap::fit(data, model);
  return {spec, model, data, f};
}

}  // namespace

TEST_SUITE("inference") {
  TEST_CASE("chi-square quantile") {
    CHECK(chi_square_quantile(0.95) == doctest::Approx(3.841458820694124).epsilon(1e-12));
    CHECK_THROWS_AS(chi_square_quantile(1.0), DomainError);
  }

  TEST_CASE("profile information agrees with the observed information") {
    const Fitted f = fitted(kCoverageSpec, 400, 2);
    REQUIRE(f.fit.converged);
    const InfoMatrices info = profile_expected_info(f.fit, f.data);
    CHECK(info.positive_definite);
    CHECK(info.F_Nb.isZero());
    const double phi = average_phi(f.fit.params.tau, f.fit.state);
    CHECK(info.F_NN == doctest::Approx((1 - phi) / phi));
    CHECK(info.se_N == doctest::Approx(std::sqrt(f.fit.params.N * phi / (1 - phi))));
    const Eigen::MatrixXd observed = profile_observed_info_beta(f.fit, f.model, f.data);
    const Eigen::MatrixXd expected = f.fit.params.N * info.F_bb;
    // equal up to the sampling noise of the observed information
    CHECK((observed - expected).norm() <= 0.05 * expected.norm());
    REQUIRE(info.se_beta.size() == 2);
    CHECK(info.se_beta.minCoeff() > 0);
  }

  TEST_CASE("F_bb reduces to the expected information with one stratum") {
    const Fitted f = fitted(
        "[model]\nclasses = 1\nfamily = recursive\npartition = captured_before\n"
        "[truth]\nlists = 5\nlambda = -1, 0.5\n",
        300, 6);
    const Eigen::MatrixXd a = profile_info_beta(f.fit.params, f.fit.state, f.data);
    const Eigen::MatrixXd b = expected_info_beta(f.fit.params, f.fit.state) / f.fit.params.N;
    CHECK((a - b).lpNorm<Eigen::Infinity>() <= 1e-10 * b.lpNorm<Eigen::Infinity>());
  }

  TEST_CASE("profile interval") {
    const Fitted f = fitted(kCoverageSpec, 300, 7);
    REQUIRE(f.fit.converged);
    const ProfileCI ci = profile_ci_N(f.data, f.model, f.fit);
    CHECK(ci.lower <= f.fit.params.N);
    CHECK(ci.upper >= f.fit.params.N);
    CHECK(ci.lower >= f.data.total);
    CHECK_FALSE(ci.unbounded_above);
    for (const auto& pt : ci.grid) CHECK(pt.deviance >= -1e-7);
    const auto deviance_at = [&](double N) {
      for (const auto& pt : ci.grid) {
        if (pt.N == N) return pt.deviance;
      }
      return -1.0;
    };
    if (!ci.lower_at_boundary) CHECK(std::abs(deviance_at(ci.lower) - ci.quantile) <= 1e-3);
    CHECK(std::abs(deviance_at(ci.upper) - ci.quantile) <= 1e-3);
    // wider at 99%
    const ProfileCI wide = profile_ci_N(f.data, f.model, f.fit, 0.99);
    CHECK(wide.upper > ci.upper);
    CHECK(wide.lower <= ci.lower);
  }

  TEST_CASE("lower end floored at n") {
    const Model model(testing::spec_from("[model]\nfamily = recursive\n"), 3, {});
    std::vector<CaptureRecord> recs;
    for (int t = 0; t < 15; ++t) recs.push_back({{1, 1, 1}, {}});
    for (int t = 0; t < 3; ++t) recs.push_back({{1, 0, 1}, {}});
    recs.push_back({{0, 0, 1}, {}});
    const Dataset data = stratify(recs, 3);
    const FitResult f = fit(data, model);
    const ProfileCI ci = profile_ci_N(data, model, f);
    CHECK(ci.lower_at_boundary);
    CHECK(ci.lower == data.total);
    CHECK(ci.upper > f.params.N);
  }

  TEST_CASE("identifiability flags a duplicated lambda column") {
    const char* dup =
        "[model]\nclasses = 1\nfamily = recursive\npartition = none\nlambda = 3\n"
        "[restriction]\nclass1.delta1 = l1 + l2*x + l3*x\n"
        "[truth]\nlists = 4\nlambda = -1.0, 0.4, 0.4\n"
        "[pool]\ncovariates = x\nentry = 0 @ 1\nentry = 1 @ 1\n";
    const Fitted bad = fitted(dup, 300, 1);
    const IdentifiabilityReport r = identifiability_check(bad.fit, bad.model, bad.data, 10, 0.2);
    CHECK(r.flagged_count() == 10);
    CHECK_FALSE(r.ok());

    const Fitted good = fitted(kCoverageSpec, 300, 1);
    const IdentifiabilityReport ok = identifiability_check(good.fit, good.model, good.data, 10, 0.2);
    CHECK(ok.ok());
    CHECK(ok.min_eigen.size() == 10);
  }

  TEST_CASE("KL divergence between fits") {
    const Fitted a = fitted(kCoverageSpec, 300, 3);
    CHECK(kl_by_strata(a.fit, a.fit) == doctest::Approx(0.0));
    FitResult shifted = a.fit;
    shifted.state = model_state(a.model, a.data, a.fit.params.beta + Eigen::Vector2d(0.3, 0));
    const auto parts = kl_contributions(a.fit, shifted);
    CHECK(parts.size() == static_cast<std::size_t>(a.data.size()));
    double total = 0;
    for (double v : parts) {
      CHECK(v >= 0);
      total += v;
    }
    CHECK(total > 0);
    CHECK(kl_by_strata(a.fit, shifted) == doctest::Approx(total));
  }

  TEST_CASE("derivative checks pass at the estimate and elsewhere") {
    const Fitted f = fitted(kCoverageSpec, 300, 3);
    for (const auto& c : derivative_checks(f.data, f.model, f.fit.params)) {
      CAPTURE(c.name);
      CHECK(c.pass);
    }
    Params off = f.fit.params;
    off.beta += Eigen::Vector2d(0.2, -0.3);
    const auto checks = derivative_checks(f.data, f.model, off);
    CHECK(checks.size() == 5);
    for (const auto& c : checks) CHECK(c.pass);
  }
}
