#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "latcap/error.hpp"
#include "latcap/model.hpp"
#include "latcap/sim.hpp"

using namespace latcap;

namespace {

double logit(double p) { return std::log(p / (1 - p)); }

}  // namespace

TEST_SUITE("model") {
  TEST_CASE("history matrix") {
    const Eigen::MatrixXd h = build_history_matrix(3);
    CHECK(h.rows() == 8);
    CHECK(h.row(0).sum() == 0);
    CHECK(h.row(4) == Eigen::RowVector3d(1, 0, 0));
    CHECK(h.row(7) == Eigen::RowVector3d(1, 1, 1));
    CHECK_THROWS_AS(build_history_matrix(1), DomainError);
    CHECK_THROWS_AS(build_history_matrix(21), DomainError);
  }

  TEST_CASE("partition classifiers") {
    const Partition cb = partition_captured_before();
    const std::vector<int> empty;
    const std::vector<int> none{0, 0};
    const std::vector<int> once{0, 1, 0};
    CHECK(cb.classify(empty) == 1);
    CHECK(cb.classify(none) == 1);
    CHECK(cb.classify(once) == 2);

    const Partition rp = partition_by_name("example1");
    CHECK(rp.classes == 4);
    const std::vector<int> prev_first{0, 0, 1};
    const std::vector<int> prev_repeat{1, 0, 1};
    const std::vector<int> repeat_not_prev{1, 1, 0};
    const std::vector<int> once_not_prev{1, 0, 0};
    CHECK(rp.classify(empty) == 1);
    CHECK(rp.classify(once_not_prev) == 1);
    CHECK(rp.classify(prev_first) == 2);
    CHECK(rp.classify(repeat_not_prev) == 3);
    CHECK(rp.classify(prev_repeat) == 4);

    const Partition table = partition_table(2, {{"", 1}, {"1", 2}}, 0);
    const std::vector<int> one{1};
    const std::vector<int> zero{0};
    CHECK(table.classify(one) == 2);
    CHECK_THROWS_AS(table.classify(zero), DomainError);
    CHECK_THROWS_AS(partition_by_name("nonsense"), DomainError);
    CHECK_THROWS_AS(partition_table(2, {{"1", 3}}, 0), DomainError);
  }

  TEST_CASE("recursive design identities") {
    // B counts the occasions in each partition class; A counts the captures.
    const Eigen::MatrixXd h = build_history_matrix(4);
    const auto parts = build_partition_matrices(4, partition_captured_before());
    const RecursiveDesign d = build_recursive_design(h, parts);
    CHECK(d.B.rowwise().sum().isApprox(Eigen::VectorXd::Constant(16, 4.0)));
    CHECK(d.A.rowwise().sum().isApprox(h.rowwise().sum()));
    // history 0110: first capture on occasion 2, recapture on 3, miss on 4
    const int r = 0b0110;
    CHECK(d.A(r, 0) == 1);
    CHECK(d.A(r, 1) == 1);
    CHECK(d.B(r, 0) == 2);
    CHECK(d.B(r, 1) == 2);
  }

  TEST_CASE("recursive none equals independent Bernoulli and log-linear main effects") {
    const Eigen::MatrixXd h = build_history_matrix(3);
    const RecursiveDesign rd = build_recursive_design(h, build_partition_matrices(3, partition_none()));
    const double p = 0.3;
    const Eigen::VectorXd q = recursive_probs(rd, Eigen::VectorXd::Constant(1, logit(p)));
    const std::vector<std::pair<int, int>> no_pairs;
    const Eigen::MatrixXd g = build_loglinear_design(h, no_pairs);
    const Eigen::VectorXd q_ll = loglinear_probs(g, Eigen::VectorXd::Constant(3, logit(p)));
    for (int row = 0; row < 8; ++row) {
      const double caught = h.row(row).sum();
      const double expect = std::pow(p, caught) * std::pow(1 - p, 3 - caught);
      CHECK(q[row] == doctest::Approx(expect).epsilon(1e-14));
      CHECK(q_ll[row] == doctest::Approx(expect).epsilon(1e-14));
    }
  }

  TEST_CASE("probabilities are normalized") {
    SplitMix64 rng(3);
    const Eigen::MatrixXd h = build_history_matrix(5);
    const std::vector<std::pair<int, int>> pairs{{0, 1}, {2, 4}};
    const Eigen::MatrixXd g = build_loglinear_design(h, pairs);
    CHECK(g.cols() == 7);
    const RecursiveDesign rd =
        build_recursive_design(h, build_partition_matrices(5, partition_repeat_and_previous()));
    for (int t = 0; t < 10; ++t) {
      CHECK(loglinear_probs(g, testing::random_vector(rng, 7, 3)).sum() == doctest::Approx(1.0));
      const Eigen::VectorXd q = recursive_probs(rd, testing::random_vector(rng, 4, 3));
      CHECK(q.sum() == doctest::Approx(1.0));
      CHECK(q.minCoeff() > 0);
    }
    const std::vector<std::pair<int, int>> self{{0, 0}};
    const std::vector<std::pair<int, int>> dup{{0, 1}, {1, 0}};
    CHECK_THROWS_AS(build_loglinear_design(h, self), DomainError);
    CHECK_THROWS_AS(build_loglinear_design(h, dup), DomainError);
  }

  TEST_CASE("latent weights use class 1 as reference") {
    Eigen::MatrixXd x(3, 2);
    x << 0, 0, 1, 0, 0, 1;
    const Eigen::VectorXd xi = latent_weights(x, Eigen::Vector2d(std::log(2.0), std::log(3.0)));
    CHECK(xi[0] == doctest::Approx(1.0 / 6));
    CHECK(xi[1] == doctest::Approx(2.0 / 6));
    CHECK(xi[2] == doctest::Approx(3.0 / 6));
  }

  TEST_CASE("model dimensions and parameter names") {
    const Model m(testing::spec_from("[model]\nclasses = 2\nfamily = recursive\npartition = "
                                     "captured_before\n[latent]\ncovariates = sex\n"),
                  6, {"sex", "age"});
    CHECK(m.delta_dim() == 2);
    CHECK(m.zeta_dim() == 2);
    CHECK(m.lambda_dim() == 4);
    CHECK(m.beta_dim() == 6);
    const auto names = m.parameter_names();
    CHECK(names[0] == "zeta.class2.intercept");
    CHECK(names[1] == "zeta.class2.sex");
    CHECK(names[2] == "delta.class1.1");
    CHECK(names[5] == "delta.class2.2");
    CHECK_THROWS_AS(Model(m.spec(), 6, {"age"}), DomainError);
  }

  TEST_CASE("restriction matrices") {
    const Model m(testing::spec_from(
                      "[model]\nclasses = 2\nfamily = recursive\npartition = captured_before\n"
                      "lambda = 3\n[restriction]\nclass1.delta1 = l1\nclass1.delta2 = l1 + l3\n"
                      "class2.delta1 = l2 - 0.5*l3*w\nclass2.delta2 = l2\n"),
                  4, {"w"});
    const std::vector<double> x{2.0};
    const Eigen::MatrixXd m1 = m.restriction(0, x);
    const Eigen::MatrixXd m2 = m.restriction(1, x);
    CHECK(m1 == (Eigen::MatrixXd(2, 3) << 1, 0, 0, 1, 0, 1).finished());
    CHECK(m2 == (Eigen::MatrixXd(2, 3) << 0, 1, -1, 0, 1, 0).finished());
  }

  TEST_CASE("manifest probabilities and derivatives on the small-model suite") {
    for (const auto& text : testing::small_model_suite()) {
      CAPTURE(text);
      const SimulationSpec spec = testing::sim_from(text);
      const Model model(spec.model, spec.lists, spec.covariate_names);
      SplitMix64 rng(11);
      const Eigen::VectorXd beta = spec.beta + testing::random_vector(rng, spec.beta.size(), 0.3);
      for (const auto& x : spec.pool) {
        const StratumState st = stratum_state(model, x, beta);
        CHECK(st.p.sum() + st.phi == doctest::Approx(1.0).epsilon(1e-13));
        CHECK(st.xi.sum() == doctest::Approx(1.0).epsilon(1e-13));
        const auto p_of = [&](const Eigen::VectorXd& b) {
          const StratumState s = stratum_state(model, x, b, Derivatives::No);
          Eigen::VectorXd v(s.p.size() + 1);
          v[0] = s.phi;
          v.tail(s.p.size()) = s.p;
          return v;
        };
        const Eigen::MatrixXd num =
            finite_diff(std::function<Eigen::VectorXd(const Eigen::VectorXd&)>(p_of), beta);
        CHECK((st.dphi - num.row(0)).lpNorm<Eigen::Infinity>() <= 1e-8);
        CHECK((st.D - num.bottomRows(num.rows() - 1)).lpNorm<Eigen::Infinity>() <= 1e-8);
      }
    }
  }

  TEST_CASE("multinomial covariance") {
    const Eigen::Vector3d v(0.2, 0.3, 0.5);
    const Eigen::MatrixXd om = multinomial_covariance(v);
    CHECK(om(0, 0) == doctest::Approx(0.16));
    CHECK(om(0, 1) == doctest::Approx(-0.06));
    CHECK(om.rowwise().sum().norm() < 1e-15);
  }

  TEST_CASE("beta of the wrong size") {
    const Model m(testing::spec_from("[model]\nfamily = recursive\n"), 3, {});
    const std::vector<double> x;
    CHECK_THROWS_AS(stratum_state(m, x, Eigen::VectorXd::Zero(2)), DimensionError);
  }
}
