#include <doctest.h>

#include "helpers.hpp"
#include "latcap/error.hpp"
#include "latcap/sim.hpp"
#include "latcap/tau.hpp"

using namespace latcap;

namespace {

struct Instance {
  Eigen::VectorXd phi;
  Eigen::VectorXd counts;
  double N;
};

Instance random_instance(SplitMix64& rng, int s, bool ties) {
  Instance in;
  in.phi.resize(s);
  in.counts.resize(s);
  for (int i = 0; i < s; ++i) {
    in.phi[i] = 0.02 + 0.9 * rng.uniform();
    in.counts[i] = ties ? 1 + static_cast<int>(6 * rng.uniform()) : 1;
  }
  const double n = in.counts.sum();
  in.N = n * (1.0 + 4.0 * rng.uniform());
  return in;
}

}  // namespace

TEST_SUITE("tau") {
  TEST_CASE("solution satisfies the hyperbola and implicit equations") {
    SplitMix64 rng(21);
    for (bool ties : {false, true}) {
      for (int t = 0; t < 50; ++t) {
        const Instance in = random_instance(rng, 2 + t % 17, ties);
        const TauSolution sol = solve_tau(in.phi, in.N, in.counts);
        CHECK(sol.tau.sum() == doctest::Approx(1.0).epsilon(1e-13));
        CHECK(hyperbola_residual(sol.tau, in.phi, in.N, in.counts) <= 1e-10);
        CHECK(implicit_residual(sol.tau, in.phi, in.N, in.counts) <= 1e-10);
        for (Eigen::Index i = 0; i < sol.tau.size(); ++i) CHECK(sol.tau[i] >= in.counts[i] / in.N - 1e-15);
        // update_tau leaves the solution fixed
        CHECK((update_tau(sol.tau, in.phi, in.N, in.counts) - sol.tau).lpNorm<1>() <= 1e-11);
      }
    }
  }

  TEST_CASE("plain iteration reaches the same point") {
    SplitMix64 rng(5);
    for (int t = 0; t < 10; ++t) {
      const Instance in = random_instance(rng, 6, t % 2 == 0);
      const TauSolution a = solve_tau(in.phi, in.N, in.counts);
      const TauSolution b = solve_tau_fixed_point(in.phi, in.N, in.counts, 1e-14, 1000000);
      CHECK((a.tau - b.tau).lpNorm<Eigen::Infinity>() <= 1e-9);
    }
  }

  TEST_CASE("N equal to n gives counts over n") {
    const Eigen::Vector3d phi(0.2, 0.5, 0.7);
    const Eigen::Vector3d counts(1, 2, 3);
    const TauSolution sol = solve_tau(phi, 6, counts);
    CHECK(sol.tau.isApprox(counts / 6));
    CHECK(update_tau(Eigen::Vector3d(0.5, 0.25, 0.25), phi, 6, counts).isApprox(counts / 6));
  }

  TEST_CASE("Jacobian matches finite differences with and without ties") {
    SplitMix64 rng(8);
    for (bool ties : {false, true}) {
      for (int t = 0; t < 10; ++t) {
        const Instance in = random_instance(rng, 3 + t, ties);
        const TauSolution sol = solve_tau(in.phi, in.N, in.counts);
        const TauJacobian jac = tau_jacobian(sol.tau, in.phi, in.N, in.counts);
        const auto f = [&](const Eigen::VectorXd& phi) {
          return Eigen::VectorXd(solve_tau(phi, in.N, in.counts).tau);
        };
        const Eigen::MatrixXd num =
            finite_diff(std::function<Eigen::VectorXd(const Eigen::VectorXd&)>(f), in.phi, 1e-6);
        CHECK((jac.Dphi - num).lpNorm<Eigen::Infinity>() <=
              1e-6 * std::max(1.0, num.lpNorm<Eigen::Infinity>()));
        // columns of D_phi sum to zero since tau stays on the simplex
        CHECK(jac.Dphi.colwise().sum().lpNorm<Eigen::Infinity>() <= 1e-10);
      }
    }
  }

  TEST_CASE("conditional weights") {
    const Eigen::Vector2d phi(0.5, 0.75);
    const Eigen::Vector2d counts(1, 1);
    const Eigen::VectorXd t = conditional_tau(phi, counts);
    CHECK(t[0] == doctest::Approx(2.0 / 6));
    CHECK(t[1] == doctest::Approx(4.0 / 6));
  }

  TEST_CASE("input checks") {
    const Eigen::Vector2d counts(1, 1);
    CHECK_THROWS_AS(solve_tau(Eigen::Vector2d(0.5, 1.0), 3, counts), DomainError);
    CHECK_THROWS_AS(solve_tau(Eigen::Vector2d(0.5, 0.5), 1, counts), DomainError);
    CHECK_THROWS_AS(solve_tau(Eigen::Vector2d(0.5, 0.5), 3, Eigen::Vector2d(1, 0)), DomainError);
  }
}
