// Solves a small ball-constrained quadratic with full and adaptive sampling
// and prints the final gap of each.
#include <adaprox/experiment.hpp>

#include <iostream>

int main() {
  using namespace adaprox;
  auto problem = generate_quadratic(10, 2000, 100.0, 7);
  const auto ref = compute_reference(problem);
  problem.reference_optimum = ref.phi_star;

  const double L = problem.smooth->smoothness();
  const double mu = problem.smooth->strong_convexity();

  AdaptiveUnbiased adaptive;
  adaptive.condition.eta = EtaSchedule::constant(0.5);
  for (auto kind : {SamplingStrategy::Kind{FullBatch{}}, SamplingStrategy::Kind{adaptive}}) {
    for (auto option : {Option::I, Option::II}) {
      SamplingStrategy strategy{kind, 42};
      SolverConfig config;
      config.option = option;
      config.alpha = 1.0 / L;
      if (option == Option::II) config.acceleration = AccelerationSchedule::strong_convex(mu, config.alpha);
      config.stop.max_iters = 300;
      const auto result = run(problem, strategy, config);
      const auto& last = result.records.back();
      std::cout << strategy.label() << " Option " << to_string(option) << ": gap " << *last.gap
                << " after " << last.prox_evals << " prox and " << last.grad_evals
                << " gradient evaluations\n";
    }
  }
}
