#include <adaprox/experiment.hpp>

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

namespace {

enum Exit { kOk = 0, kConfig = 2, kDiverged = 3, kIo = 4 };

adaprox::ExperimentConfig load(const std::string& path, const std::vector<std::string>& overrides) {
  auto settings = adaprox::Settings::load(path);
  for (const auto& kv : overrides) settings.assign(kv);
  return adaprox::make_experiment_config(settings);
}

int cmd_run(const std::string& config, const std::vector<std::string>& overrides,
            const std::string& out, std::optional<std::uint64_t> seed, bool audit) {
  auto c = load(config, overrides);
  if (!out.empty()) c.out_dir = out;
  if (seed) c.seeds = {*seed};
  if (audit) c.audit = true;
  const auto result = adaprox::run_experiment(c);
  if (result.reference && !result.reference->converged)
    std::cerr << "warning: reference solution did not reach tolerance (reduced norm "
              << result.reference->reduced_norm << ")\n";
  for (const auto& r : result.runs) {
    std::cout << r.label << " Option " << adaprox::to_string(r.option) << " seed " << r.seed << ": "
              << r.status << ", k=" << r.iterations << ", grad_evals=" << r.grad_evals;
    if (r.final_gap) std::cout << ", gap=" << *r.final_gap;
    std::cout << '\n';
  }
  std::cout << "summary: " << result.summary_csv.string() << '\n';
  return result.any_diverged() ? kDiverged : kOk;
}

int cmd_sweep(const std::string& config, const std::vector<std::string>& overrides,
              const std::string& grid) {
  const auto c = load(config, overrides);
  const auto result = adaprox::sweep_step_size(c, adaprox::parse_grid(grid));
  std::cout << "label,option,alpha,status,final\n";
  for (const auto& p : result.points)
    std::cout << p.label << ',' << adaprox::to_string(p.option) << ',' << p.alpha << ','
              << (p.diverged ? "diverged" : "ok") << ',' << p.final_value << '\n';
  for (const auto& b : result.best)
    std::cout << "best " << b.label << " Option " << adaprox::to_string(b.option)
              << ": alpha=" << b.alpha << " final=" << b.final_value << '\n';
  return kOk;
}

int cmd_reference(const std::string& config, const std::vector<std::string>& overrides) {
  const auto c = load(config, overrides);
  const auto problem = adaprox::build_problem(c);
  const auto ref = adaprox::compute_reference(problem);
  std::cout.precision(17);
  std::cout << "phi_star " << ref.phi_star << "\nconverged " << (ref.converged ? "yes" : "no")
            << "\niterations " << ref.iterations << "\ncache " << (ref.cache_hit ? "hit" : "miss")
            << "\nfile " << ref.file.string() << '\n';
  if (!ref.converged) std::cerr << "warning: reference solution did not reach tolerance\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Proximal gradient methods with adaptive gradient accuracy"};
  app.require_subcommand(1);
  std::string config, out, grid;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  bool audit = false;

  auto* run = app.add_subcommand("run", "run every configured strategy/option/seed");
  run->add_option("--config", config, "settings file")->required();
  run->add_option("--out", out, "output directory");
  run->add_option("--seed", seed, "run only this seed");
  run->add_flag("--audit", audit, "record true reduced gradients and audit the condition");
  run->add_option("--set", overrides, "override a setting, key=value");

  auto* sweep = app.add_subcommand("sweep", "tune the step size over a grid");
  sweep->add_option("--config", config, "settings file")->required();
  sweep->add_option("--grid", grid, "comma-separated step sizes")->required();
  sweep->add_option("--set", overrides, "override a setting, key=value");

  auto* reference = app.add_subcommand("reference", "compute or look up the cached optimum");
  reference->add_option("--config", config, "settings file")->required();
  reference->add_option("--set", overrides, "override a setting, key=value");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (*run) return cmd_run(config, overrides, out, seed, audit);
    if (*sweep) return cmd_sweep(config, overrides, grid);
    return cmd_reference(config, overrides);
  } catch (const adaprox::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const adaprox::InvalidConfig& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const adaprox::InvalidArgument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const adaprox::SweepFailed& e) {
    std::cerr << "sweep failed: " << e.what() << '\n';
    return kDiverged;
  } catch (const adaprox::DivergedError& e) {
    std::cerr << "diverged: " << e.what() << '\n';
    return kDiverged;
  } catch (const adaprox::ParseError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kIo;
  } catch (const adaprox::InvalidData& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  }
}
