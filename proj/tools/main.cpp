#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

#include "cli_runner.hpp"

namespace sk = subspacekit;
namespace cli = subspacekit::cli;

namespace {

void write_text(const std::string& path, const std::string& text) { sk::neuralnet::detail::write_file(path, text); }

void add_fit_flags(CLI::App& cmd, cli::FitOptions& o, std::string& method) {
  cmd.add_option("--method", method, "dcfsc | dsc | shallow")->required()->check(CLI::IsMember({"dcfsc", "dsc", "shallow"}));
  cmd.add_option("--data", o.data, "matrix file (.csv/.sscm) or directory of .pgm images")->required();
  cmd.add_option("--labels", o.labels, "ground-truth labels, one integer per line");
  cmd.add_option("--arch", o.arch, "preset name or JSON architecture file")->capture_default_str();
  cmd.add_option("--lambda", o.lambda, "closed-form regularization")->check(CLI::PositiveNumber);
  cmd.add_option("--lambda1", o.lambda1, "coefficient penalty weight (dsc)")->check(CLI::NonNegativeNumber);
  cmd.add_option("--lambda2", o.lambda2, "self-expression weight (dsc)")->check(CLI::NonNegativeNumber);
  cmd.add_flag("--unsquared-norm", o.unsquared_coefficient_norm, "dsc: penalize ||C|| instead of ||C||^2");
  cmd.add_option("--lr", o.learning_rate, "Adam learning rate")->check(CLI::PositiveNumber);
  cmd.add_option("--epochs", o.epochs, "training epochs (default from the architecture)");
  cmd.add_option("--pretrain-epochs", o.pretrain_epochs, "auto-encoder pretraining epochs");
  cmd.add_flag("--no-pretrain", o.no_pretrain, "skip auto-encoder pretraining");
  cmd.add_option("--k", o.k, "number of clusters")->check(CLI::Range(std::size_t{2}, std::size_t{1} << 30));
  cmd.add_option("--rho", o.rho, "affinity threshold ratio in (0, 1]")->check(CLI::Range(1e-300, 1.0))->capture_default_str();
  cmd.add_option("--seed", o.seed, "random seed")->capture_default_str();
  cmd.add_option("--restarts", o.restarts, "k-means restarts")->check(CLI::PositiveNumber)->capture_default_str();
  cmd.add_option("--numeric-width", o.numeric_width, "training precision: 32 or 64")
      ->check(CLI::IsMember({32, 64}))
      ->capture_default_str();
  cmd.add_option("--init-checkpoint", o.init_checkpoint, "start from saved parameters");
  cmd.add_option("--save-checkpoint", o.save_checkpoint, "write final parameters");
  cmd.add_option("--log", o.log, "training log: epoch<TAB>loss<TAB>seconds");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep closed-form subspace clustering toolkit"};
  app.require_subcommand(1);
  std::size_t threads = 0;
  app.add_option("--threads", threads, "worker threads (0: SUBSPACEKIT_THREADS or hardware)");

  // synth
  sk::evaldata::SyntheticSpec synth;
  std::string synth_out;
  bool non_orthogonal = false;
  auto* synth_cmd = app.add_subcommand("synth", "generate union-of-subspaces data");
  synth_cmd->add_option("--k", synth.k, "subspace count")->required();
  synth_cmd->add_option("--dim", synth.subspace_dim, "subspace dimension")->required();
  synth_cmd->add_option("--per-class", synth.points_per_subspace, "points per subspace")->required();
  synth_cmd->add_option("--ambient", synth.ambient_dim, "ambient dimension")->required();
  synth_cmd->add_option("--noise", synth.noise_sigma, "Gaussian noise sigma")->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed, "random seed")->capture_default_str();
  synth_cmd->add_flag("--non-orthogonal", non_orthogonal, "draw each basis independently");
  synth_cmd->add_option("--out", synth_out, "output directory (data.sscm, labels.csv)")->required();

  // fit
  cli::FitOptions fit;
  std::string fit_method;
  auto* fit_cmd = app.add_subcommand("fit", "train, cluster and score");
  add_fit_flags(*fit_cmd, fit, fit_method);
  fit_cmd->add_option("--report", fit.report, "JSON report path (default: standard output)");
  fit_cmd->add_option("--labels-out", fit.labels_out, "predicted labels output (.csv)");

  // sweep
  cli::FitOptions sweep;
  std::string sweep_method, lambda_range, lambda_list, sweep_out;
  bool parallel = false;
  auto* sweep_cmd = app.add_subcommand("sweep", "one fit per lambda");
  add_fit_flags(*sweep_cmd, sweep, sweep_method);
  auto* range_opt = sweep_cmd->add_option("--lambda-range", lambda_range, "start:stop:xF or start:stop:+S");
  auto* list_opt = sweep_cmd->add_option("--lambda-list", lambda_list, "comma-separated values");
  range_opt->excludes(list_opt);
  sweep_cmd->add_option("--out", sweep_out, "CSV table path (default: standard output)");
  sweep_cmd->add_flag("--parallel", parallel, "run lambda points concurrently");

  // params
  std::string params_arch;
  std::optional<std::size_t> params_n, params_dim;
  bool params_json = false;
  auto* params_cmd = app.add_subcommand("params", "parameter audit of an architecture");
  params_cmd->add_option("--arch", params_arch, "preset name or JSON architecture file")->required();
  params_cmd->add_option("--n-samples", params_n, "sample count for the self-expressive layer");
  params_cmd->add_option("--input-dim", params_dim, "flat input width for MLP presets");
  params_cmd->add_flag("--json", params_json, "emit JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (threads > 0) sk::numkernel::set_thread_count(threads);

  try {
    if (*synth_cmd) {
      synth.orthogonal = !non_orthogonal;
      cli::run_synth(synth, synth_out);
    } else if (*fit_cmd) {
      fit.method = cli::parse_method(fit_method);
      const auto r = cli::run_fit(fit);
      const std::string text = r.report.dump(2) + "\n";
      if (fit.report)
        write_text(*fit.report, text);
      else
        std::cout << text;
    } else if (*sweep_cmd) {
      sweep.method = cli::parse_method(sweep_method);
      if (lambda_range.empty() && lambda_list.empty()) throw cli::UsageError("sweep needs --lambda-range or --lambda-list");
      const auto lambdas = lambda_range.empty() ? cli::parse_lambda_list(lambda_list) : cli::parse_lambda_range(lambda_range);
      const auto csv = cli::sweep_csv(cli::run_sweep(sweep, lambdas, parallel));
      if (sweep_out.empty())
        std::cout << csv;
      else
        write_text(sweep_out, csv);
    } else if (*params_cmd) {
      const auto arch = cli::resolve_architecture(params_arch, {params_n, params_dim, std::nullopt});
      const auto pc = sk::neuralnet::param_count(arch.preset.spec);
      if (params_json)
        std::cout << cli::params_json(pc).dump(2) << "\n";
      else
        std::cout << cli::params_table(pc);
    }
  } catch (const cli::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const sk::Error& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
