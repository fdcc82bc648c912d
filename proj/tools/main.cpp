#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "commands.hpp"
#include "goldmine/error.hpp"

using namespace goldmine;
using namespace goldmine::cli;

namespace {

struct Options {
  std::string config;
  std::string simulator;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string method;
  std::optional<double> alpha;
  std::optional<std::size_t> n;
  std::string dataset;
  std::vector<std::string> checkpoints;
  std::vector<std::string> reference;
  std::vector<double> theta0;
  std::vector<double> theta1;
  std::string family;
  bool quiet = false;
};

ExperimentConfig load_config(const Options& o) {
  ExperimentConfig c;
  if (!o.config.empty()) {
    c = ExperimentConfig::load(o.config);
    if (!o.simulator.empty() && data::parse_simulator(o.simulator) != c.simulator.kind) {
      throw Error(ErrorCode::config, "--simulator disagrees with the simulator in " + o.config);
    }
  } else {
    c = ExperimentConfig::defaults(o.simulator.empty() ? data::SimulatorKind::galton : data::parse_simulator(o.simulator));
  }
  if (o.seed) c.base_seed = *o.seed;
  if (!o.method.empty()) {
    const methods::Method m = methods::parse_method(o.method);
    c.methods = {m};
    if (o.alpha) c.alpha[m] = *o.alpha;
  } else if (o.alpha) {
    for (auto& [m, a] : c.alpha) a = *o.alpha;
  }
  if (o.n) c.sizes = {*o.n};
  c.validate();
  return c;
}

std::uint64_t seed_or(const Options& o, const ExperimentConfig& c) { return o.seed.value_or(c.base_seed); }

methods::Method method_of(const Options& o) {
  if (o.method.empty()) throw Error(ErrorCode::config, "--method is required");
  return methods::parse_method(o.method);
}

Vector to_vector(const std::vector<double>& v) { return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())); }

void require_out(const Options& o) {
  if (o.out.empty()) throw Error(ErrorCode::config, "--out is required");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation-based inference with augmented simulator data"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "experiment config (JSON)");
    sub->add_option("--simulator", o.simulator, "galton or lotka");
    sub->add_option("--seed", o.seed, "base seed");
    sub->add_option("--out", o.out, "output path or prefix");
    sub->add_option("--method", o.method, "carl, nde, rolr, rascal, cascal, scandal, sally, sallino");
    sub->add_option("--alpha", o.alpha, "score penalty weight");
    sub->add_option("--n", o.n, "sample count");
  };

  auto* simulate = app.add_subcommand("simulate", "write an augmented dataset");
  common(simulate);
  simulate->add_option("--family", o.family, "ratio, density or local (default: from --method, else ratio)");

  auto* train = app.add_subcommand("train", "train a surrogate on a dataset");
  common(train);
  train->add_option("--dataset", o.dataset, "dataset file")->required();

  auto* evaluate = app.add_subcommand("evaluate", "MSE of log r against a reference");
  common(evaluate);
  evaluate->add_option("--checkpoint", o.checkpoints, "checkpoints to score")->required();
  evaluate->add_option("--reference", o.reference, "ensemble reference checkpoints (required for lotka)");

  auto* oracle = app.add_subcommand("oracle", "exact Galton density and log-ratio table");
  common(oracle);
  oracle->add_option("--theta0", o.theta0, "numerator parameter")->delimiter(',');
  oracle->add_option("--theta1", o.theta1, "denominator parameter")->delimiter(',');

  auto* figure2 = app.add_subcommand("figure2", "full method x size x seed ladder");
  common(figure2);
  figure2->add_flag("--quiet", o.quiet, "no progress on stderr");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_code(ErrorCode::config);
  }

  try {
    if (*simulate) {
      const ExperimentConfig c = load_config(o);
      require_out(o);
      methods::Family f = methods::Family::ratio;
      if (!o.family.empty()) {
        if (o.family == "ratio") f = methods::Family::ratio;
        else if (o.family == "density") f = methods::Family::density;
        else if (o.family == "local") f = methods::Family::local;
        else throw Error(ErrorCode::config, "unknown family '" + o.family + "'");
      } else if (!o.method.empty()) {
        f = methods::family(method_of(o));
      }
      cmd_simulate(c, f, o.n.value_or(1000), seed_or(o, c), o.out);
    } else if (*train) {
      const ExperimentConfig c = load_config(o);
      require_out(o);
      const methods::SurrogateModel m = cmd_train(c, o.dataset, c.kind(method_of(o)), seed_or(o, c), o.out);
      std::cout << "best epoch " << m.log.best_epoch << ", validation loss "
                << (m.log.validation_loss.empty() ? 0.0 : m.log.validation_loss[m.log.best_epoch]) << '\n';
    } else if (*evaluate) {
      const ExperimentConfig c = load_config(o);
      require_out(o);
      std::vector<fs::path> ckpt(o.checkpoints.begin(), o.checkpoints.end());
      std::vector<fs::path> ref(o.reference.begin(), o.reference.end());
      const Report r = cmd_evaluate(c, ckpt, ref, o.out);
      for (const auto& m : r.reports) std::cout << m.method << " n=" << m.n_train << " median mse " << m.median() << '\n';
    } else if (*oracle) {
      const ExperimentConfig c = load_config(o);
      const Vector t0 = o.theta0.empty() ? c.evaluation.theta0 : to_vector(o.theta0);
      const Vector t1 = o.theta1.empty() ? c.evaluation.theta1 : to_vector(o.theta1);
      if (o.out.empty()) {
        cmd_oracle(c, t0, t1, std::cout);
      } else {
        std::ofstream f(o.out, std::ios::binary);
        if (!f) throw Error(ErrorCode::config, "cannot write " + o.out);
        cmd_oracle(c, t0, t1, f);
      }
    } else if (*figure2) {
      const ExperimentConfig c = load_config(o);
      require_out(o);
      const Report r = cmd_figure2(c, o.out, o.quiet ? nullptr : &std::cerr);
      for (const auto& m : r.reports) std::cout << m.method << " n=" << m.n_train << " median mse " << m.median() << '\n';
      if (r.zero_mse) std::cout << "zero predictor mse " << *r.zero_mse << '\n';
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
