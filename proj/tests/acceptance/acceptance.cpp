// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "goldmine/checkpoint.hpp"
#include "goldmine/dataset.hpp"
#include "goldmine/error.hpp"
#include "goldmine/eval.hpp"
#include "goldmine/galton.hpp"
#include "goldmine/lotka.hpp"
#include "goldmine/rng.hpp"
#include "net_fixtures.hpp"
#include "oracles.hpp"
#include "simulator_oracles.hpp"

namespace {

using namespace goldmine;
using methods::Family;
using methods::Matrix;
using methods::Method;
using methods::Vector;
using testing::rel_err;
namespace fs = std::filesystem;

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

class Gate {
 public:
  void run(int id, const std::string& title, double limit_s, const std::function<Outcome()>& fn) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = limit_s <= 0 || t <= limit_s;
    const bool pass = o.pass && in_time;
    failures_ += pass ? 0 : 1;
    std::ostringstream line;
    line << (pass ? "PASS" : "FAIL") << "  criterion " << id << ": " << title << " | " << o.detail << " | "
         << fmt(t) << "s";
    if (limit_s > 0) line << " (limit " << fmt(limit_s) << "s" << (in_time ? "" : ", exceeded") << ")";
    std::cout << line.str() << std::endl;
  }
  int failures() const { return failures_; }

 private:
  int failures_ = 0;
};

fs::path scratch() {
  const fs::path dir = fs::temp_directory_path() / "goldmine_acceptance";
  fs::create_directories(dir);
  return dir;
}

// ---- 1 ----
Outcome galton_augmentation() {
  const galton::Config cfg;
  Rng rng(101);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double theta = rng.uniform(-1.0, -0.4);
    const auto s = galton::simulate(cfg, theta, theta, -0.6, 5000 + i, true);
    auto f = [&](double t) { return testing::trace_log_density(cfg, s.moves, t); };
    worst = std::max(worst, rel_err(s.acc.joint_score, testing::central_diff(f, theta, 1e-4), 1e-8));
  }
  return {worst <= 1e-5, "100 traces, max rel err " + fmt(worst) + " (tol 1e-5)"};
}

// ---- 2 ----
lotka::LogRates box_draw(Rng& rng) {
  lotka::LogRates t{};
  for (int k = 0; k < lotka::kNumParams; ++k) t[k] = lotka::kReferenceLogRates[k] + rng.uniform(-0.01, 0.01);
  return t;
}

Outcome lotka_augmentation() {
  const lotka::Settings s;
  Rng rng(202);
  double worst = 0.0;
  int checked = 0;
  for (std::uint64_t seed = 0; checked < 50; ++seed) {
    const lotka::LogRates t0 = box_draw(rng);
    const auto r = lotka::simulate(s, t0, t0, lotka::kReferenceLogRates, 70000 + seed, true);
    if (r.exploded) continue;
    ++checked;
    for (int k = 0; k < lotka::kNumParams; ++k) {
      auto f = [&](double v) {
        lotka::LogRates t = t0;
        t[k] = v;
        return testing::replay_log_density(*r.trace, t);
      };
      worst = std::max(worst, rel_err(r.acc.joint_score[k], testing::central_diff(f, t0[k], 1e-4), 1.0));
    }
  }
  std::vector<double> ratios;
  std::uint64_t seed = 900000;
  while (ratios.size() < 10000) {
    const lotka::LogRates t0 = box_draw(rng);
    const auto res = lotka::simulate(s, lotka::kReferenceLogRates, t0, lotka::kReferenceLogRates, seed++);
    if (!res.exploded) ratios.push_back(std::exp(res.acc.log_joint_ratio));
  }
  const auto est = testing::mean_se(ratios);
  const double z = (est.mean - 1.0) / est.se;
  const bool pass = worst <= 1e-5 && std::abs(z) <= 3.0;
  return {pass, "score max rel err " + fmt(worst) + " over 50 traces; E[r] = " + fmt(est.mean) + " (z = " + fmt(z) +
                    ", 10^4 samples)"};
}

// ---- 3 ----
Outcome oracle_validity() {
  const galton::Config cfg;
  double worst_norm = 0.0;
  for (double t : {-1.2, -0.8, -0.6, 0.0, 0.5}) {
    const auto p = galton::exact_density(cfg, t);
    double sum = 0.0;
    for (double v : p) sum += v;
    worst_norm = std::max(worst_norm, std::abs(sum - 1.0));
  }
  const auto p = galton::exact_density(cfg, -0.8);
  std::vector<double> hist(p.size(), 0.0);
  for (const auto& s : galton::simulate_batch(cfg, -0.8, -0.8, -0.6, 31337, 100000)) hist[s.bin] += 1e-5;
  double worst_bin = 0.0;
  for (std::size_t x = 0; x < p.size(); ++x) worst_bin = std::max(worst_bin, std::abs(hist[x] - p[x]));
  const auto fair = galton::exact_density(cfg, 0.0);
  double worst_binom = 0.0, c = 1.0;
  for (int x = 0; x <= 20; ++x) {
    worst_binom = std::max(worst_binom, std::abs(fair[x] - c / 1048576.0));
    c = c * (20 - x) / (x + 1);
  }
  const bool pass = worst_norm <= 1e-12 && worst_bin <= 0.01 && worst_binom == 0.0;
  return {pass, "|sum-1| " + fmt(worst_norm) + ", max histogram deviation " + fmt(worst_bin) +
                    ", max |p - Binomial(20,1/2)| " + fmt(worst_binom)};
}

// ---- 4 ----
Outcome conditional_expectation() {
  const galton::Config cfg;
  const auto exact = galton::exact_log_ratio(cfg, -0.8, -0.6);
  std::vector<double> sum(21, 0.0), count(21, 0.0);
  for (const auto& s : galton::simulate_batch(cfg, -0.6, -0.8, -0.6, 4242, 100000)) {
    sum[s.bin] += std::exp(s.acc.log_joint_ratio);
    count[s.bin] += 1.0;
  }
  double worst = 0.0;
  for (int x = 5; x <= 15; ++x) worst = std::max(worst, std::abs(sum[x] / count[x] / std::exp(exact[x]) - 1.0));
  return {worst <= 0.02, "max relative deviation on bins 5..15: " + fmt(worst) + " (tol 0.02)"};
}

// ---- 5 ----
Outcome gradient_engine() {
  using namespace testing::net_fixtures;
  double w_worst = 0.0, t_worst = 0.0, s_worst = 0.0;
  for (const auto& c : head_cases()) {
    Network net = random_network(c.spec, 21);
    const auto b = random_batch(c.spec, 6, 22);
    const auto lg = grad_weights(net, b.inputs, b.targets, toy_loss);
    auto loss = [&] {
      const Tape t = forward_tape(net, b.inputs, false);
      RowVector d(b.inputs.cols());
      return toy_loss(head_value(net, t.raw, b.targets).value, d);
    };
    for (Eigen::Index i : sample_coords(net.weights().size(), 40, 23)) {
      w_worst = std::max(w_worst, rel_err(lg.gradient(i), testing::central_diff_coord(loss, net.weights(), i, 1e-5), 1e-6));
    }
    for (int j = 0; j < 6; ++j) {
      const Vector features = b.inputs.col(j).head(c.spec.feature_dim);
      Vector theta = b.inputs.col(j).tail(c.spec.theta_dim);
      const Vector target = b.targets.col(j);
      const Vector g = theta_gradient(net, features, theta, target);
      for (int k = 0; k < c.spec.theta_dim; ++k) {
        auto f = [&] { return log_value(net, features, theta, target); };
        t_worst = std::max(t_worst, rel_err(g(k), testing::central_diff_coord(f, theta, k, 1e-5), 1e-6));
      }
    }
    const Vector features = b.inputs.col(0).head(c.spec.feature_dim);
    const Vector theta = b.inputs.col(0).tail(c.spec.theta_dim);
    const Vector target = b.targets.col(0);
    Vector score(c.spec.theta_dim);
    for (int k = 0; k < score.size(); ++k) score(k) = 1.0 - 0.7 * k;
    const auto pg = grad_weights_of_score_penalty(net, features, theta, target, score);
    auto penalty = [&] {
      double p = 0.0;
      Vector th = theta;
      for (int k = 0; k < score.size(); ++k) {
        auto f = [&] { return log_value(net, features, th, target); };
        const double g = testing::central_diff_coord(f, th, k, 1e-4);
        p += (score(k) - g) * (score(k) - g);
      }
      return p;
    };
    for (Eigen::Index i : sample_coords(net.weights().size(), 20, 53)) {
      s_worst = std::max(s_worst, rel_err(pg.gradient(i), testing::central_diff_coord(penalty, net.weights(), i, 1e-4), 1e-4));
    }
  }
  const bool pass = w_worst <= 1e-4 && t_worst <= 1e-5 && s_worst <= 1e-3;
  return {pass, "scalar/softmax/mixture heads: weights " + fmt(w_worst) + " (1e-4), theta " + fmt(t_worst) +
                    " (1e-5), score penalty " + fmt(s_worst) + " (1e-3)"};
}

// ---- 6 ----
double median_of(const cli::Report& r, const std::string& method, std::size_t n) {
  for (const auto& m : r.reports) {
    if (m.method == method && m.n_train == n) return m.median();
  }
  throw Error(ErrorCode::data, "no report for " + method + " n=" + std::to_string(n));
}

Outcome galton_ordering() {
  cli::ExperimentConfig c = cli::ExperimentConfig::defaults(data::SimulatorKind::galton);
  c.sizes = {1000, 100000};
  const cli::Report r = cli::cmd_figure2(c, scratch() / "figure2_galton");
  const double carl = median_of(r, "carl", 1000), rascal = median_of(r, "rascal", 1000);
  const double nde = median_of(r, "nde", 1000), scandal = median_of(r, "scandal", 1000);
  const double limit = 0.1 * *r.zero_mse;
  bool pass = rascal < 0.75 * carl && scandal < 0.75 * nde;
  std::string large;
  for (const auto& m : r.reports) {
    if (m.n_train != 100000) continue;
    pass = pass && m.median() <= limit;
    large += " " + m.method + "=" + fmt(m.median()) + (m.median() <= limit ? "" : "(over)");
  }
  return {pass, "n=1e3 medians rascal " + fmt(rascal) + " vs carl " + fmt(carl) + ", scandal " + fmt(scandal) +
                    " vs nde " + fmt(nde) + "; n=1e5 limit " + fmt(limit) + ":" + large};
}

// ---- 7 ----
Outcome reductions() {
  const data::SimulatorConfig sim;
  cli::ExperimentConfig c = cli::ExperimentConfig::defaults(data::SimulatorKind::galton);
  const data::Dataset ratio = data::generate(sim, c.sampling(Family::ratio), 2000, 17);
  const data::Dataset density = data::generate(sim, c.sampling(Family::density), 2000, 18);
  methods::TrainConfig cfg;
  cfg.epochs = 30;
  std::string detail;
  bool pass = true;
  const std::pair<Method, Method> pairs[] = {
      {Method::rascal, Method::rolr}, {Method::cascal, Method::carl}, {Method::scandal, Method::nde}};
  for (const auto& [with, base] : pairs) {
    const auto& ds = methods::family(base) == Family::density ? density : ratio;
    const auto a = methods::train({with, 0.0}, ds.records, sim.info(), cfg, 99);
    const auto b = methods::train({base, 0.0}, ds.records, sim.info(), cfg, 99);
    const bool same = a.network.weights() == b.network.weights() && a.log.train_loss == b.log.train_loss &&
                      checkpoint::weights_digest(a) == checkpoint::weights_digest(b);
    pass = pass && same;
    detail += std::string(methods::name(with)) + "(0)" + (same ? "==" : "!=") + std::string(methods::name(base)) + " ";
  }
  return {pass, detail + "bitwise weights"};
}

// ---- 8 ----
Outcome local_methods() {
  const data::SimulatorConfig sim;
  cli::ExperimentConfig c = cli::ExperimentConfig::defaults(data::SimulatorKind::galton);
  const data::Dataset ds = data::generate(sim, c.sampling(Family::local), 10000, 13);
  methods::SurrogateModel model = methods::train({Method::sally, 0}, ds.records, sim.info(), {}, 7);
  const double h = 1e-5;
  const auto up = galton::exact_density(sim.galton, -0.7 + h), down = galton::exact_density(sim.galton, -0.7 - h);
  const auto p = galton::exact_density(sim.galton, -0.7);
  double worst_score = 0.0, weighted = 0.0;
  for (int x = 0; x <= 20; ++x) {
    const double oracle = (std::log(up[x]) - std::log(down[x])) / (2 * h);
    const double est = methods::estimated_score(model, Vector::Constant(1, x), Vector())(0);
    const double sq = (est - oracle) * (est - oracle);
    weighted += p[x] * sq;
    if (x >= 5 && x <= 15) worst_score = std::max(worst_score, sq);
  }
  const Vector t0 = Vector::Constant(1, -0.8), t1 = Vector::Constant(1, -0.6);
  const auto exact = galton::exact_log_ratio(sim.galton, -0.8, -0.6);
  std::map<Method, double> worst_ratio;
  for (Method m : {Method::sally, Method::sallino}) {
    methods::SurrogateModel local = model;
    local.kind.method = m;
    methods::calibrate(local, data::observable_sampler(sim), t0, t1, 100000, 20, 99);
    for (int x = 5; x <= 15; ++x) {
      const double d = std::abs(methods::evaluate_log_ratio(local, Vector::Constant(1, x), t0, t1) - exact[x]);
      worst_ratio[m] = std::max(worst_ratio[m], d);
    }
  }
  const bool pass = worst_score <= 0.05 && worst_ratio[Method::sally] <= 0.1 && worst_ratio[Method::sallino] <= 0.1;
  return {pass, "score sq. error max over bins 5..15 " + fmt(worst_score) + " (0.05), p-weighted over all bins " +
                    fmt(weighted) + "; max |log r err| sally " +
                    fmt(worst_ratio[Method::sally]) + ", sallino " + fmt(worst_ratio[Method::sallino]) + " (0.1)"};
}

// ---- 9 ----
Outcome coverage() {
  const galton::Config cfg;
  std::vector<Vector> grid;
  std::vector<std::vector<double>> log_p;
  for (int i = 0; i <= 80; ++i) {
    const double t = -1.2 + 0.01 * i;
    grid.push_back(Vector::Constant(1, t));
    auto p = galton::exact_density(cfg, t);
    for (double& v : p) v = std::log(v);
    log_p.push_back(std::move(p));
  }
  const std::size_t truth = 40;
  const int reps = 200;
  int covered = 0;
  for (int rep = 0; rep < reps; ++rep) {
    std::vector<int> counts(21, 0);
    for (const auto& s : galton::simulate_batch(cfg, -0.8, -0.8, -0.8, 7000000ULL + 1000ULL * rep, 100)) ++counts[s.bin];
    std::vector<double> llr(grid.size(), 0.0);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      for (int x = 0; x <= 20; ++x) llr[g] += counts[x] * (log_p[g][x] - log_p[0][x]);
    }
    const auto region = eval::confidence_region(
        [&](const Vector& t) { return llr[static_cast<std::size_t>(std::lround((t(0) + 1.2) / 0.01))]; }, grid,
        eval::standard_levels());
    covered += region.contains(truth, 0) ? 1 : 0;
  }
  const double p = eval::standard_levels()[0];
  const double sigma = std::sqrt(p * (1 - p) / reps);
  const double rate = static_cast<double>(covered) / reps;
  return {std::abs(rate - p) <= 3 * sigma, "coverage " + fmt(rate) + " vs " + fmt(p) + " +- " + fmt(3 * sigma)};
}

// ---- 10 ----
Outcome lotka_ordering() {
  const cli::ExperimentConfig c = cli::ExperimentConfig::defaults(data::SimulatorKind::lotka);
  const cli::Report r = cli::cmd_figure2(c, scratch() / "figure2_lotka");
  const double nde = median_of(r, "nde", 2000), scandal = median_of(r, "scandal", 2000);
  return {scandal < 0.8 * nde, "ensemble-relative medians at n=2000: scandal " + fmt(scandal) + " vs nde " + fmt(nde) +
                                   " (need < " + fmt(0.8 * nde) + ")"};
}

// ---- 11 ----
std::string serialize(const data::Dataset& ds) {
  std::ostringstream out;
  data::write(ds, out);
  return out.str();
}

bool same_records(const data::Dataset& a, const data::Dataset& b) {
  if (a.records.size() != b.records.size()) return false;
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    const auto &p = a.records[i], &q = b.records[i];
    if (p.x != q.x || p.y != q.y || p.theta0 != q.theta0 || p.theta1 != q.theta1 || p.theta_gen != q.theta_gen ||
        p.log_joint_ratio != q.log_joint_ratio || p.joint_score != q.joint_score) {
      return false;
    }
  }
  return true;
}

Outcome determinism() {
  bool pass = true;
  std::string detail;
  for (auto kind : {data::SimulatorKind::galton, data::SimulatorKind::lotka}) {
    const cli::ExperimentConfig c = cli::ExperimentConfig::defaults(kind);
    const std::size_t n = kind == data::SimulatorKind::galton ? 2000 : 200;
    const Method m = kind == data::SimulatorKind::galton ? Method::rascal : Method::scandal;
    const auto s = c.sampling(methods::family(m));
    const data::Dataset a = data::generate(c.simulator, s, n, 5), b = data::generate(c.simulator, s, n, 5);
    const bool bytes = serialize(a) == serialize(b);
    std::istringstream in(serialize(a));
    const data::Dataset back = data::read(in);
    const bool round = same_records(a, back) && serialize(back) == serialize(a);
    methods::TrainConfig cfg;
    cfg.epochs = 5;
    const auto ma = methods::train(c.kind(m), a.records, c.simulator.info(), cfg, 3);
    const auto mb = methods::train(c.kind(m), a.records, c.simulator.info(), cfg, 3);
    const std::string ja = checkpoint::to_json(ma).dump(), jb = checkpoint::to_json(mb).dump();
    const auto restored = checkpoint::from_json(nlohmann::json::parse(ja));
    const bool ck_round = checkpoint::to_json(restored).dump() == ja;
    const auto pts = kind == data::SimulatorKind::galton
                         ? eval::galton_points(-0.8, -0.6)
                         : eval::lotka_points(c.simulator, c.evaluation.theta1, 0.01, 20, 5, 1);
    const bool predictions =
        methods::evaluate_log_ratio_batch(ma, pts.x, pts.theta0, pts.theta1) ==
        methods::evaluate_log_ratio_batch(restored, pts.x, pts.theta0, pts.theta1);
    const bool ok = bytes && round && ja == jb && ck_round && predictions;
    pass = pass && ok;
    detail += std::string(data::name(kind)) + ": dataset bytes " + (bytes ? "same" : "differ") + ", round-trip " +
              (round ? "exact" : "lossy") + ", checkpoint bytes " + (ja == jb ? "same" : "differ") + ", reload " +
              (ck_round && predictions ? "bit-exact" : "lossy") + "; ";
  }
  return {pass, detail};
}

}  // namespace

int main(int argc, char** argv) {
  // optional list of criterion numbers to run
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  auto wanted = [&](int id) { return only.empty() || std::find(only.begin(), only.end(), id) != only.end(); };

  Gate gate;
  const std::vector<std::tuple<int, std::string, double, std::function<Outcome()>>> criteria = {
      {1, "Galton joint score vs fixed-trace finite differences", 10, galton_augmentation},
      {2, "Lotka-Volterra replay score and unit-mean joint ratio", 120, lotka_augmentation},
      {3, "Galton exact density: normalization, histogram, fair binomial", 0, oracle_validity},
      {4, "Binned joint ratio reproduces exact ratio", 0, conditional_expectation},
      {5, "Gradient engine finite-difference suites", 30, gradient_engine},
      {6, "Galton MSE ordering and large-sample accuracy", 1800, galton_ordering},
      {7, "Zero-alpha reductions are bit-exact", 0, reductions},
      {8, "SALLY/SALLINO score and calibrated ratios", 0, local_methods},
      {9, "Exact-ratio confidence interval coverage", 300, coverage},
      {10, "Lotka-Volterra SCANDAL beats NDE against ensemble reference", 3600, lotka_ordering},
      {11, "Determinism and exact round-trips", 0, determinism},
  };
  for (const auto& [id, title, limit, fn] : criteria) {
    if (wanted(id)) gate.run(id, title, limit, fn);
  }
  std::cout << (gate.failures() == 0 ? "all criteria passed" : std::to_string(gate.failures()) + " criteria failed")
            << std::endl;
  return gate.failures() == 0 ? 0 : 1;
}
