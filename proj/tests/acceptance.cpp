// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any selected criterion fails. Usage: acceptance [criterion...]

#include "dgpmp/cli.hpp"
#include "dgpmp/eval.hpp"
#include "dgpmp/io.hpp"
#include "dgpmp/learn/gradcheck.hpp"
#include "dgpmp/planner.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>

using namespace dgpmp;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "dgpmp");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  if (code != 0) std::fprintf(stderr, "dgpmp %s failed (%d): %s\n", args[1].c_str(), code, err.str().c_str());
  return code;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dgpmp_accept_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

/// Rows of a summary CSV keyed by "variant/subset": {problems, successes, gp_mse, violation}.
struct SummaryRow {
  int problems = 0;
  int successes = 0;
  double gp_mse = 0.0;
  double violation = 0.0;
};

std::map<std::string, SummaryRow> read_summary(const fs::path& p) {
  std::istringstream in(io::read_text(p));
  std::string line;
  std::getline(in, line);
  std::map<std::string, SummaryRow> rows;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    if (f.size() < 9) continue;
    SummaryRow r;
    r.problems = std::stoi(f[2]);
    r.successes = static_cast<int>(std::lround(std::stod(f[3]) * r.problems));
    r.gp_mse = std::stod(f[4]);
    r.violation = std::stod(f[8]);
    rows[f[0] + "/" + f[1]] = r;
  }
  return rows;
}

// 1. Block-tridiagonal step equals the dense normal-equation solve.
Outcome solver_equivalence() {
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> n_dist(2, 20), cells_dist(8, 32);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> n01;
  Stopwatch clock;
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int cells = cells_dist(rng);
    const double extent = 10.0;
    const auto grid = oracle::random_grid(rng, cells, cells, extent / cells, 0.05 + 0.25 * u01(rng));
    Problem p;
    p.sdf = oracle::sdf_of(grid);
    p.start = State(1 + u01(rng), 1 + u01(rng));
    p.goal = State(8 + u01(rng), 8 + u01(rng));
    p.n_states = n_dist(rng);
    p.total_time = 2.0 + 10.0 * u01(rng);
    p.fixed.robot_radius = 0.1 + 0.3 * u01(rng);
    p.fixed.eps_safe = 0.3 * u01(rng);
    if (trial % 3 == 0) p.fixed.v_max = Vec2(0.5 + u01(rng), 0.5 + u01(rng));
    const PriorModel prior = build_prior(p);
    Trajectory tr = prior.mean;
    for (Eigen::Index i = 0; i < tr.flat().size(); ++i) tr.flat()[i] += 0.5 * n01(rng);
    Eigen::VectorXd sigma(p.n_states);
    for (int i = 0; i < p.n_states; ++i) sigma[i] = std::exp(std::log(0.01) + u01(rng) * std::log(30.0));

    const StepWork work = linearize_and_solve(tr, p, prior, LearnedParams{sigma});
    const Eigen::MatrixXd k_inv = oracle::dense_prior_information(prior);
    const auto ref = oracle::dense_likelihood(tr, *p.sdf, p.fixed, sigma);
    const Eigen::MatrixXd w = ref.weights.asDiagonal();
    const Eigen::MatrixXd m = k_inv + ref.h_jac.transpose() * w * ref.h_jac;
    const Eigen::VectorXd rhs =
        -k_inv * (tr.flat() - prior.mean.flat()) - ref.h_jac.transpose() * w * ref.residual;
    const Eigen::VectorXd dense = m.ldlt().solve(rhs);
    worst = std::max(worst, (work.delta - dense).lpNorm<Eigen::Infinity>());
  }
  const double t = clock.seconds();
  return {worst <= 1e-8 && t < 10.0, fmt("200 problems, max |delta - dense| %.2e (tol 1e-8), %.2f s (limit 10 s)", worst, t)};
}

// 2. Unrolled gradients against central differences on tiny configurations.
Outcome gradient_correctness() {
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<int> n_dist(4, 15), t_dist(1, 4), cells_dist(8, 32);
  Stopwatch clock;
  long long checked = 0, passed = 0, kinks = 0;
  int vacuous = 0;
  for (int k = 0; k < 50; ++k) {
    learn::GradcheckConfig c;
    c.n_states = n_dist(rng);
    c.network.n_states = c.n_states;
    c.unroll = t_dist(rng);
    c.grid_cells = cells_dist(rng);
    c.seed = static_cast<std::uint64_t>(k);
    const auto rep = learn::gradcheck(c);
    for (const auto* b : {&rep.log_sigma, &rep.params}) {
      checked += b->checked;
      passed += b->passed;
      kinks += b->kinks;
    }
    bool any = false;
    for (const auto& e : rep.entries) any = any || e.analytic != 0.0;
    vacuous += !any;
  }
  const double t = clock.seconds();
  const double frac = checked > 0 ? static_cast<double>(passed) / checked : 0.0;
  return {frac >= 0.99 && t < 300.0 && checked > 0,
          fmt("50 configurations, %lld/%lld non-kink coordinates pass (%.4f, need 0.99), %lld kinks "
              "excluded, %d all-zero reports, %.1f s (limit 300 s)",
              passed, checked, frac, kinks, vacuous, t)};
}

// 3. Empty environment: one iteration to the straight line.
Outcome prior_fixed_point() {
  Problem p;
  p.sdf = oracle::sdf_of(OccupancyGrid(64, 64, 10.0 / 64, Vec2(5.0 / 64, 5.0 / 64)));
  p.start = State(1, 1);
  p.goal = State(9, 9);
  const PlanResult r = plan(p, constant_sigma(0.05));
  const double err = (r.final.flat() - straight_line_init(p).flat()).lpNorm<Eigen::Infinity>();
  return {r.converged && r.iterations_used == 1 && err <= 1e-6,
          fmt("converged %d after %d iteration(s), max deviation %.2e (tol 1e-6)", r.converged,
              r.iterations_used, err)};
}

// 4. Fixed-sigma sensitivity on generated tarpit and forest instances.
Outcome sensitivity() {
  const int instances = 30;
  auto make = [](EnvKind kind, std::uint64_t seed, double r) {
    EnvSpec spec = EnvSpec::defaults(kind);
    spec.seed = seed;
    Problem p;
    p.sdf = std::make_shared<const Sdf>(compute_sdf(generate(spec)));
    p.start = State(spec.start, Vec2::Zero());
    p.goal = State(spec.goal, Vec2::Zero());
    p.fixed.q_c = 0.5 * Mat2::Identity();
    p.fixed.robot_radius = r;
    p.fixed.eps_safe = r;
    return p;
  };
  auto endpoints_ok = [](const Trajectory& t, const Problem& p) {
    return (t.position(0) - p.start.position).norm() <= 1e-3 &&
           (t.position(t.size() - 1) - p.goal.position).norm() <= 1e-3;
  };
  int tarpit = 0, forest = 0;
  for (int s = 0; s < instances; ++s) {
    {
      const Problem p = make(EnvKind::kTarpit, s, 0.4);
      const PlanResult small = plan(p, constant_sigma(0.01)), large = plan(p, constant_sigma(0.1));
      const double r = p.fixed.robot_radius;
      const bool small_ok = eval::is_collision_free(small.final, *p.sdf, r);
      const bool large_bad = !eval::is_collision_free(large.final, *p.sdf, r) || !large.converged;
      tarpit += small_ok && large_bad;
    }
    {
      const Problem p = make(EnvKind::kForest, s, 0.2);
      const PlanResult small = plan(p, constant_sigma(0.01)), large = plan(p, constant_sigma(0.1));
      const double r = p.fixed.robot_radius;
      const bool large_ok = eval::is_collision_free(large.final, *p.sdf, r);
      const bool small_bad = !eval::is_collision_free(small.final, *p.sdf, r) ||
                             !endpoints_ok(small.final, p) ||
                             eval::path_length(small.final) > 1.2 * eval::path_length(large.final);
      forest += large_ok && small_bad;
    }
  }
  const bool pass = 2 * tarpit > instances && 2 * forest > instances;
  return {pass, fmt("tarpit agreement %d/%d, forest agreement %d/%d (majority needed on both)", tarpit,
                    instances, forest, instances)};
}

/// Generates data, demonstrations and a trained checkpoint under `dir`.
bool train_pipeline(const fs::path& dir, const std::vector<std::string>& sets, int train_count,
                    std::uint64_t seed) {
  auto with = [&](std::vector<std::string> args) {
    for (const auto& s : sets) {
      args.push_back("--set");
      args.push_back(s);
    }
    return run_cli(args) == 0;
  };
  return with({"gen-data", "--out", (dir / "train").string(), "--count", std::to_string(train_count),
               "--seed", std::to_string(seed)}) &&
         with({"demo", "--data", (dir / "train" / "manifest.json").string(), "--out",
               (dir / "demos").string(), "--seed", std::to_string(seed)}) &&
         with({"train", "--data", (dir / "train" / "manifest.json").string(), "--demos",
               (dir / "demos" / "demos.jsonl").string(), "--out", (dir / "model").string(), "--seed",
               std::to_string(seed)});
}

// 5. Mixed forest/tarpit table orderings at desk scale.
Outcome table_one() {
  const fs::path d = scratch("table1");
  Stopwatch clock;
  if (!train_pipeline(d, {}, 400, 7)) return {false, "pipeline failed"};
  if (run_cli({"gen-data", "--out", (d / "test").string(), "--count", "100", "--seed", "1001"}) != 0 ||
      run_cli({"eval", "--data", (d / "test" / "manifest.json").string(), "--checkpoint",
               (d / "model" / "checkpoint.bin").string(), "--out", (d / "eval").string()}) != 0)
    return {false, "evaluation failed"};
  auto rows = read_summary(d / "eval" / "summary.csv");
  const auto& s01f = rows["gpmp2_0.01/forest"];
  const auto& s15f = rows["gpmp2_0.15/forest"];
  const auto& s01t = rows["gpmp2_0.01/tarpit"];
  const auto& s15t = rows["gpmp2_0.15/tarpit"];
  const auto& s01m = rows["gpmp2_0.01/mixed"];
  const auto& s15m = rows["gpmp2_0.15/mixed"];
  const auto& dm = rows["dgpmp2/mixed"];
  auto pct = [](const SummaryRow& r) { return r.problems ? 100.0 * r.successes / r.problems : 0.0; };
  const bool a = pct(s15f) > pct(s01f) && pct(s15t) < pct(s01t);
  const bool b = pct(dm) >= std::max(pct(s01m), pct(s15m)) - 3.0;
  const bool c = dm.gp_mse <= s01m.gp_mse;
  const double t = clock.seconds();
  fs::remove_all(d);
  return {a && b && c && t < 4 * 3600.0,
          fmt("(a) %s forest 0.15=%.0f%% vs 0.01=%.0f%%, tarpit 0.15=%.0f%% vs 0.01=%.0f%%; "
              "(b) %s dgpmp2 mixed %.0f%% vs best baseline %.0f%% - 3; "
              "(c) %s gp_mse %.4f vs %.4f; %.0f s",
              a ? "ok" : "FAIL", pct(s15f), pct(s01f), pct(s15t), pct(s01t), b ? "ok" : "FAIL", pct(dm),
              std::max(pct(s01m), pct(s15m)), c ? "ok" : "FAIL", dm.gp_mse, s01m.gp_mse, t)};
}

// 6. Velocity-limit training and testing orderings.
Outcome table_two() {
  const fs::path d = scratch("table2");
  auto sets = [](double horizon, double vmax) {
    return std::vector<std::string>{"data.kind=multi_obs", fmt("problem.total_time=%g", horizon),
                                    fmt("problem.fixed.v_max=[%g,%g]", vmax, vmax),
                                    "problem.fixed.k_vel=1e-4"};
  };
  const auto mild = sets(15.0, 1.5), tight = sets(10.0, 1.0);
  if (!train_pipeline(d / "mild", mild, 200, 11) || !train_pipeline(d / "tight", tight, 200, 11))
    return {false, "pipeline failed"};
  auto test = [&](const fs::path& dir, const std::vector<std::string>& s) {
    std::vector<std::string> args{"gen-data", "--out", dir.string(), "--count", "100", "--seed", "12"};
    for (const auto& x : s) args.insert(args.end(), {"--set", x});
    return run_cli(args) == 0;
  };
  auto evaluate = [&](const fs::path& data, const fs::path& model, const fs::path& out) {
    run_cli({"eval", "--data", (data / "manifest.json").string(), "--checkpoint",
             (model / "model" / "checkpoint.bin").string(), "--out", out.string(), "--set",
             "eval.variants=[]"});
    return read_summary(out / "summary.csv")["dgpmp2/mixed"].violation;
  };
  if (!test(d / "test_mild", mild) || !test(d / "test_tight", tight)) return {false, "test data failed"};
  const double mm = evaluate(d / "test_mild", d / "mild", d / "mm");
  const double mt = evaluate(d / "test_tight", d / "mild", d / "mt");
  const double tt = evaluate(d / "test_tight", d / "tight", d / "tt");
  fs::remove_all(d);
  // "Much greater" is taken as at least five times the mild-on-mild value.
  const bool order = tt <= mt;
  const bool gap = tt >= 5.0 * mm && mt >= 5.0 * mm && tt > 0.0;
  return {order && gap, fmt("violation tight/tight %.3e <= mild/tight %.3e: %s; both >= 5x mild/mild %.3e: %s",
                            tt, mt, order ? "ok" : "FAIL", mm, gap ? "ok" : "FAIL")};
}

// 7. Exact transform against the brute-force distance.
Outcome sdf_exactness() {
  std::mt19937_64 rng(707);
  std::uniform_int_distribution<int> side(1, 32);
  std::uniform_real_distribution<double> fill(0.0, 0.6), res(0.05, 1.0);
  double worst = 0.0;
  bool pass = true;
  for (int k = 0; k < 100; ++k) {
    const auto g = oracle::random_grid(rng, side(rng), side(rng), res(rng), fill(rng));
    const Sdf sdf = compute_sdf(g);
    const auto ref = oracle::brute_sdf(g);
    for (int y = 0; y < g.height(); ++y)
      for (int x = 0; x < g.width(); ++x) {
        const double e = std::abs(sdf.at(x, y) - ref[g.index(x, y)]);
        worst = std::max(worst, e / g.resolution());
        pass = pass && e <= g.resolution();
      }
  }
  return {pass, fmt("100 grids up to 32x32, max error %.2e resolution units (limit 1)", worst)};
}

std::map<std::string, std::string> tree_bytes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = io::read_text(e.path());
  return out;
}

// 8. Every subcommand reproduces its outputs byte for byte.
Outcome determinism() {
  const fs::path d = scratch("determinism");
  const nlohmann::json cfg = {
      {"problem", {{"n_states", 20}}},
      {"data", {{"count", 8}}},
      {"planner", {{"t_max", 40}}},
      {"expert", {{"iterations", 1500}}},
      {"train",
       {{"epochs", 2},
        {"batch", 4},
        {"unroll", 3},
        {"network", {{"image_size", 16}, {"conv_filters", {4, 4}}, {"fc_hidden", {32}}}}}},
      {"validation", {{"fraction", 0.25}}}};
  const std::string conf = (d / "config.json").string();
  io::write_text(conf, cfg.dump());
  std::vector<std::string> names;
  bool ok = true;
  for (const char* tag : {"a", "b"}) {
    const fs::path r = d / tag;
    const std::string data = (r / "data" / "manifest.json").string();
    ok = ok && run_cli({"gen-data", "--config", conf, "--seed", "5", "--out", (r / "data").string()}) == 0;
    ok = ok && run_cli({"demo", "--config", conf, "--seed", "5", "--data", data, "--out", (r / "demos").string()}) == 0;
    ok = ok && run_cli({"train", "--config", conf, "--seed", "5", "--data", data, "--demos",
                        (r / "demos" / "demos.jsonl").string(), "--out", (r / "train").string()}) == 0;
    // Both evaluation and planning read the first run's checkpoint so their
    // configuration is identical across the two repetitions.
    const std::string ckpt = (d / "a" / "train" / "checkpoint.bin").string();
    ok = ok && run_cli({"eval", "--config", conf, "--seed", "5", "--data", data, "--checkpoint", ckpt,
                        "--out", (r / "eval").string()}) == 0;
    std::vector<fs::path> problems;
    for (const auto& e : fs::directory_iterator(d / "a" / "data" / "envs"))
      if (e.path().extension() == ".json") problems.push_back(e.path());
    std::sort(problems.begin(), problems.end());
    ok = ok && !problems.empty() &&
         run_cli({"plan", "--config", conf, "--seed", "5", "--problem", problems.front().string(),
                  "--checkpoint", ckpt, "--out", (r / "plan").string()}) == 0;
    ok = ok && run_cli({"gradcheck", "--config", conf, "--seed", "5", "--out", (r / "gradcheck").string()}) == 0;
  }
  if (!ok) return {false, "a subcommand failed"};
  int compared = 0, differing = 0;
  std::string first_diff;
  for (const char* sub : {"data", "demos", "train", "eval", "plan", "gradcheck"}) {
    const auto a = tree_bytes(d / "a" / sub), b = tree_bytes(d / "b" / sub);
    if (a.size() != b.size()) {
      ++differing;
      if (first_diff.empty()) first_diff = std::string(sub) + " file sets";
    }
    for (const auto& [name, bytes] : a) {
      ++compared;
      auto it = b.find(name);
      if (it == b.end() || it->second != bytes) {
        ++differing;
        if (first_diff.empty()) first_diff = std::string(sub) + "/" + name;
      }
    }
  }
  fs::remove_all(d);
  return {differing == 0, fmt("6 subcommands, %d files compared, %d differ%s%s", compared, differing,
                              first_diff.empty() ? "" : ", first: ", first_diff.c_str())};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"solver equivalence", solver_equivalence},
      {"gradient correctness", gradient_correctness},
      {"prior fixed point", prior_fixed_point},
      {"sensitivity reproduction", sensitivity},
      {"mixed table orderings", table_one},
      {"velocity table orderings", table_two},
      {"sdf exactness", sdf_exactness},
      {"determinism", determinism}};
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  bool all = true;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %d %-26s %s  %s\n", id, criteria[k].first.c_str(), o.pass ? "PASS" : "FAIL",
                o.detail.c_str());
    std::fflush(stdout);
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
