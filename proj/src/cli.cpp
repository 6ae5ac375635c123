#include "dgpmp/cli.hpp"

#include "dgpmp/eval.hpp"
#include "dgpmp/io.hpp"
#include "dgpmp/learn/checkpoint.hpp"
#include "dgpmp/learn/gradcheck.hpp"
#include "dgpmp/parallel.hpp"
#include "dgpmp/svg.hpp"

#include <CLI11.hpp>

#include <fcntl.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

namespace dgpmp::cli {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Config conversion

json to_json(const PlannerConfig& c) {
  return {{"t_max", c.t_max},
          {"tol_rel_err", c.tol_rel_err},
          {"tol_update", c.tol_update},
          {"fixed_unroll", c.fixed_unroll ? json(*c.fixed_unroll) : json(nullptr)},
          {"step_scale", c.step_scale},
          {"fallback_damping", c.fallback_damping},
          {"max_backtracks", c.max_backtracks}};
}

PlannerConfig planner_config_from_json(const json& j, PlannerConfig c) {
  c.t_max = j.value("t_max", c.t_max);
  c.tol_rel_err = j.value("tol_rel_err", c.tol_rel_err);
  c.tol_update = j.value("tol_update", c.tol_update);
  if (j.contains("fixed_unroll") && !j["fixed_unroll"].is_null())
    c.fixed_unroll = j["fixed_unroll"].get<int>();
  c.step_scale = j.value("step_scale", c.step_scale);
  c.fallback_damping = j.value("fallback_damping", c.fallback_damping);
  c.max_backtracks = j.value("max_backtracks", c.max_backtracks);
  c.validate();
  return c;
}

json to_json(const ExpertConfig& c) {
  return {{"iterations", c.iterations},
          {"steer_step", c.steer_step},
          {"goal_bias", c.goal_bias},
          {"rewire_gamma", c.rewire_gamma},
          {"rewire_max", c.rewire_max},
          {"edge_check_fraction", c.edge_check_fraction},
          {"extra_clearance", c.extra_clearance},
          {"shortcut", c.shortcut},
          {"smoothing_sigma", c.smoothing_sigma},
          {"q_c", json::array({{c.q_c(0, 0), c.q_c(0, 1)}, {c.q_c(1, 0), c.q_c(1, 1)}})},
          {"smoothing", to_json(c.smoothing)}};
}

ExpertConfig expert_config_from_json(const json& j) {
  ExpertConfig c;
  c.iterations = j.value("iterations", c.iterations);
  c.steer_step = j.value("steer_step", c.steer_step);
  c.goal_bias = j.value("goal_bias", c.goal_bias);
  c.rewire_gamma = j.value("rewire_gamma", c.rewire_gamma);
  c.rewire_max = j.value("rewire_max", c.rewire_max);
  c.edge_check_fraction = j.value("edge_check_fraction", c.edge_check_fraction);
  c.extra_clearance = j.value("extra_clearance", c.extra_clearance);
  c.shortcut = j.value("shortcut", c.shortcut);
  c.smoothing_sigma = j.value("smoothing_sigma", c.smoothing_sigma);
  if (j.contains("q_c")) c.q_c = io::fixed_params_from_json(json{{"q_c", j["q_c"]}}).q_c;
  if (j.contains("smoothing")) c.smoothing = planner_config_from_json(j["smoothing"], c.smoothing);
  c.validate();
  return c;
}

json to_json(const learn::TrainConfig& c) {
  return {{"unroll", c.unroll},
          {"batch", c.batch},
          {"epochs", c.epochs},
          {"learning_rate", c.learning_rate},
          {"momentum", c.momentum},
          {"optimizer", c.optimizer == learn::OptimizerKind::kAdam ? "adam" : "sgd"},
          {"grad_clip", c.grad_clip},
          {"lambda", c.lambda},
          {"positions_only", c.positions_only},
          {"norm_momentum", c.norm_momentum},
          {"network", learn::to_json(c.network)}};
}

learn::TrainConfig train_config_from_json(const json& j) {
  learn::TrainConfig c;
  c.unroll = j.value("unroll", c.unroll);
  c.batch = j.value("batch", c.batch);
  c.epochs = j.value("epochs", c.epochs);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.momentum = j.value("momentum", c.momentum);
  const std::string opt = j.value("optimizer", std::string("sgd"));
  if (opt == "sgd")
    c.optimizer = learn::OptimizerKind::kSgdMomentum;
  else if (opt == "adam")
    c.optimizer = learn::OptimizerKind::kAdam;
  else
    throw InvalidArgument("unknown optimizer '" + opt + "' (sgd|adam)");
  c.grad_clip = j.value("grad_clip", c.grad_clip);
  c.lambda = j.value("lambda", c.lambda);
  c.positions_only = j.value("positions_only", c.positions_only);
  c.norm_momentum = j.value("norm_momentum", c.norm_momentum);
  if (j.contains("network")) {
    const json& n = j["network"];
    if (n.is_string()) {
      const std::string scale = n.get<std::string>();
      if (scale == "desk")
        c.network = learn::NetworkSpec::desk();
      else if (scale == "full")
        c.network = learn::NetworkSpec::full();
      else
        throw InvalidArgument("network must be an object, \"desk\" or \"full\"");
    } else {
      c.network = learn::network_spec_from_json(n);
    }
  }
  return c;
}

EnvSpec env_spec_from_json(EnvKind kind, const json& j) {
  EnvSpec s = EnvSpec::defaults(kind);
  s.extent = j.value("extent", s.extent);
  s.cells = j.value("cells", s.cells);
  s.min_obstacles = j.value("min_obstacles", s.min_obstacles);
  s.max_obstacles = j.value("max_obstacles", s.max_obstacles);
  s.min_size = j.value("min_size", s.min_size);
  s.max_size = j.value("max_size", s.max_size);
  s.keep_free_margin = j.value("keep_free_margin", s.keep_free_margin);
  s.max_fill = j.value("max_fill", s.max_fill);
  return s;
}

EnvKind mixed_kind(int i, double ratio, EnvKind first, EnvKind second) {
  const auto count = [&](int k) { return static_cast<long long>(std::ceil(k * ratio)); };
  return count(i + 1) > count(i) ? first : second;
}

json default_config() {
  json fixed = io::to_json(FixedParams{});
  json variants = json::array();
  variants.push_back({{"name", "gpmp2_0.01"}, {"sigma", 0.01}});
  variants.push_back({{"name", "gpmp2_0.15"}, {"sigma", 0.15}});
  return {
      {"seed", 0},
      {"jobs", 1},
      {"problem",
       {{"n_states", 50},
        {"total_time", 10.0},
        {"start", {1.0, 1.0}},
        {"goal", {9.0, 9.0}},
        {"fixed", fixed}}},
      {"data",
       {{"count", 100},
        {"kind", "mixed"},
        {"mix", {"forest", "tarpit"}},
        {"ratio", 0.5},
        {"max_attempts", 50},
        {"env", {{"forest", json::object()}, {"tarpit", json::object()}, {"multi_obs", json::object()}}}}},
      {"planner", to_json(PlannerConfig{})},
      {"expert", to_json(ExpertConfig{})},
      {"train", to_json(learn::TrainConfig{})},
      {"validation", {{"fraction", 0.1}, {"max_problems", 40}, {"keep", "best"}}},
      {"eval", {{"variants", variants}}},
      {"plan", {{"sigma", 0.05}, {"checkpoint", nullptr}}},
      {"gradcheck",
       {{"grid_cells", 16},
        {"n_states", 8},
        {"unroll", 2},
        {"step", 1e-5},
        {"rel_tol", 1e-3},
        {"abs_tol", 1e-7},
        {"min_pass_fraction", 0.99}}}};
}

json layer_config(const json& base, const json& file, const std::vector<std::string>& overrides) {
  json cfg = base;
  if (!file.is_null()) {
    if (!file.is_object()) throw UsageError("config file must hold a JSON object");
    cfg.merge_patch(file);
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key.path=value, got '" + o + "'");
    const std::string key = o.substr(0, eq);
    const std::string raw = o.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;
    std::string ptr = "/";
    for (char c : key) ptr += c == '.' ? '/' : c;
    cfg[json::json_pointer(ptr)] = value;
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Run plumbing

namespace {

class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Exclusive per-directory lock, released on destruction.
class DirLock {
 public:
  explicit DirLock(const fs::path& dir) : path_(dir / ".dgpmp.lock") {
    fs::create_directories(dir);
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0)
      throw RuntimeFailure("output directory " + dir.string() +
                           " is locked by another run (remove " + path_.string() + " if stale)");
  }
  ~DirLock() {
    ::close(fd_);
    std::error_code ec;
    fs::remove(path_, ec);
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  fs::path path_;
  int fd_ = -1;
};

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::string out;
  std::vector<std::string> sets;
};

void add_common(CLI::App* app, Common& c, bool out_required) {
  app->add_option("--config", c.config_path, "JSON configuration file")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "Random seed");
  app->add_option("--jobs", c.jobs, "Worker threads")->check(CLI::PositiveNumber);
  auto* out = app->add_option("--out", c.out, "Output directory");
  if (out_required) out->required();
  app->add_option("--set", c.sets, "Override a config value, key.path=value");
}

json resolve(const Common& c) {
  json file;
  if (!c.config_path.empty()) {
    try {
      file = json::parse(io::read_text(c.config_path));
    } catch (const json::parse_error& e) {
      throw UsageError("cannot parse " + c.config_path + ": " + e.what());
    }
  }
  json cfg = layer_config(default_config(), file, c.sets);
  if (c.seed) cfg["seed"] = *c.seed;
  if (c.jobs) cfg["jobs"] = *c.jobs;
  return cfg;
}

void write_resolved(const fs::path& out, const json& cfg) {
  io::write_text(out / "config.resolved.json", cfg.dump(2) + "\n");
}

Problem base_problem(const json& cfg) {
  const json& p = cfg.at("problem");
  Problem prob;
  prob.n_states = p.value("n_states", prob.n_states);
  prob.total_time = p.value("total_time", prob.total_time);
  prob.start = io::state_from_json(p.at("start"));
  prob.goal = io::state_from_json(p.at("goal"));
  prob.fixed = io::fixed_params_from_json(p.value("fixed", json::object()));
  return prob;
}

std::string env_id(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "env_%05d", i);
  return buf;
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_gen_data(const json& cfg, const fs::path& out, std::ostream& os) {
  const json& d = cfg.at("data");
  const int count = d.value("count", 0);
  if (count < 0) throw UsageError("data.count must be >= 0");
  const std::string kind = d.value("kind", std::string("mixed"));
  const double ratio = d.value("ratio", 0.5);
  const int attempts = d.value("max_attempts", 50);
  const std::uint64_t seed = cfg.value("seed", std::uint64_t{0});
  const int jobs = cfg.value("jobs", 1);
  const Problem proto = base_problem(cfg);

  std::vector<EnvKind> kinds(count);
  for (int i = 0; i < count; ++i) {
    if (kind == "mixed") {
      const auto& mix = d.at("mix");
      if (mix.size() != 2) throw UsageError("data.mix must name two kinds");
      kinds[i] = mixed_kind(i, ratio, env_kind_from_string(mix[0].get<std::string>()),
                            env_kind_from_string(mix[1].get<std::string>()));
    } else {
      kinds[i] = env_kind_from_string(kind);
    }
  }

  std::vector<io::ManifestEntry> entries(count);
  fs::create_directories(out / "envs");
  parallel_for(count, jobs, [&](int i) {
    const std::string id = env_id(i);
    const json overrides = d.at("env").value(to_string(kinds[i]), json::object());
    for (int a = 0; a < attempts; ++a) {
      EnvSpec spec = env_spec_from_json(kinds[i], overrides);
      spec.start = proto.start.position;
      spec.goal = proto.goal.position;
      spec.seed = derive_seed(derive_seed(seed, static_cast<std::uint64_t>(i)), a);
      OccupancyGrid grid = generate(spec);
      auto sdf = std::make_shared<const Sdf>(compute_sdf(grid));
      const double r = proto.fixed.robot_radius;
      if (!(sdf->query_dist(spec.start) > r) || !(sdf->query_dist(spec.goal) > r)) continue;

      io::ProblemFile pf;
      pf.id = id;
      pf.kind = kinds[i];
      pf.seed = spec.seed;
      pf.grid = id + ".occ";
      pf.sdf = id + ".sdf";
      pf.problem = proto;
      pf.problem.sdf = sdf;
      pf.problem.validate();
      save_grid((out / "envs" / pf.grid).string(), grid);
      save_sdf((out / "envs" / pf.sdf).string(), *sdf);
      io::save_problem(out / "envs" / (id + ".json"), pf);
      entries[i] = {id, kinds[i], "envs/" + id + ".json"};
      return;
    }
    throw RuntimeFailure("could not generate a feasible " + to_string(kinds[i]) + " environment for " +
                         id + " in " + std::to_string(attempts) + " attempts");
  });
  io::save_manifest(out / "manifest.json", entries);
  os << "wrote " << count << " environments to " << out.string() << "\n";
  return kOk;
}

int cmd_demo(const json& cfg, const fs::path& data, const fs::path& out, std::ostream& os) {
  const auto manifest = io::load_manifest(data);
  const auto dataset = io::load_dataset(data);
  const ExpertConfig base = expert_config_from_json(cfg.at("expert"));
  const std::uint64_t seed = cfg.value("seed", std::uint64_t{0});
  const int n = static_cast<int>(dataset.size());

  std::vector<DemoResult> results(n);
  parallel_for(n, cfg.value("jobs", 1), [&](int i) {
    ExpertConfig c = base;
    c.seed = derive_seed(seed, static_cast<std::uint64_t>(i));
    results[i] = make_demo(dataset[i].problem, c);
  });

  std::vector<io::DemoRecord> demos;
  std::ostringstream failures;
  failures << "env_id,reason\n";
  for (int i = 0; i < n; ++i) {
    if (results[i].demo) {
      demos.push_back({dataset[i].id, manifest[i].problem, results[i].demo->expert,
                       derive_seed(seed, static_cast<std::uint64_t>(i)), results[i].rrt_iterations,
                       results[i].rrt_cost});
    } else {
      failures << dataset[i].id << ',' << results[i].failure << '\n';
    }
  }
  io::save_demos(out / "demos.jsonl", demos);
  io::write_text(out / "demo_failures.csv", failures.str());
  os << "demonstrations: " << demos.size() << " of " << n << "\n";
  return kOk;
}

std::vector<learn::TrainSample> load_samples(const fs::path& data, const fs::path& demos_path,
                                             int image_size) {
  std::map<std::string, Problem> problems;
  for (auto& p : io::load_dataset(data)) problems.emplace(p.id, p.problem);
  std::vector<learn::TrainSample> out;
  for (auto& d : io::load_demos(demos_path)) {
    auto it = problems.find(d.id);
    if (it == problems.end()) throw RuntimeFailure("demonstration " + d.id + " has no problem in " + data.string());
    out.push_back(learn::TrainSample::make({it->second, d.expert}, image_size));
  }
  return out;
}

int cmd_train(json& cfg, const fs::path& data, const fs::path& demos, const fs::path& out,
              std::ostream& os) {
  learn::TrainConfig tc = train_config_from_json(cfg.at("train"));
  tc.seed = cfg.value("seed", std::uint64_t{0});
  tc.jobs = cfg.value("jobs", 1);
  auto samples = load_samples(data, demos, tc.network.image_size);
  if (samples.empty()) throw RuntimeFailure("no demonstrations to train on");
  tc.network.n_states = samples.front().demo.problem.n_states;
  cfg["train"]["network"] = learn::to_json(tc.network);
  write_resolved(out, cfg);

  const double frac = cfg.at("validation").value("fraction", 0.1);
  const int max_val = cfg.at("validation").value("max_problems", 40);
  const std::string keep = cfg.at("validation").value("keep", std::string("best"));
  if (keep != "best" && keep != "last") throw UsageError("validation.keep must be best or last");
  int n_val = std::min(max_val, static_cast<int>(std::ceil(frac * samples.size())));
  if (n_val >= static_cast<int>(samples.size())) n_val = 0;
  std::vector<learn::TrainSample> val(samples.end() - n_val, samples.end());
  samples.erase(samples.end() - n_val, samples.end());

  std::ofstream log(out / "train_log.csv", std::ios::trunc);
  if (!log) throw RuntimeFailure("cannot write train_log.csv");
  learn::write_log_csv_header(log);
  const PlannerConfig pc = planner_config_from_json(cfg.at("planner"));
  // With "best" the checkpoint holds the first epoch reaching the highest
  // validation success; the final weights always go to checkpoint_last.bin.
  const bool keep_best = keep == "best" && n_val > 0;
  double best = -1.0;
  auto result = learn::train(samples, val, tc, pc, [&](const learn::EpochLog& row, const learn::Network& net) {
    learn::write_log_csv_row(log, row);
    log.flush();
    os << "epoch " << row.epoch << " loss " << row.train_loss << " val_success " << row.val_success
       << " skipped " << row.skipped << "\n";
    if (keep_best && row.val_success > best) {
      best = row.val_success;
      learn::save_checkpoint((out / "checkpoint.bin").string(), net);
    }
  });
  if (!keep_best) learn::save_checkpoint((out / "checkpoint.bin").string(), result.network);
  learn::save_checkpoint((out / "checkpoint_last.bin").string(), result.network);
  return kOk;
}

std::vector<eval::PlannerVariant> variants_from(const json& cfg) {
  std::vector<eval::PlannerVariant> out;
  for (const auto& v : cfg.at("eval").at("variants")) {
    eval::PlannerVariant pv;
    pv.name = v.at("name").get<std::string>();
    if (v.contains("sigma") && !v["sigma"].is_null()) {
      pv.fixed_sigma = v["sigma"].get<double>();
    } else if (v.contains("checkpoint")) {
      pv.network = std::make_shared<const learn::Network>(
          learn::load_checkpoint(v["checkpoint"].get<std::string>()));
    } else {
      throw UsageError("variant '" + pv.name + "' needs sigma or checkpoint");
    }
    out.push_back(std::move(pv));
  }
  if (out.empty()) throw UsageError("eval.variants is empty");
  return out;
}

int cmd_eval(const json& cfg, const fs::path& data, const fs::path& out, std::ostream& os) {
  const auto variants = variants_from(cfg);
  std::vector<eval::EvalProblem> problems;
  for (auto& p : io::load_dataset(data)) problems.push_back({p.id, p.kind, p.problem});
  const PlannerConfig pc = planner_config_from_json(cfg.at("planner"));

  std::vector<eval::ProblemRecord> completed;
  const fs::path results = out / "results.csv";
  if (fs::exists(results)) {
    std::ifstream is(results);
    completed = eval::read_records_csv(is);
  }
  const auto res = eval::run_experiment(problems, variants, pc, cfg.value("jobs", 1), completed);
  std::ostringstream rec, sum;
  eval::write_records_csv(rec, res.records);
  eval::write_summary_csv(sum, res.rows);
  io::write_text(results, rec.str());
  io::write_text(out / "summary.csv", sum.str());
  os << sum.str();
  return kOk;
}

int cmd_plan(const json& cfg, const fs::path& problem_path, const fs::path& out, std::ostream& os) {
  const io::ProblemFile pf = io::load_problem(problem_path);
  const Problem& problem = pf.problem;
  const PlannerConfig pc = planner_config_from_json(cfg.at("planner"));
  const json& pj = cfg.at("plan");
  eval::PlannerVariant variant;
  if (pj.contains("checkpoint") && !pj["checkpoint"].is_null()) {
    variant.name = "dgpmp2";
    variant.network = std::make_shared<const learn::Network>(
        learn::load_checkpoint(pj["checkpoint"].get<std::string>()));
  } else {
    variant.name = "gpmp2";
    variant.fixed_sigma = pj.value("sigma", 0.05);
  }
  const Trajectory init = straight_line_init(problem);
  const PlanResult res = plan(problem, variant.provider_for(problem), pc);
  const PriorModel prior = build_prior(problem);
  const double r = problem.fixed.robot_radius;

  json j{{"problem", pf.id},
         {"variant", variant.name},
         {"iterations", res.iterations_used},
         {"converged", res.converged},
         {"error", res.error ? json(*res.error) : json(nullptr)},
         {"collision_free", eval::is_collision_free(res.final, *problem.sdf, r)},
         {"gp_mse", eval::gp_mse(res.final, prior)},
         {"coll_intensity", eval::coll_intensity(res.final, *problem.sdf, r)},
         {"objectives", res.objectives},
         {"init", io::to_json(init)},
         {"trajectory", io::to_json(res.final)}};
  if (problem.fixed.v_max) j["constraint_violation"] = eval::constraint_violation(res.final, *problem.fixed.v_max);
  io::write_text(out / "plan.json", j.dump(2) + "\n");

  svg::PlanFigure fig;
  fig.sdf = problem.sdf.get();
  fig.contour_level = problem.fixed.epsilon();
  fig.initializations = {init};
  fig.solutions = {res.final};
  fig.start = problem.start.position;
  fig.goal = problem.goal.position;
  fig.title = pf.id + " " + variant.name;
  io::write_text(out / "plan.svg", svg::render(fig));
  os << "iterations " << res.iterations_used << " converged " << res.converged << " collision_free "
     << j["collision_free"].get<bool>() << "\n";
  return kOk;
}

int cmd_gradcheck(const json& cfg, const std::optional<fs::path>& out, std::ostream& os) {
  const json& g = cfg.at("gradcheck");
  learn::GradcheckConfig c;
  c.grid_cells = g.value("grid_cells", c.grid_cells);
  c.n_states = g.value("n_states", c.n_states);
  c.network.n_states = c.n_states;
  c.unroll = g.value("unroll", c.unroll);
  c.step = g.value("step", c.step);
  c.rel_tol = g.value("rel_tol", c.rel_tol);
  c.abs_tol = g.value("abs_tol", c.abs_tol);
  c.min_pass_fraction = g.value("min_pass_fraction", c.min_pass_fraction);
  c.seed = cfg.value("seed", std::uint64_t{0});
  const auto rep = learn::gradcheck(c);

  json j = json::object();
  double max_rel = 0.0;
  for (const auto* b : {&rep.log_sigma, &rep.params}) {
    os << b->name << ": checked " << b->checked << " passed " << b->passed << " kinks " << b->kinks
       << " max_rel_error " << b->max_rel_error << "\n";
    j[b->name] = {{"checked", b->checked},
                  {"passed", b->passed},
                  {"kinks", b->kinks},
                  {"max_rel_error", b->max_rel_error}};
    max_rel = std::max(max_rel, b->max_rel_error);
  }
  os << "max relative error " << max_rel << (rep.ok ? " (ok)" : " (threshold exceeded)") << "\n";
  j["ok"] = rep.ok;
  if (out) {
    io::write_text(*out / "gradcheck.json", j.dump(2) + "\n");
    std::ostringstream table;
    table.precision(17);
    table << "block,name,index,analytic,numeric,status\n";
    for (const auto& e : rep.entries)
      table << e.block << ',' << e.name << ',' << e.index << ',' << e.analytic << ',' << e.numeric
            << ',' << (e.kink ? "kink" : e.pass ? "pass" : "FAIL") << '\n';
    io::write_text(*out / "gradcheck.csv", table.str());
  }
  return rep.ok ? kOk : kGradcheckFailed;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Differentiable GP motion planner for 2D point robots", "dgpmp"};
  app.require_subcommand(1);

  Common gen, demo, train, ev, pl, gc;
  std::string data_path, demos_path, problem_path, checkpoint;
  std::optional<double> sigma;
  std::optional<int> count;

  auto* s_gen = app.add_subcommand("gen-data", "Generate environments, problems and SDF caches");
  add_common(s_gen, gen, true);
  s_gen->add_option("--count", count, "Number of environments");

  auto* s_demo = app.add_subcommand("demo", "Generate expert demonstrations");
  add_common(s_demo, demo, true);
  s_demo->add_option("--data", data_path, "Dataset manifest")->required()->check(CLI::ExistingFile);

  auto* s_train = app.add_subcommand("train", "Train the covariance network");
  add_common(s_train, train, true);
  s_train->add_option("--data", data_path, "Dataset manifest")->required()->check(CLI::ExistingFile);
  s_train->add_option("--demos", demos_path, "Demonstration file")->required()->check(CLI::ExistingFile);

  auto* s_eval = app.add_subcommand("eval", "Evaluate planner variants on a dataset");
  add_common(s_eval, ev, true);
  s_eval->add_option("--data", data_path, "Dataset manifest")->required()->check(CLI::ExistingFile);
  s_eval->add_option("--checkpoint", checkpoint, "Adds a learned variant named dgpmp2")
      ->check(CLI::ExistingFile);

  auto* s_plan = app.add_subcommand("plan", "Plan a single problem and draw it");
  add_common(s_plan, pl, true);
  s_plan->add_option("--problem", problem_path, "Problem JSON file")->required()->check(CLI::ExistingFile);
  s_plan->add_option("--checkpoint", checkpoint, "Use a trained network")->check(CLI::ExistingFile);
  s_plan->add_option("--sigma", sigma, "Constant obstacle sigma")->check(CLI::PositiveNumber);

  auto* s_gc = app.add_subcommand("gradcheck", "Compare analytic and numeric gradients");
  add_common(s_gc, gc, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (s_gen->parsed()) {
      json cfg = resolve(gen);
      if (count) cfg["data"]["count"] = *count;
      const fs::path o = gen.out;
      DirLock lock(o);
      write_resolved(o, cfg);
      return cmd_gen_data(cfg, o, out);
    }
    if (s_demo->parsed()) {
      json cfg = resolve(demo);
      const fs::path o = demo.out;
      DirLock lock(o);
      write_resolved(o, cfg);
      return cmd_demo(cfg, data_path, o, out);
    }
    if (s_train->parsed()) {
      json cfg = resolve(train);
      const fs::path o = train.out;
      DirLock lock(o);
      return cmd_train(cfg, data_path, demos_path, o, out);
    }
    if (s_eval->parsed()) {
      json cfg = resolve(ev);
      if (!checkpoint.empty())
        cfg["eval"]["variants"].push_back({{"name", "dgpmp2"}, {"checkpoint", checkpoint}});
      const fs::path o = ev.out;
      DirLock lock(o);
      write_resolved(o, cfg);
      return cmd_eval(cfg, data_path, o, out);
    }
    if (s_plan->parsed()) {
      json cfg = resolve(pl);
      if (!checkpoint.empty()) cfg["plan"]["checkpoint"] = checkpoint;
      if (sigma) {
        cfg["plan"]["sigma"] = *sigma;
        cfg["plan"]["checkpoint"] = nullptr;
      }
      const fs::path o = pl.out;
      DirLock lock(o);
      write_resolved(o, cfg);
      return cmd_plan(cfg, problem_path, o, out);
    }
    if (s_gc->parsed()) {
      json cfg = resolve(gc);
      std::optional<fs::path> o;
      std::optional<DirLock> lock;
      if (!gc.out.empty()) {
        o = gc.out;
        lock.emplace(*o);
        write_resolved(*o, cfg);
      }
      return cmd_gradcheck(cfg, o, out);
    }
  } catch (const UsageError& e) {
    err << "error[usage]: " << e.what() << "\n";
    return kUsage;
  } catch (const InvalidArgument& e) {
    err << "error[config]: " << e.what() << "\n";
    return kUsage;
  } catch (const json::exception& e) {
    err << "error[config]: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error[runtime]: " << e.what() << "\n";
    return kRuntime;
  }
  err << "error[usage]: no subcommand\n";
  return kUsage;
}

}  // namespace dgpmp::cli
