#include "dgpmp/eval.hpp"

#include "dgpmp/learn/train.hpp"
#include "dgpmp/parallel.hpp"

#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace dgpmp::eval {

int collision_count(const Trajectory& traj, const Sdf& sdf, double radius) {
  int count = 0;
  for (int i = 0; i < traj.size(); ++i)
    if (!(sdf.query_dist(traj.position(i)) > radius)) ++count;
  return count;
}

bool is_collision_free(const Trajectory& traj, const Sdf& sdf, double radius) {
  return collision_count(traj, sdf, radius) == 0;
}

double gp_mse(const Trajectory& traj, const PriorModel& prior) {
  if (traj.size() != prior.size())
    throw InvalidArgument("gp_mse: trajectory and prior sizes differ");
  double sum = 0.0;
  for (int i = 0; i + 1 < traj.size(); ++i) {
    const Vec4 e = gp_residual(prior, traj, i);
    sum += e.dot(prior.segments[i].q_inv * e);
  }
  return sum / (traj.size() - 1);
}

double coll_intensity(const Trajectory& traj, const Sdf& sdf, double radius) {
  return static_cast<double>(collision_count(traj, sdf, radius)) / traj.size();
}

double constraint_violation(const Trajectory& traj, const Vec2& v_max) {
  double sum = 0.0;
  for (int i = 0; i < traj.size(); ++i) {
    const Vec2 v = traj.velocity(i);
    for (int j = 0; j < 2; ++j) sum += std::max(std::abs(v[j]) - v_max[j], 0.0);
  }
  return sum / (2.0 * traj.size());
}

double path_length(const Trajectory& traj) {
  double len = 0.0;
  for (int i = 0; i + 1 < traj.size(); ++i) len += (traj.position(i + 1) - traj.position(i)).norm();
  return len;
}

MetricsRow aggregate(const std::vector<ProblemRecord>& records, const std::string& variant,
                     const std::string& subset) {
  MetricsRow row;
  row.variant = variant;
  row.subset = subset;
  int successes = 0;
  int colliding = 0;
  for (const auto& r : records) {
    if (r.variant != variant) continue;
    if (subset != "mixed" && r.kind != subset) continue;
    ++row.problems;
    if (r.success) ++successes;
    row.gp_mse += r.gp_mse;
    row.coll_intensity_all += r.coll_intensity;
    if (r.coll_intensity > 0.0) {
      row.coll_intensity += r.coll_intensity;
      ++colliding;
    }
    row.num_iters += r.iters;
    row.constraint_violation += r.violation;
  }
  if (row.problems > 0) {
    const double n = row.problems;
    row.success = successes / n;
    row.gp_mse /= n;
    row.coll_intensity_all /= n;
    row.num_iters /= n;
    row.constraint_violation /= n;
  }
  if (colliding > 0) row.coll_intensity /= colliding;
  return row;
}

SigmaProvider PlannerVariant::provider_for(const Problem& problem) const {
  if (fixed_sigma) return constant_sigma(*fixed_sigma);
  if (!network) throw InvalidArgument("variant '" + name + "' has neither sigma nor network");
  return learn::network_provider(*network,
                                 learn::EnvImages::from_sdf(*problem.sdf, network->spec().image_size));
}

ProblemRecord evaluate_problem(const EvalProblem& p, const PlannerVariant& variant,
                               const PlannerConfig& config) {
  ProblemRecord rec;
  rec.env_id = p.id;
  rec.kind = to_string(p.kind);
  rec.variant = variant.name;
  const PriorModel prior = build_prior(p.problem);
  const PlanResult res = plan(p.problem, variant.provider_for(p.problem), config);
  const Trajectory& traj = res.final;
  const double r = p.problem.fixed.robot_radius;
  rec.iters = res.iterations_used;
  rec.converged = res.converged;
  rec.gp_mse = gp_mse(traj, prior);
  rec.coll_intensity = coll_intensity(traj, *p.problem.sdf, r);
  if (p.problem.fixed.v_max) rec.violation = constraint_violation(traj, *p.problem.fixed.v_max);
  if (res.error) {
    rec.failure = "solver: " + *res.error;
    // A diverged iterate carries no meaningful smoothness value.
    if (!std::isfinite(rec.gp_mse)) rec.gp_mse = 0.0;
  } else if (rec.coll_intensity > 0.0) {
    rec.failure = "collision";
  } else {
    rec.success = true;
  }
  return rec;
}

ExperimentResult run_experiment(const std::vector<EvalProblem>& dataset,
                                const std::vector<PlannerVariant>& variants,
                                const PlannerConfig& config, int jobs,
                                const std::vector<ProblemRecord>& completed) {
  std::map<std::pair<std::string, std::string>, const ProblemRecord*> done;
  for (const auto& r : completed) done[{r.env_id, r.variant}] = &r;

  const int n = static_cast<int>(dataset.size());
  ExperimentResult out;
  out.records.resize(variants.size() * dataset.size());
  std::vector<std::pair<int, int>> todo;
  for (int v = 0; v < static_cast<int>(variants.size()); ++v) {
    for (int i = 0; i < n; ++i) {
      auto it = done.find({dataset[i].id, variants[v].name});
      if (it != done.end())
        out.records[v * n + i] = *it->second;
      else
        todo.emplace_back(v, i);
    }
  }
  parallel_for(static_cast<int>(todo.size()), jobs, [&](int k) {
    const auto [v, i] = todo[k];
    ProblemRecord rec;
    try {
      rec = evaluate_problem(dataset[i], variants[v], config);
    } catch (const std::exception& e) {
      rec.env_id = dataset[i].id;
      rec.kind = to_string(dataset[i].kind);
      rec.variant = variants[v].name;
      rec.failure = std::string("error: ") + e.what();
    }
    out.records[v * n + i] = std::move(rec);
  });

  std::set<std::string> kinds;
  for (const auto& p : dataset) kinds.insert(to_string(p.kind));
  for (const auto& v : variants) {
    for (const auto& k : kinds) out.rows.push_back(aggregate(out.records, v.name, k));
    out.rows.push_back(aggregate(out.records, v.name, "mixed"));
  }
  return out;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c == '\n' ? ' ' : c;
  }
  return q + "\"";
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        out.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else {
      out.back() += c;
    }
  }
  return out;
}

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

constexpr const char* kRecordHeader =
    "env_id,kind,variant,success,gp_mse,coll_intensity,iters,violation,converged,failure";

}  // namespace

void write_records_csv(std::ostream& os, const std::vector<ProblemRecord>& records) {
  os << kRecordHeader << '\n';
  for (const auto& r : records) {
    os << csv_field(r.env_id) << ',' << r.kind << ',' << csv_field(r.variant) << ','
       << (r.success ? 1 : 0) << ',' << num(r.gp_mse) << ',' << num(r.coll_intensity) << ','
       << r.iters << ',' << num(r.violation) << ',' << (r.converged ? 1 : 0) << ','
       << csv_field(r.failure) << '\n';
  }
}

std::vector<ProblemRecord> read_records_csv(std::istream& is) {
  std::vector<ProblemRecord> out;
  std::string line;
  if (!std::getline(is, line)) return out;
  if (line != kRecordHeader) throw InvalidArgument("unexpected results CSV header: " + line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 10) throw InvalidArgument("malformed results CSV row: " + line);
    ProblemRecord r;
    r.env_id = f[0];
    r.kind = f[1];
    r.variant = f[2];
    r.success = f[3] == "1";
    r.gp_mse = std::stod(f[4]);
    r.coll_intensity = std::stod(f[5]);
    r.iters = std::stoi(f[6]);
    r.violation = std::stod(f[7]);
    r.converged = f[8] == "1";
    r.failure = f[9];
    out.push_back(std::move(r));
  }
  return out;
}

void write_summary_csv(std::ostream& os, const std::vector<MetricsRow>& rows) {
  os << "variant,subset,problems,success,gp_mse,coll_intensity,coll_intensity_all,num_iters,"
        "constraint_violation\n";
  for (const auto& r : rows) {
    os << csv_field(r.variant) << ',' << r.subset << ',' << r.problems << ',' << num(r.success)
       << ',' << num(r.gp_mse) << ',' << num(r.coll_intensity) << ','
       << num(r.coll_intensity_all) << ',' << num(r.num_iters) << ','
       << num(r.constraint_violation) << '\n';
  }
}

}  // namespace dgpmp::eval
