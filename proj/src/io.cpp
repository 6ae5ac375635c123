#include "dgpmp/io.hpp"

#include <fstream>
#include <sstream>

namespace dgpmp::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json mat2_json(const Mat2& m) { return json::array({{m(0, 0), m(0, 1)}, {m(1, 0), m(1, 1)}}); }

Mat2 mat2_from(const json& j) {
  if (j.is_number()) return j.get<double>() * Mat2::Identity();
  if (!j.is_array() || j.size() != 2) throw InvalidArgument("expected a 2x2 matrix");
  Mat2 m;
  for (int r = 0; r < 2; ++r) {
    if (!j[r].is_array() || j[r].size() != 2) throw InvalidArgument("expected a 2x2 matrix");
    for (int c = 0; c < 2; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

json mat4_json(const Mat4& m) {
  json rows = json::array();
  for (int r = 0; r < 4; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2), m(r, 3)});
  return rows;
}

Mat4 mat4_from(const json& j) {
  if (j.is_number()) return j.get<double>() * Mat4::Identity();
  if (!j.is_array() || j.size() != 4) throw InvalidArgument("expected a 4x4 matrix");
  Mat4 m;
  for (int r = 0; r < 4; ++r) {
    if (!j[r].is_array() || j[r].size() != 4) throw InvalidArgument("expected a 4x4 matrix");
    for (int c = 0; c < 4; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

}  // namespace

json to_json(const FixedParams& f) {
  json j{{"q_c", mat2_json(f.q_c)},
         {"eps_safe", f.eps_safe},
         {"robot_radius", f.robot_radius},
         {"k_start", mat4_json(f.k_start)},
         {"k_goal", mat4_json(f.k_goal)},
         {"k_vel", f.k_vel}};
  j["v_max"] = f.v_max ? json::array({f.v_max->x(), f.v_max->y()}) : json(nullptr);
  return j;
}

FixedParams fixed_params_from_json(const json& j, FixedParams f) {
  if (j.contains("q_c")) f.q_c = mat2_from(j["q_c"]);
  f.eps_safe = j.value("eps_safe", f.eps_safe);
  f.robot_radius = j.value("robot_radius", f.robot_radius);
  if (j.contains("k_start")) f.k_start = mat4_from(j["k_start"]);
  if (j.contains("k_goal")) f.k_goal = mat4_from(j["k_goal"]);
  f.k_vel = j.value("k_vel", f.k_vel);
  if (j.contains("v_max")) {
    const json& v = j["v_max"];
    if (v.is_null())
      f.v_max.reset();
    else if (v.is_number())
      f.v_max = Vec2::Constant(v.get<double>());
    else
      f.v_max = Vec2(v.at(0).get<double>(), v.at(1).get<double>());
  }
  f.validate();
  return f;
}

json to_json(const State& s) {
  return json::array({s.position.x(), s.position.y(), s.velocity.x(), s.velocity.y()});
}

State state_from_json(const json& j) {
  if (!j.is_array() || (j.size() != 2 && j.size() != 4))
    throw InvalidArgument("a state is [x, y] or [x, y, vx, vy]");
  if (j.size() == 2) return State(j[0].get<double>(), j[1].get<double>());
  return State(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>());
}

json to_json(const Trajectory& t) {
  json states = json::array();
  for (int i = 0; i < t.size(); ++i) states.push_back(to_json(t.state(i)));
  return {{"total_time", t.total_time()}, {"states", states}};
}

Trajectory trajectory_from_json(const json& j) {
  std::vector<State> states;
  for (const auto& s : j.at("states")) states.push_back(state_from_json(s));
  return Trajectory(states, j.at("total_time").get<double>());
}

json to_json(const ProblemFile& p) {
  return {{"id", p.id},
          {"kind", to_string(p.kind)},
          {"seed", p.seed},
          {"grid", p.grid},
          {"sdf", p.sdf},
          {"start", to_json(p.problem.start)},
          {"goal", to_json(p.problem.goal)},
          {"n_states", p.problem.n_states},
          {"total_time", p.problem.total_time},
          {"fixed", to_json(p.problem.fixed)}};
}

ProblemFile load_problem(const fs::path& path) {
  const json j = json::parse(read_text(path));
  ProblemFile p;
  p.id = j.value("id", path.stem().string());
  p.kind = env_kind_from_string(j.value("kind", std::string("forest")));
  p.seed = j.value("seed", std::uint64_t{0});
  p.grid = j.at("grid").get<std::string>();
  p.sdf = j.value("sdf", std::string());
  p.problem.start = state_from_json(j.at("start"));
  p.problem.goal = state_from_json(j.at("goal"));
  p.problem.n_states = j.value("n_states", p.problem.n_states);
  p.problem.total_time = j.value("total_time", p.problem.total_time);
  if (j.contains("fixed")) p.problem.fixed = fixed_params_from_json(j["fixed"]);

  const fs::path dir = path.parent_path();
  if (!p.sdf.empty() && fs::exists(dir / p.sdf)) {
    p.problem.sdf = std::make_shared<const Sdf>(load_sdf((dir / p.sdf).string()));
  } else {
    p.problem.sdf = std::make_shared<const Sdf>(compute_sdf(load_grid((dir / p.grid).string())));
  }
  p.problem.validate();
  return p;
}

void save_problem(const fs::path& path, const ProblemFile& p) {
  write_text(path, to_json(p).dump(2) + "\n");
}

void save_manifest(const fs::path& path, const std::vector<ManifestEntry>& entries) {
  json records = json::array();
  for (const auto& e : entries)
    records.push_back({{"id", e.id}, {"kind", to_string(e.kind)}, {"problem", e.problem}});
  write_text(path, json{{"records", records}}.dump(2) + "\n");
}

std::vector<ManifestEntry> load_manifest(const fs::path& path) {
  const json j = json::parse(read_text(path));
  std::vector<ManifestEntry> out;
  for (const auto& r : j.at("records"))
    out.push_back({r.at("id").get<std::string>(),
                   env_kind_from_string(r.at("kind").get<std::string>()),
                   r.at("problem").get<std::string>()});
  return out;
}

std::vector<ProblemFile> load_dataset(const fs::path& manifest) {
  std::vector<ProblemFile> out;
  for (const auto& e : load_manifest(manifest)) {
    ProblemFile p = load_problem(manifest.parent_path() / e.problem);
    p.id = e.id;
    p.kind = e.kind;
    out.push_back(std::move(p));
  }
  return out;
}

void save_demos(const fs::path& path, const std::vector<DemoRecord>& demos) {
  std::string text;
  for (const auto& d : demos) {
    json j{{"id", d.id},
           {"problem", d.problem},
           {"expert", to_json(d.expert)},
           {"seed", d.seed},
           {"iterations", d.iterations},
           {"cost", d.cost}};
    text += j.dump() + "\n";
  }
  write_text(path, text);
}

std::vector<DemoRecord> load_demos(const fs::path& path) {
  std::istringstream is(read_text(path));
  std::vector<DemoRecord> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    out.push_back({j.at("id").get<std::string>(), j.at("problem").get<std::string>(),
                   trajectory_from_json(j.at("expert")), j.value("seed", std::uint64_t{0}),
                   j.value("iterations", 0), j.value("cost", 0.0)});
  }
  return out;
}

std::string read_text(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + tmp.string());
    os << text;
    if (!os) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

}  // namespace dgpmp::io
