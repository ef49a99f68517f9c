#include "hsc/config.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>

namespace hsc {

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ConfigError(where + ": " + what);
}

void only_keys(const YAML::Node& node, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!node.IsMap()) fail(where, "expected a mapping");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!ok.contains(key)) fail(where, "unknown key '" + key + "'");
  }
}

template <class T>
T get(const YAML::Node& node, const char* key, const std::string& where) {
  const YAML::Node v = node[key];
  if (!v) fail(where, std::string("missing key '") + key + "'");
  try {
    return v.as<T>();
  } catch (const YAML::Exception&) {
    fail(where, std::string("key '") + key + "' has the wrong type");
  }
}

template <class T>
T get_or(const YAML::Node& node, const char* key, T fallback, const std::string& where) {
  return node[key] ? get<T>(node, key, where) : fallback;
}

Vec vector_of(const YAML::Node& v, int size, const std::string& where) {
  Vec out(size);
  if (v.IsScalar()) {
    if (size != 1) fail(where, "expected a list of " + std::to_string(size) + " numbers");
    out(0) = v.as<double>();
    return out;
  }
  if (!v.IsSequence() || static_cast<int>(v.size()) != size)
    fail(where, "expected a list of " + std::to_string(size) + " numbers");
  for (int i = 0; i < size; ++i) out(i) = v[static_cast<std::size_t>(i)].as<double>();
  return out;
}

/// Row-major matrix with `cols` columns; a flat list is one row.
Mat matrix_of(const YAML::Node& v, int rows, int cols, const std::string& where) {
  if (!v.IsSequence() || v.size() == 0) fail(where, "expected a list of rows");
  const bool flat = !v[0].IsSequence();
  const int r = flat ? 1 : static_cast<int>(v.size());
  if (rows > 0 && r != rows) fail(where, "expected " + std::to_string(rows) + " rows");
  Mat out(r, cols);
  for (int i = 0; i < r; ++i) {
    const Vec row = vector_of(flat ? v : v[static_cast<std::size_t>(i)], cols, where);
    out.row(i) = row.transpose();
  }
  return out;
}

Cone parse_cone(const YAML::Node& node, int m) {
  const std::string where = "cone";
  only_keys(node, where, {"type", "direction", "generators"});
  const auto type = get<std::string>(node, "type", where);
  try {
    if (type == "full") return Cone::full_space(m);
    if (type == "orthant") return Cone::orthant(m);
    if (type == "ray") return Cone::ray(vector_of(get<YAML::Node>(node, "direction", where), m, where + ".direction"));
    if (type == "generated") {
      // One generator per row in the file, one per column internally.
      const Mat rows = matrix_of(get<YAML::Node>(node, "generators", where), -1, m, where + ".generators");
      return Cone::generated(rows.transpose());
    }
  } catch (const DomainError& e) {
    fail(where, e.what());
  }
  fail(where, "type must be one of full, orthant, ray, generated");
}

/// `key` sets both sides; `key_pos`/`key_neg` override one side.
template <class Parse>
void sided(const YAML::Node& node, const std::string& key, Parse parse, auto& pos, auto& neg) {
  if (node[key]) pos = neg = parse(node[key]);
  if (node[key + "_pos"]) pos = parse(node[key + "_pos"]);
  if (node[key + "_neg"]) neg = parse(node[key + "_neg"]);
}

PowerCell parse_cell(const YAML::Node& node, int m, int n, const std::string& where) {
  only_keys(node, where,
            {"a", "a_pos", "a_neg", "b", "b_pos", "b_neg", "c", "c_pos", "c_neg", "d", "d_pos", "d_neg", "q", "r",
             "q_mix", "r_mix"});
  PowerCell c = PowerCell::zeros(m, n);
  sided(node, "a", [](const YAML::Node& v) { return v.as<double>(); }, c.a_pos, c.a_neg);
  sided(node, "b", [&](const YAML::Node& v) { return vector_of(v, m, where + ".b"); }, c.b_pos, c.b_neg);
  sided(node, "c", [&](const YAML::Node& v) { return vector_of(v, n, where + ".c"); }, c.c_pos, c.c_neg);
  sided(node, "d", [&](const YAML::Node& v) { return matrix_of(v, n, m, where + ".d"); }, c.d_pos, c.d_neg);
  c.q = get_or(node, "q", 0.0, where);
  if (node["r"]) c.r = matrix_of(node["r"], -1, m, where + ".r");
  c.q_mix = get_or(node, "q_mix", 0.0, where);
  if (node["r_mix"]) c.r_mix = matrix_of(node["r_mix"], -1, m, where + ".r_mix");
  return c;
}

RegimeParams parse_regime(const YAML::Node& node, Regime& regime) {
  const std::string where = "regime";
  only_keys(node, where, {"case", "delta", "L", "eta", "eps_table"});
  try {
    regime = regime_from_string(get<std::string>(node, "case", where));
  } catch (const DomainError& e) {
    fail(where, e.what());
  }
  RegimeParams params;
  params.delta = get_or(node, "delta", 0.0, where);
  params.L = get_or(node, "L", 0.0, where);
  params.eta = get_or(node, "eta", 0.0, where);
  if (node["eps_table"]) {
    for (const auto& row : node["eps_table"]) {
      const Vec pair = vector_of(row, 2, where + ".eps_table");
      params.eps_table.emplace_back(pair(0), pair(1));
    }
  }
  return params;
}

}  // namespace

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

static LoadedModel parse_model_checked(const YAML::Node& node) {
  const std::string where = "model";
  only_keys(node, where, {"name", "p", "T", "m", "n", "cone", "family", "terminal", "regime"});
  const auto name = get_or<std::string>(node, "name", "model", where);
  const auto p = get<double>(node, "p", where);
  const auto T = get<double>(node, "T", where);
  const auto m = get<int>(node, "m", where);
  const auto n = get<int>(node, "n", where);
  if (m < 1 || n < 1) fail(where, "m and n must be >= 1");
  const Cone cone = parse_cone(get<YAML::Node>(node, "cone", where), m);

  const YAML::Node fam = get<YAML::Node>(node, "family", where);
  only_keys(fam, "family", {"cells"});
  const YAML::Node cells_node = get<YAML::Node>(fam, "cells", "family");
  if (!cells_node.IsSequence() || cells_node.size() == 0) fail("family.cells", "expected a nonempty list");
  std::vector<PowerCell> cells;
  for (std::size_t i = 0; i < cells_node.size(); ++i)
    cells.push_back(parse_cell(cells_node[i], m, n, "family.cells[" + std::to_string(i) + "]"));

  const YAML::Node term = get<YAML::Node>(node, "terminal", where);
  only_keys(term, "terminal", {"g_plus", "g_minus", "scenario"});
  const auto g_plus = get<double>(term, "g_plus", "terminal");
  const auto g_minus = get<double>(term, "g_minus", "terminal");

  Regime regime = Regime::case_i;
  const RegimeParams params = parse_regime(get<YAML::Node>(node, "regime", where), regime);

  try {
    HomogeneousModel model = HomogeneousModel::from_family(name, cone, PowerFamily(p, T, m, n, std::move(cells)),
                                                           g_plus, g_minus, regime, params);
    if (const YAML::Node sc = term["scenario"]) {
      only_keys(sc, "terminal.scenario", {"plus_slope", "minus_slope"});
      const double up = get_or(sc, "plus_slope", 0.0, "terminal.scenario");
      const double dn = get_or(sc, "minus_slope", 0.0, "terminal.scenario");
      // g + slope * (scaled Brownian position at T), in [-1, 1].
      model = model.with_scenario_terminal([=](Branch side, int state, int layers) {
        const double xi = (2.0 * state - layers) / layers;
        return side == Branch::plus ? g_plus + up * xi : g_minus + dn * xi;
      });
    }
    return LoadedModel{std::move(model), YAML::Dump(node), fnv1a(YAML::Dump(node))};
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    fail(where, e.what());
  }
}

LoadedModel parse_model(const YAML::Node& node) {
  try {
    return parse_model_checked(node);
  } catch (const YAML::Exception& e) {
    fail("model", e.what());
  }
}

LoadedModel load_model_file(const std::filesystem::path& path) {
  try {
    return parse_model(YAML::LoadFile(path.string()));
  } catch (const YAML::BadFile&) {
    fail(path.string(), "cannot read file");
  } catch (const YAML::Exception& e) {
    fail(path.string(), e.what());
  }
}

LoadedModel load_model_string(const std::string& text) {
  try {
    return parse_model(YAML::Load(text));
  } catch (const YAML::Exception& e) {
    fail("model", e.what());
  }
}

namespace {

CompetitorSpec parse_competitor(const YAML::Node& node, const std::string& where) {
  only_keys(node, where, {"type", "label", "factor", "delta", "axis", "seed", "magnitude"});
  CompetitorSpec c;
  const auto type = get<std::string>(node, "type", where);
  if (type == "optimum") c.kind = CompetitorKind::optimum;
  else if (type == "zero") c.kind = CompetitorKind::zero;
  else if (type == "scaled") c.kind = CompetitorKind::scaled;
  else if (type == "perturbed") c.kind = CompetitorKind::perturbed;
  else if (type == "random_ray") c.kind = CompetitorKind::random_ray;
  else if (type == "negated") c.kind = CompetitorKind::negated;
  else fail(where, "unknown competitor type '" + type + "'");
  c.factor = get_or(node, "factor", 1.0, where);
  c.delta = get_or(node, "delta", 0.1, where);
  c.axis = get_or(node, "axis", 0, where);
  c.seed = get_or<std::uint64_t>(node, "seed", 1, where);
  c.magnitude = get_or(node, "magnitude", 1.0, where);
  if (c.kind == CompetitorKind::scaled && !(c.factor >= 0.0)) fail(where, "factor must be >= 0");
  if (c.kind == CompetitorKind::random_ray && !(c.magnitude >= 0.0)) fail(where, "magnitude must be >= 0");
  std::ostringstream label;
  label << type;
  if (c.kind == CompetitorKind::scaled) label << "(" << c.factor << ")";
  if (c.kind == CompetitorKind::perturbed) label << "(" << c.delta << " e" << c.axis << ")";
  if (c.kind == CompetitorKind::random_ray) label << "(seed=" << c.seed << ")";
  c.label = get_or(node, "label", label.str(), where);
  return c;
}

}  // namespace

static ExperimentConfig parse_experiment_checked(const std::string& text, const std::filesystem::path& base_dir,
                                                 const Overrides& overrides) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    fail("config", e.what());
  }
  only_keys(root, "config", {"model", "grid", "simulation", "outputs", "competitors", "verification", "minimizer",
                             "solver"});
  ExperimentConfig cfg;

  const YAML::Node model = get<YAML::Node>(root, "model", "config");
  if (model.IsScalar()) {
    cfg.model_path = base_dir / model.as<std::string>();
    cfg.model = load_model_file(cfg.model_path);
  } else {
    cfg.model = parse_model(model);
  }

  if (const YAML::Node g = root["grid"]) {
    only_keys(g, "grid", {"N", "mode", "tree_depth"});
    cfg.grid.N = get_or(g, "N", cfg.grid.N, "grid");
    const auto mode = get_or<std::string>(g, "mode", "deterministic", "grid");
    if (mode == "deterministic") cfg.grid.mode = SolveMode::deterministic;
    else if (mode == "tree") cfg.grid.mode = SolveMode::tree;
    else fail("grid", "mode must be deterministic or tree");
    if (g["tree_depth"]) {
      const int depth = get<int>(g, "tree_depth", "grid");
      if (cfg.grid.mode != SolveMode::tree) fail("grid", "tree_depth requires mode: tree");
      if (g["N"] && depth != cfg.grid.N) fail("grid", "tree_depth must equal N (one tree layer per step)");
      cfg.grid.N = depth;
    }
  }

  if (const YAML::Node s = root["simulation"]) {
    only_keys(s, "simulation", {"paths", "seed", "x0", "antithetic", "keep_paths"});
    cfg.simulation.paths = get_or(s, "paths", cfg.simulation.paths, "simulation");
    cfg.simulation.seed = get_or(s, "seed", cfg.simulation.seed, "simulation");
    if (s["x0"]) {
      cfg.simulation.x0.clear();
      if (s["x0"].IsScalar()) cfg.simulation.x0.push_back(get<double>(s, "x0", "simulation"));
      else cfg.simulation.x0 = get<std::vector<double>>(s, "x0", "simulation");
    }
    cfg.simulation.antithetic = get_or(s, "antithetic", false, "simulation");
    cfg.simulation.keep_paths = get_or(s, "keep_paths", cfg.simulation.keep_paths, "simulation");
  }

  if (const YAML::Node o = root["outputs"]) {
    only_keys(o, "outputs", {"directory", "formats"});
    cfg.outputs.directory = base_dir / get_or<std::string>(o, "directory", "out", "outputs");
    if (o["formats"]) {
      cfg.outputs.csv = cfg.outputs.json = false;
      for (const auto& f : get<std::vector<std::string>>(o, "formats", "outputs")) {
        if (f == "csv") cfg.outputs.csv = true;
        else if (f == "json") cfg.outputs.json = true;
        else fail("outputs", "formats must be a subset of {csv, json}");
      }
    }
  } else {
    cfg.outputs.directory = base_dir / "out";
  }

  if (const YAML::Node c = root["competitors"]) {
    if (!c.IsSequence()) fail("competitors", "expected a list");
    for (std::size_t i = 0; i < c.size(); ++i)
      cfg.competitors.push_back(parse_competitor(c[i], "competitors[" + std::to_string(i) + "]"));
  }

  if (const YAML::Node v = root["verification"]) {
    only_keys(v, "verification", {"feedback_file"});
    if (v["feedback_file"]) cfg.feedback_file = base_dir / get<std::string>(v, "feedback_file", "verification");
  }

  if (const YAML::Node mz = root["minimizer"]) {
    only_keys(mz, "minimizer", {"multistart_count", "max_iterations", "gradient_step_tolerance", "value_tolerance",
                                "radial_search_max", "finite_difference_h", "seed"});
    auto& mc = cfg.solver.driver.minimizer;
    mc.multistart_count = get_or(mz, "multistart_count", mc.multistart_count, "minimizer");
    mc.max_iterations = get_or(mz, "max_iterations", mc.max_iterations, "minimizer");
    mc.gradient_step_tolerance = get_or(mz, "gradient_step_tolerance", mc.gradient_step_tolerance, "minimizer");
    mc.value_tolerance = get_or(mz, "value_tolerance", mc.value_tolerance, "minimizer");
    mc.radial_search_max = get_or(mz, "radial_search_max", mc.radial_search_max, "minimizer");
    mc.finite_difference_h = get_or(mz, "finite_difference_h", mc.finite_difference_h, "minimizer");
    mc.seed = get_or(mz, "seed", mc.seed, "minimizer");
    try {
      mc.validate();
    } catch (const DomainError& e) {
      fail("minimizer", e.what());
    }
  }

  if (const YAML::Node sv = root["solver"]) {
    only_keys(sv, "solver", {"fixed_point_max_iterations", "fixed_point_tolerance", "max_tree_nodes", "closed_form"});
    auto& so = cfg.solver;
    so.fixed_point_max_iterations = get_or(sv, "fixed_point_max_iterations", so.fixed_point_max_iterations, "solver");
    so.fixed_point_tolerance = get_or(sv, "fixed_point_tolerance", so.fixed_point_tolerance, "solver");
    so.max_tree_nodes = get_or(sv, "max_tree_nodes", so.max_tree_nodes, "solver");
    so.driver.allow_closed_form = get_or(sv, "closed_form", so.driver.allow_closed_form, "solver");
    if (so.fixed_point_max_iterations < 1 || !(so.fixed_point_tolerance > 0.0))
      fail("solver", "fixed-point limits must be positive");
  }

  if (overrides.out) cfg.outputs.directory = *overrides.out;
  if (overrides.paths) cfg.simulation.paths = *overrides.paths;
  if (overrides.seed) cfg.simulation.seed = *overrides.seed;
  if (overrides.grid) cfg.grid.N = *overrides.grid;

  if (cfg.grid.N < 2) fail("grid", "N must be >= 2");
  if (cfg.simulation.paths < 1) fail("simulation", "paths must be >= 1");
  if (cfg.simulation.x0.empty()) fail("simulation", "x0 list must be nonempty");
  if (cfg.simulation.antithetic && cfg.simulation.paths % 2 != 0)
    fail("simulation", "antithetic sampling needs an even path count");
  if (cfg.grid.mode == SolveMode::tree && cfg.model->model.n() != 1)
    fail("grid", "tree mode needs a single Brownian motion (n = 1)");
  return cfg;
}

ExperimentConfig parse_experiment(const std::string& text, const std::filesystem::path& base_dir,
                                  const Overrides& overrides) {
  try {
    return parse_experiment_checked(text, base_dir, overrides);
  } catch (const YAML::Exception& e) {
    fail("config", e.what());
  }
}

ExperimentConfig load_experiment(const std::filesystem::path& path, const Overrides& overrides) {
  std::ifstream in(path);
  if (!in) fail(path.string(), "cannot read file");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_experiment(text.str(), path.parent_path(), overrides);
}

}  // namespace hsc
