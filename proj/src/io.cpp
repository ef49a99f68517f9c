#include "hsc/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace hsc {

std::string format_double(double x) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

double parse_double(const std::string& text) {
  double x = 0.0;
  const char* end = text.data() + text.size();
  const auto r = std::from_chars(text.data(), end, x);
  if (r.ec != std::errc() || r.ptr != end) throw ConfigError("csv: not a number: '" + text + "'");
  return x;
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

/// Fixed columns followed by indexed groups name_1..name_count.
void header(std::ostream& out, std::initializer_list<const char*> fixed,
            std::initializer_list<std::pair<const char*, Eigen::Index>> indexed) {
  const char* sep = "";
  for (const char* name : fixed) {
    out << sep << name;
    sep = ",";
  }
  for (const auto& [name, count] : indexed)
    for (Eigen::Index i = 1; i <= count; ++i) out << ',' << name << '_' << i;
  out << '\n';
}

void cells(std::ostream& out, const Vec& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) out << ',' << format_double(v(i));
}

/// Rows grouped into layers by node_index restarting at 0.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::vector<double>>> layers;  // [k][j][column]
};

Table read_table(std::istream& in, const std::string& what) {
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(what + ": empty file");
  t.columns = split(line);
  if (t.columns.size() < 2 || t.columns[0] != "t" || t.columns[1] != "node_index")
    throw ConfigError(what + ": header must start with t,node_index");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split(line);
    if (fields.size() != t.columns.size()) throw ConfigError(what + ": ragged row");
    std::vector<double> row;
    for (const auto& f : fields) row.push_back(parse_double(f));
    const auto j = static_cast<std::size_t>(row[1]);
    if (row[1] != static_cast<double>(j)) throw ConfigError(what + ": node_index must be a nonnegative integer");
    if (j == 0) t.layers.emplace_back();
    if (t.layers.empty() || t.layers.back().size() != j) throw ConfigError(what + ": node_index out of order");
    t.layers.back().push_back(std::move(row));
  }
  if (t.layers.size() < 2) throw ConfigError(what + ": need at least two time layers");
  return t;
}

SolveMode infer_mode(const Table& t, const std::string& what) {
  bool tree = true, flat = true;
  for (std::size_t k = 0; k < t.layers.size(); ++k) {
    tree = tree && t.layers[k].size() == k + 1;
    flat = flat && t.layers[k].size() == 1;
  }
  if (flat) return SolveMode::deterministic;
  if (tree) return SolveMode::tree;
  throw ConfigError(what + ": layer sizes match neither a time grid nor a binomial tree");
}

TimeGrid infer_grid(const Table& t, const std::string& what) {
  const int N = static_cast<int>(t.layers.size()) - 1;
  const double T = t.layers.back().front()[0];
  const TimeGrid grid(T, N);
  for (int k = 0; k <= N; ++k)
    for (const auto& row : t.layers[static_cast<std::size_t>(k)])
      if (row[0] != grid.t(k)) throw ConfigError(what + ": times do not form a uniform grid");
  return grid;
}

Vec slice(const std::vector<double>& row, std::size_t from, std::size_t count) {
  Vec v(static_cast<Eigen::Index>(count));
  for (std::size_t i = 0; i < count; ++i) v(static_cast<Eigen::Index>(i)) = row[from + i];
  return v;
}

std::size_t count_prefix(const std::vector<std::string>& columns, const std::string& prefix) {
  std::size_t c = 0;
  for (const auto& name : columns)
    if (name.rfind(prefix, 0) == 0) ++c;
  return c;
}

}  // namespace

void write_solution_csv(std::ostream& out, const BsdeSolution& sol) {
  const auto& first = sol.node(0);
  header(out, {"t", "node_index", "P"}, {{"Lambda", first.Lambda.size()}, {"v_hat", first.v_hat.size()}});
  for (std::size_t k = 0; k < sol.layers.size(); ++k) {
    const std::string t = format_double(sol.grid.t(static_cast<int>(k)));
    for (std::size_t j = 0; j < sol.layers[k].size(); ++j) {
      const NodeValue& nv = sol.layers[k][j];
      out << t << ',' << j << ',' << format_double(nv.P);
      cells(out, nv.Lambda);
      cells(out, nv.v_hat);
      out << '\n';
    }
  }
}

BsdeSolution read_solution_csv(std::istream& in, Branch branch, double degree) {
  const std::string what = "solution csv";
  const Table t = read_table(in, what);
  if (t.columns.size() < 3 || t.columns[2] != "P") throw ConfigError(what + ": third column must be P");
  const std::size_t n = count_prefix(t.columns, "Lambda_");
  const std::size_t m = count_prefix(t.columns, "v_hat_");
  if (3 + n + m != t.columns.size()) throw ConfigError(what + ": unexpected columns");
  BsdeSolution sol;
  sol.grid = infer_grid(t, what);
  sol.mode = infer_mode(t, what);
  sol.branch = branch;
  sol.degree = degree;
  for (const auto& layer : t.layers) {
    sol.layers.emplace_back();
    for (const auto& row : layer) sol.layers.back().push_back(NodeValue{row[2], slice(row, 3, n), slice(row, 3 + n, m)});
  }
  return sol;
}

void write_feedback_csv(std::ostream& out, const FeedbackControl& fb) {
  const auto m = fb.v_plus.front().front().size();
  header(out, {"t", "node_index"}, {{"v_plus", m}, {"v_minus", m}});
  for (std::size_t k = 0; k < fb.v_plus.size(); ++k) {
    const std::string t = format_double(fb.grid.t(static_cast<int>(k)));
    for (std::size_t j = 0; j < fb.v_plus[k].size(); ++j) {
      out << t << ',' << j;
      cells(out, fb.v_plus[k][j]);
      cells(out, fb.v_minus[k][j]);
      out << '\n';
    }
  }
}

FeedbackControl read_feedback_csv(std::istream& in, const HomogeneousModel& model) {
  const std::string what = "feedback csv";
  const Table t = read_table(in, what);
  const auto m = static_cast<std::size_t>(model.m());
  if (count_prefix(t.columns, "v_plus_") != m || count_prefix(t.columns, "v_minus_") != m ||
      t.columns.size() != 2 + 2 * m)
    throw ConfigError(what + ": expected " + std::to_string(m) + " v_plus and v_minus columns");
  std::vector<std::vector<Vec>> plus, minus;
  for (const auto& layer : t.layers) {
    plus.emplace_back();
    minus.emplace_back();
    for (const auto& row : layer) {
      plus.back().push_back(slice(row, 2, m));
      minus.back().push_back(slice(row, 2 + m, m));
    }
  }
  return make_feedback(model, infer_grid(t, what), infer_mode(t, what), std::move(plus), std::move(minus));
}

void write_batch_csv(std::ostream& out, const SimulationBatch& batch) {
  out << "path_id,t,X,running_cost_so_far\n";
  for (std::size_t path = 0; path < batch.log_abs_state.size(); ++path) {
    for (int k = 0; k <= batch.grid.steps(); ++k) {
      out << path << ',' << format_double(batch.grid.t(k)) << ',' << format_double(batch.state(path, k)) << ','
          << format_double(batch.running_cost_so_far[path][static_cast<std::size_t>(k)]) << '\n';
    }
  }
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << contents;
  if (!out) throw ConfigError("failed writing " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace hsc
