#include "creator/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "creator/errors.hpp"

namespace creator {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<std::string_view> split_cells(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    cells.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"')) s.remove_suffix(1);
  return s;
}

bool parse_number(std::string_view cell, double& out) {
  cell = trim(cell);
  if (cell.empty()) return false;
  if (cell.front() == '+') cell.remove_prefix(1);
  const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), out);
  return res.ec == std::errc() && res.ptr == cell.data() + cell.size() && std::isfinite(out);
}

std::vector<std::string> numbered(const std::string& prefix, Eigen::Index n) {
  std::vector<std::string> h;
  for (Eigen::Index j = 0; j < n; ++j) h.push_back(prefix + std::to_string(j + 1));
  return h;
}

}  // namespace

void write_csv(const fs::path& path, const Eigen::MatrixXd& m, const std::vector<std::string>& header) {
  if (static_cast<Eigen::Index>(header.size()) != m.cols()) throw ConfigError("write_csv: header width mismatch");
  auto out = open_out(path);
  std::string line;
  for (std::size_t j = 0; j < header.size(); ++j) line += (j ? "," : "") + header[j];
  out << line << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    line.clear();
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) line += ',';
      line += format_double(m(i, j));
    }
    out << line << '\n';
  }
  finish(out, path);
}

void write_csv(const fs::path& path, const Eigen::MatrixXd& m, const std::string& prefix) {
  write_csv(path, m, numbered(prefix, m.cols()));
}

Eigen::MatrixXd read_csv(const fs::path& path, std::vector<std::string>* header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<double> values;
  std::size_t width = 0, rows = 0, line_no = 0;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_cells(line);
    if (first) {
      first = false;
      width = cells.size();
      double probe;
      const bool is_header = std::any_of(cells.begin(), cells.end(), [&](auto c) { return !parse_number(c, probe); });
      if (is_header) {
        if (header) {
          header->clear();
          for (auto c : cells) header->emplace_back(trim(c));
        }
        continue;
      }
    }
    if (cells.size() != width) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": expected " + std::to_string(width) +
                    " cells, found " + std::to_string(cells.size()));
    }
    for (std::size_t j = 0; j < cells.size(); ++j) {
      double v;
      if (!parse_number(cells[j], v)) {
        throw IoError(path.string() + ":" + std::to_string(line_no) + ": non-numeric cell " +
                      std::to_string(j + 1) + " '" + std::string(trim(cells[j])) + "'");
      }
      values.push_back(v);
    }
    ++rows;
  }
  if (rows == 0) throw IoError(path.string() + ": no data rows");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < width; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = values[i * width + j];
  return m;
}

Json matrix_to_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const Json& j, const std::string& what) {
  if (!j.is_array()) throw IoError(what + ": expected an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = rows ? static_cast<Eigen::Index>(j.front().size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) throw IoError(what + ": ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number()) throw IoError(what + ": non-numeric entry");
      m(r, c) = v.get<double>();
    }
  }
  return m;
}

Json adjacency_to_json(const Adjacency& a) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < a.cols(); ++j) row.push_back(a(i, j) ? 1 : 0);
    rows.push_back(std::move(row));
  }
  return rows;
}

Adjacency adjacency_from_json(const Json& j, const std::string& what) {
  const Eigen::MatrixXd m = matrix_from_json(j, what);
  if (m.rows() != m.cols()) throw IoError(what + ": adjacency must be square");
  if (((m.array() != 0.0) && (m.array() != 1.0)).any()) throw IoError(what + ": adjacency entries must be 0 or 1");
  return m.array() != 0.0;
}

Json ensemble_to_json(const ScmEnsemble& e) {
  Json j;
  j["adjacency"] = adjacency_to_json(e.dag.adjacency());
  j["H"] = matrix_to_json(e.H);
  Json envs = Json::array();
  for (const auto& env : e.envs) {
    Json je;
    je["W"] = matrix_to_json(env.W);
    je["omega"] = std::vector<double>(env.omega.data(), env.omega.data() + env.omega.size());
    Json noise = Json::array();
    for (const auto& s : env.noise) noise.push_back(s.to_string());
    je["noise"] = std::move(noise);
    je["weight_family"] = to_string(env.weight_family);
    envs.push_back(std::move(je));
  }
  j["environments"] = std::move(envs);
  return j;
}

ScmEnsemble ensemble_from_json(const Json& j) {
  try {
    ScmEnsemble e;
    e.dag = Dag(adjacency_from_json(j.at("adjacency"), "ensemble adjacency"));
    e.H = matrix_from_json(j.at("H"), "ensemble H");
    for (const auto& je : j.at("environments")) {
      EnvParams env;
      env.W = matrix_from_json(je.at("W"), "ensemble W");
      const auto omega = je.at("omega").get<std::vector<double>>();
      env.omega = Eigen::Map<const Eigen::VectorXd>(omega.data(), static_cast<Eigen::Index>(omega.size()));
      for (const auto& s : je.at("noise")) env.noise.push_back(NoiseSpec::parse(s.get<std::string>()));
      env.weight_family = parse_noise_family(je.at("weight_family").get<std::string>());
      e.envs.push_back(std::move(env));
    }
    e.validate();
    return e;
  } catch (const Json::exception& ex) {
    throw IoError(std::string("manifest ensemble: ") + ex.what());
  } catch (const ConfigError& ex) {
    throw IoError(std::string("manifest ensemble: ") + ex.what());
  }
}

Json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& ex) {
    throw IoError(path.string() + ": " + ex.what());
  }
}

void write_json(const fs::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
  finish(out, path);
}

void save_dataset(const fs::path& dir, const MultiEnvDataset& data, Json manifest) {
  data.validate();
  manifest["K"] = data.K();
  manifest["p"] = data.p();
  manifest["n"] = data.envs.front().X.rows();
  if (data.ensemble) {
    manifest["d"] = data.ensemble->d();
    manifest["ensemble"] = ensemble_to_json(*data.ensemble);
  } else if (data.envs.front().Y) {
    manifest["d"] = data.envs.front().Y->cols();
  }
  for (std::size_t k = 0; k < data.K(); ++k) {
    const fs::path env_dir = dir / ("env_" + std::to_string(k));
    const auto& env = data.envs[k];
    write_csv(env_dir / "X.csv", env.X, "x");
    if (env.Y) write_csv(env_dir / "Y.csv", *env.Y, "y");
    if (env.Z) write_csv(env_dir / "Z.csv", *env.Z, "z");
  }
  write_json(dir / "manifest.json", manifest);
}

MultiEnvDataset load_dataset(const fs::path& dir, Json* manifest) {
  if (!fs::is_directory(dir)) throw IoError("not a dataset directory: " + dir.string());
  MultiEnvDataset data;
  Json m = Json::object();
  if (fs::exists(dir / "manifest.json")) m = read_json(dir / "manifest.json");
  for (std::size_t k = 0;; ++k) {
    const fs::path env_dir = dir / ("env_" + std::to_string(k));
    if (!fs::is_directory(env_dir)) break;
    Environment env;
    env.X = read_csv(env_dir / "X.csv");
    if (fs::exists(env_dir / "Y.csv")) env.Y = read_csv(env_dir / "Y.csv");
    if (fs::exists(env_dir / "Z.csv")) env.Z = read_csv(env_dir / "Z.csv");
    data.envs.push_back(std::move(env));
  }
  if (data.envs.empty()) throw IoError(dir.string() + ": no env_<k> directories");
  if (m.contains("ensemble")) data.ensemble = ensemble_from_json(m["ensemble"]);
  try {
    data.validate();
  } catch (const ConfigError& ex) {
    throw IoError(dir.string() + ": " + ex.what());
  }
  if (m.contains("K") && m["K"].get<std::size_t>() != data.K()) {
    throw IoError(dir.string() + ": manifest K disagrees with environment directories");
  }
  if (manifest) *manifest = std::move(m);
  return data;
}

MultiEnvDataset ingest_external(const fs::path& dir, std::optional<std::size_t> project_dim, std::uint64_t seed) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  if (fs::exists(dir / "manifest.json")) {
    const Json m = read_json(dir / "manifest.json");
    if (m.contains("environments")) {
      for (const auto& f : m["environments"]) files.push_back(dir / f.get<std::string>());
    }
  }
  if (files.empty()) {
    for (std::size_t k = 0; fs::is_directory(dir / ("env_" + std::to_string(k))); ++k) {
      files.push_back(dir / ("env_" + std::to_string(k)) / "X.csv");
    }
  }
  if (files.empty()) {
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
  }
  if (files.empty()) throw IoError(dir.string() + ": no environment CSV files found");

  MultiEnvDataset data;
  for (const auto& f : files) data.envs.push_back(Environment{read_csv(f), std::nullopt, std::nullopt});
  const auto p = data.envs.front().X.cols();
  for (std::size_t k = 0; k < files.size(); ++k) {
    if (data.envs[k].X.cols() != p) {
      throw IoError(files[k].string() + ": " + std::to_string(data.envs[k].X.cols()) + " columns, expected " +
                    std::to_string(p));
    }
  }
  if (project_dim) {
    const auto q = static_cast<Eigen::Index>(*project_dim);
    if (q < 1 || q > p) throw ConfigError("--project-dim must lie in [1, p] (p = " + std::to_string(p) + ")");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd proj(p, q);
    for (Eigen::Index c = 0; c < q; ++c)
      for (Eigen::Index r = 0; r < p; ++r) proj(r, c) = normal(rng);
    for (auto& env : data.envs) env.X = env.X * proj;
  }
  try {
    data.validate();
  } catch (const ConfigError& ex) {
    throw IoError(dir.string() + ": " + ex.what());
  }
  return data;
}

ResultFile to_result_file(const RecoveryResult& r) {
  ResultFile f;
  const auto d = static_cast<std::size_t>(r.ordering.alpha.rows());
  for (std::size_t i = 0; i < d; ++i) f.order.push_back(i);
  f.adjacency = r.dag_hat.adjacency();
  f.alpha = r.ordering.alpha;
  f.b_breve = r.B_breve;
  f.y_hat_scale = r.y_hat_scale;
  Json flags;
  flags["ica_converged"] = r.ordering.ica_converged;
  flags["selection_loss"] = Json::array();
  for (double v : r.ordering.selection_loss) {
    flags["selection_loss"].push_back(std::isfinite(v) ? Json(v) : Json(nullptr));
  }
  flags["selected_env"] = r.ordering.selected_env;
  flags["selected_row"] = r.ordering.selected_row;
  flags["disentangle_fallback"] = r.disentangle_fallback;
  flags["regression_fallback"] = r.regression_fallback;
  flags["warnings"] = r.warnings;
  if (r.true_order) flags["true_order"] = *r.true_order;
  f.flags = std::move(flags);
  f.timings = {{"ordering", r.timings.ordering},
               {"pruning", r.timings.pruning},
               {"disentangling", r.timings.disentangling},
               {"total", r.timings.total}};
  return f;
}

Json result_to_json(const ResultFile& r) {
  Json j;
  j["order"] = r.order;
  j["adjacency"] = adjacency_to_json(r.adjacency);
  j["alpha"] = matrix_to_json(r.alpha);
  j["b_breve"] = matrix_to_json(r.b_breve);
  if (r.y_hat_scale) {
    j["y_hat_scale"] = std::vector<double>(r.y_hat_scale->data(), r.y_hat_scale->data() + r.y_hat_scale->size());
  }
  j["flags"] = r.flags;
  j["timings"] = r.timings;
  return j;
}

ResultFile result_from_json(const Json& j) {
  try {
    ResultFile r;
    r.order = j.at("order").get<std::vector<std::size_t>>();
    r.adjacency = adjacency_from_json(j.at("adjacency"), "result adjacency");
    r.alpha = matrix_from_json(j.at("alpha"), "result alpha");
    r.b_breve = matrix_from_json(j.at("b_breve"), "result b_breve");
    if (j.contains("y_hat_scale")) {
      const auto s = j["y_hat_scale"].get<std::vector<double>>();
      r.y_hat_scale = Eigen::Map<const Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(s.size()));
    }
    if (j.contains("flags")) r.flags = j["flags"];
    if (j.contains("timings")) r.timings = j["timings"];
    const auto d = r.order.size();
    const auto di = static_cast<Eigen::Index>(d);
    if (r.alpha.rows() != di || r.adjacency.rows() != di || r.b_breve.rows() != di || r.b_breve.cols() != di) {
      throw IoError("result: order, alpha, adjacency and b_breve disagree on d");
    }
    if (!is_acyclic(r.adjacency)) throw IoError("result: adjacency is not a DAG");
    std::vector<bool> seen(d, false);
    for (auto v : r.order) {
      if (v >= d || seen[v]) throw IoError("result: order is not a permutation");
      seen[v] = true;
    }
    return r;
  } catch (const Json::exception& ex) {
    throw IoError(std::string("result: ") + ex.what());
  }
}

}  // namespace creator
