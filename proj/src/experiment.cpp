#include "creator/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "creator/errors.hpp"
#include "creator/seeding.hpp"

namespace creator {

void ExperimentConfig::validate() const {
  if (d < 1) throw ConfigError("d must be at least 1");
  if (K < 1) throw ConfigError("K must be at least 1");
  if (n < 2) throw ConfigError("n must be at least 2");
  if (observed_dim() < d) throw ConfigError("p must be at least d");
  if (setting != 1 && setting != 2) throw ConfigError("setting must be 1 or 2");
  if (!(sigma_scale > 0.0)) throw ConfigError("sigma_scale must be positive");
  if (!(edge_prob >= 0.0 && edge_prob <= 1.0)) throw ConfigError("edge_prob must lie in [0, 1]");
  if (repetitions < 1) throw ConfigError("repetitions must be at least 1");
  if (noise) noise->validate();
  if (fixed_dag && static_cast<std::size_t>(fixed_dag->rows()) != d) throw ConfigError("fixed DAG size differs from d");
  creator.validate();
}

Json ExperimentConfig::to_json() const {
  Json j;
  j["d"] = d;
  j["K"] = K;
  j["n"] = n;
  j["p"] = observed_dim();
  j["setting"] = setting;
  j["sigma_scale"] = sigma_scale;
  j["noise"] = noise ? noise->to_string() : "mixed";
  j["weights"] = weights.to_string();
  j["edge_prob"] = edge_prob;
  j["repetitions"] = repetitions;
  j["seed"] = seed;
  return j;
}

ScmEnsemble generate_ensemble(const ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ScmEnsemble e;
  e.dag = cfg.fixed_dag ? Dag(*cfg.fixed_dag) : sample_er_dag(cfg.d, cfg.edge_prob, derive_seed(seed, {0}));
  e.H = sample_mixing(cfg.observed_dim(), cfg.d, derive_seed(seed, {1}));
  const auto noise = assign_noise(cfg.d, cfg.K, cfg.setting, cfg.noise, derive_seed(seed, {2}));
  for (std::size_t k = 0; k < cfg.K; ++k) {
    EnvParams env = sample_env_params(e.dag, cfg.weights, cfg.sigma_scale, derive_seed(seed, {3, k}));
    env.noise = noise[k];
    e.envs.push_back(std::move(env));
  }
  e.validate();
  return e;
}

MultiEnvDataset generate_dataset(const ExperimentConfig& cfg, std::uint64_t seed) {
  return simulate(generate_ensemble(cfg, derive_seed(seed, {1})), cfg.n, derive_seed(seed, {2}));
}

Json write_generated(const ExperimentConfig& cfg, std::uint64_t seed, const fs::path& dir) {
  const auto data = generate_dataset(cfg, seed);
  Json manifest = cfg.to_json();
  manifest["seed"] = seed;
  Json families = Json::array();
  for (const auto& env : data.ensemble->envs) {
    Json row = Json::array();
    for (const auto& s : env.noise) row.push_back(s.to_string());
    families.push_back(std::move(row));
  }
  manifest["noise_specs"] = std::move(families);
  save_dataset(dir, data, manifest);
  return read_json(dir / "manifest.json");
}

CreatorConfig seeded(const CreatorConfig& base, std::uint64_t seed) {
  CreatorConfig c = base;
  c.seed = seed;
  c.ica.seed = derive_seed(seed, {1});
  c.hsic.seed = derive_seed(seed, {2});
  return c;
}

ReplayedResult replay_result(const MultiEnvDataset& data, const ResultFile& result) {
  const auto d = result.order.size();
  const auto di = static_cast<Eigen::Index>(d);
  Eigen::MatrixXd alpha(di, result.alpha.cols());
  Eigen::MatrixXd b(di, di);
  for (Eigen::Index r = 0; r < di; ++r) {
    const auto src = static_cast<Eigen::Index>(result.order[static_cast<std::size_t>(r)]);
    alpha.row(r) = result.alpha.row(src);
    for (Eigen::Index c = 0; c < di; ++c) {
      b(r, c) = result.b_breve(src, static_cast<Eigen::Index>(result.order[static_cast<std::size_t>(c)]));
    }
  }
  const auto ordering = replay_ordering(data, alpha);
  ReplayedResult out;
  out.dag_over_positions = Dag(result.adjacency).permuted(result.order);
  for (std::size_t k = 0; k < data.K(); ++k) out.Y_hat.push_back(ordering.Y_tilde[k] * b.transpose());
  out.Z_hat = ordering.Z_hat;
  return out;
}

MetricsReport evaluate_result(const MultiEnvDataset& data, const ResultFile& result, const LocR2Options& opts) {
  const bool has_y = std::all_of(data.envs.begin(), data.envs.end(), [](const Environment& e) { return e.Y.has_value(); });
  if (!data.ensemble || !has_y) {
    throw MissingGroundTruth(
        "dataset has no ground truth (generating graph and Y.csv); external datasets cannot be scored");
  }
  const auto& truth = data.ensemble->dag;
  if (truth.size() != result.order.size()) throw ConfigError("result d differs from the dataset's latent dimension");
  const auto replayed = replay_result(data, result);
  std::vector<Eigen::MatrixXd> y_true, z_true;
  bool all_z = true;
  for (const auto& env : data.envs) {
    y_true.push_back(*env.Y);
    if (env.Z) z_true.push_back(*env.Z);
    else all_z = false;
  }
  if (!all_z) z_true.clear();
  auto report = evaluate_recovery(replayed.dag_over_positions, replayed.Y_hat, all_z ? replayed.Z_hat : std::vector<Eigen::MatrixXd>{},
                                  truth, y_true, z_true, opts);
  if (result.timings.contains("total") && result.timings["total"].is_number()) {
    report.fit_seconds = result.timings["total"].get<double>();
  }
  return report;
}

RunOutcome run_once(const ExperimentConfig& cfg, std::uint64_t seed) {
  RunOutcome out;
  out.seed = seed;
  try {
    const auto data = generate_dataset(cfg, seed);
    const auto result = fit(data, cfg.d, seeded(cfg.creator, derive_seed(seed, {3})));
    auto file = to_result_file(result);
    if (!cfg.record_timing) file.timings = {{"ordering", 0.0}, {"pruning", 0.0}, {"disentangling", 0.0}, {"total", 0.0}};
    out.report = evaluate_result(data, file, cfg.loc_r2);
  } catch (const StructuralFailure& e) {
    out.error = e.what();
  } catch (const Error& e) {
    out.error = std::string("error: ") + e.what();
  }
  return out;
}

std::vector<std::uint64_t> repetition_seeds(const ExperimentConfig& cfg) {
  std::vector<std::uint64_t> seeds;
  for (std::size_t r = 0; r < cfg.repetitions; ++r) seeds.push_back(derive_seed(cfg.seed, {r}));
  return seeds;
}

std::string metrics_csv_header() { return "seed,shd,loc_r2,d_top,fit_seconds\n"; }

std::string metrics_csv_row(std::uint64_t seed, const MetricsReport& r) {
  return std::to_string(seed) + "," + std::to_string(r.shd) + "," + format_double(r.loc_r2) + "," +
         std::to_string(r.d_top) + "," + format_double(r.fit_seconds) + "\n";
}

std::string metrics_csv(const std::vector<RunOutcome>& runs) {
  std::string out = metrics_csv_header();
  for (const auto& r : runs)
    if (r.report) out += metrics_csv_row(r.seed, *r.report);
  return out;
}

Json metrics_json(const MetricsReport& r) {
  Json j;
  j["shd"] = r.shd;
  j["loc_r2"] = r.loc_r2;
  j["d_top"] = r.d_top;
  j["fit_seconds"] = r.fit_seconds;
  j["best_permutation"] = r.best_permutation;
  j["per_node_loc_r2"] = r.per_node_loc_r2;
  j["position_of_node"] = r.position_of_node;
  j["matching"] = r.matching;
  j["zero_variance"] = r.zero_variance;
  j["greedy_permutation"] = r.greedy;
  return j;
}

std::size_t worker_count(std::size_t jobs) {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("CREATOR_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) n = static_cast<std::size_t>(v);
  }
  return std::max<std::size_t>(1, std::min(n, jobs));
}

void parallel_for(std::size_t jobs, const std::function<void(std::size_t)>& task) {
  const auto workers = worker_count(jobs);
  if (workers <= 1) {
    for (std::size_t i = 0; i < jobs; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < jobs; i = next++) task(i);
    });
  }
  for (auto& t : pool) t.join();
}

std::vector<RunOutcome> run_repetitions(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto seeds = repetition_seeds(cfg);
  std::vector<RunOutcome> out(seeds.size());
  parallel_for(seeds.size(), [&](std::size_t r) { out[r] = run_once(cfg, seeds[r]); });
  return out;
}

Summary summarize(std::vector<double> values) {
  Summary s;
  if (values.empty()) return s;
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  s.median = values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
  if (values.size() >= 2) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

std::size_t resolve_k(const std::string& rule, std::size_t d) {
  if (rule.empty()) throw ConfigError("empty K rule");
  if (rule.back() == 'd') {
    const std::string mult = rule.substr(0, rule.size() - 1);
    std::size_t m = 1;
    if (!mult.empty()) {
      std::size_t used = 0;
      try {
        m = std::stoul(mult, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != mult.size() || m == 0) throw ConfigError("bad K rule '" + rule + "'");
    }
    return m * d;
  }
  std::size_t used = 0;
  std::size_t k = 0;
  try {
    k = std::stoul(rule, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != rule.size() || k == 0) throw ConfigError("bad K rule '" + rule + "'");
  return k;
}

namespace {

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

std::vector<double> metric_values(const std::vector<RunOutcome>& runs, const char* metric) {
  std::vector<double> v;
  for (const auto& r : runs) {
    if (!r.report) continue;
    const auto& m = *r.report;
    const std::string name = metric;
    if (name == "shd") v.push_back(static_cast<double>(m.shd));
    else if (name == "loc_r2") v.push_back(m.loc_r2);
    else if (name == "d_top") v.push_back(static_cast<double>(m.d_top));
    else v.push_back(m.fit_seconds);
  }
  return v;
}

constexpr const char* kMetrics[] = {"shd", "loc_r2", "d_top", "fit_seconds"};

std::string format_tick(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

}  // namespace

std::string bench_csv(const std::vector<CellResult>& cells) {
  std::string out = "cell,d,K,k_rule,n,setting,sigma_scale,noise,reps,completed";
  for (const char* m : kMetrics) {
    out += std::string(",") + m + "_mean," + m + "_median," + m + "_stddev";
  }
  out += ",errors\n";
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const auto& cell = cells[c];
    const auto& cfg = cell.config;
    std::size_t completed = 0;
    std::string errors;
    for (std::size_t r = 0; r < cell.runs.size(); ++r) {
      if (cell.runs[r].report) ++completed;
      else errors += (errors.empty() ? "" : "; ") + ("rep " + std::to_string(r) + ": " + cell.runs[r].error);
    }
    out += std::to_string(c) + "," + std::to_string(cfg.d) + "," + std::to_string(cfg.K) + "," + cell.k_rule + "," +
           std::to_string(cfg.n) + "," + std::to_string(cfg.setting) + "," + format_double(cfg.sigma_scale) + "," +
           csv_quote(cell.noise_label) + "," + std::to_string(cfg.repetitions) + "," + std::to_string(completed);
    for (const char* m : kMetrics) {
      const auto values = metric_values(cell.runs, m);
      if (values.empty()) {
        out += ",,,";
        continue;
      }
      const auto s = summarize(values);
      out += "," + format_double(s.mean) + "," + format_double(s.median) + "," +
             (s.stddev ? format_double(*s.stddev) : std::string());
    }
    out += "," + csv_quote(errors) + "\n";
  }
  return out;
}

std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<Series>& series) {
  constexpr double W = 640, Hh = 400, left = 70, right = 160, top = 40, bottom = 50;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (double v : s.x) x0 = std::min(x0, v), x1 = std::max(x1, v);
    for (double v : s.y)
      if (std::isfinite(v)) y0 = std::min(y0, v), y1 = std::max(y1, v);
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1;
  if (!std::isfinite(y0)) y0 = 0, y1 = 1;
  if (x1 == x0) x0 -= 0.5, x1 += 0.5;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;
  const double pw = W - left - right, ph = Hh - top - bottom;
  auto px = [&](double v) { return left + (v - x0) / (x1 - x0) * pw; };
  auto py = [&](double v) { return top + (1.0 - (v - y0) / (y1 - y0)) * ph; };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << Hh << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << escape_xml(title) << "</text>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\"" << top + ph << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double xv = x0 + (x1 - x0) * t / 4.0, yv = y0 + (y1 - y0) * t / 4.0;
    os << "<text x=\"" << px(xv) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">" << format_tick(xv) << "</text>\n";
    os << "<text x=\"" << left - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << format_tick(yv) << "</text>\n";
  }
  os << "<text x=\"" << left + pw / 2 << "\" y=\"" << Hh - 10 << "\" text-anchor=\"middle\">" << escape_xml(x_label) << "</text>\n";
  os << "<text x=\"15\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 15 " << top + ph / 2
     << ")\">" << escape_xml(y_label) << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = colors[s % (sizeof colors / sizeof *colors)];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < series[s].x.size(); ++i) {
      if (!std::isfinite(series[s].y[i])) continue;
      os << px(series[s].x[i]) << "," << py(series[s].y[i]) << " ";
    }
    os << "\"/>\n";
    for (std::size_t i = 0; i < series[s].x.size(); ++i) {
      if (!std::isfinite(series[s].y[i])) continue;
      os << "<circle cx=\"" << px(series[s].x[i]) << "\" cy=\"" << py(series[s].y[i]) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    const double ly = top + 10 + 18.0 * static_cast<double>(s);
    os << "<line x1=\"" << left + pw + 12 << "\" y1=\"" << ly << "\" x2=\"" << left + pw + 32 << "\" y2=\"" << ly
       << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << left + pw + 36 << "\" y=\"" << ly + 4 << "\">" << escape_xml(series[s].label) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

namespace {

struct Axis {
  std::string name;
  std::function<double(const CellResult&)> value;
  std::function<std::string(const CellResult&)> label;
};

double noise_axis_value(const CellResult& c) {
  if (c.config.noise && c.config.noise->family == NoiseFamily::gennorm) return c.config.noise->shape;
  return 0.0;
}

void write_charts(const std::vector<CellResult>& cells, const SweepSpec& spec, const fs::path& out_dir) {
  std::vector<Axis> axes = {
      {"d", [](const CellResult& c) { return static_cast<double>(c.config.d); },
       [](const CellResult& c) { return "d=" + std::to_string(c.config.d); }},
      {"sigma_scale", [](const CellResult& c) { return c.config.sigma_scale; },
       [](const CellResult& c) { return "sigma=" + format_double(c.config.sigma_scale); }},
      {"beta", noise_axis_value, [](const CellResult& c) { return "noise=" + c.noise_label; }},
      {"n", [](const CellResult& c) { return static_cast<double>(c.config.n); },
       [](const CellResult& c) { return "n=" + std::to_string(c.config.n); }},
  };
  const std::size_t sizes[] = {spec.d.size(), spec.sigma_scale.size(), spec.noise.size(), spec.n.size()};
  std::size_t x_axis = 0;
  for (std::size_t a = 0; a < axes.size(); ++a) {
    if (sizes[a] > 1) {
      x_axis = a;
      break;
    }
  }
  auto series_label = [&](const CellResult& c) {
    std::string label = "setting " + std::to_string(c.config.setting);
    if (spec.k_rule.size() > 1) label += ", K=" + c.k_rule;
    for (std::size_t a = 0; a < axes.size(); ++a)
      if (a != x_axis && sizes[a] > 1) label += ", " + axes[a].label(c);
    return label;
  };
  for (const char* metric : kMetrics) {
    std::map<std::string, Series> by_label;
    std::vector<std::string> label_order;
    for (const auto& cell : cells) {
      const auto values = metric_values(cell.runs, metric);
      const std::string label = series_label(cell);
      if (!by_label.count(label)) label_order.push_back(label);
      auto& s = by_label[label];
      s.label = label;
      s.x.push_back(axes[x_axis].value(cell));
      s.y.push_back(values.empty() ? std::numeric_limits<double>::quiet_NaN() : summarize(values).mean);
    }
    std::vector<Series> series;
    for (const auto& l : label_order) series.push_back(by_label[l]);
    write_text(out_dir / (std::string("bench_") + metric + ".svg"),
               line_chart_svg(std::string("mean ") + metric, axes[x_axis].name, metric, series));
  }
}

}  // namespace

std::vector<CellResult> run_bench(const SweepSpec& spec, const fs::path& out_dir) {
  if (spec.d.empty() || spec.k_rule.empty() || spec.n.empty() || spec.setting.empty() || spec.sigma_scale.empty() ||
      spec.noise.empty()) {
    throw ConfigError("bench: every sweep list must be nonempty");
  }
  std::vector<CellResult> cells;
  for (auto d : spec.d)
    for (const auto& kr : spec.k_rule)
      for (auto n : spec.n)
        for (auto setting : spec.setting)
          for (auto sigma : spec.sigma_scale)
            for (const auto& noise : spec.noise) {
              CellResult cell;
              cell.config = spec.base;
              cell.config.d = d;
              cell.config.K = resolve_k(kr, d);
              cell.config.n = n;
              cell.config.setting = setting;
              cell.config.sigma_scale = sigma;
              cell.config.noise = noise == "mixed" ? std::nullopt : std::optional<NoiseSpec>(NoiseSpec::parse(noise));
              if (spec.base.p && *spec.base.p < d) cell.config.p.reset();
              cell.config.seed = derive_seed(spec.base.seed, {cells.size()});
              cell.config.validate();
              cell.noise_label = noise;
              cell.k_rule = kr;
              cell.runs.resize(cell.config.repetitions);
              cells.push_back(std::move(cell));
            }

  std::vector<std::pair<std::size_t, std::size_t>> jobs;
  for (std::size_t c = 0; c < cells.size(); ++c)
    for (std::size_t r = 0; r < cells[c].runs.size(); ++r) jobs.emplace_back(c, r);
  parallel_for(jobs.size(), [&](std::size_t j) {
    const auto [c, r] = jobs[j];
    cells[c].runs[r] = run_once(cells[c].config, derive_seed(cells[c].config.seed, {r}));
  });

  for (std::size_t c = 0; c < cells.size(); ++c) {
    const fs::path cell_dir = out_dir / ("cell_" + std::to_string(c));
    write_text(cell_dir / "metrics.csv", metrics_csv(cells[c].runs));
    Json j;
    j["config"] = cells[c].config.to_json();
    j["k_rule"] = cells[c].k_rule;
    Json reps = Json::array();
    for (const auto& run : cells[c].runs) {
      Json rj;
      rj["seed"] = run.seed;
      if (run.report) rj["metrics"] = metrics_json(*run.report);
      else rj["error"] = run.error;
      reps.push_back(std::move(rj));
    }
    j["repetitions"] = std::move(reps);
    write_json(cell_dir / "metrics.json", j);
  }
  write_text(out_dir / "bench.csv", bench_csv(cells));
  write_charts(cells, spec, out_dir);
  return cells;
}

}  // namespace creator
