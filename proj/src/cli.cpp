#include "creator/cli.hpp"

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "creator/errors.hpp"
#include "creator/experiment.hpp"
#include "creator/io.hpp"
#include "creator/seeding.hpp"

namespace creator {

namespace {

struct CreatorFlags {
  std::size_t hsic_subsample = 500;
  std::optional<double> rank_tol;
  std::string nonlinearity = "logcosh";
  int ica_max_iter = 400;
  bool population_mode = false;

  void add(CLI::App& app) {
    app.add_option("--hsic-subsample", hsic_subsample, "rows used per HSIC evaluation (0 = all)")
        ->capture_default_str();
    app.add_option("--rank-tol", rank_tol, "relative singular-value cutoff for rank tests");
    app.add_option("--ica-nonlinearity", nonlinearity, "logcosh or cube")
        ->check(CLI::IsMember({"logcosh", "cube"}))
        ->capture_default_str();
    app.add_option("--ica-max-iter", ica_max_iter, "FastICA iteration cap")->capture_default_str();
    app.add_flag("--population-mode", population_mode, "use exact quantities from the generating ensemble");
  }

  CreatorConfig build() const {
    CreatorConfig c;
    c.hsic.subsample = hsic_subsample == 0 ? std::nullopt : std::optional<std::size_t>(hsic_subsample);
    c.ica.nonlinearity = nonlinearity == "cube" ? IcaNonlinearity::cube : IcaNonlinearity::logcosh;
    c.ica.max_iter = ica_max_iter;
    c.population_mode = population_mode;
    if (rank_tol) {
      if (population_mode) c.population_rank_tol = *rank_tol;
      else c.sample_rank_tol = *rank_tol;
    }
    c.validate();
    return c;
  }
};

struct GenerationFlags {
  std::size_t d = 3, k = 3, n = 1000;
  std::optional<std::size_t> p;
  int setting = 1;
  double sigma_scale = 1.0;
  std::string noise = "mixed";
  std::string weights = "mixed";
  double edge_prob = 0.5;

  void add(CLI::App& app) {
    app.add_option("--d", d, "latent dimension")->capture_default_str();
    app.add_option("--k", k, "number of environments")->capture_default_str();
    app.add_option("--n", n, "samples per environment")->capture_default_str();
    app.add_option("--p", p, "observed dimension (default d)");
    add_shared(app);
  }

  void add_shared(CLI::App& app) {
    app.add_option("--weights", weights, "mixed, a family name, or bounded:lo:hi")->capture_default_str();
    app.add_option("--edge-prob", edge_prob, "Erdos-Renyi edge probability")->capture_default_str();
  }

  ExperimentConfig build() const {
    ExperimentConfig cfg;
    cfg.d = d;
    cfg.K = k;
    cfg.n = n;
    cfg.p = p;
    cfg.setting = setting;
    cfg.sigma_scale = sigma_scale;
    cfg.noise = noise == "mixed" ? std::nullopt : std::optional<NoiseSpec>(NoiseSpec::parse(noise));
    cfg.weights = WeightSpec::parse(weights);
    cfg.edge_prob = edge_prob;
    return cfg;
  }
};

void write_features(const fs::path& dir, const std::vector<Eigen::MatrixXd>& Y_hat,
                    const std::vector<Eigen::MatrixXd>& Z_hat) {
  for (std::size_t k = 0; k < Y_hat.size(); ++k) {
    write_csv(dir / ("Y_hat_env" + std::to_string(k) + ".csv"), Y_hat[k], "y_hat");
    if (k < Z_hat.size()) write_csv(dir / ("Z_hat_env" + std::to_string(k) + ".csv"), Z_hat[k], "z_hat");
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Linear causal representation learning from heterogeneous environments"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "simulate a multi-environment dataset");
  GenerationFlags gen_flags;
  std::uint64_t gen_seed = 0;
  fs::path gen_out;
  gen_flags.add(*gen);
  gen->add_option("--setting", gen_flags.setting, "1: families vary by environment; 2: by component")
      ->check(CLI::IsMember({1, 2}))
      ->capture_default_str();
  gen->add_option("--sigma-scale", gen_flags.sigma_scale, "edge weight scale")->capture_default_str();
  gen->add_option("--noise", gen_flags.noise, "mixed or a fixed family such as gennorm:2.5")->capture_default_str();
  gen->add_option("--seed", gen_seed, "master seed")->capture_default_str();
  gen->add_option("--out", gen_out, "dataset directory")->required();

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "recover order, graph and features");
  fs::path fit_dataset, fit_out;
  std::optional<std::size_t> fit_d;
  std::uint64_t fit_seed = 0;
  bool fit_no_timing = false;
  CreatorFlags fit_flags;
  fit_cmd->add_option("--dataset", fit_dataset, "dataset directory")->required();
  fit_cmd->add_option("--d", fit_d, "latent dimension (default: manifest d)");
  fit_cmd->add_option("--seed", fit_seed, "seed for ICA restarts and HSIC subsampling")->capture_default_str();
  fit_cmd->add_option("--out", fit_out, "output directory (default: dataset directory)");
  fit_cmd->add_flag("--no-timing", fit_no_timing, "record zero stage timings");
  fit_flags.add(*fit_cmd);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "score a result against ground truth");
  fs::path eval_dataset, eval_result, eval_out;
  bool literal_sur = false;
  std::uint64_t eval_seed = 0;
  eval_cmd->add_option("--dataset", eval_dataset, "dataset directory")->required();
  eval_cmd->add_option("--result", eval_result, "result.json")->required();
  eval_cmd->add_option("--out", eval_out, "output directory (default: next to the result)");
  eval_cmd->add_option("--seed", eval_seed, "value written to the seed column (default: manifest seed)");
  eval_cmd->add_flag("--literal-sur", literal_sur, "project onto sur(i) only, excluding i itself");

  // bench
  auto* bench = app.add_subcommand("bench", "sweep generate -> fit -> eval over a grid");
  std::vector<std::size_t> b_d = {2, 3, 5, 7};
  std::vector<std::string> b_k = {"d", "2d"};
  std::vector<std::size_t> b_n = {1000};
  std::vector<int> b_setting = {1, 2};
  std::vector<double> b_sigma = {1.0};
  std::vector<std::string> b_noise = {"mixed"};
  std::size_t b_reps = 50;
  std::uint64_t b_seed = 0;
  std::optional<std::size_t> b_p;
  fs::path b_out;
  bool b_no_timing = false, b_literal = false;
  GenerationFlags b_gen;
  CreatorFlags b_flags;
  bench->add_option("--d", b_d, "latent dimensions")->delimiter(',')->capture_default_str();
  bench->add_option("--k", b_k, "environment counts: d, 2d or integers")->delimiter(',')->capture_default_str();
  bench->add_option("--n", b_n, "sample sizes")->delimiter(',')->capture_default_str();
  bench->add_option("--setting", b_setting, "settings")->delimiter(',')->capture_default_str();
  bench->add_option("--sigma-scale", b_sigma, "edge weight scales")->delimiter(',')->capture_default_str();
  bench->add_option("--noise", b_noise, "noise specs (mixed, gennorm:2.5, ...)")->delimiter(',')->capture_default_str();
  bench->add_option("--reps", b_reps, "repetitions per cell")->capture_default_str();
  bench->add_option("--seed", b_seed, "master seed")->capture_default_str();
  bench->add_option("--p", b_p, "observed dimension (default d)");
  bench->add_option("--out", b_out, "output directory")->required();
  bench->add_flag("--no-timing", b_no_timing, "write zero fit_seconds so reruns are byte-identical");
  bench->add_flag("--literal-sur", b_literal, "LocR2 on sur(i) only");
  b_gen.add_shared(*bench);
  b_flags.add(*bench);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "load external per-environment CSVs into a dataset directory");
  fs::path in_dir, in_out;
  std::optional<std::size_t> project_dim;
  std::uint64_t in_seed = 0;
  ingest->add_option("--in", in_dir, "directory of per-environment CSV files")->required();
  ingest->add_option("--project-dim", project_dim, "right-multiply by a seeded standard normal p x q matrix");
  ingest->add_option("--seed", in_seed, "projection seed")->capture_default_str();
  ingest->add_option("--out", in_out, "dataset directory")->required();

  // fit-external
  auto* ext = app.add_subcommand("fit-external", "adopt a result.json produced by another tool");
  fs::path ext_dataset, ext_result, ext_out;
  ext->add_option("--dataset", ext_dataset, "dataset directory")->required();
  ext->add_option("--result", ext_result, "external result.json")->required();
  ext->add_option("--out", ext_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) {
      auto cfg = gen_flags.build();
      cfg.seed = gen_seed;
      cfg.validate();
      write_generated(cfg, gen_seed, gen_out);
      out << "wrote " << gen_out.string() << "\n";
    } else if (*fit_cmd) {
      Json manifest;
      const auto data = load_dataset(fit_dataset, &manifest);
      std::size_t d = 0;
      if (fit_d) d = *fit_d;
      else if (manifest.contains("d")) d = manifest["d"].get<std::size_t>();
      else throw ConfigError("--d is required when the manifest does not record d");
      const auto cfg = seeded(fit_flags.build(), fit_seed);
      const auto result = fit(data, d, cfg);
      auto file = to_result_file(result);
      if (fit_no_timing) file.timings = {{"ordering", 0.0}, {"pruning", 0.0}, {"disentangling", 0.0}, {"total", 0.0}};
      const fs::path dir = fit_out.empty() ? fit_dataset : fit_out;
      write_json(dir / "result.json", result_to_json(file));
      write_features(dir, result.Y_hat, result.ordering.Z_hat);
      for (const auto& w : result.warnings) err << "warning: " << w << "\n";
      out << "wrote " << (dir / "result.json").string() << "\n";
    } else if (*eval_cmd) {
      Json manifest;
      const auto data = load_dataset(eval_dataset, &manifest);
      const auto result = result_from_json(read_json(eval_result));
      LocR2Options opts;
      opts.literal_surrounding = literal_sur;
      auto report = evaluate_result(data, result, opts);
      std::uint64_t seed = eval_seed;
      if (eval_cmd->count("--seed") == 0 && manifest.contains("seed")) seed = manifest["seed"].get<std::uint64_t>();
      const fs::path dir = eval_out.empty() ? eval_result.parent_path() : eval_out;
      write_text(dir / "metrics.csv", metrics_csv_header() + metrics_csv_row(seed, report));
      Json j = metrics_json(report);
      j["seed"] = seed;
      write_json(dir / "metrics.json", j);
      out << "shd " << report.shd << ", loc_r2 " << format_double(report.loc_r2) << ", d_top " << report.d_top << "\n";
    } else if (*bench) {
      SweepSpec spec;
      spec.d = b_d;
      spec.k_rule = b_k;
      spec.n = b_n;
      spec.setting = b_setting;
      spec.sigma_scale = b_sigma;
      spec.noise = b_noise;
      for (auto s : b_setting)
        if (s != 1 && s != 2) throw ConfigError("--setting values must be 1 or 2");
      spec.base = b_gen.build();
      spec.base.p = b_p;
      spec.base.repetitions = b_reps;
      spec.base.seed = b_seed;
      spec.base.creator = b_flags.build();
      spec.base.record_timing = !b_no_timing;
      spec.base.loc_r2.literal_surrounding = b_literal;
      const auto cells = run_bench(spec, b_out);
      std::size_t failures = 0;
      for (const auto& c : cells)
        for (const auto& r : c.runs) failures += r.report ? 0 : 1;
      out << "wrote " << cells.size() << " cells to " << (b_out / "bench.csv").string();
      if (failures) out << " (" << failures << " failed runs, see errors column)";
      out << "\n";
    } else if (*ingest) {
      const auto data = ingest_external(in_dir, project_dim, in_seed);
      Json manifest;
      manifest["source"] = fs::absolute(in_dir).string();
      manifest["seed"] = in_seed;
      if (project_dim) manifest["project_dim"] = *project_dim;
      save_dataset(in_out, data, manifest);
      out << "wrote " << data.K() << " environments to " << in_out.string() << "\n";
    } else if (*ext) {
      const auto data = load_dataset(ext_dataset);
      auto result = result_from_json(read_json(ext_result));
      if (result.alpha.cols() != static_cast<Eigen::Index>(data.p())) {
        throw IoError("external result: alpha has " + std::to_string(result.alpha.cols()) +
                      " columns but the dataset has p = " + std::to_string(data.p()));
      }
      const auto replayed = replay_result(data, result);
      result.flags["external"] = true;
      write_json(ext_out / "result.json", result_to_json(result));
      write_features(ext_out, replayed.Y_hat, replayed.Z_hat);
      out << "wrote " << (ext_out / "result.json").string() << "\n";
    }
  } catch (const StructuralFailure& e) {
    err << "error: stage " << e.stage() << " failed: " << e.what() << "\n";
    return kExitStructural;
  } catch (const MissingGroundTruth& e) {
    err << "error: " << e.what() << "\n";
    return kExitNoGroundTruth;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ConfigError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitStructural;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitOk;
}

}  // namespace creator
