#include "creator/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "creator/errors.hpp"
#include "creator/seeding.hpp"

namespace creator {

namespace {

struct FamilyName {
  NoiseFamily family;
  const char* name;
};

constexpr FamilyName kFamilyNames[] = {
    {NoiseFamily::laplace, "laplace"}, {NoiseFamily::exponential, "exponential"},
    {NoiseFamily::uniform, "uniform"}, {NoiseFamily::gumbel, "gumbel"},
    {NoiseFamily::beta, "beta"},       {NoiseFamily::gamma1, "gamma1"},
    {NoiseFamily::chisq1, "chisq1"},   {NoiseFamily::chisq3, "chisq3"},
    {NoiseFamily::gamma3, "gamma3"},   {NoiseFamily::gennorm, "gennorm"},
};

double draw(NoiseFamily family, double shape, std::mt19937_64& rng) {
  switch (family) {
    case NoiseFamily::laplace: {
      std::uniform_real_distribution<double> u(-0.5, 0.5);
      const double v = u(rng);
      return v < 0 ? std::log1p(2.0 * v) : -std::log1p(-2.0 * v);
    }
    case NoiseFamily::exponential:
      return std::exponential_distribution<double>(1.0)(rng);
    case NoiseFamily::uniform:
      return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    case NoiseFamily::gumbel:
      return std::extreme_value_distribution<double>(0.0, 1.0)(rng);
    case NoiseFamily::beta: {
      std::gamma_distribution<double> g(0.5, 1.0);
      const double a = g(rng);
      const double b = g(rng);
      return a + b > 0 ? a / (a + b) : 0.5;
    }
    case NoiseFamily::gamma1:
      return std::gamma_distribution<double>(1.0, 1.0)(rng);
    case NoiseFamily::chisq1:
      return std::chi_squared_distribution<double>(1.0)(rng);
    case NoiseFamily::chisq3:
      return std::chi_squared_distribution<double>(3.0)(rng);
    case NoiseFamily::gamma3:
      return std::gamma_distribution<double>(3.0, 1.0)(rng);
    case NoiseFamily::gennorm: {
      // |e|^beta ~ Gamma(1/beta, 1) for density proportional to exp(-|e|^beta).
      const double g = std::gamma_distribution<double>(1.0 / shape, 1.0)(rng);
      const double magnitude = std::pow(g, 1.0 / shape);
      return std::bernoulli_distribution(0.5)(rng) ? magnitude : -magnitude;
    }
  }
  throw ConfigError("unsupported noise family");
}

}  // namespace

const std::vector<NoiseFamily>& table_families() {
  static const std::vector<NoiseFamily> families = {
      NoiseFamily::laplace, NoiseFamily::exponential, NoiseFamily::uniform,
      NoiseFamily::gumbel,  NoiseFamily::beta,        NoiseFamily::gamma1,
      NoiseFamily::chisq1,  NoiseFamily::chisq3,      NoiseFamily::gamma3,
  };
  return families;
}

std::string to_string(NoiseFamily f) {
  for (const auto& fn : kFamilyNames)
    if (fn.family == f) return fn.name;
  throw ConfigError("unsupported noise family");
}

NoiseFamily parse_noise_family(const std::string& name) {
  for (const auto& fn : kFamilyNames)
    if (name == fn.name) return fn.family;
  throw ConfigError("unsupported noise family '" + name + "'");
}

void NoiseSpec::validate() const {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw ConfigError("noise scale must be positive");
  if (family == NoiseFamily::gennorm && !(shape >= 1.0)) throw ConfigError("gennorm requires shape >= 1");
}

std::string NoiseSpec::to_string() const {
  std::string s = creator::to_string(family);
  if (family == NoiseFamily::gennorm) {
    std::ostringstream os;
    os << shape;
    s += ":" + os.str();
  }
  return s;
}

NoiseSpec NoiseSpec::parse(const std::string& text) {
  NoiseSpec spec;
  const auto colon = text.find(':');
  spec.family = parse_noise_family(text.substr(0, colon));
  if (colon != std::string::npos) {
    try {
      spec.shape = std::stod(text.substr(colon + 1));
    } catch (const std::exception&) {
      throw ConfigError("bad noise shape in '" + text + "'");
    }
  }
  spec.validate();
  return spec;
}

std::string WeightSpec::to_string() const {
  switch (mode) {
    case Mode::random_family:
      return "mixed";
    case Mode::fixed_family:
      return creator::to_string(family);
    case Mode::bounded: {
      std::ostringstream os;
      os << "bounded:" << low << ":" << high;
      return os.str();
    }
  }
  return "mixed";
}

WeightSpec WeightSpec::parse(const std::string& text) {
  WeightSpec w;
  if (text == "mixed") return w;
  if (text.rfind("bounded", 0) == 0) {
    w.mode = Mode::bounded;
    const auto a = text.find(':');
    if (a != std::string::npos) {
      const auto b = text.find(':', a + 1);
      try {
        w.low = std::stod(text.substr(a + 1, b - a - 1));
        if (b != std::string::npos) w.high = std::stod(text.substr(b + 1));
      } catch (const std::exception&) {
        throw ConfigError("bad bounded weight spec '" + text + "'");
      }
    }
    if (!(w.low > 0.0 && w.high >= w.low)) throw ConfigError("bounded weights need 0 < low <= high");
    return w;
  }
  w.mode = Mode::fixed_family;
  w.family = parse_noise_family(text);
  if (w.family == NoiseFamily::gennorm) throw ConfigError("gennorm is not a weight family");
  return w;
}

Eigen::MatrixXd EnvParams::structural_rows() const {
  const auto d = W.rows();
  const Eigen::MatrixXd i_minus_w = Eigen::MatrixXd::Identity(d, d) - W;
  return omega.cwiseInverse().asDiagonal() * i_minus_w.transpose();
}

void ScmEnsemble::validate() const {
  const auto dd = static_cast<Eigen::Index>(d());
  if (H.cols() != dd) throw ConfigError("ensemble: H must have d columns");
  if (H.rows() < dd) throw ConfigError("ensemble: need p >= d");
  if (envs.empty()) throw ConfigError("ensemble: need at least one environment");
  if (dd > 0 && svd_rank(H, RankTolerance(1e-10)) != dd) throw ConfigError("ensemble: H lacks full column rank");
  for (std::size_t k = 0; k < envs.size(); ++k) {
    const auto& e = envs[k];
    const std::string where = "ensemble env " + std::to_string(k) + ": ";
    if (e.W.rows() != dd || e.W.cols() != dd) throw ConfigError(where + "W has wrong shape");
    if (e.omega.size() != dd) throw ConfigError(where + "Omega has wrong length");
    if (!(e.omega.array() > 0.0).all()) throw ConfigError(where + "Omega entries must be positive");
    for (Eigen::Index i = 0; i < dd; ++i)
      for (Eigen::Index j = 0; j < dd; ++j)
        if ((e.W(i, j) != 0.0) != dag.has_edge(i, j)) throw ConfigError(where + "W support differs from the DAG");
    if (e.noise.size() != static_cast<std::size_t>(dd)) throw ConfigError(where + "need one noise spec per node");
  }
}

bool MultiEnvDataset::has_ground_truth() const {
  return !envs.empty() && std::all_of(envs.begin(), envs.end(), [](const Environment& e) { return e.Y && e.Z; });
}

void MultiEnvDataset::validate() const {
  if (envs.empty()) throw ConfigError("dataset: no environments");
  const auto p = envs.front().X.cols();
  for (std::size_t k = 0; k < envs.size(); ++k) {
    const auto& e = envs[k];
    const std::string where = "dataset env " + std::to_string(k) + ": ";
    if (e.X.cols() != p) throw ConfigError(where + "column count differs from env 0");
    if (e.X.rows() < 2) throw ConfigError(where + "need at least 2 samples");
    if (!e.X.allFinite()) throw ConfigError(where + "non-finite observations");
    if (e.Y && e.Y->rows() != e.X.rows()) throw ConfigError(where + "Y row count mismatch");
    if (e.Z && e.Z->rows() != e.X.rows()) throw ConfigError(where + "Z row count mismatch");
    if (e.Y && e.Z && e.Y->cols() != e.Z->cols()) throw ConfigError(where + "Y/Z width mismatch");
  }
}

Eigen::VectorXd sample_raw(const NoiseSpec& spec, std::size_t n, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  Eigen::VectorXd out(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = draw(spec.family, spec.shape, rng);
  return out;
}

Eigen::VectorXd sample_noise(const NoiseSpec& spec, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw ConfigError("sample_noise: n must be at least 1");
  Eigen::VectorXd v = sample_raw(spec, n, seed);
  v.array() -= v.mean();
  if (n > 1) {
    const double sd = std::sqrt(v.squaredNorm() / static_cast<double>(n - 1));
    if (sd > 0.0) v /= sd;
  }
  return v * spec.scale;
}

EnvParams sample_env_params(const Dag& dag, const WeightSpec& weights, double sigma_scale, std::uint64_t seed) {
  if (!(sigma_scale > 0.0)) throw ConfigError("sample_env_params: sigma_scale must be positive");
  const auto d = static_cast<Eigen::Index>(dag.size());
  std::mt19937_64 rng(seed);
  EnvParams env;
  env.W = Eigen::MatrixXd::Zero(d, d);
  env.omega.resize(d);

  const auto& families = table_families();
  switch (weights.mode) {
    case WeightSpec::Mode::random_family: {
      std::uniform_int_distribution<std::size_t> pick(0, families.size() - 1);
      env.weight_family = families[pick(rng)];
      break;
    }
    case WeightSpec::Mode::fixed_family:
      env.weight_family = weights.family;
      break;
    case WeightSpec::Mode::bounded:
      env.weight_family = NoiseFamily::uniform;
      break;
  }

  std::uniform_real_distribution<double> magnitude(weights.low, weights.high);
  std::bernoulli_distribution sign(0.5);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      double w = 0.0;
      if (weights.mode == WeightSpec::Mode::bounded) {
        w = magnitude(rng);
        if (sign(rng)) w = -w;
      } else {
        w = draw(env.weight_family, 2.0, rng);
      }
      // An exact zero draw must not delete the edge.
      if (dag.has_edge(i, j) && w == 0.0) w = std::numeric_limits<double>::min();
      env.W(i, j) = dag.has_edge(i, j) ? w * sigma_scale : 0.0;
    }
  }
  std::uniform_real_distribution<double> omega(0.5, 1.5);
  for (Eigen::Index i = 0; i < d; ++i) env.omega(i) = omega(rng);
  env.noise.assign(static_cast<std::size_t>(d), NoiseSpec{});
  return env;
}

Eigen::MatrixXd sample_mixing(std::size_t p, std::size_t d, std::uint64_t seed) {
  if (p < d || d < 1) throw ConfigError("sample_mixing: need p >= d >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  for (;;) {
    Eigen::MatrixXd h(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < h.size(); ++i) h.data()[i] = normal(rng);
    if (svd_rank(h, RankTolerance(1e-10)) == static_cast<Eigen::Index>(d)) return h;
  }
}

std::vector<std::vector<NoiseSpec>> assign_noise(std::size_t d, std::size_t K, int setting,
                                                 const std::optional<NoiseSpec>& fixed, std::uint64_t seed) {
  std::vector<std::vector<NoiseSpec>> out(K, std::vector<NoiseSpec>(d));
  if (fixed) {
    fixed->validate();
    for (auto& env : out) std::fill(env.begin(), env.end(), *fixed);
    return out;
  }
  std::mt19937_64 rng(seed);
  const auto& families = table_families();
  if (setting == 1) {
    std::uniform_int_distribution<std::size_t> pick(0, families.size() - 1);
    for (auto& env : out)
      for (auto& spec : env) spec.family = families[pick(rng)];
  } else if (setting == 2) {
    if (d > families.size()) throw ConfigError("setting 2 needs d <= 9 distinct families");
    std::vector<NoiseFamily> pool = families;
    std::shuffle(pool.begin(), pool.end(), rng);
    for (auto& env : out)
      for (std::size_t i = 0; i < d; ++i) env[i].family = pool[i];
  } else {
    throw ConfigError("setting must be 1 or 2");
  }
  return out;
}

MultiEnvDataset simulate(const ScmEnsemble& ensemble, std::size_t n, std::uint64_t seed) {
  ensemble.validate();
  if (n < 2) throw ConfigError("simulate: n must be at least 2");
  const auto d = static_cast<Eigen::Index>(ensemble.d());
  const auto rows = static_cast<Eigen::Index>(n);
  MultiEnvDataset data;
  data.ensemble = ensemble;
  for (std::size_t k = 0; k < ensemble.K(); ++k) {
    const auto& env = ensemble.envs[k];
    Eigen::MatrixXd z(rows, d);
    for (Eigen::Index i = 0; i < d; ++i) {
      z.col(i) = sample_noise(env.noise[static_cast<std::size_t>(i)], n, derive_seed(seed, {k, static_cast<std::uint64_t>(i)}));
    }
    // Row layout of y = W^T y + Omega z, solved in topological order.
    Eigen::MatrixXd y = z * env.omega.asDiagonal();
    for (auto j : ensemble.dag.topological_order()) {
      for (auto i : ensemble.dag.parents(j)) y.col(j) += env.W(i, j) * y.col(i);
    }
    Environment e;
    e.X = y * ensemble.H.transpose();
    e.Y = std::move(y);
    e.Z = std::move(z);
    data.envs.push_back(std::move(e));
  }
  return data;
}

std::vector<bool> check_degeneracy(const ScmEnsemble& ensemble, RankTolerance tol) {
  const auto d = static_cast<Eigen::Index>(ensemble.d());
  const auto K = static_cast<Eigen::Index>(ensemble.K());
  if (K < 1) throw ConfigError("check_degeneracy: need at least one environment");
  std::vector<Eigen::MatrixXd> rows;
  for (const auto& env : ensemble.envs) rows.push_back(env.structural_rows());
  std::vector<bool> out(static_cast<std::size_t>(d));
  for (Eigen::Index i = 0; i < d; ++i) {
    Eigen::MatrixXd stacked(K, d);
    for (Eigen::Index k = 0; k < K; ++k) stacked.row(k) = rows[static_cast<std::size_t>(k)].row(i);
    const auto expected = static_cast<Eigen::Index>(ensemble.dag.parents(static_cast<std::size_t>(i)).size()) + 1;
    out[static_cast<std::size_t>(i)] = svd_rank(stacked, tol) == expected;
  }
  return out;
}

}  // namespace creator
