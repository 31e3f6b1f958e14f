#pragma once

// On-disk formats: CSV matrices with a header row, dataset directories
// (manifest.json plus env_<k>/X.csv, Y.csv, Z.csv) and result.json.

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "creator/creator.hpp"
#include "creator/model.hpp"

namespace creator {

namespace fs = std::filesystem;
using Json = nlohmann::json;

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

/// Writes `m` with a header row; `prefix` names columns prefix1..prefixN.
void write_csv(const fs::path& path, const Eigen::MatrixXd& m, const std::string& prefix);
void write_csv(const fs::path& path, const Eigen::MatrixXd& m, const std::vector<std::string>& header);

/// Reads a numeric CSV.  A first line containing any non-numeric cell is
/// taken as the header.  Throws IoError naming the line on ragged rows or
/// unparsable cells.
Eigen::MatrixXd read_csv(const fs::path& path, std::vector<std::string>* header = nullptr);

Json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const Json& j, const std::string& what);
Json adjacency_to_json(const Adjacency& a);
Adjacency adjacency_from_json(const Json& j, const std::string& what);

Json ensemble_to_json(const ScmEnsemble& e);
ScmEnsemble ensemble_from_json(const Json& j);

/// Writes the layout; `manifest` gains d, p, K, n and the ensemble when the
/// dataset carries one.
void save_dataset(const fs::path& dir, const MultiEnvDataset& data, Json manifest);

/// Loads X (and Y, Z when present) for every env_<k> directory.
MultiEnvDataset load_dataset(const fs::path& dir, Json* manifest = nullptr);

/// Per-environment CSVs from a directory: env_<k>/X.csv subdirectories if
/// present, else every *.csv file in name order.  An optional manifest.json
/// may list {"environments": [file, ...]}.  With `project_dim`, every X is
/// right-multiplied by a shared seeded standard normal p x q matrix.
MultiEnvDataset ingest_external(const fs::path& dir, std::optional<std::size_t> project_dim, std::uint64_t seed);

/// Contents of result.json.  Rows of alpha are peeled in `order`;
/// adjacency and b_breve are indexed by alpha row.
struct ResultFile {
  std::vector<std::size_t> order;
  Adjacency adjacency;
  Eigen::MatrixXd alpha;
  Eigen::MatrixXd b_breve;
  std::optional<Eigen::VectorXd> y_hat_scale;
  Json flags = Json::object();
  Json timings = Json::object();
};

ResultFile to_result_file(const RecoveryResult& r);
Json result_to_json(const ResultFile& r);
ResultFile result_from_json(const Json& j);

Json read_json(const fs::path& path);
void write_json(const fs::path& path, const Json& j);
void write_text(const fs::path& path, const std::string& text);

}  // namespace creator
