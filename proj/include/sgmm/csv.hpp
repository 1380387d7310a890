#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "sgmm/baselines.hpp"
#include "sgmm/stream.hpp"
#include "sgmm/types.hpp"

namespace sgmm {

// Column selection by header name. Numeric-only CSV, comma separated, no
// quoting; first row is the header.
struct CsvSchema {
  std::string y_col;
  std::vector<std::string> x_cols;
  std::vector<std::string> z_cols;
  std::optional<std::string> cluster_col;
};

// Lazily yields validated observations in file order. Throws IngestError with
// the 1-based line number on ragged rows, non-numeric cells, or (in cluster
// mode) cluster ids that reappear after a different id.
class CsvStream final : public ObservationSource {
 public:
  CsvStream(const std::string& path, CsvSchema schema);

  bool next(Observation& out) override;
  // Cluster mode: groups consecutive rows sharing cluster_col.
  bool next_cluster(Cluster& out);

  Index d_beta() const { return static_cast<Index>(x_idx_.size()); }
  Index d_g() const { return static_cast<Index>(z_idx_.size()); }

 private:
  bool read_row(Observation& out, std::string* cluster_id);

  std::ifstream in_;
  CsvSchema schema_;
  std::vector<std::string> header_;
  std::vector<int> x_idx_, z_idx_;
  int y_idx_ = -1;
  int cluster_idx_ = -1;
  std::int64_t line_ = 1;  // header consumed in ctor
  std::vector<double> row_;
  std::string pending_cluster_id_;
  Observation pending_obs_;
  bool has_pending_ = false;
  bool done_ = false;
  std::unordered_set<std::string> seen_clusters_;
};

// Writes y,x1..xp,z1..zq with shortest round-trip formatting (exact re-read).
void write_csv(const std::string& path, const Dataset& ds);

// Materializes a whole file (multi-epoch and offline paths).
std::vector<Observation> read_csv(const std::string& path,
                                  const CsvSchema& schema);

}  // namespace sgmm
