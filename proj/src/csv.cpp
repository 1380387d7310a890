#include "sgmm/csv.hpp"

#include <charconv>
#include <system_error>

#include "sgmm/errors.hpp"
#include "sgmm/moments.hpp"

namespace sgmm {

namespace {

// Splits one CSV line in place; no quoting, commas only.
void split_line(const std::string& line, std::vector<std::string>& out) {
  out.clear();
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(line.substr(start));
      return;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r'))
    --e;
  return s.substr(b, e - b);
}

double parse_cell(const std::string& raw, std::int64_t line_no) {
  const std::string cell = trim(raw);
  double value = 0.0;
  const char* first = cell.data();
  const char* last = first + cell.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last)
    throw IngestError("non-numeric cell '" + cell + "'", line_no);
  return value;
}

void append_number(std::string& out, double value) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  out.append(buf, ptr);
}

}  // namespace

CsvStream::CsvStream(const std::string& path, CsvSchema schema)
    : in_(path), schema_(std::move(schema)) {
  if (!in_) throw ConfigError("cannot open '" + path + "' for reading");
  std::string line;
  if (!std::getline(in_, line)) throw IngestError("missing header row", 1);
  split_line(line, header_);
  for (std::string& name : header_) name = trim(name);

  auto find_col = [&](const std::string& name) {
    for (std::size_t j = 0; j < header_.size(); ++j)
      if (header_[j] == name) return static_cast<int>(j);
    throw IngestError("column '" + name + "' not found in header", 1);
  };
  y_idx_ = find_col(schema_.y_col);
  for (const std::string& name : schema_.x_cols)
    x_idx_.push_back(find_col(name));
  for (const std::string& name : schema_.z_cols)
    z_idx_.push_back(find_col(name));
  if (schema_.cluster_col) cluster_idx_ = find_col(*schema_.cluster_col);
  if (x_idx_.empty() || z_idx_.empty())
    throw ConfigError("schema needs at least one x column and one z column");
  if (z_idx_.size() < x_idx_.size())
    throw ConfigError("schema needs at least as many z columns as x columns");
  row_.resize(header_.size());
}

bool CsvStream::read_row(Observation& out, std::string* cluster_id) {
  std::string line;
  if (!std::getline(in_, line)) return false;
  ++line_;
  if (line.empty() && in_.peek() == std::ifstream::traits_type::eof())
    return false;
  static thread_local std::vector<std::string> cells;
  split_line(line, cells);
  if (cells.size() != header_.size())
    throw IngestError("row has " + std::to_string(cells.size()) +
                          " cells, header has " +
                          std::to_string(header_.size()),
                      line_);
  out.y = parse_cell(cells[static_cast<std::size_t>(y_idx_)], line_);
  out.x.resize(d_beta());
  for (std::size_t j = 0; j < x_idx_.size(); ++j)
    out.x(static_cast<Index>(j)) =
        parse_cell(cells[static_cast<std::size_t>(x_idx_[j])], line_);
  out.z.resize(d_g());
  for (std::size_t j = 0; j < z_idx_.size(); ++j)
    out.z(static_cast<Index>(j)) =
        parse_cell(cells[static_cast<std::size_t>(z_idx_[j])], line_);
  if (cluster_id != nullptr && cluster_idx_ >= 0)
    *cluster_id = trim(cells[static_cast<std::size_t>(cluster_idx_)]);
  for (Index j = 0; j < out.x.size(); ++j)
    if (!std::isfinite(out.x(j)))
      throw IngestError("non-finite regressor value", line_);
  for (Index j = 0; j < out.z.size(); ++j)
    if (!std::isfinite(out.z(j)))
      throw IngestError("non-finite instrument value", line_);
  if (!std::isfinite(out.y)) throw IngestError("non-finite outcome", line_);
  return true;
}

bool CsvStream::next(Observation& out) {
  if (done_) return false;
  if (has_pending_) {
    out = pending_obs_;
    has_pending_ = false;
    return true;
  }
  if (!read_row(out, nullptr)) {
    done_ = true;
    return false;
  }
  return true;
}

bool CsvStream::next_cluster(Cluster& out) {
  if (cluster_idx_ < 0)
    throw ConfigError("next_cluster needs a cluster column in the schema");
  out.members.clear();
  std::string id;
  Observation obs;
  if (has_pending_) {
    out.members.push_back(pending_obs_);
    id = pending_cluster_id_;
    has_pending_ = false;
  } else {
    if (done_ || !read_row(obs, &id)) {
      done_ = true;
      return false;
    }
    if (!seen_clusters_.insert(id).second)
      throw IngestError("cluster id '" + id + "' is not contiguous", line_);
    out.members.push_back(obs);
  }
  while (true) {
    std::string next_id;
    if (!read_row(obs, &next_id)) {
      done_ = true;
      return true;
    }
    if (next_id == id) {
      out.members.push_back(obs);
      continue;
    }
    if (!seen_clusters_.insert(next_id).second)
      throw IngestError("cluster id '" + next_id + "' is not contiguous",
                        line_);
    pending_obs_ = obs;
    pending_cluster_id_ = next_id;
    has_pending_ = true;
    return true;
  }
}

void write_csv(const std::string& path, const Dataset& ds) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  std::string line = "y";
  for (Index j = 0; j < ds.d_beta(); ++j)
    line += ",x" + std::to_string(j + 1);
  for (Index j = 0; j < ds.d_g(); ++j) line += ",z" + std::to_string(j + 1);
  line += '\n';
  out << line;
  for (std::int64_t i = 0; i < ds.n(); ++i) {
    line.clear();
    append_number(line, ds.y(i));
    for (Index j = 0; j < ds.d_beta(); ++j) {
      line += ',';
      append_number(line, ds.Xt(j, i));
    }
    for (Index j = 0; j < ds.d_g(); ++j) {
      line += ',';
      append_number(line, ds.Zt(j, i));
    }
    line += '\n';
    out << line;
  }
  if (!out) throw ConfigError("write failure on '" + path + "'");
}

std::vector<Observation> read_csv(const std::string& path,
                                  const CsvSchema& schema) {
  CsvStream stream(path, schema);
  std::vector<Observation> data;
  Observation obs;
  while (stream.next(obs)) data.push_back(obs);
  return data;
}

}  // namespace sgmm
