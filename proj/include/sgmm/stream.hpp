#pragma once

#include <cstdint>

#include "sgmm/types.hpp"

namespace sgmm {

// Pull-based record source. next() fills `out` and returns true, or returns
// false at end of stream. Implementations own their cursor; a source is
// consumed once.
struct ObservationSource {
  virtual ~ObservationSource() = default;
  virtual bool next(Observation& out) = 0;
};

// Cluster-mode counterpart.
struct BatchSource {
  virtual ~BatchSource() = default;
  virtual bool next(MomentBatch& out) = 0;
};

// In-memory source over columns of (Xt, Zt, y): observation j is column j.
// Column-major storage makes each record contiguous.
class ColumnSource final : public ObservationSource {
 public:
  ColumnSource(const Matrix& xt, const Matrix& zt, const Vector& y,
               std::int64_t first, std::int64_t count)
      : xt_(xt), zt_(zt), y_(y), pos_(first), end_(first + count) {}

  bool next(Observation& out) override {
    if (pos_ >= end_) return false;
    out.y = y_(pos_);
    out.x = xt_.col(pos_);
    out.z = zt_.col(pos_);
    ++pos_;
    return true;
  }

 private:
  const Matrix& xt_;
  const Matrix& zt_;
  const Vector& y_;
  std::int64_t pos_;
  std::int64_t end_;
};

// Source over a vector of observations, optionally following a permutation.
class VectorSource final : public ObservationSource {
 public:
  explicit VectorSource(const std::vector<Observation>& data)
      : data_(data), order_(nullptr) {}
  VectorSource(const std::vector<Observation>& data,
               const std::vector<std::int64_t>& order)
      : data_(data), order_(&order) {}

  bool next(Observation& out) override {
    const std::int64_t n =
        order_ ? static_cast<std::int64_t>(order_->size())
               : static_cast<std::int64_t>(data_.size());
    if (pos_ >= n) return false;
    const std::int64_t j = order_ ? (*order_)[pos_] : pos_;
    out = data_[static_cast<std::size_t>(j)];
    ++pos_;
    return true;
  }

 private:
  const std::vector<Observation>& data_;
  const std::vector<std::int64_t>* order_;
  std::int64_t pos_ = 0;
};

}  // namespace sgmm
