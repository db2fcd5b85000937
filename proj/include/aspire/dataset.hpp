#pragma once

// Dense labeled design matrix with named columns, plus features.csv I/O and
// training-split median imputation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aspire/core/csv.hpp"
#include "aspire/core/errors.hpp"
#include "aspire/core/matrix.hpp"

namespace aspire {

struct Dataset {
  std::vector<std::string> ids;
  std::vector<std::string> columns;
  Matrix X;
  Vector y;

  std::size_t rows() const { return static_cast<std::size_t>(X.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(X.cols()); }

  bool has_column(std::string_view name) const {
    return std::find(columns.begin(), columns.end(), name) != columns.end();
  }

  std::size_t column(std::string_view name) const {
    auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw DataError("dataset has no column '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - columns.begin());
  }

  Dataset subset(std::span<const std::size_t> rows_to_keep) const {
    Dataset out;
    out.columns = columns;
    out.X.resize(static_cast<Eigen::Index>(rows_to_keep.size()), X.cols());
    out.y.resize(static_cast<Eigen::Index>(rows_to_keep.size()));
    for (std::size_t k = 0; k < rows_to_keep.size(); ++k) {
      const auto r = static_cast<Eigen::Index>(rows_to_keep[k]);
      out.X.row(static_cast<Eigen::Index>(k)) = X.row(r);
      out.y(static_cast<Eigen::Index>(k)) = y(r);
      if (!ids.empty()) out.ids.push_back(ids[rows_to_keep[k]]);
    }
    return out;
  }
};

/// features.csv: admission_id,label,<columns...>
inline void write_dataset(const std::filesystem::path& path, const Dataset& d) {
  std::vector<std::string> header = {"admission_id", "label"};
  header.insert(header.end(), d.columns.begin(), d.columns.end());
  csv::Writer out(path, header);
  std::vector<std::string> row(header.size());
  for (std::size_t r = 0; r < d.rows(); ++r) {
    const auto i = static_cast<Eigen::Index>(r);
    row[0] = d.ids.empty() ? std::to_string(r) : d.ids[r];
    row[1] = d.y(i) > 0.5 ? "1" : "0";
    for (std::size_t c = 0; c < d.cols(); ++c) row[c + 2] = csv::format(d.X(i, static_cast<Eigen::Index>(c)));
    out.row(row);
  }
}

/// Reads features.csv. If `expected_columns` is non-empty the feature header
/// must match it exactly.
inline Dataset read_dataset(const std::filesystem::path& path,
                            const std::vector<std::string>& expected_columns = {}) {
  if (!std::filesystem::exists(path)) throw DataError("missing input file " + path.string());
  const auto table = csv::read(path);
  if (table.header.size() < 2 || table.header[0] != "admission_id" || table.header[1] != "label") {
    throw DataError(path.string() + ": header must start with 'admission_id,label'");
  }
  Dataset d;
  d.columns.assign(table.header.begin() + 2, table.header.end());
  if (!expected_columns.empty() && d.columns != expected_columns) {
    throw DataError(path.string() + ": feature columns do not match the expected schema");
  }
  d.X.resize(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(d.columns.size()));
  d.y.resize(static_cast<Eigen::Index>(table.rows.size()));
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const auto i = static_cast<Eigen::Index>(r);
    d.ids.push_back(row[0]);
    if (row[1] != "0" && row[1] != "1") throw DataError(path.string() + ": label must be 0 or 1");
    d.y(i) = row[1] == "1" ? 1.0 : 0.0;
    for (std::size_t c = 0; c < d.columns.size(); ++c) {
      d.X(i, static_cast<Eigen::Index>(c)) = csv::parse_double(row[c + 2], d.columns[c]);
    }
  }
  return d;
}

/// Median imputation fitted on a training split. Columns that are missing
/// anywhere in the training split get a `<column>:missing` indicator appended.
class MedianImputer {
 public:
  void fit(const Dataset& train) {
    source_columns_ = train.columns;
    medians_.assign(train.cols(), 0.0);
    indicator_for_.clear();
    for (std::size_t c = 0; c < train.cols(); ++c) {
      std::vector<double> present;
      bool any_missing = false;
      for (std::size_t r = 0; r < train.rows(); ++r) {
        const double v = train.X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        if (std::isnan(v)) {
          any_missing = true;
        } else {
          present.push_back(v);
        }
      }
      medians_[c] = median(present);
      if (any_missing) indicator_for_.push_back(c);
    }
  }

  Dataset transform(const Dataset& d) const {
    if (d.columns != source_columns_) throw DataError("imputer: column schema differs from training split");
    Dataset out;
    out.ids = d.ids;
    out.y = d.y;
    out.columns = d.columns;
    for (std::size_t c : indicator_for_) out.columns.push_back(d.columns[c] + ":missing");
    out.X.resize(d.X.rows(), static_cast<Eigen::Index>(out.columns.size()));
    out.X.leftCols(d.X.cols()) = d.X;
    for (std::size_t k = 0; k < indicator_for_.size(); ++k) {
      out.X.col(d.X.cols() + static_cast<Eigen::Index>(k)).setZero();
    }
    for (Eigen::Index r = 0; r < d.X.rows(); ++r) {
      for (std::size_t c = 0; c < d.cols(); ++c) {
        const auto ci = static_cast<Eigen::Index>(c);
        if (std::isnan(d.X(r, ci))) {
          out.X(r, ci) = medians_[c];
          auto it = std::find(indicator_for_.begin(), indicator_for_.end(), c);
          if (it != indicator_for_.end()) {
            out.X(r, d.X.cols() + static_cast<Eigen::Index>(it - indicator_for_.begin())) = 1.0;
          }
        }
      }
    }
    return out;
  }

  const std::vector<double>& medians() const { return medians_; }
  const std::vector<std::string>& source_columns() const { return source_columns_; }
  const std::vector<std::size_t>& indicator_columns() const { return indicator_for_; }

  static MedianImputer restore(std::vector<std::string> source_columns, std::vector<double> medians,
                               std::vector<std::size_t> indicators) {
    if (medians.size() != source_columns.size()) throw DataError("imputer: median count differs from columns");
    for (auto c : indicators) {
      if (c >= source_columns.size()) throw DataError("imputer: indicator column out of range");
    }
    MedianImputer m;
    m.source_columns_ = std::move(source_columns);
    m.medians_ = std::move(medians);
    m.indicator_for_ = std::move(indicators);
    return m;
  }

  static double median(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
  }

 private:
  std::vector<std::string> source_columns_;
  std::vector<double> medians_;
  std::vector<std::size_t> indicator_for_;
};

}  // namespace aspire
