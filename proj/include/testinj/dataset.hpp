#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "testinj/csv.hpp"
#include "testinj/error.hpp"

namespace testinj {

// Named 0/1 columns of equal length, stored column-major.
class BinaryDataset {
 public:
  using Column = std::vector<std::uint8_t>;

  BinaryDataset() = default;

  void add_column(std::string name, Column values) {
    if (index_of(name)) throw ValidationError("duplicate column '" + name + "'");
    if (!columns_.empty() && values.size() != rows())
      throw ValidationError("column '" + name + "' has " + std::to_string(values.size()) +
                            " rows, expected " + std::to_string(rows()));
    for (auto v : values)
      if (v > 1) throw ValidationError("column '" + name + "' has a non-binary cell");
    names_.push_back(std::move(name));
    columns_.push_back(std::move(values));
  }

  std::size_t rows() const { return columns_.empty() ? 0 : columns_.front().size(); }
  std::size_t cols() const { return columns_.size(); }

  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  const Column& column(std::size_t i) const { return columns_.at(i); }
  const Column& column(const std::string& name) const { return columns_[require(name)]; }

  std::optional<std::size_t> index_of(const std::string& name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - names_.begin());
  }

  std::size_t require(const std::string& name) const {
    auto i = index_of(name);
    if (!i) throw ValidationError("unknown column '" + name + "'");
    return *i;
  }

  std::uint8_t at(std::size_t row, std::size_t col) const { return columns_[col][row]; }

  // Columns in the given order, renamed as requested.
  BinaryDataset select(const std::vector<std::string>& keep) const {
    BinaryDataset out;
    for (const auto& n : keep) out.add_column(n, column(n));
    return out;
  }

  bool operator==(const BinaryDataset&) const = default;

 private:
  std::vector<std::string> names_;
  std::vector<Column> columns_;
};

inline void write_dataset_csv(std::ostream& out, const BinaryDataset& d) {
  csv::write_row(out, d.names());
  for (std::size_t r = 0; r < d.rows(); ++r) {
    for (std::size_t c = 0; c < d.cols(); ++c) {
      if (c) out << ',';
      out << static_cast<int>(d.at(r, c));
    }
    out << '\n';
  }
}

inline BinaryDataset read_dataset_csv(std::istream& in, const std::string& source) {
  csv::Reader reader(in, source);
  auto header = reader.next();
  if (!header || (header->size() == 1 && (*header)[0].empty()))
    throw ParseError(source, 1, 1, "empty dataset: missing header row");
  std::vector<BinaryDataset::Column> cols(header->size());
  while (auto row = reader.next()) {
    if (row->size() == 1 && (*row)[0].empty()) continue;
    if (row->size() != header->size())
      throw ParseError(source, reader.line(), 1, "row has " + std::to_string(row->size()) +
                                                     " fields, expected " + std::to_string(header->size()));
    for (std::size_t c = 0; c < row->size(); ++c) {
      const auto& cell = (*row)[c];
      if (cell != "0" && cell != "1")
        throw ParseError(source, reader.line(), c + 1, "cell must be 0 or 1, got '" + cell + "'");
      cols[c].push_back(cell == "1" ? 1 : 0);
    }
  }
  if (cols.empty() || cols.front().empty()) throw ParseError(source, reader.line(), 1, "dataset has no rows");
  BinaryDataset d;
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (d.index_of((*header)[c])) throw ParseError(source, 1, c + 1, "duplicate column '" + (*header)[c] + "'");
    d.add_column((*header)[c], std::move(cols[c]));
  }
  return d;
}

inline BinaryDataset read_dataset_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), 0, 0, "cannot open file");
  return read_dataset_csv(in, path.string());
}

}  // namespace testinj
