#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace spfit {

/// One row of the data file schema `time,value,censored`. Censored rows carry
/// the detection threshold in `value`.
struct DataRow {
  double time;
  double value;
  bool censored = false;
};

std::vector<DataRow> read_data_csv(const std::filesystem::path& path);
void write_data_csv(const std::filesystem::path& path, const std::vector<DataRow>& rows);

/// Generic numeric table with a header line; used for every other artifact.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

Table read_table_csv(const std::filesystem::path& path);
void write_table_csv(const std::filesystem::path& path, const Table& table);

/// Full-precision double formatting (round-trips exactly).
std::string format_double(double value);

}  // namespace spfit
