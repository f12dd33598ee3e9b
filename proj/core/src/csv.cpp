#include "spfit/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "spfit/errors.hpp"

namespace spfit {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream stream(line);
  while (std::getline(stream, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_double(const std::string& field, const std::filesystem::path& path, std::size_t row) {
  double value = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  while (begin != end && (*begin == ' ' || *begin == '\t')) ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    std::ostringstream msg;
    msg << path.string() << ": row " << row << ": cannot parse number from '" << field << "'";
    throw DataError(msg.str());
  }
  return value;
}

std::string strip(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  return s;
}

}  // namespace

std::string format_double(double value) {
  std::ostringstream out;
  out.precision(17);
  out << value;
  return out.str();
}

std::vector<DataRow> read_data_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open data file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw EmptyInputError("empty data file " + path.string());
  if (strip(line) != "time,value,censored") {
    throw SchemaError(path.string() + ": expected header 'time,value,censored', got '" +
                      strip(line) + "'");
  }
  std::vector<DataRow> rows;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    line = strip(line);
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != 3) {
      std::ostringstream msg;
      msg << path.string() << ": row " << row << ": expected 3 fields, got " << fields.size();
      throw SchemaError(msg.str());
    }
    DataRow r;
    r.time = parse_double(fields[0], path, row);
    r.value = parse_double(fields[1], path, row);
    const double c = parse_double(fields[2], path, row);
    if (c != 0.0 && c != 1.0) {
      std::ostringstream msg;
      msg << path.string() << ": row " << row << ": censored flag must be 0 or 1";
      throw SchemaError(msg.str());
    }
    r.censored = c == 1.0;
    rows.push_back(r);
    ++row;
  }
  if (rows.empty()) throw EmptyInputError("no data rows in " + path.string());
  return rows;
}

void write_data_csv(const std::filesystem::path& path, const std::vector<DataRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write data file " + path.string());
  out << "time,value,censored\n";
  for (const auto& r : rows) {
    out << format_double(r.time) << ',' << format_double(r.value) << ',' << (r.censored ? 1 : 0)
        << '\n';
  }
}

Table read_table_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open table " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw EmptyInputError("empty table " + path.string());
  Table table;
  table.columns = split(strip(line), ',');
  std::size_t row = 1;
  while (std::getline(in, line)) {
    line = strip(line);
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != table.columns.size()) {
      std::ostringstream msg;
      msg << path.string() << ": row " << row << ": expected " << table.columns.size()
          << " fields, got " << fields.size();
      throw SchemaError(msg.str());
    }
    std::vector<double> values;
    values.reserve(fields.size());
    for (const auto& f : fields) values.push_back(parse_double(f, path, row));
    table.rows.push_back(std::move(values));
    ++row;
  }
  return table;
}

void write_table_csv(const std::filesystem::path& path, const Table& table) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write table " + path.string());
  for (std::size_t i = 0; i < table.columns.size(); ++i) {
    out << (i ? "," : "") << table.columns[i];
  }
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      out << (i ? "," : "") << format_double(row[i]);
    }
    out << '\n';
  }
}

}  // namespace spfit
