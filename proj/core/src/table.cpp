#include "csma/table.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "csma/errors.hpp"

namespace csma {

void Table::add(std::vector<std::string> row) {
  if (row.size() != columns.size()) {
    throw DimensionError("table '" + name + "' row has " + std::to_string(row.size()) +
                         " cells for " + std::to_string(columns.size()) + " columns");
  }
  rows.push_back(std::move(row));
}

std::string cell(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string cell(std::int64_t v) { return std::to_string(v); }
std::string cell(std::uint64_t v) { return std::to_string(v); }

namespace {

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string to_csv(const Table& t, const std::string& preamble) {
  std::ostringstream os;
  if (!preamble.empty()) {
    std::istringstream in(preamble);
    std::string line;
    while (std::getline(in, line)) os << "# " << line << '\n';
  }
  for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << quote(t.columns[i]);
  os << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << quote(row[i]);
    os << '\n';
  }
  return os.str();
}

}  // namespace csma
