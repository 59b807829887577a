#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace csma {

// A named CSV table. Cells are preformatted strings.
struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row);
};

std::string cell(double v);
std::string cell(std::int64_t v);
inline std::string cell(int v) { return cell(static_cast<std::int64_t>(v)); }
std::string cell(std::uint64_t v);
inline std::string cell(bool v) { return v ? "1" : "0"; }
inline std::string cell(const std::string& s) { return s; }
inline std::string cell(const char* s) { return s; }

// CSV text. Each line of `preamble` is written first as a "# " comment.
std::string to_csv(const Table& t, const std::string& preamble = "");

}  // namespace csma
