#pragma once

// Minimal CSV helpers with deterministic float formatting (shortest
// round-trip via to_chars), so identical runs produce byte-identical files.

#include <string>
#include <vector>

#include "common.hpp"

namespace kohdesign::csvio {

std::string format_double(double v);
double parse_double(const std::string& s);
std::string format_int(long long v);

std::vector<std::string> split_line(const std::string& line);
std::string join_line(const std::vector<std::string>& fields);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  Eigen::Index col(const std::string& name) const;  // throws if absent
};

Table read_csv(const std::string& path);
void write_csv(const std::string& path, const Table& table);

}  // namespace kohdesign::csvio
