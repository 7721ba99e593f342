#include "csvio.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>

namespace kohdesign::csvio {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  if (s == "nan" || s == "-nan" || s.empty()) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) throw IoError("bad numeric field '" + s + "'");
  return v;
}

std::string format_int(long long v) { return std::to_string(v); }

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string join_line(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += fields[i];
  }
  return out;
}

Eigen::Index Table::col(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<Eigen::Index>(i);
  }
  throw IoError("missing CSV column '" + name + "'");
}

Table read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  Table t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_line(line);
    if (first) {
      t.header = std::move(fields);
      first = false;
    } else {
      if (fields.size() != t.header.size()) {
        throw IoError("ragged CSV row in '" + path + "'");
      }
      t.rows.push_back(std::move(fields));
    }
  }
  if (first) throw IoError("empty CSV '" + path + "'");
  return t;
}

void write_csv(const std::string& path, const Table& table) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << join_line(table.header) << '\n';
  for (const auto& row : table.rows) out << join_line(row) << '\n';
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace kohdesign::csvio
