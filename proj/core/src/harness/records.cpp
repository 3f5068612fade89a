#include "kcg/harness/records.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace kcg::harness {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& text) {
  if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw std::runtime_error("not a number: '" + text + "'");
  return v;
}

namespace {

// Reasons are free text; commas would break the column layout.
std::string clean(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

Index parse_index(const std::string& text) {
  long long v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw std::runtime_error("not an integer: '" + text + "'");
  return static_cast<Index>(v);
}

}  // namespace

void emit_csv(const std::vector<ExperimentRecord>& records, std::ostream& out) {
  out << kRecordHeader << '\n';
  for (const auto& r : records) {
    out << clean(r.method) << ',' << r.step << ',' << r.budget << ',' << clean(r.run) << ',' << format_double(r.eps_f)
        << ',' << format_double(r.eps_var) << ',' << format_double(r.eps_ev) << ',' << format_double(r.smse) << ','
        << format_double(r.seconds) << ',' << r.effective_p << ',' << clean(r.reason) << '\n';
  }
}

void emit_csv(const std::vector<ExperimentRecord>& records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  emit_csv(records, out);
  if (!out) throw std::runtime_error("failed writing " + path);
}

std::vector<ExperimentRecord> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kRecordHeader) throw std::runtime_error("record file: unexpected header");
  std::vector<ExperimentRecord> out;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    if (cells.size() != 11) throw std::runtime_error("record file: row " + std::to_string(row) + " has " +
                                                     std::to_string(cells.size()) + " cells");
    try {
      ExperimentRecord r;
      r.method = cells[0];
      r.step = parse_index(cells[1]);
      r.budget = parse_index(cells[2]);
      r.run = cells[3];
      r.eps_f = parse_double(cells[4]);
      r.eps_var = parse_double(cells[5]);
      r.eps_ev = parse_double(cells[6]);
      r.smse = parse_double(cells[7]);
      r.seconds = parse_double(cells[8]);
      r.effective_p = parse_index(cells[9]);
      r.reason = cells[10];
      out.push_back(std::move(r));
    } catch (const std::runtime_error& e) {
      throw std::runtime_error("record file: row " + std::to_string(row) + ": " + e.what());
    }
  }
  return out;
}

std::vector<ExperimentRecord> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_csv(in);
}

}  // namespace kcg::harness
