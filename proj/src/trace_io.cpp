#include "iprox/solvers.hpp"

#include <array>
#include <charconv>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

namespace iprox {

namespace {

constexpr std::array<const char*, 7> kColumns = {"iter",         "objective", "lyapunov", "step_norm",
                                                 "subgrad_norm", "residual",  "time_s"};

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_cell(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  for (auto& c : cells) {
    while (!c.empty() && (c.back() == '\r' || c.back() == ' ')) c.pop_back();
    while (!c.empty() && c.front() == ' ') c.erase(c.begin());
  }
  return cells;
}

std::optional<double> parse_cell(const std::string& cell, int line_no) {
  if (cell.empty()) return std::nullopt;
  if (cell == "nan" || cell == "NaN") return std::nullopt;
  if (cell == "inf" || cell == "+inf") return std::numeric_limits<double>::infinity();
  if (cell == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size()) {
    throw UsageError("trace line " + std::to_string(line_no) + ": cannot parse '" + cell + "'");
  }
  return v;
}

}  // namespace

void write_trace_csv(std::ostream& out, const IterationTrace& trace) {
  for (std::size_t i = 0; i < kColumns.size(); ++i) out << (i ? "," : "") << kColumns[i];
  out << '\n';
  for (const auto& r : trace.records()) {
    out << r.iter << ',' << format_cell(r.objective) << ',' << format_cell(r.lyapunov) << ','
        << format_double(r.step_norm) << ',' << format_cell(r.subgrad_norm) << ','
        << format_cell(r.residual) << ',' << format_double(r.time_s) << '\n';
  }
}

IterationTrace read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw UsageError("trace: empty input");
  const auto header = split_csv_line(line);
  std::array<int, kColumns.size()> index;
  index.fill(-1);
  for (std::size_t c = 0; c < header.size(); ++c) {
    for (std::size_t k = 0; k < kColumns.size(); ++k) {
      if (header[c] == kColumns[k]) index[k] = static_cast<int>(c);
    }
  }
  if (index[0] < 0) throw UsageError("trace: missing 'iter' column");
  if (index[3] < 0) throw UsageError("trace: missing 'step_norm' column");

  IterationTrace trace;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw UsageError("trace line " + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " cells, got " +
                       std::to_string(cells.size()));
    }
    auto get = [&](std::size_t k) -> std::optional<double> {
      return index[k] < 0 ? std::nullopt : parse_cell(cells[index[k]], line_no);
    };
    IterationRecord r;
    const auto iter = get(0);
    const auto step = get(3);
    if (!iter || !step) {
      throw UsageError("trace line " + std::to_string(line_no) + ": iter and step_norm are required");
    }
    r.iter = static_cast<int>(*iter);
    r.objective = get(1);
    r.lyapunov = get(2);
    r.step_norm = *step;
    r.subgrad_norm = get(4);
    r.residual = get(5);
    r.time_s = get(6).value_or(0.0);
    try {
      trace.append(r);
    } catch (const UsageError&) {
      throw UsageError("trace line " + std::to_string(line_no) + ": iterations not consecutive");
    }
  }
  return trace;
}

}  // namespace iprox
