#include "lcvar/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace lcvar {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

TimeSeriesSample read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorKind::parse, "empty file");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  TimeSeriesSample out;
  out.labels = split_line(line);
  const int d = static_cast<int>(out.labels.size());
  if (d == 0) {
    throw Error(ErrorKind::parse, "line 1: no channel labels");
  }

  std::vector<double> data;
  int rows = 0;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_line(line);
    if (static_cast<int>(cells.size()) != d) {
      throw Error(ErrorKind::parse, "line " + std::to_string(line_no) + ": expected " +
                                        std::to_string(d) + " cells, got " +
                                        std::to_string(cells.size()));
    }
    for (const auto& cell : cells) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != cell.size() || cell.empty()) {
        throw Error(ErrorKind::parse,
                    "line " + std::to_string(line_no) + ": non-numeric cell '" + cell + "'");
      }
      data.push_back(v);
    }
    ++rows;
  }
  if (rows == 0) {
    throw Error(ErrorKind::parse, "no data rows after the header");
  }
  out.values.resize(rows, d);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < d; ++j) out.values(i, j) = data[static_cast<std::size_t>(i * d + j)];
  }
  out.validate();
  return out;
}

TimeSeriesSample read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorKind::parse, "cannot open '" + path + "'");
  }
  return read_csv(in);
}

TimeSeriesSample ingest_csv(const std::string& path, bool center) {
  TimeSeriesSample sample = read_csv_file(path);
  if (center) {
    sample.values.rowwise() -= sample.values.colwise().mean().eval();
  }
  return sample;
}

void write_csv(std::ostream& out, const TimeSeriesSample& sample) {
  sample.validate();
  const int d = sample.dims();
  for (int j = 0; j < d; ++j) {
    if (j) out << ',';
    out << (sample.labels.empty() ? "ch" + std::to_string(j + 1) : sample.labels[j]);
  }
  out << '\n';
  char buf[64];
  for (int i = 0; i < sample.length(); ++i) {
    for (int j = 0; j < d; ++j) {
      if (j) out << ',';
      std::snprintf(buf, sizeof(buf), "%.17g", sample.values(i, j));
      out << buf;
    }
    out << '\n';
  }
}

void write_csv_file(const std::string& path, const TimeSeriesSample& sample) {
  std::ofstream out(path, std::ios::binary);  // binary keeps LF endings
  if (!out) {
    throw Error(ErrorKind::validation, "cannot write '" + path + "'");
  }
  write_csv(out, sample);
}

}  // namespace lcvar
