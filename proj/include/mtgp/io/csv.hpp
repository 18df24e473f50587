#pragma once

#include "mtgp/common.hpp"
#include "mtgp/dataset.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace mtgp::io {

/// A parsed comma-separated file: one header row, then data rows. Cells
/// keep their original text so they can be echoed verbatim.
struct CsvTable {
  std::string source;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers; // 1-based line of each data row

  std::optional<std::size_t> column(const std::string &name) const {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (header[c] == name) {
        return c;
      }
    }
    return std::nullopt;
  }
};

namespace detail {

inline std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) {
    return {};
  }
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_row(const std::string &line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    cells.push_back(trim(cell));
  }
  if (!line.empty() && line.back() == ',') {
    cells.emplace_back();
  }
  return cells;
}

inline std::string where(const CsvTable &t, std::size_t row) {
  return t.source + ":" + std::to_string(t.line_numbers[row]);
}

} // namespace detail

inline CsvTable parse_csv(std::istream &in, const std::string &source) {
  CsvTable t;
  t.source = source;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) {
      line.erase(0, 3); // UTF-8 byte order mark
    }
    if (detail::trim(line).empty()) {
      continue;
    }
    auto cells = detail::split_row(line);
    if (!have_header) {
      t.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw ValidationError(source + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(t.header.size()) + " fields, found " +
                            std::to_string(cells.size()));
    }
    t.rows.push_back(std::move(cells));
    t.line_numbers.push_back(line_no);
  }
  if (!have_header) {
    throw ValidationError(source + ": missing header row");
  }
  return t;
}

inline CsvTable read_csv(const std::string &path) {
  std::ifstream in(path);
  if (!in) {
    throw ValidationError(path + ": cannot open file");
  }
  return parse_csv(in, path);
}

/// Parses a finite real; the diagnostic names the file, line and column.
inline double parse_real(const CsvTable &t, std::size_t row, std::size_t col) {
  const std::string &text = t.rows[row][col];
  char *end = nullptr;
  errno = 0;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size() || errno == ERANGE ||
      !std::isfinite(v)) {
    throw ValidationError(detail::where(t, row) + ": column '" + t.header[col] +
                          "': '" + text + "' is not a finite number");
  }
  return v;
}

inline Index parse_task(const CsvTable &t, std::size_t row, std::size_t col) {
  const std::string &text = t.rows[row][col];
  char *end = nullptr;
  errno = 0;
  const long long v = std::strtoll(text.c_str(), &end, 10);
  if (text.empty() || end != text.c_str() + text.size() || errno == ERANGE || v < 0) {
    throw ValidationError(detail::where(t, row) + ": column '" + t.header[col] +
                          "': '" + text + "' is not a non-negative integer");
  }
  return static_cast<Index>(v);
}

/// Positions of the x1..xP columns. They must be named consecutively from
/// x1; P is the number found.
inline std::vector<std::size_t> input_columns(const CsvTable &t) {
  std::vector<std::size_t> cols;
  for (std::size_t p = 1;; ++p) {
    const auto c = t.column("x" + std::to_string(p));
    if (!c) {
      break;
    }
    cols.push_back(*c);
  }
  if (cols.empty()) {
    throw ValidationError(t.source + ": header must contain input columns x1..xP");
  }
  for (const auto &name : t.header) {
    if (name.size() > 1 && name[0] == 'x' &&
        name.find_first_not_of("0123456789", 1) == std::string::npos) {
      const auto k = std::stoul(name.substr(1));
      if (k == 0 || k > cols.size()) {
        throw ValidationError(t.source + ": input column '" + name +
                              "' breaks the x1..x" + std::to_string(cols.size()) +
                              " sequence");
      }
    }
  }
  return cols;
}

inline Matrix parse_inputs(const CsvTable &t, const std::vector<std::size_t> &cols) {
  Matrix x(static_cast<Index>(t.rows.size()), static_cast<Index>(cols.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    for (std::size_t p = 0; p < cols.size(); ++p) {
      x(static_cast<Index>(r), static_cast<Index>(p)) = parse_real(t, r, cols[p]);
    }
  }
  return x;
}

/// A training file with columns x1..xP, task, y. A missing task column
/// means every row belongs to task 0.
struct TaskDataFile {
  MultiTaskDataset dataset;
  Index input_dim = 0;
};

inline TaskDataFile task_data_from_csv(const CsvTable &t) {
  const auto xcols = input_columns(t);
  const auto ycol = t.column("y");
  if (!ycol) {
    throw ValidationError(t.source + ": header must contain a 'y' column");
  }
  const auto tcol = t.column("task");
  if (t.rows.empty()) {
    throw ValidationError(t.source + ": no data rows");
  }

  std::map<Index, std::vector<std::size_t>> by_task;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const Index task = tcol ? parse_task(t, r, *tcol) : 0;
    by_task[task].push_back(r);
  }
  const Index num_tasks = by_task.rbegin()->first + 1;
  for (Index d = 0; d < num_tasks; ++d) {
    if (!by_task.count(d)) {
      std::string present;
      for (const auto &[k, _] : by_task) {
        present += (present.empty() ? "" : ", ") + std::to_string(k);
      }
      throw ValidationError(t.source + ": column 'task': indices must be contiguous "
                                       "from 0; task " +
                            std::to_string(d) + " is missing (present: " + present +
                            ")");
    }
  }

  const Matrix all_x = parse_inputs(t, xcols);
  std::vector<TaskData> tasks;
  for (const auto &[task, rows] : by_task) {
    TaskData td;
    td.inputs.resize(static_cast<Index>(rows.size()), all_x.cols());
    td.targets.resize(static_cast<Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      td.inputs.row(static_cast<Index>(i)) = all_x.row(static_cast<Index>(rows[i]));
      td.targets(static_cast<Index>(i)) = parse_real(t, rows[i], *ycol);
    }
    tasks.push_back(std::move(td));
  }
  return {MultiTaskDataset(std::move(tasks)), static_cast<Index>(xcols.size())};
}

inline TaskDataFile read_task_data(const std::string &path) {
  return task_data_from_csv(read_csv(path));
}

/// Query rows for prediction: inputs, a task per row (0 when the column is
/// absent), and the original table for echoing.
struct QueryFile {
  CsvTable table;
  Matrix inputs;
  std::vector<Index> tasks;
};

inline QueryFile query_from_csv(CsvTable t) {
  QueryFile q;
  const auto xcols = input_columns(t);
  q.inputs = parse_inputs(t, xcols);
  const auto tcol = t.column("task");
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    q.tasks.push_back(tcol ? parse_task(t, r, *tcol) : 0);
  }
  q.table = std::move(t);
  return q;
}

inline QueryFile read_query(const std::string &path) {
  return query_from_csv(read_csv(path));
}

/// Shortest round-trippable decimal form ("%.17g").
inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_row(std::ostream &out, const std::vector<std::string> &cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i > 0) {
      out << ',';
    }
    out << cells[i];
  }
  out << '\n';
}

} // namespace mtgp::io
