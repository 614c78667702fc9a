// Apache License, Version 2.0, refer to LICENSE.txt
#include "btf/csv_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "btf/errors.hpp"

namespace btf {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.push_back("");
  if (out.empty()) out.push_back("");
  return out;
}

bool is_nan_token(const std::string& s) {
  std::string t;
  t.reserve(s.size());
  for (char c : s) t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return t == "nan" || t == "na";
}

// Missing = empty or nan token; malformed tokens are reported by the caller.
std::optional<double> parse_cell(const std::string& token, bool& malformed) {
  malformed = false;
  if (token.empty() || is_nan_token(token)) return std::nullopt;
  const char* begin = token.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end != begin + token.size()) {
    malformed = true;
    return std::nullopt;
  }
  if (!std::isfinite(v)) return std::nullopt;
  return v;
}

bool parse_int(const std::string& token, long& out) {
  if (token.empty()) return false;
  const char* begin = token.c_str();
  char* end = nullptr;
  out = std::strtol(begin, &end, 10);
  return end == begin + token.size();
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  // Trailing blank lines are tolerated.
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  return lines;
}

bool looks_like_header(const std::vector<std::string>& fields) {
  for (const auto& f : fields) {
    bool malformed = false;
    parse_cell(f, malformed);
    if (malformed) return true;
  }
  return false;
}

std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write '" + path + "'");
  return out;
}

}  // namespace

SeriesMatrix load_series_matrix(const std::string& path, int period) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw ParseError(path + ": empty file");

  std::size_t first = 0;
  if (looks_like_header(split_csv(lines[0]))) first = 1;
  if (first >= lines.size()) throw ParseError(path + ": no data rows");

  const std::size_t n_rows = lines.size() - first;
  const std::size_t n_cols = split_csv(lines[first]).size();

  Eigen::MatrixXd values(n_rows, n_cols);
  BoolGrid mask(n_rows, n_cols);
  for (std::size_t r = 0; r < n_rows; ++r) {
    const std::size_t line_no = first + r + 1;
    const auto fields = split_csv(lines[first + r]);
    if (fields.size() != n_cols) {
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": expected " + std::to_string(n_cols) + " fields, got " +
                       std::to_string(fields.size()));
    }
    for (std::size_t c = 0; c < n_cols; ++c) {
      bool malformed = false;
      const auto v = parse_cell(fields[c], malformed);
      if (malformed) {
        throw ParseError(path + ":" + std::to_string(line_no) +
                         ": malformed value '" + fields[c] + "'");
      }
      mask(r, c) = v.has_value();
      values(r, c) = v.value_or(std::numeric_limits<double>::quiet_NaN());
    }
  }

  SeriesMatrix out;
  out.values = std::move(values);
  out.mask = std::move(mask);
  out.period = period;
  out.validate();
  return out;
}

void save_series_matrix(const std::string& path, const SeriesMatrix& series) {
  auto out = open_out(path);
  for (int i = 0; i < series.n_series(); ++i) {
    for (int t = 0; t < series.n_steps(); ++t) {
      if (t) out << ',';
      if (series.observed(i, t)) out << format_value(series.values(i, t));
    }
    out << '\n';
  }
}

SeriesTensor load_series_tensor(const std::string& path,
                                std::optional<TensorDims> dims, int period) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw ParseError(path + ": empty file");

  std::size_t first = 0;
  if (looks_like_header(split_csv(lines[0]))) first = 1;

  struct Row {
    int i, j, t;
    std::optional<double> value;
    std::size_t line_no;
  };
  std::vector<Row> rows;
  rows.reserve(lines.size() - first);
  int max_i = -1, max_j = -1, max_t = -1;
  for (std::size_t r = first; r < lines.size(); ++r) {
    const std::size_t line_no = r + 1;
    const auto fields = split_csv(lines[r]);
    if (fields.size() != 4) {
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": expected 4 fields (i,j,t,value), got " +
                       std::to_string(fields.size()));
    }
    long i, j, t;
    if (!parse_int(fields[0], i) || !parse_int(fields[1], j) || !parse_int(fields[2], t)) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": malformed index");
    }
    if (i < 0 || j < 0 || t < 0) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": negative index");
    }
    bool malformed = false;
    const auto v = parse_cell(fields[3], malformed);
    if (malformed) {
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": malformed value '" + fields[3] + "'");
    }
    rows.push_back({static_cast<int>(i), static_cast<int>(j), static_cast<int>(t), v, line_no});
    max_i = std::max(max_i, static_cast<int>(i));
    max_j = std::max(max_j, static_cast<int>(j));
    max_t = std::max(max_t, static_cast<int>(t));
  }

  TensorDims d = dims.value_or(TensorDims{max_i + 1, max_j + 1, max_t + 1});
  if (d.m < 1 || d.n < 1 || d.t < 1) {
    throw ParseError(path + ": cannot determine tensor dimensions");
  }

  Grid3<double> values(d.m, d.n, d.t, std::numeric_limits<double>::quiet_NaN());
  Grid3<std::uint8_t> mask(d.m, d.n, d.t, 0);
  std::set<std::size_t> seen;
  for (const auto& row : rows) {
    if (row.i >= d.m || row.j >= d.n || row.t >= d.t) {
      throw ParseError(path + ":" + std::to_string(row.line_no) +
                       ": index out of declared range");
    }
    const std::size_t flat = values.index(row.i, row.j, row.t);
    if (!seen.insert(flat).second) {
      throw ParseError(path + ":" + std::to_string(row.line_no) +
                       ": duplicate cell (" + std::to_string(row.i) + "," +
                       std::to_string(row.j) + "," + std::to_string(row.t) + ")");
    }
    if (row.value) {
      values(row.i, row.j, row.t) = *row.value;
      mask(row.i, row.j, row.t) = 1;
    }
  }

  SeriesTensor out;
  out.values = std::move(values);
  out.mask = std::move(mask);
  out.period = period;
  out.validate();
  return out;
}

void save_series_tensor(const std::string& path, const SeriesTensor& series) {
  auto out = open_out(path);
  out << "i,j,t,value\n";
  for (int i = 0; i < series.dim0(); ++i) {
    for (int j = 0; j < series.dim1(); ++j) {
      for (int t = 0; t < series.n_steps(); ++t) {
        if (!series.observed(i, j, t)) continue;
        out << i << ',' << j << ',' << t << ',' << format_value(series.values(i, j, t)) << '\n';
      }
    }
  }
}

BoolGrid load_mask_matrix(const std::string& path) {
  const SeriesMatrix m = load_series_matrix(path);
  BoolGrid mask(m.values.rows(), m.values.cols());
  for (int i = 0; i < m.n_series(); ++i) {
    for (int t = 0; t < m.n_steps(); ++t) {
      if (!m.observed(i, t)) {
        throw ParseError(path + ": mask file has a missing cell at (" +
                         std::to_string(i) + "," + std::to_string(t) + ")");
      }
      mask(i, t) = m.values(i, t) != 0.0;
    }
  }
  return mask;
}

void save_mask_matrix(const std::string& path, const BoolGrid& mask) {
  auto out = open_out(path);
  for (Eigen::Index i = 0; i < mask.rows(); ++i) {
    for (Eigen::Index t = 0; t < mask.cols(); ++t) {
      if (t) out << ',';
      out << (mask(i, t) ? '1' : '0');
    }
    out << '\n';
  }
}

std::vector<MatrixCell> load_matrix_index(const std::string& path) {
  const auto lines = read_lines(path);
  std::vector<MatrixCell> cells;
  std::size_t first = lines.empty() ? 0 : (looks_like_header(split_csv(lines[0])) ? 1 : 0);
  for (std::size_t r = first; r < lines.size(); ++r) {
    const auto fields = split_csv(lines[r]);
    long i, t;
    if (fields.size() != 2 || !parse_int(fields[0], i) || !parse_int(fields[1], t)) {
      throw ParseError(path + ":" + std::to_string(r + 1) + ": expected 'i,t'");
    }
    cells.push_back({static_cast<int>(i), static_cast<int>(t)});
  }
  return cells;
}

void save_matrix_index(const std::string& path, const std::vector<MatrixCell>& cells) {
  auto out = open_out(path);
  out << "i,t\n";
  for (const auto& c : cells) out << c.i << ',' << c.t << '\n';
}

std::vector<TensorCell> load_tensor_index(const std::string& path) {
  const auto lines = read_lines(path);
  std::vector<TensorCell> cells;
  std::size_t first = lines.empty() ? 0 : (looks_like_header(split_csv(lines[0])) ? 1 : 0);
  for (std::size_t r = first; r < lines.size(); ++r) {
    const auto fields = split_csv(lines[r]);
    long i, j, t;
    if (fields.size() != 3 || !parse_int(fields[0], i) || !parse_int(fields[1], j) ||
        !parse_int(fields[2], t)) {
      throw ParseError(path + ":" + std::to_string(r + 1) + ": expected 'i,j,t'");
    }
    cells.push_back({static_cast<int>(i), static_cast<int>(j), static_cast<int>(t)});
  }
  return cells;
}

void save_tensor_index(const std::string& path, const std::vector<TensorCell>& cells) {
  auto out = open_out(path);
  out << "i,j,t\n";
  for (const auto& c : cells) out << c.i << ',' << c.j << ',' << c.t << '\n';
}

Eigen::MatrixXd load_dense_matrix(const std::string& path) {
  const SeriesMatrix m = load_series_matrix(path);
  if (m.observed_count() != static_cast<std::int64_t>(m.values.size())) {
    throw ParseError(path + ": expected a fully observed matrix");
  }
  return m.values;
}

void save_dense_matrix(const std::string& path, const Eigen::MatrixXd& m) {
  auto out = open_out(path);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index t = 0; t < m.cols(); ++t) {
      if (t) out << ',';
      out << format_value(m(i, t));
    }
    out << '\n';
  }
}

}  // namespace btf
