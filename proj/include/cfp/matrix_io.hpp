#pragma once

// Plain-text matrix format:
//   line 1: "rows cols"
//   then `rows` lines of `cols` space-separated values, 17 significant digits.
// LF line endings. Model files prefix one or more named matrices with
// key=value header lines:
//   kind=lda
//   shrinkage=0.0001
//   [projection]
//   640 29
//   ...

#include <Eigen/Dense>

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "cfp/errors.hpp"
#include "cfp/io_util.hpp"

namespace cfp {

inline void append_matrix(std::string& out, const Eigen::MatrixXd& m) {
  out += std::to_string(m.rows()) + ' ' + std::to_string(m.cols()) + '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c > 0) out += ' ';
      out += format_double(m(r, c));
    }
    out += '\n';
  }
}

inline std::string format_matrix(const Eigen::MatrixXd& m) {
  std::string out;
  append_matrix(out, m);
  return out;
}

namespace detail {

/// Line cursor over a text buffer; tolerates a trailing CR per line.
class LineReader {
 public:
  explicit LineReader(std::string_view text) : text_(text) {}

  bool next(std::string_view& line) {
    if (pos_ >= text_.size()) return false;
    std::size_t end = text_.find('\n', pos_);
    if (end == std::string_view::npos) end = text_.size();
    line = text_.substr(pos_, end - pos_);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos_ = end + 1;
    ++line_no_;
    return true;
  }

  bool peek(std::string_view& line) const {
    LineReader copy = *this;
    return copy.next(line);
  }

  int line_no() const { return line_no_; }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  int line_no_ = 0;
};

inline std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) tokens.push_back(line.substr(start, i - start));
  }
  return tokens;
}

inline Eigen::MatrixXd read_matrix(LineReader& in) {
  std::string_view line;
  if (!in.next(line)) throw DataError("matrix: missing header");
  const auto head = split_spaces(line);
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  if (head.size() != 2 || !parse_int(head[0], rows) || !parse_int(head[1], cols) || rows < 0 || cols < 0)
    throw DataError("matrix: malformed header '" + std::string(line) + "'");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (!in.next(line)) throw DataError("matrix: expected " + std::to_string(rows) + " rows");
    const auto tokens = split_spaces(line);
    if (static_cast<Eigen::Index>(tokens.size()) != cols)
      throw DataError("matrix: row " + std::to_string(r + 1) + " has " + std::to_string(tokens.size()) +
                      " values, expected " + std::to_string(cols));
    for (Eigen::Index c = 0; c < cols; ++c)
      if (!parse_double(tokens[static_cast<std::size_t>(c)], m(r, c)))
        throw DataError("matrix: non-numeric token '" + std::string(tokens[static_cast<std::size_t>(c)]) + "'");
  }
  return m;
}

}  // namespace detail

inline Eigen::MatrixXd parse_matrix(std::string_view text) {
  detail::LineReader in(text);
  auto m = detail::read_matrix(in);
  std::string_view rest;
  while (in.next(rest))
    if (!detail::split_spaces(rest).empty()) throw DataError("matrix: trailing data after last row");
  return m;
}

inline void save_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  if (!m.allFinite()) throw NumericError("refusing to save a non-finite matrix");
  write_file_atomic(path, format_matrix(m));
}

inline Eigen::MatrixXd load_matrix(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("missing matrix file: " + path.string());
  return parse_matrix(read_file(path));
}

/// Loads a matrix and checks its shape.
inline Eigen::MatrixXd load_matrix(const std::filesystem::path& path, Eigen::Index rows, Eigen::Index cols) {
  auto m = load_matrix(path);
  if (m.rows() != rows || m.cols() != cols)
    throw DataError(path.string() + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) + ", got " +
                    std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  return m;
}

struct ModelFile {
  std::vector<std::pair<std::string, std::string>> header;
  std::vector<std::pair<std::string, Eigen::MatrixXd>> matrices;

  void set(std::string key, std::string value) { header.emplace_back(std::move(key), std::move(value)); }
  void add(std::string name, Eigen::MatrixXd m) { matrices.emplace_back(std::move(name), std::move(m)); }

  const std::string& get(std::string_view key) const {
    for (const auto& [k, v] : header)
      if (k == key) return v;
    throw DataError("model file: missing key '" + std::string(key) + "'");
  }

  const Eigen::MatrixXd& matrix(std::string_view name) const {
    for (const auto& [k, m] : matrices)
      if (k == name) return m;
    throw DataError("model file: missing matrix '" + std::string(name) + "'");
  }

  double get_double(std::string_view key) const {
    double v = 0;
    if (!parse_double(get(key), v)) throw DataError("model file: '" + std::string(key) + "' is not a number");
    return v;
  }

  long long get_int(std::string_view key) const {
    long long v = 0;
    if (!parse_int(get(key), v)) throw DataError("model file: '" + std::string(key) + "' is not an integer");
    return v;
  }
};

inline std::string format_model(const ModelFile& f) {
  std::string out;
  for (const auto& [k, v] : f.header) out += k + '=' + v + '\n';
  for (const auto& [name, m] : f.matrices) {
    out += '[' + name + "]\n";
    append_matrix(out, m);
  }
  return out;
}

inline ModelFile parse_model(std::string_view text) {
  ModelFile f;
  detail::LineReader in(text);
  std::string_view line;
  while (in.next(line)) {
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw DataError("model file: malformed section '" + std::string(line) + "'");
      std::string name(line.substr(1, line.size() - 2));
      f.add(std::move(name), detail::read_matrix(in));
      continue;
    }
    if (!f.matrices.empty()) throw DataError("model file: header line after matrix section");
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw DataError("model file: expected key=value, got '" + std::string(line) + "'");
    f.set(std::string(line.substr(0, eq)), std::string(line.substr(eq + 1)));
  }
  return f;
}

inline void save_model(const std::filesystem::path& path, const ModelFile& f) {
  for (const auto& [name, m] : f.matrices)
    if (!m.allFinite()) throw NumericError("refusing to save non-finite matrix '" + name + "'");
  write_file_atomic(path, format_model(f));
}

inline ModelFile load_model(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("missing model file: " + path.string());
  return parse_model(read_file(path));
}

}  // namespace cfp
