#include "simplex_uq/io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

#include "simplex_uq/error.hpp"

namespace simplex_uq {

namespace fs = std::filesystem;

std::string format_double(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::string format_matrix_csv(const Matrix& m) {
  std::string out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      out += format_double(m(i, j));
    }
    out += '\n';
  }
  return out;
}

Matrix parse_matrix_csv(const std::string& text, const std::string& source) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    std::size_t pos = 0;
    while (true) {
      const std::size_t comma = line.find(',', pos);
      const std::string field = line.substr(pos, comma == std::string::npos ? std::string::npos
                                                                            : comma - pos);
      const char* begin = field.c_str();
      char* end = nullptr;
      errno = 0;
      const double v = std::strtod(begin, &end);
      while (end && (*end == ' ' || *end == '\t')) ++end;
      if (end == begin || (end && *end != '\0') || (errno == ERANGE && std::isinf(v))) {
        throw ParameterError(source + ":" + std::to_string(line_no) + ": column " +
                             std::to_string(row.size() + 1) + ": cannot parse '" + field +
                             "' as a number");
      }
      row.push_back(v);
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ShapeError(source + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(rows.front().size()) + " columns, found " +
                       std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ShapeError(source + ": no data rows");
  Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return out;
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ParameterError("cannot open '" + path.string() + "' (see --help for expected inputs)");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParameterError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw ParameterError("failed writing '" + path.string() + "'");
}

Matrix read_matrix_csv(const fs::path& path) {
  return parse_matrix_csv(read_text_file(path), path.string());
}

void write_matrix_csv(const fs::path& path, const Matrix& m) {
  write_text_file(path, format_matrix_csv(m));
}

Vector read_vector_csv(const fs::path& path) {
  const Matrix m = read_matrix_csv(path);
  if (m.rows() == 1) return m.row(0).transpose();
  if (m.cols() == 1) return m.col(0);
  throw ShapeError(path.string() + ": expected a single row or column, found " +
                   std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
}

TrainingSet read_training_set(const fs::path& compositions, const fs::path& observations) {
  const Matrix c = read_matrix_csv(compositions);
  const Matrix s = read_matrix_csv(observations);
  if (c.rows() != s.rows()) {
    throw ShapeError(compositions.string() + " has " + std::to_string(c.rows()) + " rows but " +
                     observations.string() + " has " + std::to_string(s.rows()));
  }
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    try {
      validate_composition(c.row(i).transpose());
    } catch (const ValidationError& e) {
      throw ValidationError(compositions.string() + ":" + std::to_string(i + 1) + ": " + e.what(),
                            e.index());
    }
  }
  TrainingSet ts{c.transpose(), s.transpose()};
  validate_training_set(ts);
  return ts;
}

}  // namespace simplex_uq
