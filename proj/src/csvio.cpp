#include "tmvnlab/csvio.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace tmvnlab {

std::string format_double(double x) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

void atomic_write_text(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for write: " + tmp);
    out << content;
    if (!out.flush()) throw std::runtime_error("write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("rename failed: " + path);
}

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m) {
  std::ostringstream out;
  out << m.rows() << ',' << m.cols() << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
  atomic_write_text(path, out.str());
}

Eigen::MatrixXd read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty matrix file: " + path);
  Eigen::Index rows = 0, cols = 0;
  {
    std::istringstream hdr(line);
    char comma;
    if (!(hdr >> rows >> comma >> cols) || comma != ',' || rows < 0 || cols < 0)
      throw std::runtime_error("bad matrix header in: " + path);
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (!std::getline(in, line)) throw std::runtime_error("truncated matrix file: " + path);
    const char* p = line.data();
    const char* end = line.data() + line.size();
    for (Eigen::Index j = 0; j < cols; ++j) {
      double v;
      auto res = std::from_chars(p, end, v);
      if (res.ec != std::errc()) throw std::runtime_error("bad number in: " + path);
      m(i, j) = v;
      p = res.ptr;
      if (j + 1 < cols) {
        if (p >= end || *p != ',') throw std::runtime_error("missing comma in: " + path);
        ++p;
      }
    }
  }
  return m;
}

void write_table_csv(const std::string& path,
                     const std::vector<std::string>& columns,
                     const Eigen::MatrixXd& rows) {
  if (static_cast<Eigen::Index>(columns.size()) != rows.cols())
    throw std::invalid_argument("write_table_csv: header/column mismatch");
  std::ostringstream out;
  for (std::size_t j = 0; j < columns.size(); ++j) {
    if (j) out << ',';
    out << columns[j];
  }
  out << '\n';
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < rows.cols(); ++j) {
      if (j) out << ',';
      out << format_double(rows(i, j));
    }
    out << '\n';
  }
  atomic_write_text(path, out.str());
}

}  // namespace tmvnlab
