#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace tmvnlab {

// Shortest decimal string that round-trips to the same double.
std::string format_double(double x);

// Dense layout: first line "rows,cols", then one comma-separated row per
// line, values in shortest round-trip form.
void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_csv(const std::string& path);

// Column table with a named header line.
void write_table_csv(const std::string& path,
                     const std::vector<std::string>& columns,
                     const Eigen::MatrixXd& rows);

// All writers go through temp-file + rename so a crashed run never
// leaves a half-written artifact behind.
void atomic_write_text(const std::string& path, const std::string& content);

}  // namespace tmvnlab
