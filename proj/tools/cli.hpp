#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace ts3ra::cli {

enum ExitCode : int { kOk = 0, kUserError = 1, kInternalError = 2 };

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name.
int main_with(const std::vector<std::string>& args, std::ostream& out,
              std::ostream& err);

struct SummaryRow {
  std::string slice;
  std::vector<double> mean;
  std::vector<double> stddev;
};

struct Summary {
  std::vector<std::string> columns;  // numeric columns, file order
  std::vector<SummaryRow> rows;      // slice order of the first file
};

/// Per-slice mean and sample standard deviation across metric files. Throws
/// std::runtime_error on unreadable files or mismatched headers.
Summary summarize_files(const std::vector<std::string>& paths);
void write_summary(std::ostream& os, const Summary& s);

}  // namespace ts3ra::cli
