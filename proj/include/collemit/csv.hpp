#pragma once

#include <initializer_list>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace collemit {

/// Shortest decimal string that round-trips to the same double.
std::string format_double(double x);

/// Minimal CSV row writer with fixed number formatting.
class CsvWriter {
 public:
  CsvWriter(std::ostream& os, std::vector<std::string> header);

  void row(std::initializer_list<double> values);
  void row(const std::vector<double>& values);

 private:
  std::ostream& os_;
  std::size_t columns_;
};

}  // namespace collemit
