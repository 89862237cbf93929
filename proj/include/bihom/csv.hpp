#pragma once

// CSV emission.  Every stream starts with a `# config <hash>` comment line
// (optionally followed by further `#` comment lines), then one header row,
// then data rows.  LF line endings throughout; floating-point cells are
// written with 17 significant digits so they round-trip bit-exactly and the
// same run always produces byte-identical output.

#include "bihom/arith.hpp"

#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <type_traits>

namespace bihom {

inline std::string csv_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

class CsvWriter {
 public:
  CsvWriter(std::ostream& os, const std::string& config_hash) : os_(os) {
    os_ << "# config " << config_hash << "\n";
  }

  void comment(const std::string& text) { os_ << "# " << text << "\n"; }

  template <typename... Ts>
  void row(const Ts&... cells) {
    bool first = true;
    (write_cell(first, cells), ...);
    os_ << "\n";
  }

 private:
  template <typename T>
  void write_cell(bool& first, const T& v) {
    if (!first) os_ << ",";
    first = false;
    if constexpr (std::is_same_v<T, double> || std::is_same_v<T, float>) {
      os_ << csv_double(static_cast<double>(v));
    } else if constexpr (std::is_same_v<T, Rat>) {
      os_ << csv_double(v.template convert_to<double>());  // tables stay numeric
    } else {
      os_ << v;
    }
  }

  std::ostream& os_;
};

}  // namespace bihom
