#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ordinal {

// Minimal RFC 4180 CSV support: quoted fields, embedded commas/quotes/newlines.
std::vector<std::vector<std::string>> read_csv(std::istream& in);
std::vector<std::vector<std::string>> read_csv_file(const std::string& path);

void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);

} // namespace ordinal
