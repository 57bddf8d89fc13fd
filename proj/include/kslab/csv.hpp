#pragma once

#include <initializer_list>
#include <ostream>
#include <string>
#include <vector>

namespace kslab::csv {

// %.17g: enough digits to round-trip a double
std::string num(double v);

void write_header(std::ostream& out, const std::vector<std::string>& names);
void write_row(std::ostream& out, const std::vector<double>& values);

}  // namespace kslab::csv
