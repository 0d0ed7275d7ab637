#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace ncmac::cli {

int run(int argc, char** argv);
// args excludes the program name
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// "a:step:b" (inclusive) or a single value
std::vector<double> parse_grid(const std::string& text);

double db_to_linear(double db);

}  // namespace ncmac::cli
