#include "ncmac/cli.hpp"

int main(int argc, char** argv) { return ncmac::cli::run(argc, argv); }
