#include "hpmf/cli.hpp"

int main(int argc, char** argv) { return hpmf::cli::main(argc, argv); }
