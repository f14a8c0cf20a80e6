#include "odgen/cli.hpp"

int main(int argc, char** argv) { return odgen::cli::run(argc, argv); }
