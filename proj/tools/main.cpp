#include "fedprism/cli.hpp"

int main(int argc, char** argv) { return fedprism::cli::main(argc, argv); }
