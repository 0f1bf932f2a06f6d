#include "magspec/cli.hpp"

int main(int argc, char **argv) { return magspec::cli::main(argc, argv); }
