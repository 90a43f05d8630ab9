// Command-line entry point; subcommands are wired up in cli.hpp.
#include "treepool/cli.hpp"

int main(int argc, char** argv) { return treepool::cli_main(argc, argv); }
