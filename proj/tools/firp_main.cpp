#include "firp/cli/commands.hpp"

int main(int argc, char** argv) { return firp::cli::run_cli(argc, argv); }
