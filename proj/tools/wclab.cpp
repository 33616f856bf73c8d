#include "wclab/cli.hpp"

int main(int argc, char** argv) { return wclab::cli::run_cli(argc, argv); }
