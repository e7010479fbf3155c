#include "clairaut/cli.hpp"

int main(int argc, char** argv) { return clairaut::cli::run_cli(argc, argv); }
