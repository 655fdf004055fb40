#include "fmlab/cli.hpp"

int main(int argc, char** argv) { return fmlab::cli::cli_main(argc, argv); }
