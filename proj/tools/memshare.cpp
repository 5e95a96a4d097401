#include "memshare/cli.hpp"

int main(int argc, char** argv) { return memshare::cli::cli_main(argc, argv); }
