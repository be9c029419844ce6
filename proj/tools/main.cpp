#include "fedluar/cli.hpp"

int main(int argc, char** argv) { return fedluar::cli_main(argc, argv); }
