#include "prc/cli.hpp"

int main(int argc, char** argv) { return prc::cli::main_entry(argc, argv); }
