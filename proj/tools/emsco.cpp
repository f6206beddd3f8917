#include "commands.hpp"

int main(int argc, char** argv) { return emsco::cli::run_cli(argc, argv); }
