#include "cli.hpp"

int main(int argc, char** argv) { return ebench::cli::run(argc, argv); }
