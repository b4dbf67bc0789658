#include "rk/cli.hpp"

int main(int argc, char** argv) { return rk::cli::run(argc, argv); }
