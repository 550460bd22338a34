#include "solsurf/cli.hpp"

int main(int argc, char** argv) { return solsurf::cli::run(argc, argv); }
