#include "pceperf/cli.hpp"

int main(int argc, char** argv) { return pceperf::cli::main(argc, argv); }
