#include "trader/cli.hpp"

int main(int argc, char** argv) { return trader::cli::run(argc, argv); }
