#include "listrank/cli.hpp"

int main(int argc, char **argv) { return listrank::cli::run(argc, argv); }
