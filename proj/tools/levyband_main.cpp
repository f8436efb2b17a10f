#include "levyband/cli.hpp"

int main(int argc, char** argv) { return levyband::cli::run(argc, argv); }
