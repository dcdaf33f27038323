#include "blocktune/cli.hpp"

int main(int argc, char** argv) { return blocktune::cli::dispatch(argc, argv); }
