#include "rswitch/cli.hpp"

int main(int argc, char** argv) { return rswitch::cli::run(argc, argv); }
