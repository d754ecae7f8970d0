#include "nacl/cli.hpp"

int main(int argc, char** argv) { return nacl::cli_dispatch(argc, argv); }
