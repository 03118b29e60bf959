#include "tiltforge/cli.hpp"

int main(int argc, char** argv) { return tiltforge::cli::run(argc, argv); }
