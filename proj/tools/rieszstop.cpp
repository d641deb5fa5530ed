#include "rieszstop/cli.hpp"

int main(int argc, char** argv) { return rieszstop::cli::run(argc, argv); }
