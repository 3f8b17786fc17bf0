#include "cli.hpp"

int main(int argc, char** argv) { return bassmbb::cli::run(argc, argv); }
