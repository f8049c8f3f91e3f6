#include "cli.hpp"

int main(int argc, char** argv) { return sdnn::cli::run(argc, argv); }
