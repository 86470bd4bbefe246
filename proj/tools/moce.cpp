#include "moce/cli.hpp"

int main(int argc, char** argv) { return moce::cli::run(argc, argv); }
