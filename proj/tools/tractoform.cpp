#include "tractoform/cli.hpp"

int main(int argc, char** argv) { return tractoform::cli::run(argc, argv); }
