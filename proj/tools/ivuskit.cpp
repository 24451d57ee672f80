#include "ivuskit/cli/run.hpp"

int main(int argc, char** argv) { return ivuskit::cli::run(argc, argv); }
