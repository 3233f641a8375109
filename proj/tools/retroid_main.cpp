#include "retroid/cli/dispatch.hpp"

int main(int argc, char** argv) { return retroid::cli::dispatch(argc, argv); }
