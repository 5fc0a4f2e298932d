#include "duelopt/cli.hpp"

int main(int argc, char** argv)
{
    return duelopt::cli::dispatch(argc, argv);
}
