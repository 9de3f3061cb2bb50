#include <gscd/harness.hpp>

int main(int argc, char** argv)
{
    return gscd::cli_main(argc, argv);
}
