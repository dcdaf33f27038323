#include <cstdio>

void launch_all(float *p, int n);

int run_host(int argc)
{
    std::printf("%d\n", argc);
    return 0;
}
