#include "include/helpers.h"

__global__ void late(float *p, int n);

__global__ void smooth(float *p, int n)
{
    int i = blockIdx.x * blockDim.x + threadIdx.x;
    if (i < n) p[i] = lerp_f(p[i], 0.0f, 0.5f);
}

__global__ void mix(float *a, const float *b, int n)
{
    int i = blockIdx.x * blockDim.x + threadIdx.x;
    if (i < n) a[i] = blend(a[i], b[i]);
}

__global__ void late(float *p, int n)
{
    int i = blockIdx.x * blockDim.x + threadIdx.x;
    if (i < n) p[i] = 0.0f;
}
