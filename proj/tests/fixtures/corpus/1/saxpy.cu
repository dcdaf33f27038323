#include "util.h"

// y = alpha * x + y
__global__ void saxpy(int n, float alpha, const float *x, float *y)
{
    int i = blockIdx.x * blockDim.x + threadIdx.x;
    if (i < n) y[i] = fma_op(alpha, x[i], y[i]);
}

__global__ void saxpy_strided(int n, float alpha, const float *x, float *y, int stride)
{
    for (int i = blockIdx.x * blockDim.x + threadIdx.x; i < n; i += stride)
        y[i] = fma_op(alpha, x[i], y[i]);
}
