#include <cuda_runtime.h>
#include <math.h>
#include <vector>

#define EPS 1e-6f

__global__ void normalize(float *v, int n)
{
    int i = blockIdx.x * blockDim.x + threadIdx.x;
    if (i < n) v[i] = v[i] / sqrtf(v[i] * v[i] + EPS);
}

__global__ void rsqrt_all(float *v, int len)
{
    int i = blockIdx.x * blockDim.x + threadIdx.x;
    if (i < len) v[i] = rsqrtf(v[i] + EPS);
}
