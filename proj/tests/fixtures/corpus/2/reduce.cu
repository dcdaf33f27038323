#include <cstdio>
#define BLOCK_SIZE 256

__device__ float warp_max(float v)
{
    for (int off = 16; off > 0; off /= 2)
        v = fmaxf(v, __shfl_down_sync(0xffffffff, v, off));
    return v;
}

template <typename T>
__global__ void reduce_sum(const T *in, T *out, int n)
{
    T acc = 0;
    for (int i = threadIdx.x; i < n; i += blockDim.x) acc += in[i];
    atomicAdd(out, acc);
}

__global__ void __launch_bounds__(BLOCK_SIZE) reduce_max(const float *in, float *out, int n)
{
    extern __shared__ float smem[];
    int i = blockIdx.x * blockDim.x + threadIdx.x;
    smem[threadIdx.x] = i < n ? in[i] : -1e30f;
    __syncthreads();
    float v = warp_max(smem[threadIdx.x]);
    if ((threadIdx.x & 31) == 0) out[i / 32] = v;
}
