__device__ int helper(int v) { return v * 2; }

__global__ void process(int *data, int size)
{
    int i = blockIdx.x * blockDim.x + threadIdx.x;
    if (i < size) data[i] = helper(data[i]);
}
