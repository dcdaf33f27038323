/*
__global__ void old_kernel(float *x, int n) { x[0] = 1; }
*/
// __global__ void disabled_kernel(int *p) { }
const char *kDoc = "__global__ void fake(int n) { }";

__global__ void live_kernel(float *x, int n)
{
    int i = blockIdx.x * blockDim.x + threadIdx.x;
    if (i < n) x[i] += 1.0f; /* { unbalanced in a comment */
}

__global__ void reset_kernel(int *flags, int len)
{
    int i = blockIdx.x * blockDim.x + threadIdx.x;
    if (i < len) flags[i] = '}' == '{';
}
