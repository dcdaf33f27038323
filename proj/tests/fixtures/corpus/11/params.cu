__global__ void gemv(const float *mat, const float *vec, float *out, int rows, int cols)
{
    int r = blockIdx.x * blockDim.x + threadIdx.x;
    if (r >= rows) return;
    float acc = 0.0f;
    for (int c = 0; c < cols; ++c) acc += mat[r * cols + c] * vec[c];
    out[r] = acc;
}

__global__ void conv1d(const float *signal, const float *taps, float *out, int len, int k)
{
    int i = blockIdx.x * blockDim.x + threadIdx.x;
    if (i + k > len) return;
    float acc = 0.0f;
    for (int j = 0; j < k; ++j) acc += signal[i + j] * taps[j];
    out[i] = acc;
}

__global__ void histogram(const unsigned int *values, unsigned int *bins, int num_values, int num_bins)
{
    int i = blockIdx.x * blockDim.x + threadIdx.x;
    if (i < num_values) atomicAdd(&bins[values[i] % num_bins], 1u);
}

__global__ void offset_copy(const double *src, double *dst, int size, int offset, int inc_x)
{
    int i = blockIdx.x * blockDim.x + threadIdx.x;
    if (i * inc_x + offset < size) dst[i] = src[i * inc_x + offset];
}

__global__ void arr_param(float data[], int count)
{
    int i = blockIdx.x * blockDim.x + threadIdx.x;
    if (i < count) data[i] *= 2.0f;
}
