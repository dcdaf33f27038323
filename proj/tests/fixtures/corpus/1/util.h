#pragma once
#include "inner.h"

__device__ inline float fma_op(float a, float x, float y) { return base_scale(x, a) + y; }
