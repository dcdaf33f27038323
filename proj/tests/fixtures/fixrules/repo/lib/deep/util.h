#pragma once

__device__ inline float util_scale(float v) { return 2.0f * v; }
