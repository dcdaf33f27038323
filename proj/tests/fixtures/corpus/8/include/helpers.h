#ifndef HELPERS_H
#define HELPERS_H

__device__ inline float lerp_f(float a, float b, float t) { return a + t * (b - a); }

#endif
