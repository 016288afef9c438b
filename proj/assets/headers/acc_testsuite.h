#ifndef ACC_TESTSUITE_H
#define ACC_TESTSUITE_H

#include <openacc.h>
#include <math.h>
#include <stdint.h>
#include <stdio.h>
#include <stdlib.h>

#define NUM_TEST_CALLS 10
#define SEED 1
#define PRECISION 1e-8

typedef double real_t;

#endif
