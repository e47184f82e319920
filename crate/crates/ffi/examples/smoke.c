#include <math.h>
#include <stdio.h>
#include "l2dens.h"

int main(void) {
    L2densKernel *kernel = NULL;
    if (l2dens_kernel_new(2, 1, &kernel) != L2DENS_STATUS_OK) {
        return 1;
    }
    double data[200];
    for (int i = 0; i < 200; i++) {
        double u = fmod(i * 0.6180339887498949, 1.0) * 0.998 + 0.001;
        data[i] = log(u / (1.0 - u)) / 1.7;
    }
    L2densEstimate *est = NULL;
    if (l2dens_estimate(kernel, data, 200, 1, 2.0, true, &est) != L2DENS_STATUS_OK) {
        char msg[256];
        l2dens_last_error(msg, sizeof msg);
        fprintf(stderr, "%s\n", msg);
        return 2;
    }
    printf("%.17g\n", l2dens_estimate_value(est));
    L2densStatus odd = l2dens_estimate(kernel, data, 199, 1, 2.0, false, &est);
    l2dens_estimate_free(est);
    l2dens_kernel_free(kernel);
    return odd == L2DENS_STATUS_ODD_SAMPLE_SIZE ? 0 : 3;
}
