/* Build: cc smoke.c -I../include -L<target>/release -lblowuplab_ffi -lm -lpthread -ldl */
#include <stdio.h>
#include <stdlib.h>

#include "blowuplab.h"

static const char *CONFIG =
    "[params]\n"
    "p = 2.0\n"
    "domain_radius = 1.0\n"
    "nx = 101\n"
    "cfl = 0.5\n"
    "t_end = 1.0\n"
    "alpha = 3.0\n"
    "boundary = \"periodic\"\n"
    "snapshot_stride = 1000\n"
    "[initial_data.u0]\n"
    "kind = \"constant\"\n"
    "value = 0.0\n"
    "[initial_data.u1]\n"
    "kind = \"constant\"\n"
    "value = 2.0\n";

int main(void) {
    double beta, kappa;
    if (blowup_constants(2.0, &beta, &kappa) != BLOWUP_STATUS_OK) return 1;

    BlowupSimulation *sim = NULL;
    if (blowup_simulation_new(CONFIG, &sim) != BLOWUP_STATUS_OK) {
        char msg[256];
        blowup_last_error_message(msg, sizeof msg);
        fprintf(stderr, "simulation failed: %s\n", msg);
        return 2;
    }
    BlowupHalt halt;
    BlowupEstimate est;
    blowup_simulation_halt_reason(sim, &halt);
    if (blowup_simulation_estimate(sim, &est) != BLOWUP_STATUS_OK) return 3;
    printf("halt=%d T=%.6f beta=%.6f kappa=%.6f\n", (int)halt, est.t_hat, est.beta_hat, est.kappa_hat);
    blowup_simulation_free(sim);

    if (blowup_constants(1.0, &beta, &kappa) != BLOWUP_STATUS_INVALID_ARGUMENT) return 4;
    return 0;
}
