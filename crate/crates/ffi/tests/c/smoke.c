#include <stdio.h>
#include <stdlib.h>

#include "nonlocal_fv.h"

static int check(NfvStatus s, NfvStatus want, const char *what) {
    if (s != want) {
        const char *msg = nfv_last_error();
        fprintf(stderr, "%s: status %d, expected %d (%s)\n", what, (int)s, (int)want, msg ? msg : "no message");
        return 1;
    }
    return 0;
}

int main(void) {
    NfvConfig *cfg = NULL;
    NfvRun *run = NULL;
    int bad = 0;

    bad |= check(nfv_config_preset("no-such-preset", &cfg), NFV_STATUS_CONFIG, "unknown preset");
    if (cfg != NULL || nfv_last_error() == NULL) {
        return 1;
    }
    bad |= check(nfv_config_preset("paper-1d", &cfg), NFV_STATUS_OK, "preset");
    bad |= check(nfv_config_set_dx(cfg, 0.05), NFV_STATUS_OK, "dx");
    bad |= check(nfv_config_set_final_time(cfg, 0.1), NFV_STATUS_OK, "final time");
    bad |= check(nfv_run(cfg, &run), NFV_STATUS_OK, "run");
    if (bad) {
        return 1;
    }

    size_t dim, comps, nx, ny, steps;
    double t;
    bad |= check(nfv_run_shape(run, &dim, &comps, &nx, &ny), NFV_STATUS_OK, "shape");
    bad |= check(nfv_run_time(run, &t, &steps), NFV_STATUS_OK, "time");
    if (bad || dim != 1 || comps != 2 || nx != 80 || ny != 1 || t != 0.1 || steps == 0) {
        fprintf(stderr, "unexpected shape %zu %zu %zu %zu t=%g steps=%zu\n", dim, comps, nx, ny, t, steps);
        return 1;
    }
    double *u = malloc(nx * sizeof(double));
    bad |= check(nfv_run_copy_component(run, 0, u, nx - 1), NFV_STATUS_BUFFER_TOO_SMALL, "short buffer");
    bad |= check(nfv_run_copy_component(run, 0, u, nx), NFV_STATUS_OK, "copy");
    double mass = 0.0;
    for (size_t i = 0; i < nx; i++) {
        if (u[i] < -1e-14) {
            bad = 1;
        }
        mass += u[i] * 0.05;
    }
    printf("version %s, mass %.12f after %zu steps\n", nfv_version(), mass, steps);
    free(u);
    nfv_run_free(run);
    nfv_config_free(cfg);
    return bad;
}
