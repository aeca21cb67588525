#include <math.h>
#include <stdio.h>
#include "bdris_est.h"

int main(void) {
    BdrisConfig *cfg = bdris_config_desk();
    double nmse[3];
    bdris_config_set_snr_db(cfg, 0.0);
    int32_t rc = bdris_run_trial(cfg, 0, BDRIS_ESTIMATOR_PROPOSED | BDRIS_ESTIMATOR_DIRECT_OMP, nmse);
    if (rc != BDRIS_OK) {
        fprintf(stderr, "error %d: %s\n", rc, bdris_last_error_message());
        bdris_config_free(cfg);
        return 1;
    }
    printf("proposed %g direct_omp %g\n", nmse[0], nmse[1]);
    bdris_config_free(cfg);
    return 0;
}
