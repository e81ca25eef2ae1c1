/* Build: cc examples/smoke.c -Iinclude ../../target/release/libvlasov_renorm_ffi.a -lm -lpthread -ldl */
#include <math.h>
#include <stdio.h>
#include "vlasov_renorm.h"

static int check(VrStatus s, const char *what) {
    if (s != VR_STATUS_OK) {
        fprintf(stderr, "%s: status %d: %s\n", what, (int)s, vr_last_error());
        return 1;
    }
    return 0;
}

int main(void) {
    VrAxis x = {1, 0.0, 1.0, 128};
    VrField *f = NULL;
    double l2, lp, semi;
    int64_t num, den;
    VrSimulation *sim = NULL;
    double t, m, g;
    uint64_t steps;

    if (check(vr_field_synth(&x, 1, 0.5, 2.0, 3, &f), "synth")) return 1;
    if (check(vr_lp_norm(f, 2.0, &l2), "lp")) return 1;
    if (check(vr_sobolev_norm(f, 0.4, 2.0, &lp, &semi), "sobolev")) return 1;
    vr_field_free(f);
    if (check(vr_criticality(1, 5, 1, 3, &num, &den), "criticality")) return 1;

    if (vr_sim_new(64, 64, 1, 0.0, 10.0, &sim) != VR_STATUS_CFL) return 1;
    if (check(vr_sim_new(64, 64, 1, 0.0, 0.05, &sim), "sim")) return 1;
    if (check(vr_sim_step(sim, 10), "step")) return 1;
    if (check(vr_sim_status(sim, &t, &steps, &m, &g), "status")) return 1;
    vr_sim_free(sim);

    printf("vlasov-renorm %s: |f|_2 %.4f, seminorm %.4f, criticality %lld/%lld, t %.2f, mass %.6f, gauss %.1e\n",
           vr_version(), l2, semi, (long long)num, (long long)den, t, m, g);
    return 0;
}
