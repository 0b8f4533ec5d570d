#include <math.h>
#include <stdio.h>
#include <string.h>

#include "swarmform.h"

#define CHECK(cond)                                              \
    do {                                                         \
        if (!(cond)) {                                           \
            fprintf(stderr, "%s:%d: %s\n", __FILE__, __LINE__, #cond); \
            return 1;                                            \
        }                                                        \
    } while (0)

int main(void) {
    const double square[] = {0.0, 0.0, 3.0, 0.0, 3.0, 3.0, 0.0, 3.0};
    SfShape *shape = NULL;
    CHECK(sf_shape_from_polygon(square, 4, 0.5, &shape) == SF_STATUS_OK);
    CHECK(sf_shape_len(shape) == 36);

    SfSimulation *sim = NULL;
    CHECK(sf_simulation_new("robots = 3\ngamma = 3\ninit_min = [0, 0]\ninit_max = [3, 3]\n", shape, &sim)
          == SF_STATUS_OK);
    sf_shape_free(shape);
    CHECK(sf_simulation_step(sim, 20) == SF_STATUS_OK);
    CHECK(fabs(sf_simulation_time(sim) - 0.2) < 1e-12);

    SfMetrics m;
    CHECK(sf_simulation_metrics(sim, &m) == SF_STATUS_OK);
    CHECK(m.n == 3 && isfinite(m.f));

    const uint64_t missing = 42;
    CHECK(sf_simulation_remove_robots(sim, &missing, 1) == SF_STATUS_UNKNOWN_ROBOT);
    CHECK(strstr(sf_last_error_message(), "42") != NULL);
    sf_simulation_free(sim);

    printf("ok %s\n", sf_version());
    return 0;
}
