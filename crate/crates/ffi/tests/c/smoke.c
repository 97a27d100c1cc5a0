#include <stdio.h>
#include <stdlib.h>
#include <math.h>
#include "sbq.h"

#define CHECK(call, want)                                                        \
  do {                                                                           \
    SbqStatus st_ = (call);                                                      \
    if (st_ != (want)) {                                                         \
      char *msg = sbq_last_error_message();                                      \
      fprintf(stderr, "%s: status %d (%s)\n", #call, (int)st_, msg ? msg : "");  \
      sbq_string_free(msg);                                                      \
      return 1;                                                                  \
    }                                                                            \
  } while (0)

int main(void) {
  const char *config =
      "{\"n\": 16, \"T\": 0.1, \"dt\": 0.01, \"scheme\": \"stratonovich_heun\", \"seed\": 8,"
      " \"initial\": \"taylor_green\","
      " \"noise\": {\"default_family\": {\"gamma\": 4, \"sigma\": 0.1, \"k_max\": 2}}}";
  SbqSimulation *sim = NULL;
  CHECK(sbq_simulation_new("{", &sim), SBQ_STATUS_CONFIG);
  CHECK(sbq_simulation_new(config, &sim), SBQ_STATUS_OK);
  CHECK(sbq_simulation_advance(sim, 0.1), SBQ_STATUS_OK);

  double t = 0.0;
  size_t n = 0, count = 0;
  CHECK(sbq_simulation_time(sim, &t), SBQ_STATUS_OK);
  CHECK(sbq_simulation_grid_size(sim, &n), SBQ_STATUS_OK);
  CHECK(sbq_simulation_record_count(sim, &count), SBQ_STATUS_OK);

  double *omega = malloc(n * n * sizeof(double));
  CHECK(sbq_simulation_vorticity(sim, omega, n * n - 1), SBQ_STATUS_INVALID_ARGUMENT);
  CHECK(sbq_simulation_vorticity(sim, omega, n * n), SBQ_STATUS_OK);
  double sum = 0.0;
  for (size_t i = 0; i < n * n; i++) sum += omega[i];
  free(omega);

  SbqDiagnostics last;
  CHECK(sbq_simulation_record(sim, count - 1, &last), SBQ_STATUS_OK);
  sbq_simulation_free(sim);

  printf("version=%s t=%.3f n=%zu records=%zu mean=%.1e ke=%.6f\n", sbq_version(), t, n, count,
         sum / (double)(n * n), last.kinetic_energy);
  return (fabs(t - 0.1) < 1e-12 && n == 16 && count == 11 && fabs(sum) < 1e-9 && last.t == t) ? 0 : 1;
}
