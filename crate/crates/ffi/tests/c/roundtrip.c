#include <math.h>
#include <stdio.h>
#include <stdlib.h>

#include "mercat.h"

#define N 60

int main(void) {
    double values[N * 3];
    for (int i = 0; i < N; i++) {
        double t = 2.0 * 3.141592653589793 * i / N;
        values[3 * i] = cos(t);
        values[3 * i + 1] = sin(t);
        values[3 * i + 2] = 0.1 * (i % 3);
    }
    MercatData *data = NULL;
    if (mercat_data_new(values, N, 3, &data) != MERCAT_STATUS_OK) {
        fprintf(stderr, "data: %s\n", mercat_last_error());
        return 1;
    }
    MercatTrainOptions opts = mercat_train_options_default();
    opts.iterations = 20;
    opts.milestone_count = 0;
    MercatEmbedding *emb = NULL;
    if (mercat_fit(data, &opts, &emb) != MERCAT_STATUS_OK) {
        fprintf(stderr, "fit: %s\n", mercat_last_error());
        return 1;
    }
    double xyz[N * 3];
    if (mercat_embedding_unit_vectors(emb, xyz, N * 3) != MERCAT_STATUS_OK) return 1;
    for (int i = 0; i < N; i++) {
        double r = xyz[3 * i] * xyz[3 * i] + xyz[3 * i + 1] * xyz[3 * i + 1] + xyz[3 * i + 2] * xyz[3 * i + 2];
        if (fabs(r - 1.0) > 1e-12) return 2;
    }
    if (mercat_embedding_trace_len(emb) != 20) return 3;
    if (mercat_fit(NULL, &opts, &emb) != MERCAT_STATUS_NULL_POINTER || mercat_last_error() == NULL) return 4;
    printf("ok %s %zu\n", mercat_version(), mercat_embedding_len(emb));
    mercat_embedding_free(emb);
    mercat_data_free(data);
    return 0;
}
