/* Minimal C consumer: project a vector onto the simplex and run a baseline. */
#include <math.h>
#include <stdio.h>
#include "kdlab.h"

int main(int argc, char **argv) {
    double v[3] = {0.5, 1.5, -1.0};
    double w[3];
    if (kdlab_project_simplex(v, 3, w) != KDLAB_STATUS_OK) {
        fprintf(stderr, "%s\n", kdlab_last_error());
        return 1;
    }
    printf("version %s\nsimplex %.3f %.3f %.3f\n", kdlab_version(), w[0], w[1], w[2]);
    if (argc < 2) return 0;

    KdlabPanel *raw = NULL, *panel = NULL;
    KdlabTrajectory *traj = NULL;
    KdlabMetrics m;
    if (kdlab_panel_load(argv[1], argc > 2 ? argv[2] : NULL, &raw) != KDLAB_STATUS_OK ||
        kdlab_panel_normalize(raw, 1, &panel) != KDLAB_STATUS_OK ||
        kdlab_run_baseline(panel, "olmar", 0.001, &traj) != KDLAB_STATUS_OK ||
        kdlab_trajectory_metrics(traj, NULL, 0, 0.0, 252.0, &m) != KDLAB_STATUS_OK) {
        fprintf(stderr, "error: %s\n", kdlab_last_error());
        return 2;
    }
    printf("olmar total return %.6f, beta is %s\n", m.total_return, isnan(m.beta) ? "n/a" : "set");
    kdlab_trajectory_free(traj);
    kdlab_panel_free(panel);
    kdlab_panel_free(raw);
    return 0;
}
