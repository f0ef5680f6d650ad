#ifndef KDLAB_H
#define KDLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum KdlabStatus {
  KDLAB_STATUS_OK = 0,
  KDLAB_STATUS_NULL_POINTER = 1,
  KDLAB_STATUS_INVALID_ARGUMENT = 2,
  KDLAB_STATUS_IO = 3,
  KDLAB_STATUS_PARSE = 4,
  KDLAB_STATUS_VALIDATION = 5,
  KDLAB_STATUS_NUMERIC = 6,
  KDLAB_STATUS_PANIC = 7,
} KdlabStatus;

// Trained or distilled agent checkpoint.
typedef struct KdlabAgent KdlabAgent;

// Loaded market panel.
typedef struct KdlabPanel KdlabPanel;

// Portfolio value path with weights and turnover.
typedef struct KdlabTrajectory KdlabTrajectory;

// The twelve indicators; NaN where a metric is not applicable.
typedef struct KdlabMetrics {
  double total_return;
  double annualized_return;
  double sharpe;
  double max_drawdown;
  double sortino;
  double beta;
  double alpha;
  double information_ratio;
  double calmar;
  double win_rate;
  double profit_loss_ratio;
  double volatility;
} KdlabMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *kdlab_version(void);

// Message of the last failed call on this thread; empty after a successful call. The
// pointer stays valid until the next call into the library on this thread.
const char *kdlab_last_error(void);

// Load a long-format OHLCV CSV. `benchmark` may be null; otherwise that ticker is split
// out as the benchmark series.
//
// # Safety
// `path` and a non-null `benchmark` are NUL-terminated strings; `out` is writable.
enum KdlabStatus kdlab_panel_load(const char *path, const char *benchmark, struct KdlabPanel **out);

// Align, clean and rebase a panel. `forward_fill` non-zero fills gaps, zero drops assets
// with gaps. The input handle is left untouched.
//
// # Safety
// `panel` is a live handle; `out` is writable.
enum KdlabStatus kdlab_panel_normalize(const struct KdlabPanel *panel,
                                       int32_t forward_fill,
                                       struct KdlabPanel **out);

// Number of assets (0 for a null handle).
//
// # Safety
// `panel` is null or a live handle.
size_t kdlab_panel_n_assets(const struct KdlabPanel *panel);

// Number of dates (0 for a null handle).
//
// # Safety
// `panel` is null or a live handle.
size_t kdlab_panel_n_dates(const struct KdlabPanel *panel);

// Close of asset `asset` on date index `t`; NaN when out of range or missing.
//
// # Safety
// `panel` is null or a live handle.
double kdlab_panel_close(const struct KdlabPanel *panel, size_t asset, size_t t);

// # Safety
// `panel` is null or a handle not yet freed.
void kdlab_panel_free(struct KdlabPanel *panel);

// Euclidean projection of `v` onto the probability simplex, written to `out`.
//
// # Safety
// `v` and `out` point to `n` doubles.
enum KdlabStatus kdlab_project_simplex(const double *v, size_t n, double *out);

// Long-only mean-variance weights maximizing `mean·w − λ wᵀΣw`. `cov` is row-major
// `n × n`.
//
// # Safety
// `mean` and `out` point to `n` doubles, `cov` to `n * n`.
enum KdlabStatus kdlab_solve_tradeoff(const double *mean,
                                      const double *cov,
                                      size_t n,
                                      double lambda,
                                      double *out);

// Run a baseline by name (`bah`, `crp`, `bcrp`, `eg`, `pamr`, `olmar`, `markowitz`) with
// default parameters and the given proportional cost.
//
// # Safety
// `panel` is a live handle, `name` a NUL-terminated string, `out` writable.
enum KdlabStatus kdlab_run_baseline(const struct KdlabPanel *panel,
                                    const char *name,
                                    double cost_rate,
                                    struct KdlabTrajectory **out);

// Number of portfolio values (0 for a null handle).
//
// # Safety
// `traj` is null or a live handle.
size_t kdlab_trajectory_len(const struct KdlabTrajectory *traj);

// Copy the value path into `out`, which must hold exactly `kdlab_trajectory_len` doubles.
//
// # Safety
// `traj` is a live handle; `out` points to `len` writable doubles.
enum KdlabStatus kdlab_trajectory_values(const struct KdlabTrajectory *traj,
                                         double *out,
                                         size_t len);

// Copy the weights chosen at decision `t` into `out` (`n_assets` doubles).
//
// # Safety
// `traj` is a live handle; `out` points to `n_assets` writable doubles.
enum KdlabStatus kdlab_trajectory_weights(const struct KdlabTrajectory *traj,
                                          size_t t,
                                          double *out,
                                          size_t n_assets);

// Metric suite of a trajectory. `benchmark` may be null (relative metrics become NaN);
// otherwise it holds one simple return per period.
//
// # Safety
// `traj` is a live handle; a non-null `benchmark` points to `benchmark_len` doubles;
// `out` is writable.
enum KdlabStatus kdlab_trajectory_metrics(const struct KdlabTrajectory *traj,
                                          const double *benchmark,
                                          size_t benchmark_len,
                                          double risk_free,
                                          double periods_per_year,
                                          struct KdlabMetrics *out);

// # Safety
// `traj` is null or a handle not yet freed.
void kdlab_trajectory_free(struct KdlabTrajectory *traj);

// Load an agent checkpoint written by the CLI.
//
// # Safety
// `path` is a NUL-terminated string; `out` is writable.
enum KdlabStatus kdlab_agent_load(const char *path, struct KdlabAgent **out);

// Length of the state vector the actor expects (0 for a null handle).
//
// # Safety
// `agent` is null or a live handle.
size_t kdlab_agent_state_dim(const struct KdlabAgent *agent);

// Number of assets the agent allocates over (0 for a null handle).
//
// # Safety
// `agent` is null or a live handle.
size_t kdlab_agent_n_assets(const struct KdlabAgent *agent);

// Deterministic allocation for one state.
//
// # Safety
// `agent` is a live handle; `state` points to `state_len` doubles and `out` to
// `n_assets` writable doubles.
enum KdlabStatus kdlab_agent_act(const struct KdlabAgent *agent,
                                 const double *state,
                                 size_t state_len,
                                 double *out,
                                 size_t n_assets);

// Run the agent greedily over a panel with its own environment settings.
//
// # Safety
// `agent` and `panel` are live handles; `out` is writable.
enum KdlabStatus kdlab_agent_evaluate(const struct KdlabAgent *agent,
                                      const struct KdlabPanel *panel,
                                      struct KdlabTrajectory **out);

// # Safety
// `agent` is null or a handle not yet freed.
void kdlab_agent_free(struct KdlabAgent *agent);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KDLAB_H */
