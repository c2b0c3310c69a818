#ifndef WENTZELL_WENTZELL_H
#define WENTZELL_WENTZELL_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(WZ_BUILDING_LIBRARY)
#    define WZ_API __declspec(dllexport)
#  else
#    define WZ_API __declspec(dllimport)
#  endif
#else
#  define WZ_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. Every function returning wz_status leaves a message for
 * wz_last_error() on failure; the message is per thread. */
typedef enum wz_status {
    WZ_OK = 0,
    WZ_ERR_ARGUMENT = 1,
    WZ_ERR_DIMENSION = 2,
    WZ_ERR_CONFIG = 3,
    WZ_ERR_NUMERIC = 4,
    WZ_ERR_UNSUPPORTED = 5,
    WZ_ERR_MEASURE_CONDITION = 6,
    WZ_ERR_ASSERTION = 7,
    WZ_ERR_IO = 8,
    WZ_ERR_INTERNAL = 9
} wz_status;

typedef struct wz_config wz_config;  /* validated experiment configuration */
typedef struct wz_record wz_record;  /* result of one command */
typedef struct wz_system wz_system;  /* operator spectrum and modal system */

WZ_API const char* wz_version(void);
WZ_API const char* wz_last_error(void);
WZ_API const char* wz_status_name(wz_status status);
/* Process exit code for a status: 0 ok, 2 config/usage, 3 numeric,
 * 4 assertion, 5 measure-condition or unsupported, 1 otherwise. */
WZ_API int wz_exit_code(wz_status status);

WZ_API wz_status wz_config_default(wz_config** out);
WZ_API wz_status wz_config_load(const char* path, wz_config** out);
WZ_API wz_status wz_config_parse(const char* yaml_text, wz_config** out);
WZ_API wz_status wz_config_set_seed(wz_config* cfg, uint64_t seed);
WZ_API wz_status wz_config_set_paths(wz_config* cfg, int paths);
/* Borrowed string valid until the config changes or is freed. */
WZ_API const char* wz_config_digest(const wz_config* cfg);
WZ_API uint64_t wz_config_seed(const wz_config* cfg);
WZ_API void wz_config_free(wz_config* cfg);

/* Names of the available commands; index in [0, wz_command_count()). */
WZ_API size_t wz_command_count(void);
WZ_API const char* wz_command_name(size_t index);

/* Runs a command, writing outputs into out_dir. *out may be NULL. */
WZ_API wz_status wz_run(const wz_config* cfg, const char* command, const char* out_dir, wz_record** out);
WZ_API const char* wz_record_command(const wz_record* rec);
WZ_API const char* wz_record_json(const wz_record* rec);
WZ_API size_t wz_record_scalar_count(const wz_record* rec);
WZ_API const char* wz_record_scalar_name(const wz_record* rec, size_t index);
WZ_API wz_status wz_record_scalar(const wz_record* rec, const char* name, double* value);
WZ_API size_t wz_record_output_count(const wz_record* rec);
WZ_API const char* wz_record_output(const wz_record* rec, size_t index);
WZ_API void wz_record_free(wz_record* rec);

/* Spectrum of the configured operator with the first `modes` modes retained. */
WZ_API wz_status wz_system_create(const wz_config* cfg, int modes, wz_system** out);
WZ_API int wz_system_modes(const wz_system* sys);
/* Copies min(capacity, modes) eigenvalues; *count receives the number copied. */
WZ_API wz_status wz_system_eigenvalues(const wz_system* sys, double* values, size_t capacity, size_t* count);
/* Spectral inequality constant for the window {lambda_j <= r}. */
WZ_API wz_status wz_system_kappa(const wz_system* sys, double r, double* kappa);
/* Adjoint state at time t from terminal mode coefficients (length modes). */
WZ_API wz_status wz_system_adjoint(const wz_system* sys, const double* terminal, double t, double* out);
WZ_API void wz_system_free(wz_system* sys);

#ifdef __cplusplus
}
#endif

#endif
