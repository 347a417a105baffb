/* C interface to the adaptive DBN library.
 *
 * Every fallible call returns an adbn_status. On failure the message is
 * available from adbn_last_error() on the calling thread until the next call.
 * Handles are opaque; each *_free accepts NULL. Strings returned through
 * char** outputs are owned by the caller and released with adbn_string_free.
 */
#ifndef ADBN_ADBN_H
#define ADBN_ADBN_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define ADBN_API __declspec(dllexport)
#else
#define ADBN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum adbn_status {
  ADBN_OK = 0,
  ADBN_ERR_INVALID_ARGUMENT = 1,
  ADBN_ERR_DIMENSION = 2,
  ADBN_ERR_IO = 3,
  ADBN_ERR_FORMAT = 4,
  ADBN_ERR_CONFIG = 5,
  ADBN_ERR_NUMERIC = 6,
  ADBN_ERR_STATE = 7,
  ADBN_ERR_INTERNAL = 8
} adbn_status;

typedef struct adbn_config adbn_config;
typedef struct adbn_dataset adbn_dataset;
typedef struct adbn_model adbn_model;
typedef struct adbn_report adbn_report;

ADBN_API const char* adbn_status_name(adbn_status status);
ADBN_API const char* adbn_last_error(void);
ADBN_API const char* adbn_version(void);
ADBN_API void adbn_string_free(char* s);

/* Configuration */
ADBN_API adbn_status adbn_config_default(adbn_config** out);
ADBN_API adbn_status adbn_config_load(const char* path, adbn_config** out);
ADBN_API adbn_status adbn_config_parse(const char* json, adbn_config** out);
/* "key.path=value"; value is JSON, or a bare string */
ADBN_API adbn_status adbn_config_set(adbn_config* cfg, const char* assignment);
ADBN_API adbn_status adbn_config_get(const adbn_config* cfg, const char* key, char** out);
ADBN_API adbn_status adbn_config_dump(const adbn_config* cfg, char** out);
ADBN_API uint64_t adbn_config_seed(const adbn_config* cfg);
ADBN_API void adbn_config_free(adbn_config* cfg);

/* Datasets. labels_path NULL or empty: path is a CSV file, otherwise path and
 * labels_path are IDX image and label files. */
ADBN_API adbn_status adbn_dataset_load(const adbn_config* cfg, const char* path,
                                       const char* labels_path, adbn_dataset** out);
ADBN_API adbn_status adbn_dataset_save_csv(const adbn_dataset* data, const char* path);
ADBN_API adbn_status adbn_synth(const adbn_config* cfg, adbn_dataset** train,
                                adbn_dataset** test, adbn_report** report);
ADBN_API size_t adbn_dataset_size(const adbn_dataset* data);
ADBN_API size_t adbn_dataset_n_features(const adbn_dataset* data);
ADBN_API size_t adbn_dataset_n_classes(const adbn_dataset* data);
ADBN_API void adbn_dataset_free(adbn_dataset* data);

/* Models */
ADBN_API adbn_status adbn_pretrain(const adbn_config* cfg, const adbn_dataset* train,
                                   adbn_model** out, adbn_report** report);
ADBN_API adbn_status adbn_train_head(const adbn_config* cfg, adbn_model* model,
                                     const adbn_dataset* train, adbn_report** report);
ADBN_API adbn_status adbn_model_save(const adbn_model* model, const char* path);
ADBN_API adbn_status adbn_model_load(const char* path, adbn_model** out);
ADBN_API adbn_status adbn_model_clone(const adbn_model* model, adbn_model** out);
/* Structure events, one tab-separated record per line:
 * seq, epoch, kind, layer, neuron (or -), detail */
ADBN_API adbn_status adbn_model_events(const adbn_model* model, char** out);
ADBN_API size_t adbn_model_n_layers(const adbn_model* model);
ADBN_API size_t adbn_model_layer_width(const adbn_model* model, size_t layer);
ADBN_API size_t adbn_model_n_inputs(const adbn_model* model);
ADBN_API size_t adbn_model_n_classes(const adbn_model* model);
ADBN_API adbn_status adbn_model_predict_proba(const adbn_model* model, const double* x,
                                              size_t n_inputs, double* proba,
                                              size_t n_classes);
ADBN_API void adbn_model_free(adbn_model* model);

/* Analyses. Each produces a report with a text and a JSON rendering. */
ADBN_API adbn_status adbn_evaluate(const adbn_config* cfg, const adbn_model* model,
                                   const adbn_dataset* data, adbn_report** report);
ADBN_API adbn_status adbn_kl(const adbn_config* cfg, const adbn_model* parent,
                             const adbn_model* child, const adbn_dataset* data,
                             adbn_report** report);
/* Repairs `parent` in place. eval may be NULL (train is used). child, when
 * not NULL, receives the child model or NULL for a no-op repair. */
ADBN_API adbn_status adbn_repair(const adbn_config* cfg, adbn_model* parent,
                                 const adbn_dataset* train, const adbn_dataset* eval,
                                 adbn_model** child, adbn_report** report);
ADBN_API adbn_status adbn_trace(const adbn_config* cfg, const adbn_model* model,
                                const adbn_dataset* data, adbn_report** report);
ADBN_API adbn_status adbn_rules(const adbn_config* cfg, const adbn_model* model,
                                const adbn_dataset* data, adbn_report** report);

ADBN_API const char* adbn_report_name(const adbn_report* report);
ADBN_API const char* adbn_report_text(const adbn_report* report);
ADBN_API const char* adbn_report_json(const adbn_report* report);
ADBN_API void adbn_report_free(adbn_report* report);

/* Worker threads for parallel stages; results do not depend on the count. */
ADBN_API adbn_status adbn_set_workers(size_t workers);

#ifdef __cplusplus
}
#endif

#endif
