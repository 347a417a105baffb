#include "adbn/adbn.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include <json.hpp>

#include "adbn/archive.hpp"
#include "adbn/config.hpp"
#include "adbn/error.hpp"
#include "adbn/report.hpp"

struct adbn_config {
  adbn::RunConfig cfg;
};

struct adbn_dataset {
  adbn::Dataset data;
};

struct adbn_model {
  adbn::Dbn model;
  adbn::ArchiveMetadata metadata;
};

struct adbn_report {
  adbn::Report report;
};

namespace {

thread_local std::string g_last_error;

adbn_status status_of(adbn::ErrorKind k) {
  switch (k) {
    case adbn::ErrorKind::InvalidArgument: return ADBN_ERR_INVALID_ARGUMENT;
    case adbn::ErrorKind::Dimension: return ADBN_ERR_DIMENSION;
    case adbn::ErrorKind::Io: return ADBN_ERR_IO;
    case adbn::ErrorKind::Format: return ADBN_ERR_FORMAT;
    case adbn::ErrorKind::Config: return ADBN_ERR_CONFIG;
    case adbn::ErrorKind::Numeric: return ADBN_ERR_NUMERIC;
    case adbn::ErrorKind::State: return ADBN_ERR_STATE;
  }
  return ADBN_ERR_INTERNAL;
}

template <class F>
adbn_status guard(F&& f) {
  g_last_error.clear();
  try {
    f();
    return ADBN_OK;
  } catch (const adbn::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const nlohmann::json::exception& e) {
    g_last_error = e.what();
    return ADBN_ERR_CONFIG;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return ADBN_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return ADBN_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown exception";
    return ADBN_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (p == nullptr) adbn::raise(adbn::ErrorKind::InvalidArgument, std::string(what) + " is NULL");
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

adbn_report* wrap(adbn::Report r) { return new adbn_report{std::move(r)}; }

void emit(adbn_report** out, adbn::Report r) {
  if (out != nullptr) *out = wrap(std::move(r));
}

void apply_workers(const adbn::RunConfig& cfg) {
  adbn::set_worker_count(static_cast<unsigned>(cfg.workers));
}

std::string seed_text(std::uint64_t seed) { return std::to_string(seed); }

}  // namespace

extern "C" {

const char* adbn_status_name(adbn_status status) {
  switch (status) {
    case ADBN_OK: return "ok";
    case ADBN_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case ADBN_ERR_DIMENSION: return "dimension";
    case ADBN_ERR_IO: return "io";
    case ADBN_ERR_FORMAT: return "format";
    case ADBN_ERR_CONFIG: return "config";
    case ADBN_ERR_NUMERIC: return "numeric";
    case ADBN_ERR_STATE: return "state";
    case ADBN_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* adbn_last_error(void) { return g_last_error.c_str(); }

const char* adbn_version(void) { return "1.0.0"; }

void adbn_string_free(char* s) { std::free(s); }

adbn_status adbn_config_default(adbn_config** out) {
  return guard([&] {
    need(out, "out");
    auto* c = new adbn_config{};
    c->cfg.apply_seed();
    *out = c;
  });
}

adbn_status adbn_config_load(const char* path, adbn_config** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new adbn_config{adbn::load_config(path)};
  });
}

adbn_status adbn_config_parse(const char* json, adbn_config** out) {
  return guard([&] {
    need(json, "json");
    need(out, "out");
    *out = new adbn_config{adbn::parse_config(json)};
  });
}

adbn_status adbn_config_set(adbn_config* cfg, const char* assignment) {
  return guard([&] {
    need(cfg, "cfg");
    need(assignment, "assignment");
    adbn::apply_overrides(cfg->cfg, {assignment});
  });
}

adbn_status adbn_config_get(const adbn_config* cfg, const char* key, char** out) {
  return guard([&] {
    need(cfg, "cfg");
    need(key, "key");
    need(out, "out");
    *out = copy_string(adbn::config_value(cfg->cfg, key));
  });
}

adbn_status adbn_config_dump(const adbn_config* cfg, char** out) {
  return guard([&] {
    need(cfg, "cfg");
    need(out, "out");
    *out = copy_string(adbn::dump_config(cfg->cfg));
  });
}

uint64_t adbn_config_seed(const adbn_config* cfg) { return cfg == nullptr ? 0 : cfg->cfg.seed; }

void adbn_config_free(adbn_config* cfg) { delete cfg; }

adbn_status adbn_dataset_load(const adbn_config* cfg, const char* path, const char* labels_path,
                              adbn_dataset** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    if (labels_path != nullptr && labels_path[0] != '\0') {
      *out = new adbn_dataset{adbn::load_idx(path, labels_path)};
    } else {
      adbn::CsvSchema schema;
      if (cfg != nullptr) schema.label_column = cfg->cfg.label_column;
      *out = new adbn_dataset{adbn::load_csv(path, schema)};
    }
  });
}

adbn_status adbn_dataset_save_csv(const adbn_dataset* data, const char* path) {
  return guard([&] {
    need(data, "data");
    need(path, "path");
    adbn::save_csv(data->data, path);
  });
}

adbn_status adbn_synth(const adbn_config* cfg, adbn_dataset** train, adbn_dataset** test,
                       adbn_report** report) {
  return guard([&] {
    need(cfg, "cfg");
    need(train, "train");
    need(test, "test");
    apply_workers(cfg->cfg);
    adbn::SynthSplit split = adbn::synth_ambiguous(cfg->cfg.synth);
    adbn::Report r = adbn::synth_report(split, cfg->cfg.synth, cfg->cfg.seed);
    auto* tr = new adbn_dataset{std::move(split.train)};
    *train = tr;
    *test = new adbn_dataset{std::move(split.test)};
    emit(report, std::move(r));
  });
}

size_t adbn_dataset_size(const adbn_dataset* data) { return data == nullptr ? 0 : data->data.size(); }

size_t adbn_dataset_n_features(const adbn_dataset* data) {
  return data == nullptr ? 0 : data->data.n_features();
}

size_t adbn_dataset_n_classes(const adbn_dataset* data) {
  return data == nullptr ? 0 : data->data.n_classes();
}

void adbn_dataset_free(adbn_dataset* data) { delete data; }

adbn_status adbn_pretrain(const adbn_config* cfg, const adbn_dataset* train, adbn_model** out,
                          adbn_report** report) {
  return guard([&] {
    need(cfg, "cfg");
    need(train, "train");
    need(out, "out");
    const adbn::RunConfig& c = cfg->cfg;
    apply_workers(c);
    adbn::Dbn m = adbn::pretrain(train->data.features, train->data.n_classes(), c.structure, c.cd);
    adbn::Report r = adbn::pretrain_report(m, c.seed);
    *out = new adbn_model{std::move(m), {{"seed", seed_text(c.seed)}, {"stage", "pretrain"}}};
    emit(report, std::move(r));
  });
}

adbn_status adbn_train_head(const adbn_config* cfg, adbn_model* model, const adbn_dataset* train,
                            adbn_report** report) {
  return guard([&] {
    need(cfg, "cfg");
    need(model, "model");
    need(train, "train");
    const adbn::RunConfig& c = cfg->cfg;
    apply_workers(c);
    if (train->data.n_classes() > model->model.n_classes())
      adbn::raise(adbn::ErrorKind::Dimension, "training data has more classes than the model");
    adbn::HeadReport h =
        adbn::train_head(model->model, train->data.features, train->data.labels, c.head);
    adbn::Evaluation ev = adbn::evaluate(model->model, train->data.features, train->data.labels);
    model->metadata["stage"] = "train";
    model->metadata["seed"] = seed_text(c.seed);
    emit(report, adbn::train_report(h, ev, train->data.class_names, c.seed));
  });
}

adbn_status adbn_model_save(const adbn_model* model, const char* path) {
  return guard([&] {
    need(model, "model");
    need(path, "path");
    adbn::save_archive(path, model->model, model->metadata);
  });
}

adbn_status adbn_model_load(const char* path, adbn_model** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    adbn::ModelArchive a = adbn::load_archive(path);
    *out = new adbn_model{std::move(a.model), std::move(a.metadata)};
  });
}

adbn_status adbn_model_clone(const adbn_model* model, adbn_model** out) {
  return guard([&] {
    need(model, "model");
    need(out, "out");
    *out = new adbn_model{*model};
  });
}

adbn_status adbn_model_events(const adbn_model* model, char** out) {
  return guard([&] {
    need(model, "model");
    need(out, "out");
    *out = copy_string(model->model.events().to_lines());
  });
}

size_t adbn_model_n_layers(const adbn_model* model) {
  return model == nullptr ? 0 : model->model.n_layers();
}

size_t adbn_model_layer_width(const adbn_model* model, size_t layer) {
  if (model == nullptr || layer >= model->model.n_layers()) return 0;
  return model->model.layer(layer).n_hidden();
}

size_t adbn_model_n_inputs(const adbn_model* model) {
  return model == nullptr ? 0 : model->model.n_inputs();
}

size_t adbn_model_n_classes(const adbn_model* model) {
  return model == nullptr ? 0 : model->model.n_classes();
}

adbn_status adbn_model_predict_proba(const adbn_model* model, const double* x, size_t n_inputs,
                                     double* proba, size_t n_classes) {
  return guard([&] {
    need(model, "model");
    need(x, "x");
    need(proba, "proba");
    if (n_inputs != model->model.n_inputs() || n_classes != model->model.n_classes())
      adbn::raise(adbn::ErrorKind::Dimension, "predict_proba: buffer sizes do not match the model");
    adbn::Vector v(static_cast<Eigen::Index>(n_inputs));
    for (size_t i = 0; i < n_inputs; ++i) v[static_cast<Eigen::Index>(i)] = x[i];
    const adbn::Vector p = model->model.predict_proba(v);
    for (size_t k = 0; k < n_classes; ++k) proba[k] = p[static_cast<Eigen::Index>(k)];
  });
}

void adbn_model_free(adbn_model* model) { delete model; }

adbn_status adbn_evaluate(const adbn_config* cfg, const adbn_model* model, const adbn_dataset* data,
                          adbn_report** report) {
  return guard([&] {
    need(cfg, "cfg");
    need(model, "model");
    need(data, "data");
    need(report, "report");
    apply_workers(cfg->cfg);
    const adbn::Evaluation ev = adbn::evaluate(model->model, data->data.features, data->data.labels);
    *report = wrap(adbn::eval_report(ev, data->data.class_names, cfg->cfg.seed));
  });
}

adbn_status adbn_kl(const adbn_config* cfg, const adbn_model* parent, const adbn_model* child,
                    const adbn_dataset* data, adbn_report** report) {
  return guard([&] {
    need(cfg, "cfg");
    need(parent, "parent");
    need(child, "child");
    need(data, "data");
    need(report, "report");
    apply_workers(cfg->cfg);
    const adbn::KlReport kl =
        adbn::dataset_kl(parent->model, child->model, data->data.features, cfg->cfg.repair.theta_kl);
    *report = wrap(adbn::kl_report(kl, cfg->cfg.seed));
  });
}

adbn_status adbn_repair(const adbn_config* cfg, adbn_model* parent, const adbn_dataset* train,
                        const adbn_dataset* eval, adbn_model** child, adbn_report** report) {
  return guard([&] {
    need(cfg, "cfg");
    need(parent, "parent");
    need(train, "train");
    need(report, "report");
    const adbn::RunConfig& c = cfg->cfg;
    apply_workers(c);
    adbn::Dbn work = parent->model;
    adbn::RepairReport r = adbn::repair_pipeline(work, train->data, c.target_classes, c.repair,
                                                 eval != nullptr ? &eval->data : nullptr);
    adbn::Report text = adbn::repair_report(r, train->data.class_names, c.seed);
    adbn_model* child_handle = nullptr;
    if (child != nullptr && r.child)
      child_handle = new adbn_model{std::move(*r.child), {{"seed", seed_text(c.seed)},
                                                          {"stage", "repair-child"}}};
    parent->model = std::move(work);
    parent->metadata["stage"] = "repair";
    parent->metadata["seed"] = seed_text(c.seed);
    if (child != nullptr) *child = child_handle;
    *report = wrap(std::move(text));
  });
}

adbn_status adbn_trace(const adbn_config* cfg, const adbn_model* model, const adbn_dataset* data,
                       adbn_report** report) {
  return guard([&] {
    need(cfg, "cfg");
    need(model, "model");
    need(data, "data");
    need(report, "report");
    const std::size_t n = std::min(data->data.size(), cfg->cfg.trace_limit);
    std::vector<adbn::PathTrace> traces(n);
    std::vector<std::size_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      traces[i] = adbn::trace_path(model->model,
                                   data->data.features.row(static_cast<Eigen::Index>(i)).transpose(),
                                   cfg->cfg.repair.fine_tune.activation_threshold);
      labels[i] = data->data.labels[i];
    }
    *report = wrap(adbn::trace_report(traces, labels, cfg->cfg.seed));
  });
}

adbn_status adbn_rules(const adbn_config* cfg, const adbn_model* model, const adbn_dataset* data,
                       adbn_report** report) {
  return guard([&] {
    need(cfg, "cfg");
    need(model, "model");
    need(data, "data");
    need(report, "report");
    apply_workers(cfg->cfg);
    const adbn::RuleExtraction rx =
        adbn::extract_rules(model->model, data->data.features, cfg->cfg.rules);
    const double acc = adbn::agreement(rx.tree, data->data.features, data->data.labels);
    *report = wrap(adbn::rules_report(rx, acc, data->data.labels, cfg->cfg.seed));
  });
}

const char* adbn_report_name(const adbn_report* report) {
  return report == nullptr ? "" : report->report.name.c_str();
}

const char* adbn_report_text(const adbn_report* report) {
  return report == nullptr ? "" : report->report.text.c_str();
}

const char* adbn_report_json(const adbn_report* report) {
  return report == nullptr ? "" : report->report.json.c_str();
}

void adbn_report_free(adbn_report* report) { delete report; }

adbn_status adbn_set_workers(size_t workers) {
  return guard([&] {
    if (workers == 0) adbn::raise(adbn::ErrorKind::InvalidArgument, "workers must be >= 1");
    adbn::set_worker_count(static_cast<unsigned>(workers));
  });
}

}  // extern "C"
