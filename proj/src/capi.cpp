#include "certiprob/certiprob.h"

#include <algorithm>
#include <array>
#include <cstdlib>
#include <cstring>
#include <new>
#include <string>
#include <vector>

#include "certiprob/checkpoint.hpp"
#include "certiprob/dataio.hpp"
#include "certiprob/error.hpp"
#include "certiprob/model.hpp"
#include "certiprob/runner.hpp"
#include "certiprob/seqstat.hpp"

struct cp_model {
  certiprob::Checkpoint ckpt;
};

struct cp_dataset {
  certiprob::Dataset data;
};

namespace {

thread_local std::string g_last_error;

cp_status status_for(certiprob::ErrorCode code) {
  using certiprob::ErrorCode;
  switch (code) {
    case ErrorCode::kInvalidArgument: return CP_ERR_INVALID_ARGUMENT;
    case ErrorCode::kShapeMismatch: return CP_ERR_SHAPE;
    case ErrorCode::kIo: return CP_ERR_IO;
    case ErrorCode::kFormat: return CP_ERR_FORMAT;
    case ErrorCode::kConfig: return CP_ERR_CONFIG;
    case ErrorCode::kNumeric: return CP_ERR_NUMERIC;
    case ErrorCode::kState: return CP_ERR_STATE;
  }
  return CP_ERR_INTERNAL;
}

template <class F>
cp_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return CP_OK;
  } catch (const certiprob::Error& e) {
    g_last_error = e.what();
    return status_for(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  }
  return CP_ERR_INTERNAL;
}

void need(const void* p, const char* name) {
  certiprob::require(p != nullptr, certiprob::ErrorCode::kInvalidArgument, std::string(name) + " is null");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

certiprob::RunOptions to_options(const cp_run_options* o) {
  need(o, "options");
  certiprob::RunOptions r;
  if (o->config_path) r.config_path = o->config_path;
  if (o->out_dir) r.out = o->out_dir;
  if (o->checkpoint) r.checkpoint = o->checkpoint;
  if (o->data_root) r.data_root = o->data_root;
  if (o->has_seed) r.seed = o->seed;
  if (o->workers) r.workers = o->workers;
  return r;
}

}  // namespace

extern "C" {

const char* cp_last_error(void) { return g_last_error.c_str(); }
const char* cp_version(void) { return certiprob::kVersion; }
void cp_string_free(char* s) { std::free(s); }

cp_status cp_binom_tail_right(uint64_t v, uint64_t w, double p0, double* out) {
  return guarded([&] {
    need(out, "out");
    *out = certiprob::binom_tail_right(v, w, p0);
  });
}

cp_status cp_binom_tail_left(uint64_t v, uint64_t w, double p0, double* out) {
  return guarded([&] {
    need(out, "out");
    *out = certiprob::binom_tail_left(v, w, p0);
  });
}

cp_status cp_dataset_load_idx(const char* images_path, const char* labels_path, cp_dataset** out) {
  return guarded([&] {
    need(images_path, "images_path");
    need(labels_path, "labels_path");
    need(out, "out");
    *out = new cp_dataset{certiprob::load_idx(images_path, labels_path)};
  });
}

cp_status cp_dataset_blobs(size_t n_per_class, const double* centers_xy, size_t center_count, double spread,
                           uint64_t seed, cp_dataset** out) {
  return guarded([&] {
    need(centers_xy, "centers_xy");
    need(out, "out");
    std::vector<std::array<double, 2>> centers(center_count);
    for (size_t i = 0; i < center_count; ++i) centers[i] = {centers_xy[2 * i], centers_xy[2 * i + 1]};
    *out = new cp_dataset{certiprob::make_blobs(n_per_class, centers, spread, seed)};
  });
}

size_t cp_dataset_size(const cp_dataset* ds) { return ds ? ds->data.size() : 0; }

size_t cp_dataset_sample_numel(const cp_dataset* ds) {
  return ds ? certiprob::shape_numel(ds->data.sample_shape()) : 0;
}

void cp_dataset_free(cp_dataset* ds) { delete ds; }

cp_status cp_model_load(const char* checkpoint_path, cp_model** out) {
  return guarded([&] {
    need(checkpoint_path, "checkpoint_path");
    need(out, "out");
    *out = new cp_model{certiprob::load_checkpoint(checkpoint_path)};
  });
}

cp_status cp_model_save(const cp_model* model, const char* checkpoint_path) {
  return guarded([&] {
    need(model, "model");
    need(checkpoint_path, "checkpoint_path");
    certiprob::save_checkpoint(checkpoint_path, model->ckpt);
  });
}

size_t cp_model_class_count(const cp_model* model) { return model ? model->ckpt.spec.class_count : 0; }

cp_status cp_model_spec_json(const cp_model* model, char** out) {
  return guarded([&] {
    need(model, "model");
    need(out, "out");
    *out = dup_string(model->ckpt.spec.to_json());
  });
}

cp_status cp_model_predict(const cp_model* model, const double* inputs, size_t count, int* classes) {
  return guarded([&] {
    need(model, "model");
    need(inputs, "inputs");
    need(classes, "classes");
    if (count == 0) return;
    certiprob::Shape shape{count};
    for (size_t d : model->ckpt.spec.input_shape) shape.push_back(d);
    const size_t n = certiprob::shape_numel(shape);
    certiprob::Tensor batch(shape, std::vector<double>(inputs, inputs + n));
    const auto pred = certiprob::predict(model->ckpt.spec, model->ckpt.params, batch);
    std::copy(pred.begin(), pred.end(), classes);
  });
}

void cp_model_free(cp_model* model) { delete model; }

cp_status cp_run_train(const cp_run_options* opts) {
  return guarded([&] { certiprob::cmd_train(certiprob::resolve_config(to_options(opts))); });
}

cp_status cp_run_certify(const cp_run_options* opts) {
  return guarded([&] {
    const auto o = to_options(opts);
    const auto c = certiprob::resolve_config(o);
    certiprob::cmd_certify(c, o.checkpoint);
  });
}

cp_status cp_run_attack(const cp_run_options* opts) {
  return guarded([&] {
    const auto o = to_options(opts);
    const auto c = certiprob::resolve_config(o);
    certiprob::cmd_attack(c, o.checkpoint);
  });
}

cp_status cp_run_eval(const cp_run_options* opts) {
  return guarded([&] {
    const auto o = to_options(opts);
    const auto c = certiprob::resolve_config(o);
    certiprob::cmd_eval(c, o.checkpoint);
  });
}

cp_status cp_run_report(const cp_run_options* opts, char** text) {
  return guarded([&] {
    need(opts, "options");
    need(opts->out_dir, "out_dir");
    need(text, "text");
    *text = dup_string(certiprob::cmd_report(opts->out_dir));
  });
}

cp_status cp_config_reference(char** text) {
  return guarded([&] {
    need(text, "text");
    *text = dup_string(certiprob::config_reference());
  });
}

}  // extern "C"
