#include "udehaze.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include <json.hpp>

#include "dataset.hpp"
#include "enhance.hpp"
#include "image.hpp"
#include "nets.hpp"
#include "priors.hpp"
#include "trainer.hpp"

using nlohmann::json;

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

udh_status fail(udh_status code, const std::string& msg) {
  g_last_error = msg;
  return code;
}

// Exceptions never cross the C boundary; invalid_argument maps to EINVAL and
// everything else to a runtime error.
template <class Fn>
udh_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return UDH_OK;
  } catch (const std::invalid_argument& e) {
    return fail(UDH_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::exception& e) {
    return fail(UDH_ERR_RUNTIME, e.what());
  } catch (...) {
    return fail(UDH_ERR_RUNTIME, "unknown error");
  }
}

json priors_json(const udehaze::AtmosphericLight& al) {
  return json{{"a_perc", al.a_perc},
              {"a_dcp", al.a_dcp},
              {"a_blur", al.a_blur},
              {"a_cl", al.a_cl}};
}

udehaze::EnhanceOptions parse_enhance_options(const char* options_json) {
  udehaze::EnhanceOptions opts;
  if (options_json && *options_json) {
    json doc = json::parse(options_json);
    opts.dump_intermediates = doc.value("dump_intermediates", false);
    opts.auto_resize = doc.value("resize", false);
  }
  return opts;
}

}  // namespace

struct udh_image {
  udehaze::ImageRGB img;
};

struct udh_model {
  udehaze::ModelParams params;
};

extern "C" {

const char* udh_version(void) { return "0.1.0"; }

const char* udh_last_error(void) { return g_last_error.c_str(); }

void udh_string_free(char* s) { std::free(s); }

udh_status udh_set_threads(int n) {
  return guarded([&] {
    if (n < 1) throw std::invalid_argument("thread count must be >= 1");
#ifdef _WIN32
    _putenv_s("UDEHAZE_THREADS", std::to_string(n).c_str());
#else
    setenv("UDEHAZE_THREADS", std::to_string(n).c_str(), 1);
#endif
  });
}

udh_status udh_image_load(const char* path, udh_image** out) {
  return guarded([&] {
    if (!path || !out) throw std::invalid_argument("null argument");
    *out = new udh_image{udehaze::load_image(path)};
  });
}

udh_status udh_image_create(int height, int width, const double* rgb_interleaved,
                            udh_image** out) {
  return guarded([&] {
    if (!rgb_interleaved || !out) throw std::invalid_argument("null argument");
    udehaze::ImageRGB img(height, width);
    std::memcpy(img.values.data(), rgb_interleaved, img.values.size() * sizeof(double));
    *out = new udh_image{std::move(img)};
  });
}

udh_status udh_image_save(const udh_image* img, const char* path) {
  return guarded([&] {
    if (!img || !path) throw std::invalid_argument("null argument");
    udehaze::save_image(img->img, path);
  });
}

udh_status udh_image_resize(const udh_image* img, int height, int width,
                            udh_image** out) {
  return guarded([&] {
    if (!img || !out) throw std::invalid_argument("null argument");
    *out = new udh_image{udehaze::resize_bilinear(img->img, height, width)};
  });
}

int udh_image_height(const udh_image* img) { return img ? img->img.height : -1; }

int udh_image_width(const udh_image* img) { return img ? img->img.width : -1; }

udh_status udh_image_pixels(const udh_image* img, double* out, size_t out_len) {
  return guarded([&] {
    if (!img || !out) throw std::invalid_argument("null argument");
    if (out_len != img->img.values.size()) {
      throw std::invalid_argument("buffer holds " + std::to_string(out_len) +
                                  " doubles, image needs " +
                                  std::to_string(img->img.values.size()));
    }
    std::memcpy(out, img->img.values.data(), out_len * sizeof(double));
  });
}

void udh_image_free(udh_image* img) { delete img; }

udh_status udh_inspect_image(const udh_image* img, char** json_out) {
  return guarded([&] {
    if (!img || !json_out) throw std::invalid_argument("null argument");
    const auto al = udehaze::fuse_classical(img->img, udehaze::PriorConfig{});
    *json_out = dup_string(priors_json(al).dump(2));
  });
}

udh_status udh_inspect_path(const char* path, char** json_out) {
  return guarded([&] {
    if (!path || !json_out) throw std::invalid_argument("null argument");
    const auto img = udehaze::load_image(path);
    const auto al = udehaze::fuse_classical(img, udehaze::PriorConfig{});
    *json_out = dup_string(priors_json(al).dump(2));
  });
}

udh_status udh_model_create(int base_channels, uint64_t seed, udh_model** out) {
  return guarded([&] {
    if (!out) throw std::invalid_argument("null argument");
    *out = new udh_model{udehaze::ModelParams::init(base_channels, seed)};
  });
}

udh_status udh_model_load(const char* checkpoint_path, udh_model** out) {
  return guarded([&] {
    if (!checkpoint_path || !out) throw std::invalid_argument("null argument");
    *out = new udh_model{udehaze::load_checkpoint(checkpoint_path)};
  });
}

udh_status udh_model_save(const udh_model* model, const char* checkpoint_path) {
  return guarded([&] {
    if (!model || !checkpoint_path) throw std::invalid_argument("null argument");
    udehaze::save_checkpoint(model->params, checkpoint_path, "");
  });
}

udh_status udh_model_info(const udh_model* model, char** json_out) {
  return guarded([&] {
    if (!model || !json_out) throw std::invalid_argument("null argument");
    json doc{{"base_channels", model->params.config.base_channels},
             {"param_count", model->params.parameter_count()},
             {"beta", model->params.beta->data}};
    *json_out = dup_string(doc.dump(2));
  });
}

void udh_model_free(udh_model* model) { delete model; }

udh_status udh_model_enhance(const udh_model* model, const udh_image* input,
                             udh_image** out) {
  return guarded([&] {
    if (!model || !input || !out) throw std::invalid_argument("null argument");
    auto outputs = udehaze::model_forward(model->params, input->img,
                                          udehaze::PriorConfig{});
    *out = new udh_image{udehaze::tensor_to_image(*outputs.j)};
  });
}

udh_status udh_model_enhance_path(const udh_model* model, const char* input_path,
                                  const char* output_path, const char* options_json,
                                  char** json_out) {
  return guarded([&] {
    if (!model || !input_path || !output_path) {
      throw std::invalid_argument("null argument");
    }
    const std::string meta = udehaze::enhance_file(
        model->params, input_path, output_path, parse_enhance_options(options_json));
    if (json_out) *json_out = dup_string(meta);
  });
}

udh_status udh_model_enhance_dir(const udh_model* model, const char* input_dir,
                                 const char* out_dir, const char* options_json,
                                 char** json_out) {
  return guarded([&] {
    if (!model || !input_dir || !out_dir) throw std::invalid_argument("null argument");
    const std::string meta = udehaze::enhance_directory(
        model->params, input_dir, out_dir, parse_enhance_options(options_json));
    if (json_out) *json_out = dup_string(meta);
  });
}

udh_status udh_synthesize(const char* config_json, char** report_json) {
  return guarded([&] {
    if (!config_json) throw std::invalid_argument("null config");
    json doc = json::parse(config_json);
    udehaze::SynthDatasetOptions opts;
    opts.clean_dir = doc.at("clean_dir").get<std::string>();
    opts.out_dir = doc.at("out_dir").get<std::string>();
    opts.count = doc.value("count", 0);
    opts.seed = doc.value("seed", uint64_t{0});
    opts.resize_to = doc.value("resize", 0);
    if (doc.contains("beta")) {
      auto b = doc.at("beta");
      if (!b.is_array() || b.size() != 3) {
        throw std::invalid_argument("synthesize: beta must be an array of 3 values");
      }
      for (int i = 0; i < 3; ++i) opts.params.beta_true[i] = b[i].get<double>();
      opts.fixed_beta = true;
    }
    if (doc.contains("atmos")) {
      auto a = doc.at("atmos");
      if (!a.is_array() || a.size() != 3) {
        throw std::invalid_argument("synthesize: atmos must be an array of 3 values");
      }
      for (int i = 0; i < 3; ++i) opts.params.a_true[i] = a[i].get<double>();
      opts.fixed_atmos = true;
    }
    const std::string truth = udehaze::write_synth_dataset(opts);
    if (report_json) *report_json = dup_string(truth);
  });
}

udh_status udh_train(const char* config_json, char** report_json) {
  return guarded([&] {
    if (!config_json) throw std::invalid_argument("null config");
    auto cfg = udehaze::TrainConfig::from_json(config_json);
    udehaze::TrainResult result =
        cfg.drop_term.empty() ? udehaze::train(cfg) : udehaze::ablate(cfg, cfg.drop_term);
    if (report_json) *report_json = dup_string(result.report_json());
  });
}

udh_status udh_evaluate(const char* config_json, char** report_json) {
  return guarded([&] {
    if (!config_json) throw std::invalid_argument("null config");
    json doc = json::parse(config_json);
    const std::string checkpoint = doc.at("checkpoint").get<std::string>();
    const std::string input_dir = doc.at("input_dir").get<std::string>();
    const std::string reference_dir = doc.at("reference_dir").get<std::string>();
    const int resize = doc.value("resize", 128);
    auto params = udehaze::load_checkpoint(checkpoint);
    auto report = udehaze::evaluate_dirs(params, input_dir, reference_dir, resize,
                                         udehaze::PriorConfig{});
    if (report_json) *report_json = dup_string(udehaze::metrics_report_json(report));
  });
}

}  // extern "C"
