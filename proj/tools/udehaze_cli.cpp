// udehaze command-line tool. All pipeline work goes through the C API in
// udehaze.h; this file only parses flags, marshals JSON configs and prints
// reports. Exit codes: 0 success, 1 usage error, 2 runtime error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "udehaze.h"

using nlohmann::json;

namespace {

int runtime_error_exit(const char* what) {
  std::cerr << "error: " << what << " (" << udh_last_error() << ")\n";
  return 2;
}

std::string take_string(char* s) {
  std::string out = s ? s : "";
  udh_string_free(s);
  return out;
}

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw CLI::ValidationError("--config", "cannot open " + path);
  json doc;
  in >> doc;
  return doc;
}

std::vector<double> parse_triple(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::string item;
  std::stringstream ss(text);
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  if (out.size() != 3) {
    throw CLI::ValidationError(flag, "expected three comma-separated values");
  }
  return out;
}

struct GlobalFlags {
  std::string config_path;
  uint64_t seed = 0;
  bool seed_set = false;
  bool quiet = false;
};

void add_global_flags(CLI::App* cmd, GlobalFlags& g) {
  cmd->add_option("--config", g.config_path, "JSON config file; flags override it");
  cmd->add_option("--seed", g.seed, "run seed")->each([&g](const std::string&) {
    g.seed_set = true;
  });
  cmd->add_flag("--quiet", g.quiet, "suppress progress output");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"udehaze: underwater image dehazing (train / enhance / inspect)"};
  app.require_subcommand(1);

  GlobalFlags g;

  // ---- synthesize ----
  auto* synth = app.add_subcommand("synthesize",
                                   "degrade clean images with the forward model");
  add_global_flags(synth, g);
  std::string clean_dir, synth_out;
  int synth_count = 0, synth_resize = 0;
  std::string beta_arg, atmos_arg;
  synth->add_option("--clean-dir", clean_dir, "directory of clean images")->required();
  synth->add_option("--out-dir", synth_out, "output dataset directory")->required();
  synth->add_option("--count", synth_count, "number of scenes")->required();
  synth->add_option("--beta", beta_arg, "fixed attenuation R,G,B (default: sampled)");
  synth->add_option("--atmos", atmos_arg, "fixed atmospheric light R,G,B");
  synth->add_option("--resize", synth_resize, "resize clean images first (0 = keep)");

  // ---- train / ablate ----
  auto add_train_flags = [&](CLI::App* cmd, json& overrides) {
    cmd->add_option_function<int>("--epochs", [&overrides](int v) { overrides["epochs"] = v; });
    cmd->add_option_function<int>("--batch-size", [&overrides](int v) { overrides["batch_size"] = v; });
    cmd->add_option_function<double>("--lr", [&overrides](double v) { overrides["lr"] = v; });
    cmd->add_option_function<double>("--weight-decay", [&overrides](double v) { overrides["weight_decay"] = v; });
    cmd->add_option_function<int>("--resize", [&overrides](int v) { overrides["resize"] = v; });
    cmd->add_option_function<double>("--val-fraction", [&overrides](double v) { overrides["val_fraction"] = v; });
    cmd->add_option_function<int>("--base-channels", [&overrides](int v) { overrides["base_channels"] = v; });
    cmd->add_option_function<int>("--max-steps", [&overrides](int v) { overrides["max_steps"] = v; });
    cmd->add_option_function<std::string>("--input", [&overrides](const std::string& v) { overrides["input_dir"] = v; });
    cmd->add_option_function<std::string>("--reference", [&overrides](const std::string& v) { overrides["reference_dir"] = v; });
    cmd->add_option_function<std::string>("--out", [&overrides](const std::string& v) { overrides["out_dir"] = v; });
    cmd->add_option_function<std::string>(
        "--lambda", [&overrides](const std::string& v) {
          std::vector<double> l;
          std::string item;
          std::stringstream ss(v);
          while (std::getline(ss, item, ',')) l.push_back(std::stod(item));
          if (l.size() != 5) throw CLI::ValidationError("--lambda", "expected 5 weights");
          overrides["lambda"] = l;
        },
        "loss weights l1,dct,fwd,a_reg,beta_reg");
  };

  auto* train_cmd = app.add_subcommand("train", "train the model on a paired dataset");
  add_global_flags(train_cmd, g);
  json train_overrides = json::object();
  add_train_flags(train_cmd, train_overrides);

  auto* ablate_cmd = app.add_subcommand("ablate", "train with one loss term removed");
  add_global_flags(ablate_cmd, g);
  json ablate_overrides = json::object();
  add_train_flags(ablate_cmd, ablate_overrides);
  std::string drop_term;
  ablate_cmd->add_option("--drop-term", drop_term,
                         "term to drop: l1, dct, fwd, a_reg, beta_reg")
      ->required();

  // ---- evaluate ----
  auto* eval_cmd = app.add_subcommand("evaluate", "PSNR/SSIM of a checkpoint on a dataset");
  add_global_flags(eval_cmd, g);
  std::string eval_ckpt, eval_input, eval_reference;
  int eval_resize = 128;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval_cmd->add_option("--input", eval_input, "degraded image directory")->required();
  eval_cmd->add_option("--reference", eval_reference, "reference image directory")->required();
  eval_cmd->add_option("--resize", eval_resize, "evaluation resolution (default 128)");

  // ---- enhance ----
  auto* enhance_cmd = app.add_subcommand("enhance", "dehaze an image or a directory");
  add_global_flags(enhance_cmd, g);
  std::string enh_ckpt, enh_input, enh_out;
  bool enh_dump = false, enh_resize = false;
  enhance_cmd->add_option("--checkpoint", enh_ckpt, "checkpoint file")->required();
  enhance_cmd->add_option("--input", enh_input, "input image or directory")->required();
  enhance_cmd->add_option("--out", enh_out, "output image or directory")->required();
  enhance_cmd->add_flag("--dump-intermediates", enh_dump,
                        "also write depth, transmission, raw radiance and metadata");
  enhance_cmd->add_flag("--resize", enh_resize,
                        "resize incompatible inputs to the nearest valid size");

  // ---- inspect ----
  auto* inspect_cmd = app.add_subcommand("inspect", "print the classical light priors");
  add_global_flags(inspect_cmd, g);
  std::string inspect_input;
  inspect_cmd->add_option("--input", inspect_input, "image to inspect")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (synth->parsed()) {
      json cfg = load_config_file(g.config_path);
      cfg["clean_dir"] = clean_dir;
      cfg["out_dir"] = synth_out;
      cfg["count"] = synth_count;
      if (g.seed_set || !cfg.contains("seed")) cfg["seed"] = g.seed;
      if (synth_resize > 0) cfg["resize"] = synth_resize;
      if (!beta_arg.empty()) cfg["beta"] = parse_triple(beta_arg, "--beta");
      if (!atmos_arg.empty()) cfg["atmos"] = parse_triple(atmos_arg, "--atmos");
      char* report = nullptr;
      if (udh_synthesize(cfg.dump().c_str(), &report) != UDH_OK) {
        return runtime_error_exit("synthesize failed");
      }
      std::cout << take_string(report) << "\n";
      return 0;
    }

    if (train_cmd->parsed() || ablate_cmd->parsed()) {
      const bool is_ablate = ablate_cmd->parsed();
      json cfg = load_config_file(g.config_path);
      cfg.update(is_ablate ? ablate_overrides : train_overrides);
      if (g.seed_set || !cfg.contains("seed")) cfg["seed"] = g.seed;
      if (g.quiet) cfg["quiet"] = true;
      if (is_ablate) cfg["drop_term"] = drop_term;
      char* report = nullptr;
      if (udh_train(cfg.dump().c_str(), &report) != UDH_OK) {
        return runtime_error_exit("training failed");
      }
      std::cout << take_string(report) << "\n";
      return 0;
    }

    if (eval_cmd->parsed()) {
      json cfg{{"checkpoint", eval_ckpt},
               {"input_dir", eval_input},
               {"reference_dir", eval_reference},
               {"resize", eval_resize}};
      char* report = nullptr;
      if (udh_evaluate(cfg.dump().c_str(), &report) != UDH_OK) {
        return runtime_error_exit("evaluation failed");
      }
      std::cout << take_string(report) << "\n";
      return 0;
    }

    if (enhance_cmd->parsed()) {
      udh_model* model = nullptr;
      if (udh_model_load(enh_ckpt.c_str(), &model) != UDH_OK) {
        return runtime_error_exit("cannot load checkpoint");
      }
      const json options{{"dump_intermediates", enh_dump}, {"resize", enh_resize}};
      char* meta = nullptr;
      udh_status rc;
      if (std::filesystem::is_directory(enh_input)) {
        rc = udh_model_enhance_dir(model, enh_input.c_str(), enh_out.c_str(),
                                   options.dump().c_str(), &meta);
      } else {
        rc = udh_model_enhance_path(model, enh_input.c_str(), enh_out.c_str(),
                                    options.dump().c_str(), &meta);
      }
      udh_model_free(model);
      if (rc != UDH_OK) return runtime_error_exit("enhancement failed");
      if (!g.quiet) std::cout << take_string(meta) << "\n";
      else udh_string_free(meta);
      return 0;
    }

    if (inspect_cmd->parsed()) {
      char* out = nullptr;
      if (udh_inspect_path(inspect_input.c_str(), &out) != UDH_OK) {
        return runtime_error_exit("inspect failed");
      }
      std::cout << take_string(out) << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
