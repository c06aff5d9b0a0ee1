#pragma once

#include <string>
#include <vector>

#include "nets.hpp"

namespace udehaze {

struct EnhanceOptions {
  bool dump_intermediates = false;
  // Resize inputs whose dimensions are incompatible (not divisible by 8 or
  // below the 32-pixel minimum the classical priors need) to the nearest
  // valid size. Without it incompatible inputs are an error.
  bool auto_resize = false;
  PriorConfig prior;
};

// Enhances one image file. output_path keeps the enhanced image; with
// dump_intermediates the depth map (display PPM, affinely mapped to [0,1]),
// transmission, raw radiance and raw float64 planes are written alongside it,
// plus a JSON with A, the classical prior components and beta.
// Returns that JSON (also when intermediates are not written).
std::string enhance_file(const ModelParams& params, const std::string& input_path,
                         const std::string& output_path, const EnhanceOptions& opts);

// Directory variant: every .ppm/.png in input_dir is enhanced into out_dir
// under the same filename. Images are processed by parallel workers but
// outputs depend only on the inputs. Returns a JSON array of per-image
// metadata in filename order.
std::string enhance_directory(const ModelParams& params, const std::string& input_dir,
                              const std::string& out_dir, const EnhanceOptions& opts);

}  // namespace udehaze
