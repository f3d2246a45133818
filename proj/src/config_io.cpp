#include "sgs/config_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace sgs {

namespace {

std::string trim(const std::string& s) {
  const size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

TrainConfig parse_train_config(const std::string& text, const std::string& origin) {
  TrainConfig c;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(origin + ":" + std::to_string(line_no) +
                               ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "warmup_iters") c.warmup_iters = std::stoi(value);
      else if (key == "total_iters") c.total_iters = std::stoi(value);
      else if (key == "mc_samples") c.mc_samples = std::stoi(value);
      else if (key == "sh_degree") c.sh_degree = std::stoi(value);
      else if (key == "sparsification_bins") c.sparsification_bins = std::stoi(value);
      else if (key == "seed") c.seed = std::stoull(value);
      else if (key == "prior_sqrt_variance") c.prior_sqrt_variance = std::stod(value);
      else if (key == "lambda_ssim") c.weights.lambda_ssim = std::stod(value);
      else if (key == "lambda_kl") c.weights.lambda_kl = std::stod(value);
      else if (key == "lambda_ause") c.weights.lambda_ause = std::stod(value);
      else if (key == "lr_mean") c.lr.mean = std::stod(value);
      else if (key == "lr_sh") c.lr.sh = std::stod(value);
      else if (key == "lr_opacity") c.lr.opacity = std::stod(value);
      else if (key == "lr_scale") c.lr.scale = std::stod(value);
      else if (key == "lr_rotation") c.lr.rotation = std::stod(value);
      else if (key == "lr_posterior") c.lr.posterior = std::stod(value);
      else if (key == "densify_start") c.densify.start = std::stoi(value);
      else if (key == "densify_until") c.densify.until = std::stoi(value);
      else if (key == "densify_interval") c.densify.interval = std::stoi(value);
      else if (key == "densify_grad_threshold") c.densify.grad_threshold = std::stod(value);
      else if (key == "prune_opacity") c.densify.prune_opacity = std::stod(value);
      else if (key == "clone_scale_max") c.densify.clone_scale_max = std::stod(value);
      else if (key == "split_factor") c.densify.split_factor = std::stod(value);
      else if (key == "footprint_sigma") c.render.footprint_sigma = std::stod(value);
      else if (key == "contribution_cull") c.render.contribution_cull = (value == "true" || value == "1");
      else
        throw std::runtime_error("unknown key \"" + key + "\"");
    } catch (const std::invalid_argument&) {
      throw std::runtime_error(origin + ":" + std::to_string(line_no) + ": bad value for " + key);
    }
  }
  return c;
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_train_config: cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_train_config(buffer.str(), path);
}

void save_train_config(const std::string& path, const TrainConfig& c) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_train_config: cannot open " + path);
  char buf[128];
  auto put_int = [&](const char* key, long long v) {
    std::snprintf(buf, sizeof(buf), "%s = %lld\n", key, v);
    out << buf;
  };
  auto put_f = [&](const char* key, double v) {
    std::snprintf(buf, sizeof(buf), "%s = %.17g\n", key, v);
    out << buf;
  };
  put_int("warmup_iters", c.warmup_iters);
  put_int("total_iters", c.total_iters);
  put_int("mc_samples", c.mc_samples);
  put_int("sh_degree", c.sh_degree);
  put_int("sparsification_bins", c.sparsification_bins);
  put_int("seed", static_cast<long long>(c.seed));
  put_f("prior_sqrt_variance", c.prior_sqrt_variance);
  put_f("lambda_ssim", c.weights.lambda_ssim);
  put_f("lambda_kl", c.weights.lambda_kl);
  put_f("lambda_ause", c.weights.lambda_ause);
  put_f("lr_mean", c.lr.mean);
  put_f("lr_sh", c.lr.sh);
  put_f("lr_opacity", c.lr.opacity);
  put_f("lr_scale", c.lr.scale);
  put_f("lr_rotation", c.lr.rotation);
  put_f("lr_posterior", c.lr.posterior);
  put_int("densify_start", c.densify.start);
  put_int("densify_until", c.densify.until);
  put_int("densify_interval", c.densify.interval);
  put_f("densify_grad_threshold", c.densify.grad_threshold);
  put_f("prune_opacity", c.densify.prune_opacity);
  put_f("clone_scale_max", c.densify.clone_scale_max);
  put_f("split_factor", c.densify.split_factor);
  put_f("footprint_sigma", c.render.footprint_sigma);
  out << "contribution_cull = " << (c.render.contribution_cull ? "true" : "false") << "\n";
}

}  // namespace sgs
