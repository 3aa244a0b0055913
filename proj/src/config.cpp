#include "xreid/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "xreid/tensor.hpp"

namespace xreid {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

int parse_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const int r = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: key '" + key + "' expects an integer, got '" + v + "'");
  }
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: key '" + key + "' expects a number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("config: key '" + key + "' expects true/false, got '" + v + "'");
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    // stoull would accept a sign and wrap; a negative seed is a config error.
    if (!v.empty() && (v[0] == '-' || v[0] == '+')) throw std::invalid_argument(v);
    const unsigned long long r = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return static_cast<uint64_t>(r);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: key '" + key + "' expects a non-negative integer, got '" +
                                v + "'");
  }
}

}  // namespace

std::vector<int> parse_scales(const std::string& text) {
  std::vector<int> scales;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    scales.push_back(parse_int("mspac.scales", item));
  }
  if (scales.empty()) throw std::invalid_argument("config: mspac.scales must list at least one scale");
  for (int s : scales)
    if (s < 1) throw std::invalid_argument("config: mspac.scales entries must be >= 1");
  std::set<int> uniq(scales.begin(), scales.end());
  if (uniq.size() != scales.size())
    throw std::invalid_argument("config: mspac.scales entries must be distinct");
  // Canonical internal order is fine-to-coarse (descending part counts).
  std::sort(scales.begin(), scales.end(), std::greater<int>());
  return scales;
}

std::string scales_to_string(const std::vector<int>& scales) {
  std::string out;
  for (size_t i = 0; i < scales.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(scales[i]);
  }
  return out;
}

std::string id_mode_name(IdMode m) { return m == IdMode::kGlobal ? "global" : "part"; }

std::string center_variant_name(CenterVariant v) {
  switch (v) {
    case CenterVariant::kNone: return "none";
    case CenterVariant::kPlain: return "center";
    case CenterVariant::kMargin: return "margin";
    case CenterVariant::kExp: return "exp";
  }
  return "?";
}

std::string search_mode_name(SearchMode m) { return m == SearchMode::kAll ? "all" : "indoor"; }
std::string shot_mode_name(ShotMode m) { return m == ShotMode::kMulti ? "multi" : "single"; }

void RunConfig::apply(const std::string& key, const std::string& value) {
  if (key == "encoder.img_h") img_h = parse_int(key, value);
  else if (key == "encoder.img_w") img_w = parse_int(key, value);
  else if (key == "encoder.stem_channels") stem_channels = parse_int(key, value);
  else if (key == "encoder.trunk_channels") trunk_channels = parse_int(key, value);
  else if (key == "encoder.out_d") out_d = parse_int(key, value);
  else if (key == "encoder.embed_dim") embed_dim = parse_int(key, value);
  else if (key == "mspac.scales") scales = parse_scales(value);
  else if (key == "mspac.reduction") reduction = parse_int(key, value);
  else if (key == "mspac.spatial_kernel") spatial_kernel = parse_int(key, value);
  else if (key == "mspac.use_channel") use_channel_gate = parse_bool(key, value);
  else if (key == "mspac.use_spatial") use_spatial_gate = parse_bool(key, value);
  else if (key == "mspac.channel_pool") {
    if (value == "avg+max") channel_pool = ChannelPool::kAvgMax;
    else if (value == "avg") channel_pool = ChannelPool::kAvgOnly;
    else if (value == "max") channel_pool = ChannelPool::kMaxOnly;
    else throw std::invalid_argument("config: mspac.channel_pool expects avg+max|avg|max, got '" + value + "'");
  } else if (key == "loss.margin") margin = parse_double(key, value);
  else if (key == "loss.lambda") lambda = parse_double(key, value);
  else if (key == "loss.clamp") exponent_clamp = parse_double(key, value);
  else if (key == "loss.id_mode") {
    if (value == "global") id_mode = IdMode::kGlobal;
    else if (value == "part") id_mode = IdMode::kPart;
    else throw std::invalid_argument("config: loss.id_mode expects global|part, got '" + value + "'");
  } else if (key == "loss.variant") {
    if (value == "none") center_variant = CenterVariant::kNone;
    else if (value == "center") center_variant = CenterVariant::kPlain;
    else if (value == "margin") center_variant = CenterVariant::kMargin;
    else if (value == "exp") center_variant = CenterVariant::kExp;
    else throw std::invalid_argument("config: loss.variant expects none|center|margin|exp, got '" + value + "'");
  } else if (key == "optim.lr0") lr0 = parse_double(key, value);
  else if (key == "optim.momentum") momentum = parse_double(key, value);
  else if (key == "optim.weight_decay") weight_decay = parse_double(key, value);
  else if (key == "optim.decay_every") decay_every = parse_int(key, value);
  else if (key == "optim.decay_factor") decay_factor = parse_double(key, value);
  else if (key == "sampler.p") sampler_p = parse_int(key, value);
  else if (key == "sampler.m") sampler_m = parse_int(key, value);
  else if (key == "data.ids") data_ids = parse_int(key, value);
  else if (key == "data.per_id") data_per_id = parse_int(key, value);
  else if (key == "data.latent_dim") data_latent_dim = parse_int(key, value);
  else if (key == "data.noise_sigma") data_noise_sigma = parse_double(key, value);
  else if (key == "train.epochs") epochs = parse_int(key, value);
  else if (key == "seed") seed = parse_u64(key, value);
  else if (key == "eval.search") {
    if (value == "all") search = SearchMode::kAll;
    else if (value == "indoor") search = SearchMode::kIndoor;
    else throw std::invalid_argument("config: eval.search expects all|indoor, got '" + value + "'");
  } else if (key == "eval.shot") {
    if (value == "multi") shot = ShotMode::kMulti;
    else if (value == "single") shot = ShotMode::kSingle;
    else throw std::invalid_argument("config: eval.shot expects multi|single, got '" + value + "'");
  } else if (key == "eval.trials") eval_trials = parse_int(key, value);
  else if (key == "eval.seed") eval_seed = parse_u64(key, value);
  else throw std::invalid_argument("config: unknown key '" + key + "'");
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("config: cannot open file: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: " + path + ":" + std::to_string(lineno) +
                                  ": expected 'key = value', got '" + line + "'");
    apply(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void RunConfig::apply_overrides(const std::vector<std::string>& overrides) {
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: override '" + ov + "' must look like key=value");
    apply(trim(ov.substr(0, eq)), trim(ov.substr(eq + 1)));
  }
}

std::string config_to_text(const RunConfig& cfg) {
  std::ostringstream os;
  auto num = [](double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  os << "encoder.img_h = " << cfg.img_h << '\n';
  os << "encoder.img_w = " << cfg.img_w << '\n';
  os << "encoder.stem_channels = " << cfg.stem_channels << '\n';
  os << "encoder.trunk_channels = " << cfg.trunk_channels << '\n';
  os << "encoder.out_d = " << cfg.out_d << '\n';
  os << "encoder.embed_dim = " << cfg.embed_dim << '\n';
  os << "mspac.scales = " << scales_to_string(cfg.scales) << '\n';
  os << "mspac.reduction = " << cfg.reduction << '\n';
  os << "mspac.spatial_kernel = " << cfg.spatial_kernel << '\n';
  os << "mspac.use_channel = " << (cfg.use_channel_gate ? "true" : "false") << '\n';
  os << "mspac.use_spatial = " << (cfg.use_spatial_gate ? "true" : "false") << '\n';
  os << "mspac.channel_pool = "
     << (cfg.channel_pool == ChannelPool::kAvgMax
             ? "avg+max"
             : (cfg.channel_pool == ChannelPool::kAvgOnly ? "avg" : "max"))
     << '\n';
  os << "loss.margin = " << num(cfg.margin) << '\n';
  os << "loss.lambda = " << num(cfg.lambda) << '\n';
  os << "loss.clamp = " << num(cfg.exponent_clamp) << '\n';
  os << "loss.id_mode = " << id_mode_name(cfg.id_mode) << '\n';
  os << "loss.variant = " << center_variant_name(cfg.center_variant) << '\n';
  os << "optim.lr0 = " << num(cfg.lr0) << '\n';
  os << "optim.momentum = " << num(cfg.momentum) << '\n';
  os << "optim.weight_decay = " << num(cfg.weight_decay) << '\n';
  os << "optim.decay_every = " << cfg.decay_every << '\n';
  os << "optim.decay_factor = " << num(cfg.decay_factor) << '\n';
  os << "sampler.p = " << cfg.sampler_p << '\n';
  os << "sampler.m = " << cfg.sampler_m << '\n';
  os << "data.ids = " << cfg.data_ids << '\n';
  os << "data.per_id = " << cfg.data_per_id << '\n';
  os << "data.latent_dim = " << cfg.data_latent_dim << '\n';
  os << "data.noise_sigma = " << num(cfg.data_noise_sigma) << '\n';
  os << "train.epochs = " << cfg.epochs << '\n';
  os << "seed = " << cfg.seed << '\n';
  os << "eval.search = " << search_mode_name(cfg.search) << '\n';
  os << "eval.shot = " << shot_mode_name(cfg.shot) << '\n';
  os << "eval.trials = " << cfg.eval_trials << '\n';
  os << "eval.seed = " << cfg.eval_seed << '\n';
  return os.str();
}

void RunConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v <= 0) throw std::invalid_argument(std::string("config: ") + name + " must be positive");
  };
  positive(img_h, "encoder.img_h");
  positive(img_w, "encoder.img_w");
  positive(stem_channels, "encoder.stem_channels");
  positive(trunk_channels, "encoder.trunk_channels");
  positive(out_d, "encoder.out_d");
  positive(embed_dim, "encoder.embed_dim");
  positive(reduction, "mspac.reduction");
  positive(spatial_kernel, "mspac.spatial_kernel");
  positive(sampler_p, "sampler.p");
  positive(sampler_m, "sampler.m");
  positive(data_ids, "data.ids");
  positive(data_per_id, "data.per_id");
  positive(data_latent_dim, "data.latent_dim");
  positive(eval_trials, "eval.trials");
  positive(decay_every, "optim.decay_every");
  if (epochs < 0) throw std::invalid_argument("config: train.epochs must be >= 0");
  if (img_h % 4 != 0 || img_w % 4 != 0)
    throw std::invalid_argument("config: image extents must be divisible by 4 (two stride-2 blocks)");
  if (spatial_kernel % 2 == 0)
    throw std::invalid_argument("config: mspac.spatial_kernel must be odd (same padding)");
  if (out_d % reduction != 0)
    throw std::invalid_argument("config: encoder.out_d must be divisible by mspac.reduction");
  for (int s : scales)
    if (out_h() % s != 0)
      throw std::invalid_argument("config: backbone height " + std::to_string(out_h()) +
                                  " is not divisible by scale " + std::to_string(s));
  if (margin < 0) throw std::invalid_argument("config: loss.margin must be >= 0");
  if (lambda < 0) throw std::invalid_argument("config: loss.lambda must be >= 0");
  if (exponent_clamp <= 0) throw std::invalid_argument("config: loss.clamp must be positive");
  if (lr0 <= 0) throw std::invalid_argument("config: optim.lr0 must be positive");
  if (momentum < 0 || momentum >= 1)
    throw std::invalid_argument("config: optim.momentum must lie in [0, 1)");
  if (weight_decay < 0) throw std::invalid_argument("config: optim.weight_decay must be >= 0");
  if (decay_factor <= 0 || decay_factor > 1)
    throw std::invalid_argument("config: optim.decay_factor must lie in (0, 1]");
  if (data_noise_sigma < 0) throw std::invalid_argument("config: data.noise_sigma must be >= 0");
}

}  // namespace xreid
